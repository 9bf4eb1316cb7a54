/**
 * Wire types for the pdqeval service. Everything is parallel flat arrays so
 * the boundary stays copy-friendly and language-neutral.
 */

/** Flat batch of frames, detections, and ground truths. */
export interface FlatFrameBatch {
  /** Number of classes C; label probabilities come in blocks of C. */
  num_classes: number;
  /** Per-frame pixel dimensions; frame index i refers to these arrays. */
  frame_widths: number[];
  frame_heights: number[];
  /** Optional string ids per frame; defaults to "0", "1", ... server-side. */
  frame_ids?: string[] | null;
  /** Owning frame index per detection. */
  det_frame: number[];
  /** C label probabilities per detection, concatenated. */
  det_label_probs: number[];
  /** [x1, y1, x2, y2] per detection, concatenated. */
  det_boxes: number[];
  /**
   * 8 covariance entries per detection: top-left corner 2x2 row-major,
   * then bottom-right. Omit (or null) for crisp boxes.
   */
  det_covars?: number[] | null;
  /** Owning frame index per ground truth. */
  gt_frame: number[];
  /** Class id per ground truth. */
  gt_classes: number[];
  /** [x1, y1, x2, y2] per ground truth; omit to derive from the mask. */
  gt_boxes?: number[] | null;
  /**
   * Run-length-encoded masks, concatenated, with CSR-style offsets:
   * ground truth j owns runs[offsets[j] .. offsets[j+1]). Runs are
   * row-major over the full frame and alternate background/foreground
   * starting with background.
   */
  gt_rle_runs: number[];
  gt_rle_offsets?: number[] | null;
}

/** Dataset-level evaluation result. */
export interface EvaluationReport {
  pdq: number;
  apdq: number;
  avg_spatial: number;
  avg_label: number;
  tp: number;
  fp: number;
  fn: number;
}

/**
 * Post-processing configuration; keys mirror the engine's config file.
 * Unknown keys are rejected by the service.
 */
export interface PostProcessOptions {
  score_threshold?: number;
  set_scores_to_one?: boolean;
  recover?: boolean;
  recover_iou_threshold?: number;
  recover_score_floor?: number;
  shrink_factor?: number;
  /** "fixed:7.5" or "fraction:0.3" */
  cov_mode?: string;
  cov_entries?: "variance" | "stddev";
}

export interface VersionInfo {
  name: string;
  version: string;
}
