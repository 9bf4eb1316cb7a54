import type {
  EvaluationReport,
  FlatFrameBatch,
  PostProcessOptions,
  VersionInfo,
} from "./types.js";

/** Error carrying the HTTP status and the service's detail message. */
export class PdqServiceError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
    readonly path?: string | null
  ) {
    super(`pdqeval service returned ${status}: ${detail}`);
    this.name = "PdqServiceError";
  }
}

async function readError(resp: Response): Promise<PdqServiceError> {
  let detail = resp.statusText;
  let path: string | null | undefined;
  try {
    const body = (await resp.json()) as { detail?: unknown; path?: string | null };
    if (body.detail !== undefined) detail = JSON.stringify(body.detail);
    path = body.path;
  } catch {
    // non-JSON error body; keep the status text
  }
  return new PdqServiceError(resp.status, detail, path);
}

/**
 * Thin client for a running pdqeval service.
 *
 * Exposes exactly the two engine entry points (batch evaluation and batch
 * post-processing) plus the engine version. Payloads travel as JSON
 * numbers, which round-trip IEEE doubles exactly, so results match the CLI
 * on equivalent files bit-for-bit on counts and to full double precision
 * on scores.
 */
export class PdqClient {
  private readonly base: string;

  constructor(baseUrl: string) {
    this.base = baseUrl.replace(/\/+$/, "");
  }

  private async post<T>(route: string, body: unknown): Promise<T> {
    const resp = await fetch(`${this.base}${route}`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!resp.ok) throw await readError(resp);
    return (await resp.json()) as T;
  }

  /** Engine name and version reported by the service. */
  async version(): Promise<VersionInfo> {
    const resp = await fetch(`${this.base}/version`);
    if (!resp.ok) throw await readError(resp);
    return (await resp.json()) as VersionInfo;
  }

  /** Score a batch of detections against its ground truth. */
  async evaluateBatch(batch: FlatFrameBatch): Promise<EvaluationReport> {
    return this.post<EvaluationReport>("/evaluate", batch);
  }

  /**
   * Run the post-processing pipeline on a batch. The returned batch keeps
   * the flat layout: detections grouped by ascending frame index, pipeline
   * order within each frame; ground-truth arrays pass through unchanged.
   */
  async postprocessBatch(
    batch: FlatFrameBatch,
    config: PostProcessOptions = {}
  ): Promise<FlatFrameBatch> {
    return this.post<FlatFrameBatch>("/postprocess", { batch, config });
  }
}
