/**
 * Test harness: spawns the real engine (HTTP service and CLI) and converts
 * the engine's JSONL files into flat batches. The parsing here is test
 * scaffolding, deliberately independent of the engine's own loaders.
 */

import { spawn, spawnSync, type ChildProcess } from "node:child_process";
import { mkdtempSync, readFileSync, rmSync } from "node:fs";
import { createServer } from "node:net";
import { tmpdir } from "node:os";
import { join } from "node:path";

import type { FlatFrameBatch } from "../src/types.js";

const PYTHON = process.env.PDQEVAL_PYTHON ?? "python3";

export function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const srv = createServer();
    srv.listen(0, "127.0.0.1", () => {
      const addr = srv.address();
      if (addr === null || typeof addr === "string") {
        reject(new Error("could not allocate a port"));
        return;
      }
      const port = addr.port;
      srv.close(() => resolve(port));
    });
    srv.on("error", reject);
  });
}

export interface ServerHandle {
  baseUrl: string;
  stop(): void;
}

export async function startServer(): Promise<ServerHandle> {
  const port = await freePort();
  const proc: ChildProcess = spawn(
    PYTHON,
    ["-m", "pdqeval", "serve", "--host", "127.0.0.1", "--port", String(port)],
    { stdio: "ignore" }
  );
  const baseUrl = `http://127.0.0.1:${port}`;
  const deadline = Date.now() + 30_000;
  for (;;) {
    try {
      const resp = await fetch(`${baseUrl}/version`);
      if (resp.ok) break;
    } catch {
      // not up yet
    }
    if (Date.now() > deadline) {
      proc.kill("SIGKILL");
      throw new Error("pdqeval service did not come up within 30s");
    }
    await new Promise((r) => setTimeout(r, 150));
  }
  return {
    baseUrl,
    stop() {
      proc.kill("SIGTERM");
    },
  };
}

export function runCli(args: string[]): void {
  const result = spawnSync(PYTHON, ["-m", "pdqeval", ...args], {
    encoding: "utf-8",
  });
  if (result.status !== 0) {
    throw new Error(
      `pdqeval ${args.join(" ")} exited with ${result.status}:\n${result.stderr}`
    );
  }
}

export function makeTempDir(): { dir: string; cleanup(): void } {
  const dir = mkdtempSync(join(tmpdir(), "pdqclient-"));
  return { dir, cleanup: () => rmSync(dir, { recursive: true, force: true }) };
}

interface GtObject {
  class_id: number;
  bbox: number[];
  mask: { size: number[]; rle: number[] };
}

interface GtFrame {
  frame_id: string;
  width: number;
  height: number;
  objects: GtObject[];
}

interface DetEntry {
  label_probs: number[];
  bbox: number[];
  covars?: number[][][];
}

interface DetFrame {
  frame_id: string;
  detections: DetEntry[];
}

function parseLines<T>(text: string): T[] {
  return text
    .split("\n")
    .filter((line) => line.trim().length > 0)
    .map((line) => JSON.parse(line) as T);
}

export function parseGroundTruth(path: string): {
  classNames: string[];
  frames: GtFrame[];
} {
  const records = parseLines<Record<string, unknown>>(readFileSync(path, "utf-8"));
  let classNames: string[] = [];
  const frames: GtFrame[] = [];
  for (const rec of records) {
    if ("class_names" in rec && !("frame_id" in rec)) {
      classNames = rec.class_names as string[];
    } else {
      frames.push(rec as unknown as GtFrame);
    }
  }
  return { classNames, frames };
}

export function parseDetections(path: string): DetFrame[] {
  return parseLines<DetFrame>(readFileSync(path, "utf-8"));
}

/** Flatten engine files into the wire batch; frame order follows the gt file. */
export function buildBatch(gtPath: string, detPath: string): FlatFrameBatch {
  const gt = parseGroundTruth(gtPath);
  const dets = parseDetections(detPath);
  const frameIndex = new Map(gt.frames.map((f, i) => [f.frame_id, i]));

  const batch: FlatFrameBatch & {
    frame_ids: string[];
    det_covars: number[];
    gt_boxes: number[];
    gt_rle_offsets: number[];
  } = {
    num_classes: gt.classNames.length,
    frame_widths: gt.frames.map((f) => f.width),
    frame_heights: gt.frames.map((f) => f.height),
    frame_ids: gt.frames.map((f) => f.frame_id),
    det_frame: [],
    det_label_probs: [],
    det_boxes: [],
    det_covars: [],
    gt_frame: [],
    gt_classes: [],
    gt_boxes: [],
    gt_rle_runs: [],
    gt_rle_offsets: [0],
  };

  for (const frame of dets) {
    const fi = frameIndex.get(frame.frame_id);
    if (fi === undefined) throw new Error(`unknown frame ${frame.frame_id}`);
    for (const d of frame.detections) {
      batch.det_frame.push(fi);
      batch.det_label_probs.push(...d.label_probs);
      batch.det_boxes.push(...d.bbox);
      if (d.covars) {
        for (const corner of d.covars) {
          batch.det_covars.push(corner[0][0], corner[0][1], corner[1][0], corner[1][1]);
        }
      } else {
        batch.det_covars.push(0, 0, 0, 0, 0, 0, 0, 0);
      }
    }
  }
  gt.frames.forEach((frame, fi) => {
    for (const obj of frame.objects) {
      batch.gt_frame.push(fi);
      batch.gt_classes.push(obj.class_id);
      batch.gt_boxes.push(...obj.bbox);
      batch.gt_rle_runs.push(...obj.mask.rle);
      batch.gt_rle_offsets.push(batch.gt_rle_runs.length);
    }
  });
  return batch;
}

export interface CliReport {
  pdq: number;
  apdq: number;
  avg_spatial: number;
  avg_label: number;
  tp: number;
  fp: number;
  fn: number;
}

export function readReport(path: string): CliReport {
  return JSON.parse(readFileSync(path, "utf-8")) as CliReport;
}
