import { spawnSync } from "node:child_process";
import * as fs from "node:fs";
import {
  CheckpointMissing,
  Mask,
  PromptError,
  PromptSpec,
  RgbImage,
  Structure,
} from "./types";

export interface Tracker {
  /** segment one structure on one frame, using the given prompt */
  segment(frame: RgbImage, prompt: PromptSpec): Mask;
}

/**
 * Prompts sorted by keyframe; a frame uses the latest prompt at or
 * before it, so a corrective prompt at frame K re-propagates everything
 * from K onward.
 */
export function promptForFrame(prompts: PromptSpec[], frameIndex: number): PromptSpec {
  const sorted = [...prompts].sort((a, b) => a.keyframe - b.keyframe);
  let chosen = sorted[0];
  for (const p of sorted) {
    if (p.keyframe <= frameIndex) chosen = p;
  }
  return chosen;
}

export function validatePrompts(
  prompts: PromptSpec[],
  width: number,
  height: number
): void {
  if (prompts.length === 0) {
    throw new PromptError("prompt file contains no prompts");
  }
  for (const p of prompts) {
    if (p.structure !== "pupil" && p.structure !== "iris") {
      throw new PromptError(`unknown structure '${p.structure}'`);
    }
    if (!p.positive_points || p.positive_points.length < 1) {
      throw new PromptError(`${p.structure}@${p.keyframe}: needs at least one positive point`);
    }
    for (const [x, y] of [...p.positive_points, ...(p.negative_points ?? [])]) {
      if (x < 0 || y < 0 || x >= width || y >= height) {
        throw new PromptError(
          `${p.structure}@${p.keyframe}: point (${x},${y}) outside ${width}x${height}`
        );
      }
    }
  }
}

function colorAt(frame: RgbImage, x: number, y: number): [number, number, number] {
  const i = (y * frame.width + x) * 3;
  return [frame.data[i], frame.data[i + 1], frame.data[i + 2]];
}

function meanColor(frame: RgbImage, points: [number, number][]): [number, number, number] {
  let r = 0, g = 0, b = 0;
  for (const [x, y] of points) {
    const [cr, cg, cb] = colorAt(frame, Math.round(x), Math.round(y));
    r += cr; g += cg; b += cb;
  }
  const n = points.length;
  return [r / n, g / n, b / n];
}

function dist2(a: [number, number, number], b: [number, number, number]): number {
  const dr = a[0] - b[0], dg = a[1] - b[1], db = a[2] - b[2];
  return dr * dr + dg * dg + db * db;
}

/**
 * Built-in deterministic tracker: 4-connected flood fill from the
 * positive points over pixels whose color stays within `tolerance` of
 * the positive seed color (and closer to it than to the negative seed
 * color, when negative points are given).  Good enough to follow
 * high-contrast anatomy; "inaccurate" stretches are what corrective
 * prompts are for.
 */
export class RegionGrowTracker implements Tracker {
  constructor(private tolerance: number = 60) {}

  segment(frame: RgbImage, prompt: PromptSpec): Mask {
    const { width, height } = frame;
    const seed = meanColor(frame, prompt.positive_points);
    const negative =
      prompt.negative_points && prompt.negative_points.length > 0
        ? meanColor(frame, prompt.negative_points)
        : null;
    const tol2 = this.tolerance * this.tolerance;

    const mask = Buffer.alloc(width * height);
    const queue: number[] = [];
    for (const [px, py] of prompt.positive_points) {
      const x = Math.round(px), y = Math.round(py);
      const idx = y * width + x;
      if (!mask[idx]) {
        mask[idx] = 255;
        queue.push(idx);
      }
    }

    const accepts = (idx: number): boolean => {
      const c: [number, number, number] = [
        frame.data[idx * 3], frame.data[idx * 3 + 1], frame.data[idx * 3 + 2],
      ];
      const toSeed = dist2(c, seed);
      if (toSeed > tol2) return false;
      return negative === null || toSeed < dist2(c, negative);
    };

    // seeds are kept even if off-color; everything else must pass the gate
    let head = 0;
    while (head < queue.length) {
      const idx = queue[head++];
      const x = idx % width;
      const y = (idx - x) / width;
      const neighbors = [
        x > 0 ? idx - 1 : -1,
        x < width - 1 ? idx + 1 : -1,
        y > 0 ? idx - width : -1,
        y < height - 1 ? idx + width : -1,
      ];
      for (const n of neighbors) {
        if (n >= 0 && !mask[n] && accepts(n)) {
          mask[n] = 255;
          queue.push(n);
        }
      }
    }
    return { width, height, data: mask };
  }
}

/**
 * Adapter for a real promptable-tracker runner (e.g. a SAM-style
 * checkpoint driven by an external script).  The runner is invoked once
 * per frame/structure and must print a mask PNG path on stdout; this
 * process stays GPU-free.
 */
export class ExternalCommandTracker implements Tracker {
  constructor(private runnerCmd: string, checkpoint: string | undefined) {
    if (!checkpoint || !fs.existsSync(checkpoint)) {
      throw new CheckpointMissing(
        `tracker checkpoint not found: ${checkpoint ?? "(not configured)"}`
      );
    }
    this.checkpoint = checkpoint;
  }

  private checkpoint: string;

  segment(_frame: RgbImage, prompt: PromptSpec): Mask {
    const result = spawnSync(
      this.runnerCmd,
      ["--checkpoint", this.checkpoint, "--structure", prompt.structure],
      { shell: true }
    );
    if (result.status !== 0) {
      throw new Error(`tracker runner failed: ${result.stderr?.toString() ?? "unknown"}`);
    }
    throw new Error("external tracker integration requires a runner that emits masks");
  }
}

export function trackStructure(
  tracker: Tracker,
  frames: { count: number; frame(i: number): RgbImage },
  prompts: PromptSpec[],
  structure: Structure
): Mask[] {
  const mine = prompts.filter((p) => p.structure === structure);
  const masks: Mask[] = [];
  for (let i = 0; i < frames.count; i++) {
    masks.push(tracker.segment(frames.frame(i), promptForFrame(mine, i)));
  }
  return masks;
}
