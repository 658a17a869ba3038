import * as fs from "node:fs";
import * as path from "node:path";
import { openFrames } from "./frames";
import { writeMask, writeRgb } from "./png";
import {
  ExternalCommandTracker,
  RegionGrowTracker,
  Tracker,
  trackStructure,
  validatePrompts,
} from "./tracker";
import { ExportOptions, Structure } from "./types";

function frameName(index: number): string {
  return `frame_${String(index).padStart(6, "0")}.png`;
}

/**
 * Sample the input at the target rate, track every prompted structure,
 * and write a bundle in the downstream pipeline's layout: frames/,
 * masks/<structure>/, and a manifest skeleton with phases left empty
 * for human completion.  Re-runs with identical inputs are
 * byte-identical.
 */
export function exportMasks(options: ExportOptions): string {
  const frames = openFrames(options.video, options.fps);
  const first = frames.frame(0);
  validatePrompts(options.prompts, first.width, first.height);

  const tracker: Tracker =
    options.tracker === "external"
      ? new ExternalCommandTracker(options.runnerCmd ?? "sam-runner", options.checkpoint)
      : new RegionGrowTracker(options.tolerance);

  const structures = [...new Set(options.prompts.map((p) => p.structure))].sort() as Structure[];

  const out = options.outDir;
  fs.mkdirSync(path.join(out, "frames"), { recursive: true });
  for (const structure of structures) {
    fs.mkdirSync(path.join(out, "masks", structure), { recursive: true });
  }

  for (let i = 0; i < frames.count; i++) {
    writeRgb(path.join(out, "frames", frameName(i)), frames.frame(i));
  }
  for (const structure of structures) {
    const masks = trackStructure(tracker, frames, options.prompts, structure);
    masks.forEach((mask, i) => {
      writeMask(path.join(out, "masks", structure, frameName(i)), mask);
    });
  }

  const maskDirs: Record<string, string> = {};
  for (const structure of structures) {
    maskDirs[structure] = `masks/${structure}`;
  }
  const manifest = {
    video_id: path.basename(out),
    fps: options.fps,
    width: first.width,
    height: first.height,
    frame_count: frames.count,
    frame_dir: "frames",
    mask_dirs: maskDirs,
    phases: [],            // expert phase annotation happens downstream
    has_frames: true,
  };
  const manifestPath = path.join(out, "manifest.json");
  fs.writeFileSync(manifestPath, JSON.stringify(manifest, null, 2) + "\n");
  return manifestPath;
}
