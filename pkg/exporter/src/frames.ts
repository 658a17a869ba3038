import { spawnSync } from "node:child_process";
import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";
import { readRgb } from "./png";
import { DecodeError, RgbImage } from "./types";

/**
 * Uniform access to sampled frames, whether the input is a directory of
 * PNG frames (already at the target rate) or a video file decoded
 * through ffmpeg at `fps`.
 */
export interface FrameSource {
  count: number;
  frame(index: number): RgbImage;
}

class DirectorySource implements FrameSource {
  private files: string[];
  count: number;

  constructor(dir: string) {
    this.files = fs
      .readdirSync(dir)
      .filter((f) => f.toLowerCase().endsWith(".png"))
      .sort()
      .map((f) => path.join(dir, f));
    if (this.files.length === 0) {
      throw new DecodeError(`no PNG frames found in ${dir}`);
    }
    this.count = this.files.length;
  }

  frame(index: number): RgbImage {
    return readRgb(this.files[index]);
  }
}

class VideoSource implements FrameSource {
  private inner: DirectorySource;
  count: number;

  constructor(videoPath: string, fps: number) {
    const probe = spawnSync("ffmpeg", ["-version"], { stdio: "ignore" });
    if (probe.error || probe.status !== 0) {
      throw new DecodeError(
        "ffmpeg not found on PATH; decode the video yourself and pass a frame directory"
      );
    }
    const workDir = fs.mkdtempSync(path.join(os.tmpdir(), "mask-export-"));
    const result = spawnSync(
      "ffmpeg",
      ["-i", videoPath, "-vf", `fps=${fps}`, "-start_number", "0",
       path.join(workDir, "frame_%06d.png")],
      { stdio: "ignore" }
    );
    if (result.status !== 0) {
      throw new DecodeError(`ffmpeg failed to decode ${videoPath}`);
    }
    this.inner = new DirectorySource(workDir);
    this.count = this.inner.count;
  }

  frame(index: number): RgbImage {
    return this.inner.frame(index);
  }
}

export function openFrames(video: string, fps: number): FrameSource {
  const stat = fs.statSync(video, { throwIfNoEntry: false });
  if (!stat) {
    throw new DecodeError(`input not found: ${video}`);
  }
  return stat.isDirectory() ? new DirectorySource(video) : new VideoSource(video, fps);
}
