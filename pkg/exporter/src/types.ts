export type Structure = "pupil" | "iris";

export interface PromptSpec {
  structure: Structure;
  keyframe: number;
  /** at least one required; two is the usual setup */
  positive_points: [number, number][];
  /** typically one point placed near the periphery */
  negative_points: [number, number][];
}

export interface ExportOptions {
  /** video file (needs ffmpeg on PATH) or a directory of PNG frames */
  video: string;
  prompts: PromptSpec[];
  fps: number;
  outDir: string;
  tracker: "region-grow" | "external";
  /** external tracker only */
  checkpoint?: string;
  runnerCmd?: string;
  /** region-grow color tolerance (euclidean RGB) */
  tolerance: number;
}

export interface RgbImage {
  width: number;
  height: number;
  /** RGB, 3 bytes per pixel, row-major */
  data: Buffer;
}

/** binary mask: width*height bytes, 0 or 255 */
export interface Mask {
  width: number;
  height: number;
  data: Buffer;
}

export class CheckpointMissing extends Error {}
export class DecodeError extends Error {}
export class PromptError extends Error {}
