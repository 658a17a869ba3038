#!/usr/bin/env node
import * as fs from "node:fs";
import { parseArgs } from "node:util";
import { exportMasks } from "./exporter";
import { CheckpointMissing, DecodeError, PromptError, PromptSpec } from "./types";

const USAGE = `usage: mask-export export --video V --prompts P.json --fps 5 --out DIR
                   [--tracker region-grow|external] [--checkpoint PATH]
                   [--runner-cmd CMD] [--tolerance N]

V is a video file (requires ffmpeg on PATH) or a directory of PNG frames
already sampled at the target rate.  P.json is a JSON list of prompts:
  [{"structure": "pupil", "keyframe": 0,
    "positive_points": [[x,y],[x,y]], "negative_points": [[x,y]]}, ...]
Corrective prompts are extra entries at later keyframes; frames from a
corrective keyframe onward re-propagate from it.`;

export function main(argv: string[]): number {
  if (argv[0] !== "export") {
    console.error(USAGE);
    return 1;
  }
  let parsed;
  try {
    parsed = parseArgs({
      args: argv.slice(1),
      options: {
        video: { type: "string" },
        prompts: { type: "string" },
        fps: { type: "string", default: "5" },
        out: { type: "string" },
        tracker: { type: "string", default: "region-grow" },
        checkpoint: { type: "string" },
        "runner-cmd": { type: "string" },
        tolerance: { type: "string", default: "60" },
      },
    });
  } catch (err) {
    console.error(String(err));
    console.error(USAGE);
    return 1;
  }
  const values = parsed.values;
  if (!values.video || !values.prompts || !values.out) {
    console.error(USAGE);
    return 1;
  }
  if (values.tracker !== "region-grow" && values.tracker !== "external") {
    console.error(`unknown tracker '${values.tracker}'`);
    return 1;
  }

  try {
    const prompts = JSON.parse(fs.readFileSync(values.prompts, "utf-8")) as PromptSpec[];
    const manifestPath = exportMasks({
      video: values.video,
      prompts,
      fps: Number(values.fps),
      outDir: values.out,
      tracker: values.tracker,
      checkpoint: values.checkpoint,
      runnerCmd: values["runner-cmd"],
      tolerance: Number(values.tolerance),
    });
    console.log(`wrote ${manifestPath}`);
    return 0;
  } catch (err) {
    if (err instanceof CheckpointMissing) {
      console.error(`checkpoint: ${err.message}`);
      return 3;
    }
    if (err instanceof DecodeError || err instanceof PromptError) {
      console.error(`input: ${err.message}`);
      return 2;
    }
    throw err;
  }
}

if (require.main === module) {
  process.exit(main(process.argv.slice(2)));
}
