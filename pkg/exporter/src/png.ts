import * as fs from "node:fs";
import { PNG } from "pngjs";
import { Mask, RgbImage } from "./types";

export function readRgb(path: string): RgbImage {
  const png = PNG.sync.read(fs.readFileSync(path));
  const rgb = Buffer.alloc(png.width * png.height * 3);
  for (let i = 0; i < png.width * png.height; i++) {
    rgb[i * 3] = png.data[i * 4];
    rgb[i * 3 + 1] = png.data[i * 4 + 1];
    rgb[i * 3 + 2] = png.data[i * 4 + 2];
  }
  return { width: png.width, height: png.height, data: rgb };
}

export function writeRgb(path: string, image: RgbImage): void {
  const png = new PNG({ width: image.width, height: image.height });
  for (let i = 0; i < image.width * image.height; i++) {
    png.data[i * 4] = image.data[i * 3];
    png.data[i * 4 + 1] = image.data[i * 3 + 1];
    png.data[i * 4 + 2] = image.data[i * 3 + 2];
    png.data[i * 4 + 3] = 255;
  }
  fs.writeFileSync(path, PNG.sync.write(png, { colorType: 2 }));
}

/** 8-bit single channel, 0 background / 255 structure */
export function writeMask(path: string, mask: Mask): void {
  const png = new PNG({ width: mask.width, height: mask.height });
  for (let i = 0; i < mask.width * mask.height; i++) {
    const v = mask.data[i] ? 255 : 0;
    png.data[i * 4] = v;
    png.data[i * 4 + 1] = v;
    png.data[i * 4 + 2] = v;
    png.data[i * 4 + 3] = 255;
  }
  fs.writeFileSync(path, PNG.sync.write(png, { colorType: 0 }));
}
