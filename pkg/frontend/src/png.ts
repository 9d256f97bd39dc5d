/** PNG decoding to [0,1]-scaled RGB float arrays (8- or 16-bit inputs). */

import { readFileSync } from 'fs'
import { PNG } from 'pngjs'

export interface RgbImage {
  height: number
  width: number
  /** length height*width*3, row-major, channel-fastest, values in [0,1] */
  data: Float32Array
}

export function readPng(path: string): RgbImage {
  const png = PNG.sync.read(readFileSync(path))
  const { width, height } = png
  const out = new Float32Array(width * height * 3)
  // pngjs normalizes to 8-bit RGBA
  for (let i = 0; i < width * height; i++) {
    out[i * 3 + 0] = png.data[i * 4 + 0] / 255
    out[i * 3 + 1] = png.data[i * 4 + 1] / 255
    out[i * 3 + 2] = png.data[i * 4 + 2] / 255
  }
  return { height, width, data: out }
}

/** Mask PNG: nonzero = foreground. */
export function readMaskPng(path: string): { height: number; width: number; bits: Uint8Array } {
  const png = PNG.sync.read(readFileSync(path))
  const { width, height } = png
  const bits = new Uint8Array(width * height)
  for (let i = 0; i < width * height; i++) {
    bits[i] = png.data[i * 4] !== 0 || png.data[i * 4 + 1] !== 0 || png.data[i * 4 + 2] !== 0 ? 1 : 0
  }
  return { height, width, bits }
}
