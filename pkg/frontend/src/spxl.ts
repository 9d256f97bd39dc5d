/** SPXL label-map format: magic "SPXL", little-endian u32 height, width,
 * count, then height*width u32 labels row-major (dense in [0, count)). */

import { readFileSync } from 'fs'

export interface LabelMap {
  height: number
  width: number
  count: number
  labels: Uint32Array
}

export function readSpxl(path: string): LabelMap {
  const buf = readFileSync(path)
  if (buf.length < 16 || buf.toString('ascii', 0, 4) !== 'SPXL') {
    throw new Error(`bad magic in ${path}`)
  }
  const height = buf.readUInt32LE(4)
  const width = buf.readUInt32LE(8)
  const count = buf.readUInt32LE(12)
  if (buf.length - 16 !== height * width * 4) {
    throw new Error(`payload size mismatch in ${path}`)
  }
  const payload = Buffer.alloc(height * width * 4)
  buf.copy(payload, 0, 16)
  const labels = new Uint32Array(payload.buffer, payload.byteOffset, height * width)
  for (const v of labels) {
    if (v >= count) throw new Error(`invalid label map ${path}: label ${v} >= count ${count}`)
  }
  return { height, width, count, labels }
}
