/**
 * FMAP binary format: magic "FMAP", little-endian u32 height, width, dim,
 * then height*width*dim IEEE-754 float32, row-major, channel-fastest.
 * Round trips are bit-exact and interchange with the Python toolkit.
 */

import { readFileSync, writeFileSync } from 'fs'

export interface Fmap {
  height: number
  width: number
  dim: number
  /** length height*width*dim, row-major, channel-fastest */
  data: Float32Array
}

const MAGIC = 'FMAP'

export function readFmap(path: string): Fmap {
  const buf = readFileSync(path)
  if (buf.length < 16 || buf.toString('ascii', 0, 4) !== MAGIC) {
    throw new Error(`bad magic in ${path}`)
  }
  const height = buf.readUInt32LE(4)
  const width = buf.readUInt32LE(8)
  const dim = buf.readUInt32LE(12)
  const expected = height * width * dim * 4
  if (buf.length - 16 !== expected) {
    throw new Error(`payload size mismatch in ${path}: want ${expected}, got ${buf.length - 16}`)
  }
  // copy to guarantee alignment for the Float32Array view
  const payload = Buffer.alloc(expected)
  buf.copy(payload, 0, 16)
  const data = new Float32Array(payload.buffer, payload.byteOffset, height * width * dim)
  return { height, width, dim, data }
}

export function writeFmap(fm: Fmap, path: string): void {
  if (fm.data.length !== fm.height * fm.width * fm.dim) {
    throw new Error('data length does not match dimensions')
  }
  const header = Buffer.alloc(16)
  header.write(MAGIC, 0, 'ascii')
  header.writeUInt32LE(fm.height, 4)
  header.writeUInt32LE(fm.width, 8)
  header.writeUInt32LE(fm.dim, 12)
  const payload = Buffer.from(fm.data.buffer, fm.data.byteOffset, fm.data.byteLength)
  writeFileSync(path, Buffer.concat([header, payload]))
}
