/** Extractor configuration: a 4-stage residual encoder (one block per
 * stage, output strides 4/8/16/32) and a decoder that projects every stage
 * with a 1x1 convolution, bilinearly upsamples to input resolution,
 * concatenates, and extracts the final per-pixel feature vector. */

import { readFileSync } from 'fs'

export interface ExtractorConfig {
  featureDim: number
  stemWidth: number
  stageWidths: [number, number, number, number]
  decoderWidth: number
  learningRate: number
  beta1: number
  beta2: number
  epochs: number
  batchSize: number
  seed: number
  /** cap for the per-batch reweighting of the rare different-segment pairs */
  maxBoundaryWeight: number
}

export const DEFAULT_CONFIG: ExtractorConfig = {
  featureDim: 128,
  stemWidth: 16,
  stageWidths: [16, 24, 32, 48],
  decoderWidth: 64,
  learningRate: 0.01,
  beta1: 0.9,
  beta2: 0.999,
  epochs: 8,
  batchSize: 4,
  seed: 0,
  maxBoundaryWeight: 30,
}

export function loadConfig(path?: string): ExtractorConfig {
  if (!path) return { ...DEFAULT_CONFIG }
  const raw = JSON.parse(readFileSync(path, 'utf-8'))
  return { ...DEFAULT_CONFIG, ...raw }
}

/** Deterministic seed sequence for per-layer initializers. */
export function seedSequence(seed: number): () => number {
  let state = seed >>> 0
  return () => {
    // splitmix32 step
    state = (state + 0x9e3779b9) >>> 0
    let z = state
    z = Math.imul(z ^ (z >>> 16), 0x21f0aaad)
    z = Math.imul(z ^ (z >>> 15), 0x735a2d97)
    z = (z ^ (z >>> 15)) >>> 0
    return z
  }
}

/** Seeded shuffle (Fisher-Yates with a splitmix-derived PRNG). */
export function seededShuffle<T>(items: T[], seed: number): T[] {
  const next = seedSequence(seed)
  const out = items.slice()
  for (let i = out.length - 1; i > 0; i--) {
    const j = next() % (i + 1)
    ;[out[i], out[j]] = [out[j], out[i]]
  }
  return out
}
