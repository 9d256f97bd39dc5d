/** Feature export: run the extractor on an image and write the per-pixel
 * feature vectors as an FMAP consumable by the superpixel toolkit. */

import * as tf from '@tensorflow/tfjs'

import { writeFmap } from './fmap.js'
import { Extractor } from './model.js'
import { readPng } from './png.js'

export interface ExportStats {
  height: number
  width: number
  dim: number
  /** fraction of pixels with an exactly zero feature vector (monitored) */
  zeroVectorRate: number
}

export function extractFeatures(model: Extractor, imagePath: string): { data: Float32Array; stats: ExportStats } {
  const img = readPng(imagePath)
  const input = tf.tensor4d(img.data, [1, img.height, img.width, 3])
  const out = model.forward(input)
  const data = out.dataSync() as Float32Array
  const dim = model.config.featureDim
  let zero = 0
  for (let p = 0; p < img.height * img.width; p++) {
    let allZero = true
    for (let c = 0; c < dim; c++) {
      if (data[p * dim + c] !== 0) {
        allZero = false
        break
      }
    }
    if (allZero) zero++
  }
  tf.dispose([input, out])
  return {
    data: new Float32Array(data),
    stats: {
      height: img.height,
      width: img.width,
      dim,
      zeroVectorRate: zero / (img.height * img.width),
    },
  }
}

export function exportFeatures(model: Extractor, imagePath: string, outPath: string): ExportStats {
  const { data, stats } = extractFeatures(model, imagePath)
  if (!data.every(Number.isFinite)) throw new Error('non-finite feature values')
  writeFmap({ height: stats.height, width: stats.width, dim: stats.dim, data }, outPath)
  return stats
}
