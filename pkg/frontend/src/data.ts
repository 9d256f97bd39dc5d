/** Dataset loading: images plus pixel-pair affinity labels produced by the
 * superpixel toolkit (`spxrefine synth` writes affinity/<stem>.fmap with
 * channel 0 = same-segment label for the right-neighbor pair and channel 1
 * for the down-neighbor pair; the last column/row are padding). */

import { readFileSync } from 'fs'
import { join } from 'path'

import { readFmap } from './fmap.js'
import { readPng } from './png.js'

export interface Sample {
  stem: string
  imagePath: string
  /** [H,W,3] in [0,1], flattened channel-fastest */
  image: Float32Array
  /** [H,W,2] binary affinity labels, flattened channel-fastest */
  affinity: Float32Array
  height: number
  width: number
}

export interface Dataset {
  root: string
  samples: Sample[]
  height: number
  width: number
}

export function stemOf(relPath: string): string {
  const base = relPath.split('/').pop()!
  return base.replace(/\.[^.]+$/, '')
}

export function loadDataset(root: string): Dataset {
  const manifest = JSON.parse(readFileSync(join(root, 'manifest.json'), 'utf-8'))
  const samples: Sample[] = []
  for (const entry of manifest.images) {
    if (!entry.affinity) {
      throw new Error(`dataset entry ${entry.image} has no affinity labels`)
    }
    const imagePath = join(root, entry.image)
    const img = readPng(imagePath)
    const aff = readFmap(join(root, entry.affinity))
    if (aff.height !== img.height || aff.width !== img.width || aff.dim !== 2) {
      throw new Error(`affinity labels for ${entry.image} do not match the image`)
    }
    samples.push({
      stem: stemOf(entry.image),
      imagePath,
      image: img.data,
      affinity: aff.data,
      height: img.height,
      width: img.width,
    })
  }
  if (samples.length === 0) throw new Error(`empty dataset under ${root}`)
  const { height, width } = samples[0]
  for (const s of samples) {
    if (s.height !== height || s.width !== width) {
      throw new Error('training expects uniformly sized images')
    }
  }
  return { root, samples, height, width }
}
