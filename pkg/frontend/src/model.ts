/**
 * The feature extractor: residual encoder (one two-conv block with skip per
 * stage, stride 2 each, after a stride-2 stem) and a per-stage 1x1-conv +
 * bilinear-upsample + concat decoder with a final 1x1 feature extraction.
 *
 * Normalization is per-sample instance norm: batch-size independent, no
 * train/eval mode split, fully deterministic. Weights live in named
 * tf.Variables so checkpoints are a flat name->tensor map.
 */

import * as tf from '@tensorflow/tfjs'
import { readFileSync, writeFileSync } from 'fs'

import { ExtractorConfig, seedSequence } from './config.js'

export class Extractor {
  readonly config: ExtractorConfig
  readonly vars: Map<string, tf.Variable> = new Map()

  constructor(config: ExtractorConfig) {
    this.config = config
    const nextSeed = seedSequence(config.seed)
    const conv = (name: string, k: number, cin: number, cout: number) => {
      const init = tf.initializers.heNormal({ seed: nextSeed() })
      this.addVar(`${name}/kernel`, init.apply([k, k, cin, cout]) as tf.Tensor)
      this.addVar(`${name}/bias`, tf.zeros([cout]))
    }
    const norm = (name: string, c: number) => {
      this.addVar(`${name}/gamma`, tf.ones([c]))
      this.addVar(`${name}/beta`, tf.zeros([c]))
    }
    const block = (name: string, cin: number, cout: number) => {
      conv(`${name}/conv1`, 3, cin, cout)
      norm(`${name}/in1`, cout)
      conv(`${name}/conv2`, 3, cout, cout)
      norm(`${name}/in2`, cout)
      conv(`${name}/skip`, 1, cin, cout)
      norm(`${name}/inskip`, cout)
    }

    const [w1, w2, w3, w4] = config.stageWidths
    conv('stem/conv', 3, 3, config.stemWidth)
    norm('stem/in', config.stemWidth)
    block('stage1', config.stemWidth, w1)
    block('stage2', w1, w2)
    block('stage3', w2, w3)
    block('stage4', w3, w4)
    for (const [i, w] of [w1, w2, w3, w4].entries()) {
      conv(`decode${i + 1}/conv`, 1, w, config.decoderWidth)
      norm(`decode${i + 1}/in`, config.decoderWidth)
    }
    conv('features/conv', 1, 4 * config.decoderWidth, config.featureDim)
  }

  private addVar(name: string, value: tf.Tensor) {
    // engine-level names must be unique per process; the logical name lives
    // in the map key (checkpoints key on it)
    this.vars.set(name, tf.variable(value, true))
    value.dispose()
  }

  private v(name: string): tf.Tensor {
    const found = this.vars.get(name)
    if (!found) throw new Error(`missing variable ${name}`)
    return found
  }

  trainableVariables(): tf.Variable[] {
    return [...this.vars.values()]
  }

  private conv(name: string, x: tf.Tensor4D, stride: number): tf.Tensor4D {
    const y = tf.conv2d(x, this.v(`${name}/kernel`) as tf.Tensor4D, stride, 'same')
    return tf.add(y, this.v(`${name}/bias`)) as tf.Tensor4D
  }

  private instanceNorm(name: string, x: tf.Tensor4D): tf.Tensor4D {
    const { mean, variance } = tf.moments(x, [1, 2], true)
    const normalized = tf.div(tf.sub(x, mean), tf.sqrt(tf.add(variance, 1e-5)))
    return tf.add(tf.mul(normalized, this.v(`${name}/gamma`)), this.v(`${name}/beta`)) as tf.Tensor4D
  }

  private block(name: string, x: tf.Tensor4D): tf.Tensor4D {
    let y = tf.relu(this.instanceNorm(`${name}/in1`, this.conv(`${name}/conv1`, x, 2)))
    y = this.instanceNorm(`${name}/in2`, this.conv(`${name}/conv2`, y as tf.Tensor4D, 1))
    const skip = this.instanceNorm(`${name}/inskip`, this.conv(`${name}/skip`, x, 2))
    return tf.relu(tf.add(y, skip)) as tf.Tensor4D
  }

  /** Per-pixel features at input resolution: [B,H,W,3] -> [B,H,W,featureDim]. */
  forward(x: tf.Tensor4D): tf.Tensor4D {
    return tf.tidy(() => {
      const height = x.shape[1] as number
      const width = x.shape[2] as number
      const stem = tf.relu(this.instanceNorm('stem/in', this.conv('stem/conv', x, 2)))
      const s1 = this.block('stage1', stem as tf.Tensor4D)
      const s2 = this.block('stage2', s1)
      const s3 = this.block('stage3', s2)
      const s4 = this.block('stage4', s3)
      const ups = [s1, s2, s3, s4].map((s, i) => {
        const d = tf.relu(
          this.instanceNorm(`decode${i + 1}/in`, this.conv(`decode${i + 1}/conv`, s, 1)),
        )
        return tf.image.resizeBilinear(d as tf.Tensor4D, [height, width], false, true)
      })
      const cat = tf.concat(ups, -1) as tf.Tensor4D
      return this.conv('features/conv', cat, 1)
    })
  }

  dispose() {
    for (const v of this.vars.values()) v.dispose()
    this.vars.clear()
  }
}

export interface Checkpoint {
  config: ExtractorConfig
  weights: { name: string; shape: number[]; data: string }[]
}

export async function saveCheckpoint(model: Extractor, path: string): Promise<void> {
  const weights = []
  for (const [name, variable] of model.vars) {
    const data = Buffer.from(new Float32Array(await variable.data()).buffer).toString('base64')
    weights.push({ name, shape: variable.shape.slice(), data })
  }
  const ckpt: Checkpoint = { config: model.config, weights }
  writeFileSync(path, JSON.stringify(ckpt))
}

export function loadCheckpoint(path: string): Extractor {
  const ckpt: Checkpoint = JSON.parse(readFileSync(path, 'utf-8'))
  const model = new Extractor(ckpt.config)
  for (const { name, shape, data } of ckpt.weights) {
    const variable = model.vars.get(name)
    if (!variable) throw new Error(`checkpoint has unknown variable ${name}`)
    const buf = Buffer.from(data, 'base64')
    const aligned = Buffer.alloc(buf.length)
    buf.copy(aligned)
    const values = new Float32Array(aligned.buffer, aligned.byteOffset, aligned.byteLength / 4)
    const tensor = tf.tensor(values, shape)
    variable.assign(tensor)
    tensor.dispose()
  }
  return model
}
