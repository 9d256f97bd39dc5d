/**
 * Training: binary crossentropy between the similarity of adjacent pixels'
 * feature vectors and their same-segment label. Similarity is one minus
 * the angular (cosine) distance, so label 1 pulls neighbors colinear and
 * label 0 pushes them apart. Adam, from-scratch initialization, seeded
 * shuffling; the rare different-segment pairs are upweighted per batch to
 * balance the loss.
 */

import * as tf from '@tensorflow/tfjs'

import { ExtractorConfig, seededShuffle } from './config.js'
import { Dataset, Sample } from './data.js'
import { Extractor } from './model.js'

const COS_CLIP = 1e-6

/** 1 - acos(cos_sim)/pi along one spatial axis; shapes follow the slices. */
function pairSimilarity(f: tf.Tensor4D, axis: 'h' | 'v'): tf.Tensor3D {
  const [b, h, w] = [f.shape[0], f.shape[1] as number, f.shape[2] as number]
  const a = axis === 'h' ? f.slice([0, 0, 0, 0], [b, h, w - 1, -1]) : f.slice([0, 0, 0, 0], [b, h - 1, w, -1])
  const c = axis === 'h' ? f.slice([0, 0, 1, 0], [b, h, w - 1, -1]) : f.slice([0, 1, 0, 0], [b, h - 1, w, -1])
  const dot = tf.sum(tf.mul(a, c), -1)
  const na = tf.sqrt(tf.add(tf.sum(tf.square(a), -1), 1e-12))
  const nc = tf.sqrt(tf.add(tf.sum(tf.square(c), -1), 1e-12))
  const cos = tf.clipByValue(tf.div(dot, tf.mul(na, nc)), -1 + COS_CLIP, 1 - COS_CLIP)
  const angular = tf.div(tf.acos(cos), Math.PI)
  return tf.sub(1, angular) as tf.Tensor3D
}

function directionLoss(sim: tf.Tensor3D, labels: tf.Tensor3D, maxBoundaryWeight: number): tf.Tensor {
  const eps = 1e-7
  const bce = tf.neg(
    tf.add(
      tf.mul(labels, tf.log(tf.add(sim, eps))),
      tf.mul(tf.sub(1, labels), tf.log(tf.add(tf.sub(1, sim), eps))),
    ),
  )
  // same-segment pairs vastly outnumber boundary pairs; reweight so the
  // boundary signal is not drowned out
  const nDiff = tf.sum(tf.sub(1, labels))
  const nSame = tf.sum(labels)
  const wDiff = tf.clipByValue(tf.div(nSame, tf.add(nDiff, 1)), 1, maxBoundaryWeight)
  const weights = tf.add(tf.mul(tf.sub(1, labels), tf.sub(wDiff, 1)), 1)
  return tf.div(tf.sum(tf.mul(bce, weights)), tf.sum(weights))
}

/** Mean affinity BCE over a batch: images [B,H,W,3], labels [B,H,W,2]. */
export function affinityLoss(
  model: Extractor,
  images: tf.Tensor4D,
  labels: tf.Tensor4D,
  maxBoundaryWeight: number,
): tf.Scalar {
  return tf.tidy(() => {
    const f = model.forward(images)
    const [b, h, w] = [labels.shape[0], labels.shape[1] as number, labels.shape[2] as number]
    const labH = labels.slice([0, 0, 0, 0], [b, h, w - 1, 1]).squeeze([-1]) as tf.Tensor3D
    const labV = labels.slice([0, 0, 0, 1], [b, h - 1, w, 1]).squeeze([-1]) as tf.Tensor3D
    const lossH = directionLoss(pairSimilarity(f, 'h'), labH, maxBoundaryWeight)
    const lossV = directionLoss(pairSimilarity(f, 'v'), labV, maxBoundaryWeight)
    return tf.div(tf.add(lossH, lossV), 2) as tf.Scalar
  })
}

function toTensors(batch: Sample[]): { images: tf.Tensor4D; labels: tf.Tensor4D } {
  const h = batch[0].height
  const w = batch[0].width
  const images = new Float32Array(batch.length * h * w * 3)
  const labels = new Float32Array(batch.length * h * w * 2)
  batch.forEach((s, i) => {
    images.set(s.image, i * h * w * 3)
    labels.set(s.affinity, i * h * w * 2)
  })
  return {
    images: tf.tensor4d(images, [batch.length, h, w, 3]),
    labels: tf.tensor4d(labels, [batch.length, h, w, 2]),
  }
}

/** Dataset loss without training (used for the loss-decrease check). */
export function datasetLoss(model: Extractor, dataset: Dataset, cfg: ExtractorConfig): number {
  let total = 0
  let count = 0
  for (let start = 0; start < dataset.samples.length; start += cfg.batchSize) {
    const batch = dataset.samples.slice(start, start + cfg.batchSize)
    const { images, labels } = toTensors(batch)
    const loss = affinityLoss(model, images, labels, cfg.maxBoundaryWeight)
    total += loss.dataSync()[0] * batch.length
    count += batch.length
    tf.dispose([images, labels, loss])
  }
  return total / count
}

export interface TrainResult {
  model: Extractor
  /** mean batch loss per epoch */
  lossCurve: number[]
  /** full dataset loss before training, then after each epoch (empty when
   * the evaluation passes are turned off) */
  evalCurve: number[]
}

export interface TrainOptions {
  /** full-dataset loss before training and after every epoch (extra
   * forward passes; turn off for long runs) */
  computeEvalCurve?: boolean
  onEpoch?: (epoch: number, meanLoss: number) => void
}

export function trainExtractor(
  dataset: Dataset,
  cfg: ExtractorConfig,
  opts: TrainOptions = {},
): TrainResult {
  const withEval = opts.computeEvalCurve ?? true
  const model = new Extractor(cfg)
  const optimizer = tf.train.adam(cfg.learningRate, cfg.beta1, cfg.beta2)
  const varList = model.trainableVariables()
  const lossCurve: number[] = []
  const evalCurve: number[] = withEval ? [datasetLoss(model, dataset, cfg)] : []

  for (let epoch = 0; epoch < cfg.epochs; epoch++) {
    const order = seededShuffle(
      dataset.samples.map((_, i) => i),
      cfg.seed + 1000 * (epoch + 1),
    )
    let epochLoss = 0
    let seen = 0
    for (let start = 0; start < order.length; start += cfg.batchSize) {
      const batch = order.slice(start, start + cfg.batchSize).map((i) => dataset.samples[i])
      const { images, labels } = toTensors(batch)
      const cost = optimizer.minimize(
        () => affinityLoss(model, images, labels, cfg.maxBoundaryWeight),
        true,
        varList,
      ) as tf.Scalar
      epochLoss += cost.dataSync()[0] * batch.length
      seen += batch.length
      tf.dispose([images, labels, cost])
    }
    lossCurve.push(epochLoss / seen)
    if (withEval) evalCurve.push(datasetLoss(model, dataset, cfg))
    opts.onEpoch?.(epoch, lossCurve[lossCurve.length - 1])
  }
  optimizer.dispose()
  return { model, lossCurve, evalCurve }
}
