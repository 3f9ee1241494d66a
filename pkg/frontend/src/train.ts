import * as tf from '@tensorflow/tfjs'

import { contrastiveLossTensor } from './loss'
import { TrainConfig, toInputTensor } from './model'
import { LabeledPair, PairLabelConfig, makeSampler } from './pairs'
import { LabeledFrame } from './trajectory'

export interface TrainResult {
  /** mean contrastive loss per epoch, length cfg.epochs */
  epochLosses: number[]
}

function pairDistances(
  model: tf.Sequential,
  pairs: LabeledPair[],
  images: Float32Array[],
  inputSize: number,
): tf.Tensor1D {
  const left = toInputTensor(pairs.map((p) => images[p.a]), inputSize)
  const right = toInputTensor(pairs.map((p) => images[p.b]), inputSize)
  const ea = model.apply(left) as tf.Tensor2D
  const eb = model.apply(right) as tf.Tensor2D
  const sq = tf.sum(tf.square(tf.sub(ea, eb)), 1)
  // small floor keeps the sqrt gradient finite for identical embeddings
  return tf.sqrt(tf.add(sq, 1e-12)) as tf.Tensor1D
}

/** Per-epoch loop: draw a balanced pair batch, minimize the contrastive loss
 * in minibatches, record the epoch's mean loss (evaluated on the epoch's own
 * batches before each update). */
export function trainSiamese(
  model: tf.Sequential,
  frames: LabeledFrame[],
  images: Float32Array[],
  pairCfg: PairLabelConfig,
  cfg: TrainConfig,
): TrainResult {
  if (frames.length !== images.length) {
    throw new Error('one image per labeled frame is required')
  }
  const sampler = makeSampler(frames, pairCfg, cfg.seed, cfg.pairsPerEpoch)
  const optimizer = tf.train.adam(cfg.learningRate)
  const epochLosses: number[] = []
  try {
    for (let epoch = 0; epoch < cfg.epochs; epoch++) {
      const pairs = sampler()
      let lossSum = 0
      let batches = 0
      for (let start = 0; start < pairs.length; start += cfg.batchSize) {
        const batch = pairs.slice(start, start + cfg.batchSize)
        const labels = tf.tensor1d(batch.map((p) => p.label))
        const value = optimizer.minimize(
          () =>
            contrastiveLossTensor(
              labels,
              pairDistances(model, batch, images, cfg.inputSize),
              pairCfg.margin,
            ),
          true,
        ) as tf.Scalar
        lossSum += value.dataSync()[0]
        batches++
        labels.dispose()
        value.dispose()
      }
      epochLosses.push(lossSum / batches)
    }
  } finally {
    optimizer.dispose()
  }
  return { epochLosses }
}
