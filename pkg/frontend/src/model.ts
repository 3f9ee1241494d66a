import * as tf from '@tensorflow/tfjs'

export interface TrainConfig {
  epochs: number
  batchSize: number
  learningRate: number
  /** positive pairs per epoch; the sampler adds the same number of negatives */
  pairsPerEpoch: number
  /** square grayscale input edge length */
  inputSize: number
  descriptorDim: number
  seed: number
}

export const DEFAULT_TRAIN_CONFIG: TrainConfig = {
  epochs: 500,
  batchSize: 128,
  learningRate: 0.001,
  pairsPerEpoch: 128,
  inputSize: 224,
  descriptorDim: 128,
  seed: 0,
}

export function validateTrainConfig(cfg: TrainConfig): void {
  const fields = [
    cfg.epochs, cfg.batchSize, cfg.learningRate,
    cfg.pairsPerEpoch, cfg.inputSize, cfg.descriptorDim,
  ]
  if (fields.some((v) => !(v > 0))) {
    throw new Error('all TrainConfig fields must be positive')
  }
}

/** Embedding network shared by both Siamese branches.  A single model
 * applied to both inputs makes weight sharing structural rather than a
 * synchronization concern. */
export function buildEmbeddingModel(cfg: TrainConfig): tf.Sequential {
  validateTrainConfig(cfg)
  const seed = cfg.seed
  const model = tf.sequential()
  model.add(
    tf.layers.conv2d({
      inputShape: [cfg.inputSize, cfg.inputSize, 1],
      filters: 8,
      kernelSize: 3,
      strides: 2,
      activation: 'relu',
      kernelInitializer: tf.initializers.glorotUniform({ seed }),
    }),
  )
  model.add(
    tf.layers.conv2d({
      filters: 16,
      kernelSize: 3,
      strides: 2,
      activation: 'relu',
      kernelInitializer: tf.initializers.glorotUniform({ seed: seed + 1 }),
    }),
  )
  model.add(tf.layers.globalAveragePooling2d({}))
  model.add(
    tf.layers.dense({
      units: cfg.descriptorDim,
      kernelInitializer: tf.initializers.glorotUniform({ seed: seed + 2 }),
    }),
  )
  return model
}

/** Stack [n, size*size] image rows into the model's NHWC input. */
export function toInputTensor(
  rows: Float32Array[],
  inputSize: number,
): tf.Tensor4D {
  const n = rows.length
  const flat = new Float32Array(n * inputSize * inputSize)
  rows.forEach((r, i) => flat.set(r, i * inputSize * inputSize))
  return tf.tensor4d(flat, [n, inputSize, inputSize, 1])
}

/** Embed a batch of images; returns [n, descriptorDim]. */
export function embed(
  model: tf.Sequential,
  rows: Float32Array[],
  inputSize: number,
): tf.Tensor2D {
  return tf.tidy(() => {
    const input = toInputTensor(rows, inputSize)
    return model.predict(input) as tf.Tensor2D
  })
}
