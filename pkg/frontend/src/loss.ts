import * as tf from '@tensorflow/tfjs'

/** Contrastive loss for one pair: label 0 pulls the pair together, label 1
 * pushes it past the margin.
 *
 *   (1 - label) * 0.5 * d^2 + label * 0.5 * max(0, m - d)^2
 */
export function contrastiveLoss(
  label: 0 | 1,
  distance: number,
  margin: number,
): number {
  if (distance < 0) throw new Error('distance must be >= 0')
  if (label === 0) return 0.5 * distance * distance
  const hinge = Math.max(0, margin - distance)
  return 0.5 * hinge * hinge
}

/** Batched tensor version used by the training loop.  `labels` holds 0/1,
 * `distances` the embedding distances, both shape [n]. */
export function contrastiveLossTensor(
  labels: tf.Tensor1D,
  distances: tf.Tensor1D,
  margin: number,
): tf.Scalar {
  return tf.tidy(() => {
    const similar = tf.mul(tf.sub(1, labels), tf.square(distances))
    const hinge = tf.relu(tf.sub(margin, distances))
    const dissimilar = tf.mul(labels, tf.square(hinge))
    return tf.mul(0.5, tf.mean(tf.add(similar, dissimilar))) as tf.Scalar
  })
}
