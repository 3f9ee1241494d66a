import * as tf from '@tensorflow/tfjs'
import { describe, expect, it } from 'vitest'

import { contrastiveLoss, contrastiveLossTensor } from '../src/loss'

describe('contrastiveLoss', () => {
  it('is zero for a similar pair at distance zero', () => {
    expect(contrastiveLoss(0, 0, 1.0)).toBe(0)
  })

  it('is zero for a dissimilar pair past the margin', () => {
    expect(contrastiveLoss(1, 1.0, 1.0)).toBe(0)
    expect(contrastiveLoss(1, 2.5, 1.0)).toBe(0)
  })

  it('evaluates the hinge inside the margin', () => {
    expect(contrastiveLoss(1, 0.5, 1.0)).toBeCloseTo(0.125, 12)
  })

  it('grows quadratically for similar pairs', () => {
    expect(contrastiveLoss(0, 2.0, 1.0)).toBeCloseTo(2.0, 12)
  })

  it('rejects negative distances', () => {
    expect(() => contrastiveLoss(0, -0.1, 1.0)).toThrow()
  })

  it('tensor version matches the scalar form', () => {
    const labels: Array<0 | 1> = [0, 1, 1, 0, 1]
    const dists = [0.2, 0.3, 1.4, 0.0, 0.9]
    const margin = 1.0
    const expected =
      labels.reduce((s, l, i) => s + contrastiveLoss(l, dists[i], margin), 0) /
      labels.length
    const got = contrastiveLossTensor(
      tf.tensor1d(labels),
      tf.tensor1d(dists),
      margin,
    ).dataSync()[0]
    expect(got).toBeCloseTo(expected, 6)
  })
})
