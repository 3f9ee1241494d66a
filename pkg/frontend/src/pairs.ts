import { Rng } from './rng'
import {
  LabeledFrame,
  misalignmentAngle,
  positionDistance,
} from './trajectory'

export interface PairLabelConfig {
  /** positive iff position gap <= this, meters */
  posThresholdP: number
  /** ... and misalignment <= this, degrees */
  posThresholdR: number
  /** contrastive margin */
  margin: number
}

export const DEFAULT_PAIR_CONFIG: PairLabelConfig = {
  posThresholdP: 0.5,
  posThresholdR: 10.0,
  margin: 1.0,
}

export interface LabeledPair {
  a: number
  b: number
  /** 1 = dissimilar, 0 = similar */
  label: 0 | 1
}

export class InsufficientPositives extends Error {}

export function validatePairConfig(cfg: PairLabelConfig): void {
  if (cfg.posThresholdP <= 0 || cfg.posThresholdR <= 0 || cfg.margin <= 0) {
    throw new Error('pair thresholds and margin must be positive')
  }
}

export function isPositivePair(
  a: LabeledFrame,
  b: LabeledFrame,
  cfg: PairLabelConfig,
): boolean {
  return (
    positionDistance(a, b) <= cfg.posThresholdP &&
    misalignmentAngle(a, b) <= (cfg.posThresholdR * Math.PI) / 180
  )
}

/** Enumerate all frame pairs and split them by the similarity thresholds. */
export function labelPairs(frames: LabeledFrame[], cfg: PairLabelConfig) {
  validatePairConfig(cfg)
  const positives: Array<[number, number]> = []
  const negatives: Array<[number, number]> = []
  for (let i = 0; i < frames.length; i++) {
    for (let j = i + 1; j < frames.length; j++) {
      if (isPositivePair(frames[i], frames[j], cfg)) {
        positives.push([i, j])
      } else {
        negatives.push([i, j])
      }
    }
  }
  if (positives.length < 1) {
    throw new InsufficientPositives(
      `no positive pairs under (${cfg.posThresholdP} m, ${cfg.posThresholdR} deg)`,
    )
  }
  return { positives, negatives }
}

/** Seed-deterministic balanced sampler: each draw yields `perSide` positive
 * and `perSide` negative pairs, with replacement. */
export function makeSampler(
  frames: LabeledFrame[],
  cfg: PairLabelConfig,
  seed: number,
  perSide = 128,
) {
  const { positives, negatives } = labelPairs(frames, cfg)
  const rng = new Rng(seed)
  return function sample(): LabeledPair[] {
    const batch: LabeledPair[] = []
    for (let k = 0; k < perSide; k++) {
      const [a, b] = positives[rng.int(positives.length)]
      batch.push({ a, b, label: 0 })
    }
    for (let k = 0; k < perSide; k++) {
      // degenerate sets with no negatives just repeat positives as similar
      if (negatives.length === 0) {
        const [a, b] = positives[rng.int(positives.length)]
        batch.push({ a, b, label: 0 })
      } else {
        const [a, b] = negatives[rng.int(negatives.length)]
        batch.push({ a, b, label: 1 })
      }
    }
    return batch
  }
}
