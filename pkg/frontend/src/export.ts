import * as fs from 'fs'
import * as path from 'path'

import * as tf from '@tensorflow/tfjs'

import { DescriptorEntry, writeDescriptors } from './descriptors'
import {
  TrainConfig,
  buildEmbeddingModel,
  embed,
} from './model'
import { PairLabelConfig } from './pairs'
import { readPgm, resize } from './pgm'
import { LabeledFrame, loadTrajectory } from './trajectory'
import { trainSiamese } from './train'

export interface Dataset {
  frames: LabeledFrame[]
  /** resized row-major pixels, one per frame */
  images: Float32Array[]
}

/** Pair the i-th image (filenames sorted) with the i-th trajectory frame
 * (sorted by timestamp); counts must match. */
export function loadDataset(
  imagesDir: string,
  trajPath: string,
  inputSize: number,
): Dataset {
  const frames = loadTrajectory(trajPath)
  const files = fs
    .readdirSync(imagesDir)
    .filter((f) => f.toLowerCase().endsWith('.pgm'))
    .sort()
  if (files.length !== frames.length) {
    throw new Error(
      `${files.length} images in ${imagesDir} vs ${frames.length} trajectory frames`,
    )
  }
  const images = files.map(
    (f) => resize(readPgm(path.join(imagesDir, f)), inputSize).pixels,
  )
  return { frames, images }
}

export interface ExportOptions {
  train: boolean
  trainCfg: TrainConfig
  pairCfg: PairLabelConfig
}

export interface ExportResult {
  entries: DescriptorEntry[]
  /** empty when training was skipped */
  epochLosses: number[]
}

/** Build (and optionally train) the embedding model, embed every frame, and
 * write the descriptor binary. */
export function exportDescriptors(
  dataset: Dataset,
  outPath: string,
  opts: ExportOptions,
): ExportResult {
  const model = buildEmbeddingModel(opts.trainCfg)
  let epochLosses: number[] = []
  try {
    if (opts.train) {
      epochLosses = trainSiamese(
        model,
        dataset.frames,
        dataset.images,
        opts.pairCfg,
        opts.trainCfg,
      ).epochLosses
    }
    const out = embed(model, dataset.images, opts.trainCfg.inputSize)
    const flat = out.dataSync() as Float32Array
    const dim = opts.trainCfg.descriptorDim
    const entries = dataset.frames.map((fr, i) => ({
      frameId: fr.id,
      vector: flat.slice(i * dim, (i + 1) * dim),
    }))
    out.dispose()
    writeDescriptors(outPath, entries)
    return { entries, epochLosses }
  } finally {
    model.dispose()
  }
}

export { tf }
