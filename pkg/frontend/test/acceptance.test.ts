/** End-to-end gates for the descriptor trainer: loss decreases over the toy
 * set, the export round trips through the localization package's loader, and
 * self-queries through its index hit their own frame. */
import { execFileSync } from 'child_process'
import * as fs from 'fs'
import * as os from 'os'
import * as path from 'path'

import { afterAll, describe, expect, it } from 'vitest'

import { readDescriptors } from '../src/descriptors'
import { exportDescriptors, loadDataset } from '../src/export'
import { DEFAULT_TRAIN_CONFIG, buildEmbeddingModel, embed } from '../src/model'
import { DEFAULT_PAIR_CONFIG } from '../src/pairs'
import { main as cliMain } from '../src/cli'
import { writeToySet } from './toyset'

const tmp = fs.mkdtempSync(path.join(os.tmpdir(), 'frontend-acc-'))
afterAll(() => fs.rmSync(tmp, { recursive: true, force: true }))

// small input keeps 50 epochs on 50 images tractable on the CPU backend
const TOY_CFG = {
  ...DEFAULT_TRAIN_CONFIG,
  epochs: 50,
  inputSize: 32,
  pairsPerEpoch: 64,
  seed: 3,
}

function pythonCheck(binPath: string): { count: number; dim: number; self: boolean } {
  const script = [
    'import sys, json',
    'from monoloc.scene import load_descriptors',
    'from monoloc.retrieval import build_index',
    'd = load_descriptors(sys.argv[1])',
    'idx = build_index(d)',
    'ok = all(idx.query(v, 1)[0][0] == fid for fid, v in d)',
    'print(json.dumps({"count": len(d), "dim": len(d[0][1]), "self": ok}))',
  ].join('\n')
  const out = execFileSync('python3', ['-c', script, binPath], {
    encoding: 'utf-8',
  })
  return JSON.parse(out.trim())
}

describe('secondary acceptance', () => {
  const toy = writeToySet(path.join(tmp, 'toy'), 50, 32)
  const outPath = path.join(tmp, 'descriptors.bin')
  const dataset = loadDataset(toy.dir, toy.trajPath, TOY_CFG.inputSize)
  const result = exportDescriptors(dataset, outPath, {
    train: true,
    trainCfg: TOY_CFG,
    pairCfg: DEFAULT_PAIR_CONFIG,
  })

  it('epoch-50 mean loss is below epoch-1', () => {
    expect(result.epochLosses.length).toBe(50)
    const first = result.epochLosses[0]
    const last = result.epochLosses[49]
    console.log(`[${last < first ? 'PASS' : 'FAIL'}] training loss: ` +
      `epoch 1 ${first.toFixed(4)} -> epoch 50 ${last.toFixed(4)}`)
    expect(last).toBeLessThan(first)
  })

  it('export round trips through the localization loader', () => {
    const check = pythonCheck(outPath)
    console.log(`[${check.count === 50 && check.dim === 128 ? 'PASS' : 'FAIL'}] ` +
      `round trip: count ${check.count}, dim ${check.dim}`)
    expect(check.count).toBe(50)
    expect(check.dim).toBe(128)
    // and through our own reader, bit-for-bit
    const back = readDescriptors(outPath)
    back.forEach((e, i) => {
      expect(e.frameId).toBe(result.entries[i].frameId)
      expect(Array.from(e.vector)).toEqual(Array.from(result.entries[i].vector))
    })
  })

  it('self-query top-1 via the localization index hits every frame', () => {
    const check = pythonCheck(outPath)
    console.log(`[${check.self ? 'PASS' : 'FAIL'}] self-query top-1: ` +
      `${check.self ? '50/50' : 'mismatches found'}`)
    expect(check.self).toBe(true)
  })

  it('Siamese branches share weights: identical inputs embed identically', () => {
    const model = buildEmbeddingModel(TOY_CFG)
    try {
      const a = embed(model, [dataset.images[0]], TOY_CFG.inputSize)
      const b = embed(model, [dataset.images[0]], TOY_CFG.inputSize)
      const da = a.dataSync()
      const db = b.dataSync()
      for (let i = 0; i < da.length; i++) expect(da[i]).toBe(db[i])
      a.dispose()
      b.dispose()
    } finally {
      model.dispose()
    }
  })

  it('untrained CLI export works and is usable downstream', () => {
    const cliOut = path.join(tmp, 'cli.bin')
    const rc = cliMain([
      '--images', toy.dir, '--traj', toy.trajPath, '--out', cliOut,
    ])
    expect(rc).toBe(0)
    const check = pythonCheck(cliOut)
    expect(check.count).toBe(50)
    expect(check.self).toBe(true)
  })

  it('CLI rejects bad invocations with exit code 2', () => {
    expect(cliMain(['--images', toy.dir])).toBe(2)
    expect(cliMain(['--images', '/no/such/dir', '--traj', toy.trajPath,
                    '--out', path.join(tmp, 'x.bin')])).toBe(2)
    expect(cliMain(['--bogus'])).toBe(2)
  })
})
