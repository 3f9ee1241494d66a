/** export-descriptors --images DIR --traj FILE --out FILE
 *                     [--train] [--epochs N] [--seed S]
 *
 * Exit codes: 0 success, 1 runtime failure, 2 bad flags or missing paths.
 */
import * as fs from 'fs'

import { DEFAULT_TRAIN_CONFIG } from './model'
import { DEFAULT_PAIR_CONFIG } from './pairs'
import { exportDescriptors, loadDataset } from './export'

interface Args {
  images: string
  traj: string
  out: string
  train: boolean
  epochs: number
  seed: number
}

function usage(): string {
  return (
    'usage: export-descriptors --images DIR --traj FILE --out FILE ' +
    '[--train] [--epochs N] [--seed S]\n' +
    '  --images DIR   directory of grayscale PGM (P5) images\n' +
    '  --traj FILE    pose-labeled trajectory matching the images\n' +
    '  --out FILE     descriptor binary to write\n' +
    '  --train        run contrastive training before exporting\n' +
    `  --epochs N     training epochs (default ${DEFAULT_TRAIN_CONFIG.epochs})\n` +
    '  --seed S       RNG seed for init and pair sampling (default 0)\n'
  )
}

function parseArgs(argv: string[]): Args | null {
  const args: Args = {
    images: '',
    traj: '',
    out: '',
    train: false,
    epochs: DEFAULT_TRAIN_CONFIG.epochs,
    seed: 0,
  }
  for (let i = 0; i < argv.length; i++) {
    const a = argv[i]
    const next = () => {
      i++
      if (i >= argv.length) throw new Error(`${a} needs a value`)
      return argv[i]
    }
    switch (a) {
      case '--images': args.images = next(); break
      case '--traj': args.traj = next(); break
      case '--out': args.out = next(); break
      case '--train': args.train = true; break
      case '--epochs': args.epochs = parseInt(next(), 10); break
      case '--seed': args.seed = parseInt(next(), 10); break
      case '--help': case '-h':
        process.stdout.write(usage())
        return null
      default:
        throw new Error(`unknown flag ${a}`)
    }
  }
  if (!args.images || !args.traj || !args.out) {
    throw new Error('--images, --traj and --out are all required')
  }
  if (!(args.epochs > 0) || !Number.isFinite(args.seed)) {
    throw new Error('--epochs must be positive and --seed numeric')
  }
  return args
}

export function main(argv: string[]): number {
  let args: Args | null
  try {
    args = parseArgs(argv)
  } catch (e) {
    process.stderr.write(`error: ${(e as Error).message}\n${usage()}`)
    return 2
  }
  if (args === null) return 0
  if (!fs.existsSync(args.images) || !fs.existsSync(args.traj)) {
    process.stderr.write('error: --images directory and --traj file must exist\n')
    return 2
  }
  try {
    const trainCfg = {
      ...DEFAULT_TRAIN_CONFIG,
      epochs: args.epochs,
      seed: args.seed,
    }
    const dataset = loadDataset(args.images, args.traj, trainCfg.inputSize)
    const result = exportDescriptors(dataset, args.out, {
      train: args.train,
      trainCfg,
      pairCfg: DEFAULT_PAIR_CONFIG,
    })
    if (result.epochLosses.length) {
      const first = result.epochLosses[0]
      const last = result.epochLosses[result.epochLosses.length - 1]
      process.stdout.write(
        `trained ${result.epochLosses.length} epochs: ` +
          `loss ${first.toFixed(6)} -> ${last.toFixed(6)}\n`,
      )
    }
    process.stdout.write(
      `wrote ${result.entries.length} descriptors (dim ` +
        `${result.entries.length ? result.entries[0].vector.length : 0}) to ${args.out}\n`,
    )
    return 0
  } catch (e) {
    process.stderr.write(`error: ${(e as Error).message}\n`)
    return 1
  }
}

if (require.main === module) {
  process.exit(main(process.argv.slice(2)))
}
