/** CLI: train-extractor and export-features. */

import { existsSync, mkdirSync, readFileSync } from 'fs'
import { basename, join } from 'path'

import yargs from 'yargs'
import { hideBin } from 'yargs/helpers'

import { initBackend } from './backend.js'
import { loadConfig } from './config.js'
import { loadDataset, stemOf } from './data.js'
import { loadCheckpoint, saveCheckpoint } from './model.js'
import { exportFeatures } from './export.js'
import { trainExtractor } from './train.js'

async function main() {
  await yargs(hideBin(process.argv))
    .command(
      'train-extractor',
      'Train the feature extractor on affinity labels',
      (y) =>
        y
          .option('data', { type: 'string', demandOption: true, describe: 'dataset root (manifest.json)' })
          .option('config', { type: 'string', describe: 'extractor config JSON' })
          .option('seed', { type: 'number' })
          .option('epochs', { type: 'number' })
          .option('out', { type: 'string', demandOption: true, describe: 'checkpoint path' }),
      async (argv) => {
        // training needs conv backward kernels, which only the cpu backend has
        await initBackend('cpu')
        const cfg = loadConfig(argv.config)
        if (argv.seed !== undefined) cfg.seed = argv.seed
        if (argv.epochs !== undefined) cfg.epochs = argv.epochs
        const dataset = loadDataset(argv.data)
        const { model, lossCurve, evalCurve } = trainExtractor(dataset, cfg)
        await saveCheckpoint(model, argv.out)
        console.log(
          JSON.stringify({
            epochs: lossCurve.length,
            lossCurve: lossCurve.map((v) => +v.toFixed(6)),
            evalCurve: evalCurve.map((v) => +v.toFixed(6)),
            checkpoint: argv.out,
          }),
        )
      },
    )
    .command(
      'export-features',
      'Export per-pixel feature FMAPs for an image or a whole dataset',
      (y) =>
        y
          .option('checkpoint', { type: 'string', demandOption: true })
          .option('image', { type: 'string', describe: 'single image path' })
          .option('data', { type: 'string', describe: 'dataset root: exports every manifest image' })
          .option('out', { type: 'string', demandOption: true, describe: 'output FMAP path (or directory with --data)' }),
      async (argv) => {
        await initBackend('wasm') // forward-only: the fast path works
        const model = loadCheckpoint(argv.checkpoint)
        const results = []
        if (argv.data) {
          mkdirSync(argv.out, { recursive: true })
          const manifest = JSON.parse(readFileSync(join(argv.data, 'manifest.json'), 'utf-8'))
          for (const entry of manifest.images) {
            const imagePath = join(argv.data, entry.image)
            const outPath = join(argv.out, `${stemOf(entry.image)}.fmap`)
            results.push({ image: entry.image, out: outPath, ...exportFeatures(model, imagePath, outPath) })
          }
        } else if (argv.image) {
          results.push({ image: argv.image, out: argv.out, ...exportFeatures(model, argv.image, argv.out) })
        } else {
          throw new Error('need --image or --data')
        }
        const worstZero = Math.max(...results.map((r) => r.zeroVectorRate))
        console.log(JSON.stringify({ exported: results.length, worstZeroVectorRate: worstZero }))
        if (worstZero >= 0.001) {
          console.error(`warning: zero-vector rate ${worstZero} exceeds the 0.1% budget`)
        }
      },
    )
    .demandCommand(1)
    .strict()
    .fail((msg, err) => {
      console.error(JSON.stringify({ error: msg ?? String(err) }))
      process.exit(2)
    })
    .parseAsync()
}

main().catch((err) => {
  console.error(JSON.stringify({ error: String(err?.message ?? err) }))
  process.exit(1)
})
