#!/usr/bin/env node
/** Extraction toolkit CLI: extract bundles, host the judge shim, make samples. */

import { promises as fs } from 'node:fs'
import path from 'node:path'
import yargs from 'yargs'
import { hideBin } from 'yargs/helpers'

import { extractAll, VideoJob } from './pipeline.js'
import { makeSample } from './sample.js'
import { startJudgeShim } from './judgeShim.js'

async function loadJobs(jobsPath: string): Promise<VideoJob[]> {
  const raw = JSON.parse(await fs.readFile(jobsPath, 'utf-8')) as VideoJob[]
  const base = path.dirname(path.resolve(jobsPath))
  return raw.map((job) => ({
    ...job,
    frames_dir: path.isAbsolute(job.frames_dir) ? job.frames_dir : path.join(base, job.frames_dir),
  }))
}

await yargs(hideBin(process.argv))
  .scriptName('ewm-extract')
  .command(
    'extract',
    'run all extractors over the jobs file and emit a bundle',
    (y) =>
      y
        .option('bundle', { type: 'string', demandOption: true, describe: 'output bundle root' })
        .option('jobs', { type: 'string', demandOption: true, describe: 'jobs JSON file' })
        .option('judge-endpoint', { type: 'string', describe: 'judge URL for verdict artifacts' })
        .option('judge-model', { type: 'string', default: 'local-judge-shim' }),
    async (argv) => {
      const jobs = await loadJobs(argv.jobs)
      const results = await extractAll(argv.bundle, jobs, {
        judgeEndpoint: argv['judge-endpoint'],
        judgeModel: argv['judge-model'],
        log: (line) => console.log(line),
      })
      const written = results.reduce((acc, r) => acc + r.written.length, 0)
      const skipped = results.reduce((acc, r) => acc + r.skipped.length, 0)
      console.log(`bundle ready at ${argv.bundle}: ${written} artifacts written, ${skipped} reused`)
    },
  )
  .command(
    'judge-shim',
    'serve a deterministic local judge endpoint (wire-protocol compatible)',
    (y) => y.option('port', { type: 'number', default: 8765 }),
    async (argv) => {
      const shim = await startJudgeShim({ port: argv.port })
      console.log(`judge shim listening on http://127.0.0.1:${shim.port}/`)
      await new Promise(() => {}) // run until killed
    },
  )
  .command(
    'make-sample',
    'generate a two-second synthetic sample set plus jobs file',
    (y) => y.option('out', { type: 'string', demandOption: true }),
    async (argv) => {
      const jobsPath = await makeSample(argv.out)
      console.log(`sample jobs written to ${jobsPath}`)
    },
  )
  .demandCommand(1)
  .strict()
  .help()
  .parseAsync()
