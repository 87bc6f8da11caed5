/**
 * Local judge endpoint speaking the evaluation engine's wire protocol:
 * POST {model, prompt, images[]} -> {content}.
 *
 * The default backend is rule-based and deterministic: scores derive from
 * a digest of the request images, biased toward the upper half of the
 * Likert scale, so offline runs are reproducible without a hosted VLM.
 * Point it at real hardware by replacing `verdictFor`.
 */

import { createHash } from 'node:crypto'
import http from 'node:http'

export interface ShimOptions {
  port?: number
}

function imageDigestByte(images: string[], salt: string): number {
  const h = createHash('sha256')
  h.update(salt)
  for (const img of images) h.update(img)
  return h.digest()[0]
}

export function verdictFor(prompt: string, images: string[]): string {
  const isPolicy = prompt.includes('robot task execution judge')
  if (isPolicy) {
    const success = imageDigestByte(images, 'policy') % 4 !== 0 ? 1 : 0
    return (
      'thinking: [Analysis: 1. Arm visible and consistent with the instruction. ' +
      '2. Final frames show comparable completion states. 3. Motion intent matches.]\n' +
      `answer: ${success}`
    )
  }
  const score = (salt: string) => 3 + (imageDigestByte(images, salt) % 3)
  const verdict = {
    Interaction_Quality: {
      score: score('interaction'),
      reason: 'Contact between end-effector and object stays plausible across sampled frames',
    },
    Perspectivity: {
      score: score('perspective'),
      reason: 'Stable camera geometry and consistent depth ordering across frames',
    },
    Instruction_Following: {
      score: score('instruction'),
      reason: 'Observed motion matches the instructed action and target object',
    },
  }
  return JSON.stringify(verdict)
}

export interface RunningShim {
  port: number
  close: () => Promise<void>
}

export function startJudgeShim(options: ShimOptions = {}): Promise<RunningShim> {
  const server = http.createServer((req, res) => {
    if (req.method !== 'POST') {
      res.writeHead(405).end()
      return
    }
    const chunks: Buffer[] = []
    req.on('data', (c) => chunks.push(c))
    req.on('end', () => {
      try {
        const body = JSON.parse(Buffer.concat(chunks).toString('utf-8'))
        const content = verdictFor(String(body.prompt ?? ''), body.images ?? [])
        const payload = JSON.stringify({ content })
        res.writeHead(200, { 'Content-Type': 'application/json' })
        res.end(payload)
      } catch (err) {
        res.writeHead(400, { 'Content-Type': 'application/json' })
        res.end(JSON.stringify({ error: String(err) }))
      }
    })
  })
  return new Promise((resolve, reject) => {
    server.once('error', reject)
    server.listen(options.port ?? 0, '127.0.0.1', () => {
      const address = server.address()
      if (address === null || typeof address === 'string') {
        reject(new Error('could not determine shim port'))
        return
      }
      resolve({
        port: address.port,
        close: () =>
          new Promise<void>((done, fail) =>
            server.close((err) => (err ? fail(err) : done())),
          ),
      })
    })
  })
}
