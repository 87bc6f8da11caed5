/**
 * Structured video description + text embedding (default backend).
 *
 * Produces a deterministic task-oriented description from motion and color
 * statistics: overall motion direction, moving-region location, dominant
 * scene colors. Both the text and its hashed embedding are persisted so
 * downstream similarity scores stay auditable.
 */

import { detectionTrack } from './detect.js'
import { Frame } from './image.js'
import { textEmbedding } from './features.js'

const COLOR_NAMES: Array<[string, [number, number, number]]> = [
  ['red', [200, 60, 60]],
  ['green', [60, 180, 90]],
  ['blue', [70, 90, 200]],
  ['yellow', [220, 200, 70]],
  ['white', [230, 230, 230]],
  ['gray', [128, 128, 128]],
  ['black', [30, 30, 30]],
]

function dominantColor(frame: Frame): string {
  const mean = [0, 0, 0]
  const n = frame.width * frame.height
  for (let i = 0; i < n; i++) {
    mean[0] += frame.rgb[i * 3]
    mean[1] += frame.rgb[i * 3 + 1]
    mean[2] += frame.rgb[i * 3 + 2]
  }
  mean[0] /= n
  mean[1] /= n
  mean[2] /= n
  let best = 'gray'
  let bestDist = Infinity
  for (const [name, ref] of COLOR_NAMES) {
    const d = (mean[0] - ref[0]) ** 2 + (mean[1] - ref[1]) ** 2 + (mean[2] - ref[2]) ** 2
    if (d < bestDist) {
      bestDist = d
      best = name
    }
  }
  return best
}

function motionPhrase(frames: Frame[]): string {
  const track = detectionTrack(frames)
  const center = (d: { box: [number, number, number, number] }) => [
    (d.box[0] + d.box[2]) / 2,
    (d.box[1] + d.box[3]) / 2,
  ]
  const first = center(track[0][0])
  const last = center(track[track.length - 1][0])
  const dx = last[0] - first[0]
  const dy = last[1] - first[1]
  if (Math.abs(dx) < 2 && Math.abs(dy) < 2) return 'holds position over the scene'
  const horiz = dx > 2 ? 'rightward' : dx < -2 ? 'leftward' : ''
  const vert = dy > 2 ? 'downward' : dy < -2 ? 'upward' : ''
  const parts = [horiz, vert].filter(Boolean).join(' and ')
  return `moves ${parts} across the workspace`
}

export interface Caption {
  description: string
  embedding: Float32Array
}

export function describeVideo(frames: Frame[], instruction: string): Caption {
  const color = dominantColor(frames[Math.floor(frames.length / 2)])
  const motion = motionPhrase(frames)
  const description =
    `Task summary: a robotic manipulator ${motion} in a ${color}-toned tabletop scene. ` +
    `Action sequence: the end-effector ${motion}, consistent with the instruction "${instruction}".`
  return { description, embedding: textEmbedding(description) }
}
