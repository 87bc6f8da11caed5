/**
 * Synthetic sample clips for smoke tests and the cross-component contract
 * test: a bright gripper block traverses a shaded tabletop while a colored
 * target object sits in the scene. Two seconds at 8 fps, 64x64. Variants
 * of one task differ in motion direction, mirroring distinct instructions.
 */

import { promises as fs } from 'node:fs'
import path from 'node:path'

import { Frame, encodePng } from './image.js'
import { VideoJob } from './pipeline.js'
import { writeJsonAtomic } from './manifest.js'

export const SAMPLE_FPS = 8
export const SAMPLE_SECONDS = 2
export const SAMPLE_SIDE = 64

interface Motion {
  dx: number
  dy: number
  label: string
}

const MOTIONS: Record<string, Motion> = {
  right: { dx: 2.2, dy: 0, label: 'slide the gripper to the right target' },
  up: { dx: 0, dy: -2.2, label: 'lift the gripper toward the shelf' },
  diagonal: { dx: 1.6, dy: -1.6, label: 'carry the object to the upper-right bin' },
  left: { dx: -2.2, dy: 0, label: 'push the block toward the left marker' },
}

function renderFrame(t: number, motion: Motion, seedShift: number): Frame {
  const side = SAMPLE_SIDE
  const rgb = new Uint8Array(side * side * 3)
  for (let y = 0; y < side; y++) {
    for (let x = 0; x < side; x++) {
      // tabletop shading: darker toward the top (far side)
      const base = 70 + Math.floor((110 * y) / side)
      const i = (y * side + x) * 3
      rgb[i] = base
      rgb[i + 1] = base
      rgb[i + 2] = base + 10
    }
  }
  // static target object (green block) near the frame center
  const ox = 40
  const oy = 40
  for (let y = oy; y < oy + 8; y++) {
    for (let x = ox; x < ox + 8; x++) {
      const i = (y * side + x) * 3
      rgb[i] = 40
      rgb[i + 1] = 180
      rgb[i + 2] = 70
    }
  }
  // moving gripper block
  const gx = Math.round(8 + seedShift + motion.dx * t)
  const gy = Math.round(motion.dy >= 0 ? 10 + motion.dy * t : 44 + motion.dy * t)
  for (let y = Math.max(0, gy); y < Math.min(side, gy + 10); y++) {
    for (let x = Math.max(0, gx); x < Math.min(side, gx + 10); x++) {
      const i = (y * side + x) * 3
      rgb[i] = 235
      rgb[i + 1] = 235
      rgb[i + 2] = 240
    }
  }
  return { width: side, height: side, rgb }
}

async function writeClip(dir: string, motion: Motion, seedShift: number): Promise<void> {
  await fs.mkdir(dir, { recursive: true })
  const frameCount = SAMPLE_FPS * SAMPLE_SECONDS
  for (let t = 0; t < frameCount; t++) {
    const frame = renderFrame(t, motion, seedShift)
    await fs.writeFile(path.join(dir, `frame_${String(t).padStart(3, '0')}.png`), encodePng(frame))
  }
}

/** Generate sample clips plus a jobs file; returns the jobs path. */
export async function makeSample(outDir: string, modelId = 'sample-model'): Promise<string> {
  const jobs: VideoJob[] = []

  // task 1: three instruction variants plus ground truth
  const variants: Array<[string, keyof typeof MOTIONS]> = [
    ['gen-place-00', 'right'],
    ['gen-place-01', 'up'],
    ['gen-place-02', 'diagonal'],
  ]
  await writeClip(path.join(outDir, 'clips', 'gt-place'), MOTIONS.right, 1)
  jobs.push({
    video_id: 'gt-place',
    model_id: '__reference__',
    task_id: 'place_block',
    instruction: MOTIONS.right.label,
    role: 'ground_truth',
    frames_dir: path.join(outDir, 'clips', 'gt-place'),
  })
  for (const [videoId, motionKey] of variants) {
    await writeClip(path.join(outDir, 'clips', videoId), MOTIONS[motionKey], 0)
    jobs.push({
      video_id: videoId,
      model_id: modelId,
      task_id: 'place_block',
      instruction: MOTIONS[motionKey].label,
      role: 'generated',
      frames_dir: path.join(outDir, 'clips', videoId),
      gt_ref: 'gt-place',
    })
  }

  // task 2: single generated clip plus ground truth
  await writeClip(path.join(outDir, 'clips', 'gt-push'), MOTIONS.left, 2)
  jobs.push({
    video_id: 'gt-push',
    model_id: '__reference__',
    task_id: 'push_block',
    instruction: MOTIONS.left.label,
    role: 'ground_truth',
    frames_dir: path.join(outDir, 'clips', 'gt-push'),
  })
  await writeClip(path.join(outDir, 'clips', 'gen-push-00'), MOTIONS.left, 0)
  jobs.push({
    video_id: 'gen-push-00',
    model_id: modelId,
    task_id: 'push_block',
    instruction: MOTIONS.left.label,
    role: 'generated',
    frames_dir: path.join(outDir, 'clips', 'gen-push-00'),
    gt_ref: 'gt-push',
  })

  const jobsPath = path.join(outDir, 'jobs.json')
  await writeJsonAtomic(jobs, jobsPath)
  return jobsPath
}
