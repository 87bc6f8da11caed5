/**
 * Arm/end-effector detection (default classical backend).
 *
 * The moving foreground is boxed from frame differences: pixels whose luma
 * changed most against the previous frame vote for a bounding box, with
 * confidence from the fraction of strong movers inside it. The first frame
 * boxes the brightest region instead (no motion reference yet). Every
 * frame emits at least one candidate so tracks never go empty.
 */

import { Frame, luma } from './image.js'

export interface Detection {
  box: [number, number, number, number]
  conf: number
}

const DIFF_THRESHOLD = 12

function boxFromMask(
  mask: Uint8Array,
  width: number,
  height: number,
): [number, number, number, number] | null {
  let x0 = width
  let y0 = height
  let x1 = -1
  let y1 = -1
  for (let y = 0; y < height; y++) {
    for (let x = 0; x < width; x++) {
      if (mask[y * width + x]) {
        if (x < x0) x0 = x
        if (x > x1) x1 = x
        if (y < y0) y0 = y
        if (y > y1) y1 = y
      }
    }
  }
  if (x1 < 0) return null
  return [x0, y0, x1 + 1, y1 + 1]
}

function brightestRegionBox(frame: Frame): Detection {
  const g = luma(frame)
  let max = 0
  for (const v of g) if (v > max) max = v
  const mask = new Uint8Array(g.length)
  let hits = 0
  for (let i = 0; i < g.length; i++) {
    if (g[i] >= max * 0.9) {
      mask[i] = 1
      hits++
    }
  }
  const box = boxFromMask(mask, frame.width, frame.height)
  if (!box) return { box: [0, 0, frame.width, frame.height], conf: 0.1 }
  return { box, conf: Math.min(1, 0.3 + hits / g.length) }
}

export function detectFrame(frame: Frame, previous: Frame | null): Detection[] {
  if (!previous) return [brightestRegionBox(frame)]
  const a = luma(previous)
  const b = luma(frame)
  const mask = new Uint8Array(a.length)
  let movers = 0
  for (let i = 0; i < a.length; i++) {
    if (Math.abs(a[i] - b[i]) > DIFF_THRESHOLD) {
      mask[i] = 1
      movers++
    }
  }
  const box = boxFromMask(mask, frame.width, frame.height)
  if (!box) return [brightestRegionBox(frame)]
  const area = (box[2] - box[0]) * (box[3] - box[1])
  return [{ box, conf: Math.min(1, 0.5 + movers / Math.max(area, 1) / 2) }]
}

/** One candidate list per frame, matching the engine's detections schema. */
export function detectionTrack(frames: Frame[]): Detection[][] {
  return frames.map((f, i) => detectFrame(f, i > 0 ? frames[i - 1] : null))
}
