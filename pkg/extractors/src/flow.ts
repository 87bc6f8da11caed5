/**
 * Dense optical flow by exhaustive block matching.
 *
 * The default backend when no learned flow model is plugged in: frames
 * split into 8x8 blocks, each block searches +-4 px for the minimum
 * sum-of-absolute-differences displacement, and the block vector is
 * assigned to all its pixels. Deterministic (ties resolve to the smallest
 * displacement, scanning order fixed).
 */

import { Frame, luma } from './image.js'

const BLOCK = 8
const RADIUS = 4

function blockSad(
  a: Float32Array,
  b: Float32Array,
  width: number,
  height: number,
  bx: number,
  by: number,
  dx: number,
  dy: number,
): number {
  let sad = 0
  for (let y = by; y < by + BLOCK; y++) {
    for (let x = bx; x < bx + BLOCK; x++) {
      let sx = x + dx
      let sy = y + dy
      if (sx < 0) sx = 0
      else if (sx >= width) sx = width - 1
      if (sy < 0) sy = 0
      else if (sy >= height) sy = height - 1
      sad += Math.abs(a[y * width + x] - b[sy * width + sx])
    }
  }
  return sad
}

/** Flow from ``src`` to ``dst`` as (H, W, 2) float32: [dx, dy] per pixel. */
export function blockMatchFlow(src: Frame, dst: Frame): Float32Array {
  const { width, height } = src
  const a = luma(src)
  const b = luma(dst)
  const flow = new Float32Array(height * width * 2)
  for (let by = 0; by < height; by += BLOCK) {
    for (let bx = 0; bx < width; bx += BLOCK) {
      let bestDx = 0
      let bestDy = 0
      let bestSad = Infinity
      for (let dy = -RADIUS; dy <= RADIUS; dy++) {
        for (let dx = -RADIUS; dx <= RADIUS; dx++) {
          const sad = blockSad(a, b, width, height, bx, by, dx, dy)
          const closer =
            sad < bestSad ||
            (sad === bestSad && Math.abs(dx) + Math.abs(dy) < Math.abs(bestDx) + Math.abs(bestDy))
          if (closer) {
            bestSad = sad
            bestDx = dx
            bestDy = dy
          }
        }
      }
      const yEnd = Math.min(by + BLOCK, height)
      const xEnd = Math.min(bx + BLOCK, width)
      for (let y = by; y < yEnd; y++) {
        for (let x = bx; x < xEnd; x++) {
          flow[(y * width + x) * 2] = bestDx
          flow[(y * width + x) * 2 + 1] = bestDy
        }
      }
    }
  }
  return flow
}

/** Forward flows u_t (t -> t+1) stacked as (T-1, H, W, 2). */
export function forwardFlows(frames: Frame[]): Float32Array {
  const { width, height } = frames[0]
  const out = new Float32Array((frames.length - 1) * height * width * 2)
  for (let t = 0; t < frames.length - 1; t++) {
    out.set(blockMatchFlow(frames[t], frames[t + 1]), t * height * width * 2)
  }
  return out
}

/** Backward flows u'_{t+1} (t+1 -> t) stacked as (T-1, H, W, 2). */
export function backwardFlows(frames: Frame[]): Float32Array {
  const { width, height } = frames[0]
  const out = new Float32Array((frames.length - 1) * height * width * 2)
  for (let t = 0; t < frames.length - 1; t++) {
    out.set(blockMatchFlow(frames[t + 1], frames[t]), t * height * width * 2)
  }
  return out
}
