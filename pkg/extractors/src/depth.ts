/**
 * Monocular pseudo-depth (default classical backend).
 *
 * Tabletop prior: depth grows toward the top of the frame (farther from
 * the camera) and darker pixels read as slightly farther. Values stay
 * well above the evaluation engine's 1e-3 validity mask. A learned
 * monocular-depth backend can replace this per ExtractorSpec.
 */

import { Frame, luma } from './image.js'

export function depthMap(frame: Frame): Float32Array {
  const g = luma(frame)
  const { width, height } = frame
  const out = new Float32Array(height * width)
  for (let y = 0; y < height; y++) {
    const rowDepth = 0.5 + 2.0 * (1 - y / height) // top of frame is far
    for (let x = 0; x < width; x++) {
      const shade = 1 - g[y * width + x] / 255
      out[y * width + x] = rowDepth + 0.5 * shade
    }
  }
  return out
}

/** (T, H, W) float32 depth stack. */
export function depthTensor(frames: Frame[]): Float32Array {
  const { width, height } = frames[0]
  const out = new Float32Array(frames.length * height * width)
  frames.forEach((f, t) => out.set(depthMap(f), t * height * width))
  return out
}
