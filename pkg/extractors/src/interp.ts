/**
 * Mid-frame prediction (default backend: per-pixel neighbor mean).
 *
 * Predicts the odd-index frames from their even-index neighbors, the
 * classic interpolation baseline. Output shape ((T-1)/2 floored, H, W, 3)
 * matches the evaluation bundle's interp contract.
 */

import { Frame } from './image.js'

export function predictMidFrames(frames: Frame[]): Frame[] {
  const count = Math.floor((frames.length - 1) / 2)
  const out: Frame[] = []
  for (let k = 0; k < count; k++) {
    const prev = frames[2 * k]
    const next = frames[2 * k + 2]
    const rgb = new Uint8Array(prev.rgb.length)
    for (let i = 0; i < rgb.length; i++) {
      rgb[i] = Math.round((prev.rgb[i] + next.rgb[i]) / 2)
    }
    out.push({ width: prev.width, height: prev.height, rgb })
  }
  return out
}
