/**
 * Per-frame quality and aesthetic scores (default classical backends).
 *
 * Quality proxy: Laplacian-energy sharpness mapped onto the 0-100 scale a
 * learned quality predictor would use. Aesthetic proxy: Hasler-Suesstrunk
 * colorfulness mapped onto 0-10. Both deterministic.
 */

import { Frame, luma } from './image.js'

/** Mean absolute 4-neighbour Laplacian of the luma plane. */
function sharpness(frame: Frame): number {
  const g = luma(frame)
  const { width, height } = frame
  let total = 0
  let count = 0
  for (let y = 1; y < height - 1; y++) {
    for (let x = 1; x < width - 1; x++) {
      const c = g[y * width + x]
      const lap =
        g[(y - 1) * width + x] + g[(y + 1) * width + x] + g[y * width + x - 1] + g[y * width + x + 1] - 4 * c
      total += Math.abs(lap)
      count++
    }
  }
  return count ? total / count : 0
}

export function imageQualityScore(frame: Frame): number {
  // mean |Laplacian| of ~60 (on 0-255 luma) saturates the scale
  const s = sharpness(frame)
  return Math.max(0, Math.min(100, (100 * s) / 60))
}

/** Colorfulness: mean/std of opponent channels (Hasler & Suesstrunk). */
export function aestheticScore(frame: Frame): number {
  const n = frame.width * frame.height
  let rgMean = 0
  let ybMean = 0
  const rg = new Float32Array(n)
  const yb = new Float32Array(n)
  for (let i = 0; i < n; i++) {
    const r = frame.rgb[i * 3]
    const g = frame.rgb[i * 3 + 1]
    const b = frame.rgb[i * 3 + 2]
    rg[i] = r - g
    yb[i] = 0.5 * (r + g) - b
    rgMean += rg[i]
    ybMean += yb[i]
  }
  rgMean /= n
  ybMean /= n
  let rgVar = 0
  let ybVar = 0
  for (let i = 0; i < n; i++) {
    rgVar += (rg[i] - rgMean) ** 2
    ybVar += (yb[i] - ybMean) ** 2
  }
  const std = Math.sqrt(rgVar / n + ybVar / n)
  const mean = Math.sqrt(rgMean ** 2 + ybMean ** 2)
  const colorfulness = std + 0.3 * mean
  // ~100 is a vivid natural image; map onto the 0-10 aesthetic scale
  return Math.max(0, Math.min(10, colorfulness / 10))
}

/** (T, 2) float32: column 0 quality (0-100), column 1 aesthetic (0-10). */
export function frameScoreTensor(frames: Frame[]): Float32Array {
  const out = new Float32Array(frames.length * 2)
  frames.forEach((f, t) => {
    out[t * 2] = imageQualityScore(f)
    out[t * 2 + 1] = aestheticScore(f)
  })
  return out
}
