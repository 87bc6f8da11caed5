/**
 * Embedding extractors (default classical backends).
 *
 * Appearance track: 8x8 average-luma grid per frame, L2-normalized; stands
 * in for an object-centric encoder. Scene track: 4x4x4 RGB histogram per
 * frame, L1-then-L2 normalized; stands in for a scene-semantics encoder.
 * Whole-video embedding: mean/std pooling of the scene track over time.
 * All are deterministic functions of the pixels.
 */

import { Frame, luma } from './image.js'

export const APPEARANCE_DIM = 64
export const SCENE_DIM = 64
export const VIDEO_DIM = 2 * SCENE_DIM

function l2normalize(v: Float32Array): Float32Array {
  let norm = 0
  for (const x of v) norm += x * x
  norm = Math.sqrt(norm)
  if (norm > 0) for (let i = 0; i < v.length; i++) v[i] /= norm
  return v
}

/** 8x8 pooled-luma grid, L2-normalized: one 64-dim vector per frame. */
export function appearanceVector(frame: Frame): Float32Array {
  const grid = 8
  const g = luma(frame)
  const out = new Float32Array(grid * grid)
  const cellW = frame.width / grid
  const cellH = frame.height / grid
  for (let gy = 0; gy < grid; gy++) {
    for (let gx = 0; gx < grid; gx++) {
      let sum = 0
      let count = 0
      const y0 = Math.floor(gy * cellH)
      const y1 = Math.floor((gy + 1) * cellH)
      const x0 = Math.floor(gx * cellW)
      const x1 = Math.floor((gx + 1) * cellW)
      for (let y = y0; y < y1; y++) {
        for (let x = x0; x < x1; x++) {
          sum += g[y * frame.width + x]
          count++
        }
      }
      out[gy * grid + gx] = count ? sum / (count * 255) : 0
    }
  }
  return l2normalize(out)
}

/** 4x4x4 RGB histogram, normalized: one 64-dim vector per frame. */
export function sceneVector(frame: Frame): Float32Array {
  const out = new Float32Array(64)
  const n = frame.width * frame.height
  for (let i = 0; i < n; i++) {
    const r = frame.rgb[i * 3] >> 6
    const g = frame.rgb[i * 3 + 1] >> 6
    const b = frame.rgb[i * 3 + 2] >> 6
    out[(r << 4) | (g << 2) | b] += 1
  }
  for (let i = 0; i < 64; i++) out[i] /= n
  return l2normalize(out)
}

export function trackTensor(frames: Frame[], fn: (f: Frame) => Float32Array, dim: number): Float32Array {
  const out = new Float32Array(frames.length * dim)
  frames.forEach((f, t) => out.set(fn(f), t * dim))
  return out
}

/** (1, 2*SCENE_DIM) whole-video embedding: temporal mean and std per bin. */
export function videoEmbedding(frames: Frame[]): Float32Array {
  const t = frames.length
  const track = trackTensor(frames, sceneVector, SCENE_DIM)
  const out = new Float32Array(VIDEO_DIM)
  for (let d = 0; d < SCENE_DIM; d++) {
    let mean = 0
    for (let i = 0; i < t; i++) mean += track[i * SCENE_DIM + d]
    mean /= t
    let varsum = 0
    for (let i = 0; i < t; i++) {
      const diff = track[i * SCENE_DIM + d] - mean
      varsum += diff * diff
    }
    out[d] = mean
    out[SCENE_DIM + d] = Math.sqrt(varsum / t)
  }
  return out
}

export const TEXT_DIM = 64

/** Deterministic hashed bag-of-words embedding for description text. */
export function textEmbedding(text: string): Float32Array {
  const out = new Float32Array(TEXT_DIM)
  const tokens = text.toLowerCase().split(/[^a-z0-9]+/).filter(Boolean)
  for (const token of tokens) {
    let h = 2166136261
    for (let i = 0; i < token.length; i++) {
      h ^= token.charCodeAt(i)
      h = Math.imul(h, 16777619)
    }
    out[(h >>> 0) % TEXT_DIM] += 1
  }
  return l2normalize(out)
}
