/** In-memory frame representation and PNG frame-directory loading. */

import { promises as fs } from 'node:fs'
import path from 'node:path'
import { PNG } from 'pngjs'

/** One RGB frame, row-major, 3 channels. */
export interface Frame {
  width: number
  height: number
  /** length = height * width * 3 */
  rgb: Uint8Array
}

export function frameAt(frame: Frame, x: number, y: number): [number, number, number] {
  const i = (y * frame.width + x) * 3
  return [frame.rgb[i], frame.rgb[i + 1], frame.rgb[i + 2]]
}

export function luma(frame: Frame): Float32Array {
  const out = new Float32Array(frame.width * frame.height)
  for (let i = 0; i < out.length; i++) {
    out[i] =
      0.299 * frame.rgb[i * 3] + 0.587 * frame.rgb[i * 3 + 1] + 0.114 * frame.rgb[i * 3 + 2]
  }
  return out
}

export function decodePng(buf: Buffer): Frame {
  const png = PNG.sync.read(buf)
  const rgb = new Uint8Array(png.width * png.height * 3)
  for (let i = 0; i < png.width * png.height; i++) {
    rgb[i * 3] = png.data[i * 4]
    rgb[i * 3 + 1] = png.data[i * 4 + 1]
    rgb[i * 3 + 2] = png.data[i * 4 + 2]
  }
  return { width: png.width, height: png.height, rgb }
}

export function encodePng(frame: Frame): Buffer {
  const png = new PNG({ width: frame.width, height: frame.height })
  for (let i = 0; i < frame.width * frame.height; i++) {
    png.data[i * 4] = frame.rgb[i * 3]
    png.data[i * 4 + 1] = frame.rgb[i * 3 + 1]
    png.data[i * 4 + 2] = frame.rgb[i * 3 + 2]
    png.data[i * 4 + 3] = 255
  }
  return PNG.sync.write(png)
}

/** Load every .png in a directory, sorted by filename. */
export async function loadFrameDir(dir: string): Promise<Frame[]> {
  const names = (await fs.readdir(dir)).filter((n) => n.toLowerCase().endsWith('.png')).sort()
  if (names.length === 0) throw new Error(`no .png frames in ${dir}`)
  const frames: Frame[] = []
  for (const name of names) {
    frames.push(decodePng(await fs.readFile(path.join(dir, name))))
  }
  const { width, height } = frames[0]
  for (const f of frames) {
    if (f.width !== width || f.height !== height) {
      throw new Error(`frame size mismatch in ${dir}`)
    }
  }
  return frames
}

/** Frames as one (T, H, W, 3) uint8 tensor payload. */
export function framesTensorData(frames: Frame[]): Uint8Array {
  const { width, height } = frames[0]
  const out = new Uint8Array(frames.length * height * width * 3)
  frames.forEach((f, t) => out.set(f.rgb, t * height * width * 3))
  return out
}
