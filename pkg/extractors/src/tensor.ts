/**
 * Binary tensor container shared with the evaluation engine.
 *
 * Layout (little-endian): magic "WABT", uint32 version (1), uint8 dtype
 * code (0 = float32, 1 = uint8), uint8 ndim (1..4), ndim x uint64 dims,
 * then the row-major payload. Rewriting the same data yields identical
 * bytes, which the digest-based idempotence relies on.
 */

import { promises as fs } from 'node:fs'
import path from 'node:path'

const MAGIC = Buffer.from('WABT', 'ascii')
const VERSION = 1

export type TensorData =
  | { dtype: 'float32'; shape: number[]; data: Float32Array }
  | { dtype: 'uint8'; shape: number[]; data: Uint8Array }

const DTYPE_CODES = { float32: 0, uint8: 1 } as const

function elementCount(shape: number[]): number {
  return shape.reduce((a, b) => a * b, 1)
}

export function encodeTensor(tensor: TensorData): Buffer {
  const { shape, data } = tensor
  if (shape.length < 1 || shape.length > 4) {
    throw new Error(`tensor ndim must be 1..4, got ${shape.length}`)
  }
  if (shape.some((d) => !Number.isInteger(d) || d < 1)) {
    throw new Error(`every dim must be a positive integer, got ${shape}`)
  }
  if (elementCount(shape) !== data.length) {
    throw new Error(`shape ${shape} does not match data length ${data.length}`)
  }
  const header = Buffer.alloc(10 + 8 * shape.length)
  MAGIC.copy(header, 0)
  header.writeUInt32LE(VERSION, 4)
  header.writeUInt8(DTYPE_CODES[tensor.dtype], 8)
  header.writeUInt8(shape.length, 9)
  shape.forEach((d, i) => header.writeBigUInt64LE(BigInt(d), 10 + 8 * i))

  let payload: Buffer
  if (tensor.dtype === 'float32') {
    payload = Buffer.alloc(data.length * 4)
    const f32 = tensor.data as Float32Array
    for (let i = 0; i < f32.length; i++) payload.writeFloatLE(f32[i], i * 4)
  } else {
    payload = Buffer.from(data as Uint8Array)
  }
  return Buffer.concat([header, payload])
}

export function decodeTensor(buf: Buffer): TensorData {
  if (buf.length < 10 || !buf.subarray(0, 4).equals(MAGIC)) {
    throw new Error('bad tensor magic')
  }
  const version = buf.readUInt32LE(4)
  if (version !== VERSION) throw new Error(`unsupported tensor version ${version}`)
  const dtypeCode = buf.readUInt8(8)
  const ndim = buf.readUInt8(9)
  if (ndim < 1 || ndim > 4) throw new Error(`ndim ${ndim} out of range`)
  const shape: number[] = []
  for (let i = 0; i < ndim; i++) {
    shape.push(Number(buf.readBigUInt64LE(10 + 8 * i)))
  }
  const offset = 10 + 8 * ndim
  const count = elementCount(shape)
  if (dtypeCode === 0) {
    if (buf.length - offset !== count * 4) throw new Error('payload length mismatch')
    const data = new Float32Array(count)
    for (let i = 0; i < count; i++) data[i] = buf.readFloatLE(offset + i * 4)
    return { dtype: 'float32', shape, data }
  }
  if (dtypeCode === 1) {
    if (buf.length - offset !== count) throw new Error('payload length mismatch')
    return { dtype: 'uint8', shape, data: Uint8Array.from(buf.subarray(offset)) }
  }
  throw new Error(`unknown dtype code ${dtypeCode}`)
}

/** Write atomically: temp file in the target directory, then rename. */
export async function writeTensorFile(tensor: TensorData, filePath: string): Promise<void> {
  await fs.mkdir(path.dirname(filePath), { recursive: true })
  const tmp = `${filePath}.tmp-${process.pid}`
  await fs.writeFile(tmp, encodeTensor(tensor))
  await fs.rename(tmp, filePath)
}

export async function readTensorFile(filePath: string): Promise<TensorData> {
  return decodeTensor(await fs.readFile(filePath))
}
