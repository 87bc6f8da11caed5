/** Bundle manifest and index writing, matching the engine's JSON schema. */

import { promises as fs } from 'node:fs'
import path from 'node:path'

export const TENSOR_KINDS = [
  'flow_fwd',
  'flow_bwd',
  'depth',
  'appearance_track',
  'scene_track',
  'st_embedding',
  'frame_scores',
  'desc_embedding',
  'interp',
] as const

export type TensorKind = (typeof TENSOR_KINDS)[number]

export interface Manifest {
  video_id: string
  model_id: string
  task_id: string
  instruction: string
  role: 'generated' | 'ground_truth'
  frames: { path: string | null; T: number; H: number; W: number }
  flow_fwd: string | null
  flow_bwd: string | null
  depth: string | null
  appearance_track: string | null
  scene_track: string | null
  st_embedding: string | null
  frame_scores: string | null
  desc_embedding: string | null
  interp: string | null
  detections: string | null
  judge: string | null
  gt_ref: string | null
}

export function emptyManifest(
  videoId: string,
  modelId: string,
  taskId: string,
  instruction: string,
  role: 'generated' | 'ground_truth',
  t: number,
  h: number,
  w: number,
  gtRef: string | null,
): Manifest {
  return {
    video_id: videoId,
    model_id: modelId,
    task_id: taskId,
    instruction,
    role,
    frames: { path: null, T: t, H: h, W: w },
    flow_fwd: null,
    flow_bwd: null,
    depth: null,
    appearance_track: null,
    scene_track: null,
    st_embedding: null,
    frame_scores: null,
    desc_embedding: null,
    interp: null,
    detections: null,
    judge: null,
    gt_ref: gtRef,
  }
}

function stableStringify(value: unknown): string {
  if (Array.isArray(value)) {
    return '[' + value.map(stableStringify).join(',') + ']'
  }
  if (value !== null && typeof value === 'object') {
    const entries = Object.entries(value as Record<string, unknown>)
      .sort(([a], [b]) => (a < b ? -1 : a > b ? 1 : 0))
      .map(([k, v]) => JSON.stringify(k) + ':' + stableStringify(v))
    return '{' + entries.join(',') + '}'
  }
  return JSON.stringify(value)
}

/** Key-sorted JSON with trailing newline; byte-stable across runs. */
export async function writeJsonAtomic(obj: unknown, filePath: string): Promise<void> {
  await fs.mkdir(path.dirname(filePath), { recursive: true })
  const tmp = `${filePath}.tmp-${process.pid}`
  await fs.writeFile(tmp, stableStringify(obj) + '\n')
  await fs.rename(tmp, filePath)
}

export async function writeIndex(bundleRoot: string, manifestPaths: string[]): Promise<void> {
  await writeJsonAtomic({ videos: [...manifestPaths].sort() }, path.join(bundleRoot, 'index.json'))
}
