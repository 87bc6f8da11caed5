/**
 * Extraction pipeline: raw frame directories -> evaluation bundle.
 *
 * Every artifact kind runs through a pluggable extractor whose backing
 * identifier is recorded in the per-video extraction state. Outputs are
 * written atomically and keyed by (input digest, spec digest): re-running
 * on unchanged inputs rewrites nothing.
 */

import { createHash } from 'node:crypto'
import { promises as fs } from 'node:fs'
import path from 'node:path'

import { describeVideo } from './caption.js'
import { depthTensor } from './depth.js'
import { detectionTrack } from './detect.js'
import {
  APPEARANCE_DIM,
  SCENE_DIM,
  TEXT_DIM,
  VIDEO_DIM,
  appearanceVector,
  sceneVector,
  trackTensor,
  videoEmbedding,
} from './features.js'
import { backwardFlows, forwardFlows } from './flow.js'
import { Frame, encodePng, framesTensorData, loadFrameDir } from './image.js'
import { predictMidFrames } from './interp.js'
import { Manifest, emptyManifest, writeIndex, writeJsonAtomic } from './manifest.js'
import { frameScoreTensor } from './scores.js'
import { TensorData, writeTensorFile } from './tensor.js'

/** Backing model identifiers for each artifact kind (default backends). */
export const DEFAULT_BACKENDS: Record<string, string> = {
  frames: 'png-decode',
  flow_fwd: 'block-match-flow/8x8r4',
  flow_bwd: 'block-match-flow/8x8r4',
  depth: 'tabletop-prior-depth',
  appearance_track: 'luma-grid-64',
  scene_track: 'rgb-hist-64',
  st_embedding: 'scene-meanstd-128',
  frame_scores: 'laplacian-sharpness+colorfulness',
  desc_embedding: 'structured-caption+hash-bow-64',
  interp: 'neighbor-mean-interp',
  detections: 'motion-box-detector',
  judge: 'wire-protocol-judge',
}

export interface VideoJob {
  video_id: string
  model_id: string
  task_id: string
  instruction: string
  role: 'generated' | 'ground_truth'
  frames_dir: string
  gt_ref?: string | null
}

export interface ExtractOptions {
  judgeEndpoint?: string
  judgeModel?: string
  log?: (line: string) => void
}

interface ExtractionState {
  backends: Record<string, string>
  inputDigest: string
  artifacts: Record<string, string>
}

function sha256(buf: Buffer | string): string {
  return createHash('sha256').update(buf).digest('hex')
}

async function framesDigest(frames: Frame[]): Promise<string> {
  const h = createHash('sha256')
  h.update(`${frames.length}x${frames[0].height}x${frames[0].width}`)
  for (const f of frames) h.update(f.rgb)
  return h.digest('hex')
}

async function fileExists(p: string): Promise<boolean> {
  try {
    await fs.stat(p)
    return true
  } catch {
    return false
  }
}

async function readState(statePath: string): Promise<ExtractionState | null> {
  try {
    return JSON.parse(await fs.readFile(statePath, 'utf-8')) as ExtractionState
  } catch {
    return null
  }
}

/** Sample the five policy-judge frames: first, three middle, last. */
export function policyFrameIndices(t: number): number[] {
  if (t <= 5) return Array.from({ length: t }, (_, i) => i)
  return [0, Math.floor(t / 4), Math.floor(t / 2), Math.floor((3 * t) / 4), t - 1]
}

/** Eight evenly spaced quality-judge frames including first and last. */
export function qualityFrameIndices(t: number): number[] {
  if (t <= 8) return Array.from({ length: t }, (_, i) => i)
  const idx: number[] = []
  for (let k = 0; k < 8; k++) idx.push(Math.round((k * (t - 1)) / 7))
  return [...new Set(idx)]
}

async function requestJudgeVerdict(
  endpoint: string,
  model: string,
  prompt: string,
  images: string[],
): Promise<{ raw: string; digest: string }> {
  const body = { model, prompt, images }
  const response = await fetch(endpoint, {
    method: 'POST',
    headers: { 'Content-Type': 'application/json' },
    body: JSON.stringify(body),
  })
  if (!response.ok) {
    throw new Error(`judge endpoint returned HTTP ${response.status}`)
  }
  const parsed = (await response.json()) as { content: string }
  const digestBody = JSON.stringify({ model, prompt, images })
  return { raw: parsed.content, digest: sha256(digestBody) }
}

/** Minimal quality prompt for the shim round trip; the evaluation engine
 * owns the full rubric prompt for live runs against real judges. */
function shimQualityPrompt(instruction: string): string {
  return (
    'You are an expert evaluator for robot interaction videos. ' +
    `Evaluate the sampled frames against the instruction: ${instruction}. ` +
    'Output ONLY a JSON object with the keys Interaction_Quality, Perspectivity, Instruction_Following.'
  )
}

function parseQualityScores(raw: string): Record<string, { score: number; reason: string }> {
  const start = raw.indexOf('{')
  if (start < 0) throw new Error('judge shim returned no JSON object')
  const obj = JSON.parse(raw.slice(start))
  for (const key of ['Interaction_Quality', 'Perspectivity', 'Instruction_Following']) {
    const score = obj[key]?.score
    if (!Number.isInteger(score) || score < 1 || score > 5) {
      throw new Error(`judge shim verdict invalid for ${key}`)
    }
  }
  return obj
}

export interface ExtractResult {
  manifestPath: string
  written: string[]
  skipped: string[]
}

export async function extractVideo(
  bundleRoot: string,
  job: VideoJob,
  options: ExtractOptions = {},
): Promise<ExtractResult> {
  const log = options.log ?? (() => {})
  const frames = await loadFrameDir(job.frames_dir)
  const t = frames.length
  const { width, height } = frames[0]
  const videoDir = path.join(bundleRoot, 'videos', job.video_id)
  const statePath = path.join(videoDir, 'extract_state.json')

  const inputDigest = await framesDigest(frames)
  const specDigest = sha256(JSON.stringify(DEFAULT_BACKENDS))
  const cacheKey = `${inputDigest}:${specDigest}`
  const previous = await readState(statePath)

  const manifest: Manifest = emptyManifest(
    job.video_id,
    job.model_id,
    job.task_id,
    job.instruction,
    job.role,
    t,
    height,
    width,
    job.gt_ref ?? null,
  )

  const written: string[] = []
  const skipped: string[] = []
  const artifacts: Record<string, string> = {}

  const emitTensor = async (kind: string, tensor: () => TensorData): Promise<string> => {
    const rel = `videos/${job.video_id}/${kind}.bin`
    const target = path.join(bundleRoot, rel)
    if (previous?.inputDigest === cacheKey && previous.artifacts[kind] && (await fileExists(target))) {
      skipped.push(kind)
    } else {
      await writeTensorFile(tensor(), target)
      written.push(kind)
    }
    artifacts[kind] = rel
    return rel
  }

  manifest.frames.path = await emitTensor('frames', () => ({
    dtype: 'uint8',
    shape: [t, height, width, 3],
    data: framesTensorData(frames),
  }))
  manifest.flow_fwd = await emitTensor('flow_fwd', () => ({
    dtype: 'float32',
    shape: [t - 1, height, width, 2],
    data: forwardFlows(frames),
  }))
  manifest.flow_bwd = await emitTensor('flow_bwd', () => ({
    dtype: 'float32',
    shape: [t - 1, height, width, 2],
    data: backwardFlows(frames),
  }))
  manifest.depth = await emitTensor('depth', () => ({
    dtype: 'float32',
    shape: [t, height, width],
    data: depthTensor(frames),
  }))
  manifest.appearance_track = await emitTensor('appearance_track', () => ({
    dtype: 'float32',
    shape: [t, APPEARANCE_DIM],
    data: trackTensor(frames, appearanceVector, APPEARANCE_DIM),
  }))
  manifest.scene_track = await emitTensor('scene_track', () => ({
    dtype: 'float32',
    shape: [t, SCENE_DIM],
    data: trackTensor(frames, sceneVector, SCENE_DIM),
  }))
  manifest.st_embedding = await emitTensor('st_embedding', () => ({
    dtype: 'float32',
    shape: [1, VIDEO_DIM],
    data: videoEmbedding(frames),
  }))
  manifest.frame_scores = await emitTensor('frame_scores', () => ({
    dtype: 'float32',
    shape: [t, 2],
    data: frameScoreTensor(frames),
  }))

  const nMid = Math.floor((t - 1) / 2)
  if (nMid >= 1) {
    manifest.interp = await emitTensor('interp', () => ({
      dtype: 'uint8',
      shape: [nMid, height, width, 3],
      data: framesTensorData(predictMidFrames(frames)),
    }))
  }

  // caption + description embedding (text kept beside the tensor for audit)
  const caption = describeVideo(frames, job.instruction)
  const descriptionPath = path.join(videoDir, 'description.txt')
  if (!(previous?.inputDigest === cacheKey && (await fileExists(descriptionPath)))) {
    await fs.mkdir(videoDir, { recursive: true })
    await fs.writeFile(descriptionPath, caption.description + '\n')
  }
  manifest.desc_embedding = await emitTensor('desc_embedding', () => ({
    dtype: 'float32',
    shape: [1, TEXT_DIM],
    data: caption.embedding,
  }))

  const detRel = `videos/${job.video_id}/detections.json`
  if (previous?.inputDigest === cacheKey && (await fileExists(path.join(bundleRoot, detRel)))) {
    skipped.push('detections')
  } else {
    await writeJsonAtomic(detectionTrack(frames), path.join(bundleRoot, detRel))
    written.push('detections')
  }
  manifest.detections = detRel
  artifacts.detections = detRel

  if (options.judgeEndpoint && job.role === 'generated') {
    const judgeRel = `videos/${job.video_id}/judge.json`
    if (previous?.inputDigest === cacheKey && (await fileExists(path.join(bundleRoot, judgeRel)))) {
      skipped.push('judge')
    } else {
      const indices = qualityFrameIndices(t)
      const images = indices.map((i) => encodePng(frames[i]).toString('base64'))
      const prompt = shimQualityPrompt(job.instruction)
      const { raw, digest } = await requestJudgeVerdict(
        options.judgeEndpoint,
        options.judgeModel ?? 'local-judge-shim',
        prompt,
        images,
      )
      const scores = parseQualityScores(raw)
      await writeJsonAtomic(
        {
          kind: 'quality',
          request_digest: digest,
          raw_response: raw,
          parsed: { kind: 'quality', scores },
        },
        path.join(bundleRoot, judgeRel),
      )
      written.push('judge')
    }
    manifest.judge = judgeRel
    artifacts.judge = judgeRel
  }

  const manifestRel = `manifests/${job.video_id}.json`
  await writeJsonAtomic(manifest, path.join(bundleRoot, manifestRel))
  await writeJsonAtomic(
    { backends: DEFAULT_BACKENDS, inputDigest: cacheKey, artifacts } satisfies ExtractionState,
    statePath,
  )
  log(`${job.video_id}: wrote ${written.length}, skipped ${skipped.length} (digest match)`)
  return { manifestPath: manifestRel, written, skipped }
}

export async function extractAll(
  bundleRoot: string,
  jobs: VideoJob[],
  options: ExtractOptions = {},
): Promise<ExtractResult[]> {
  const results: ExtractResult[] = []
  for (const job of [...jobs].sort((a, b) => a.video_id.localeCompare(b.video_id))) {
    results.push(await extractVideo(bundleRoot, job, options))
  }
  await writeIndex(
    bundleRoot,
    results.map((r) => r.manifestPath),
  )
  return results
}
