import * as fs from 'fs'

export interface LabeledFrame {
  id: number
  timestamp: number
  position: [number, number, number]
  /** 3x3 rotation, row-major */
  rotation: number[]
}

/** Parse "timestamp tx ty tz qx qy qz qw" lines ('#' comments allowed),
 * sort by timestamp, and assign 0-based ids -- the same convention the
 * localization package uses. */
export function loadTrajectory(path: string): LabeledFrame[] {
  const lines = fs.readFileSync(path, 'utf-8').split('\n')
  const frames: LabeledFrame[] = []
  lines.forEach((raw, i) => {
    const line = raw.split('#', 1)[0].trim()
    if (!line) return
    const parts = line.split(/\s+/).map(Number)
    if (parts.length !== 8 || parts.some((v) => !Number.isFinite(v))) {
      throw new Error(`${path}:${i + 1}: expected 8 numeric fields`)
    }
    const [ts, tx, ty, tz, qx, qy, qz, qw] = parts
    const norm = Math.hypot(qx, qy, qz, qw)
    if (norm < 0.999 || norm > 1.001) {
      throw new Error(`${path}:${i + 1}: quaternion norm ${norm}`)
    }
    frames.push({
      id: -1,
      timestamp: ts,
      position: [tx, ty, tz],
      rotation: quatToRot(qx / norm, qy / norm, qz / norm, qw / norm),
    })
  })
  frames.sort((a, b) => a.timestamp - b.timestamp)
  frames.forEach((fr, i) => (fr.id = i))
  return frames
}

export function quatToRot(x: number, y: number, z: number, w: number): number[] {
  return [
    1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w),
    2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w),
    2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y),
  ]
}

export function positionDistance(a: LabeledFrame, b: LabeledFrame): number {
  return Math.hypot(
    a.position[0] - b.position[0],
    a.position[1] - b.position[1],
    a.position[2] - b.position[2],
  )
}

/** Angle of Ra^T Rb in radians, trace argument clamped. */
export function misalignmentAngle(a: LabeledFrame, b: LabeledFrame): number {
  const Ra = a.rotation
  const Rb = b.rotation
  let trace = 0
  for (let i = 0; i < 3; i++) {
    for (let k = 0; k < 3; k++) {
      trace += Ra[k * 3 + i] * Rb[k * 3 + i]
    }
  }
  const c = Math.min(1, Math.max(-1, (trace - 1) / 2))
  return Math.acos(c)
}
