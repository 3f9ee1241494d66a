import * as fs from 'fs'

const MAGIC = 'GLDC'
const VERSION = 1

export interface DescriptorEntry {
  frameId: number
  vector: Float32Array
}

/** Write the retrieval backend's binary format: magic "GLDC", u32 version,
 * u32 count, u32 dim, then per record a u64 frame id and dim float32 values,
 * all little-endian. */
export function writeDescriptors(path: string, entries: DescriptorEntry[]): void {
  const dim = entries.length ? entries[0].vector.length : 0
  for (const e of entries) {
    if (e.vector.length !== dim) {
      throw new Error(
        `frame ${e.frameId}: dimension ${e.vector.length} != ${dim}`,
      )
    }
  }
  const record = 8 + 4 * dim
  const buf = Buffer.alloc(16 + entries.length * record)
  buf.write(MAGIC, 0, 'ascii')
  buf.writeUInt32LE(VERSION, 4)
  buf.writeUInt32LE(entries.length, 8)
  buf.writeUInt32LE(dim, 12)
  let off = 16
  for (const e of entries) {
    buf.writeBigUInt64LE(BigInt(e.frameId), off)
    off += 8
    for (let i = 0; i < dim; i++) {
      buf.writeFloatLE(e.vector[i], off)
      off += 4
    }
  }
  fs.writeFileSync(path, buf)
}

export function readDescriptors(path: string): DescriptorEntry[] {
  const buf = fs.readFileSync(path)
  if (buf.length < 16 || buf.toString('ascii', 0, 4) !== MAGIC) {
    throw new Error(`${path}: bad descriptor magic`)
  }
  const version = buf.readUInt32LE(4)
  if (version !== VERSION) {
    throw new Error(`${path}: unsupported version ${version}`)
  }
  const count = buf.readUInt32LE(8)
  const dim = buf.readUInt32LE(12)
  const record = 8 + 4 * dim
  if (buf.length !== 16 + count * record) {
    throw new Error(`${path}: truncated descriptor file`)
  }
  const out: DescriptorEntry[] = []
  let off = 16
  for (let k = 0; k < count; k++) {
    const frameId = Number(buf.readBigUInt64LE(off))
    off += 8
    const vector = new Float32Array(dim)
    for (let i = 0; i < dim; i++) {
      vector[i] = buf.readFloatLE(off)
      off += 4
    }
    out.push({ frameId, vector })
  }
  return out
}
