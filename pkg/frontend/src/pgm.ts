import * as fs from 'fs'

export interface GrayImage {
  width: number
  height: number
  /** row-major, values in [0, 1] */
  pixels: Float32Array
}

/** Decode a binary PGM (P5) file.  Comments and arbitrary whitespace in the
 * header are handled; only maxval <= 255 is supported. */
export function readPgm(path: string): GrayImage {
  const blob = fs.readFileSync(path)
  let off = 0

  function token(): string {
    // skip whitespace and '#' comments
    for (;;) {
      while (off < blob.length && isSpace(blob[off])) off++
      if (off < blob.length && blob[off] === 0x23) {
        while (off < blob.length && blob[off] !== 0x0a) off++
      } else {
        break
      }
    }
    const start = off
    while (off < blob.length && !isSpace(blob[off])) off++
    return blob.toString('ascii', start, off)
  }

  const magic = token()
  if (magic !== 'P5') {
    throw new Error(`${path}: expected P5 magic, got ${JSON.stringify(magic)}`)
  }
  const width = parseInt(token(), 10)
  const height = parseInt(token(), 10)
  const maxval = parseInt(token(), 10)
  if (!(width > 0 && height > 0)) {
    throw new Error(`${path}: bad dimensions ${width}x${height}`)
  }
  if (!(maxval > 0 && maxval <= 255)) {
    throw new Error(`${path}: unsupported maxval ${maxval}`)
  }
  off++ // single whitespace after maxval
  const need = width * height
  if (blob.length - off < need) {
    throw new Error(`${path}: truncated pixel data`)
  }
  const pixels = new Float32Array(need)
  for (let i = 0; i < need; i++) {
    pixels[i] = blob[off + i] / maxval
  }
  return { width, height, pixels }
}

export function writePgm(path: string, img: GrayImage): void {
  const header = Buffer.from(`P5\n${img.width} ${img.height}\n255\n`, 'ascii')
  const body = Buffer.alloc(img.width * img.height)
  for (let i = 0; i < body.length; i++) {
    body[i] = Math.max(0, Math.min(255, Math.round(img.pixels[i] * 255)))
  }
  fs.writeFileSync(path, Buffer.concat([header, body]))
}

/** Bilinear resample to size x size (the network's fixed input). */
export function resize(img: GrayImage, size: number): GrayImage {
  if (img.width === size && img.height === size) return img
  const out = new Float32Array(size * size)
  const sx = img.width / size
  const sy = img.height / size
  for (let y = 0; y < size; y++) {
    const fy = Math.min((y + 0.5) * sy - 0.5, img.height - 1)
    const y0 = Math.max(0, Math.floor(fy))
    const y1 = Math.min(img.height - 1, y0 + 1)
    const wy = fy - y0
    for (let x = 0; x < size; x++) {
      const fx = Math.min((x + 0.5) * sx - 0.5, img.width - 1)
      const x0 = Math.max(0, Math.floor(fx))
      const x1 = Math.min(img.width - 1, x0 + 1)
      const wx = fx - x0
      const a = img.pixels[y0 * img.width + x0]
      const b = img.pixels[y0 * img.width + x1]
      const c = img.pixels[y1 * img.width + x0]
      const d = img.pixels[y1 * img.width + x1]
      out[y * size + x] =
        (1 - wy) * ((1 - wx) * a + wx * b) + wy * ((1 - wx) * c + wx * d)
    }
  }
  return { width: size, height: size, pixels: out }
}

function isSpace(c: number): boolean {
  return c === 0x20 || c === 0x09 || c === 0x0a || c === 0x0d
}
