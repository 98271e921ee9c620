/**
 * Binary (P5) PGM decoding.
 *
 * The dataset images are grayscale PGM files, which browsers do not render
 * natively, so the client decodes them and paints onto a canvas.
 */

export interface GrayImage {
  width: number;
  height: number;
  /** Row-major intensities already rescaled to 0..255. */
  pixels: Uint8Array;
}

const WHITESPACE = new Set([0x20, 0x09, 0x0a, 0x0d, 0x0b, 0x0c]);
const COMMENT = 0x23; // '#'

export function decodePgm(data: ArrayBuffer | Uint8Array): GrayImage {
  const bytes = data instanceof Uint8Array ? data : new Uint8Array(data);
  let pos = 0;

  // header tokens are whitespace-separated; '#' comments run to end of line
  function token(): string {
    for (;;) {
      if (pos >= bytes.length) throw new Error("truncated PGM header");
      if (bytes[pos] === COMMENT) {
        while (pos < bytes.length && bytes[pos] !== 0x0a) pos += 1;
      } else if (WHITESPACE.has(bytes[pos])) {
        pos += 1;
      } else {
        break;
      }
    }
    const start = pos;
    while (pos < bytes.length && !WHITESPACE.has(bytes[pos]) && bytes[pos] !== COMMENT) pos += 1;
    return String.fromCharCode(...bytes.subarray(start, pos));
  }

  function dimension(name: string): number {
    const text = token();
    const value = Number(text);
    if (!Number.isInteger(value) || value <= 0) {
      throw new Error(`bad PGM ${name}: ${JSON.stringify(text)}`);
    }
    return value;
  }

  const magic = token();
  if (magic !== "P5") throw new Error(`expected binary PGM (P5), got ${JSON.stringify(magic)}`);
  const width = dimension("width");
  const height = dimension("height");
  const maxval = dimension("maxval");
  if (maxval > 255) throw new Error(`only 8-bit PGM supported, maxval=${maxval}`);
  if (pos >= bytes.length || !WHITESPACE.has(bytes[pos])) {
    throw new Error("missing whitespace after PGM maxval");
  }
  pos += 1; // exactly one whitespace byte separates the header from the raster

  const need = width * height;
  if (bytes.length - pos < need) {
    throw new Error(`PGM raster truncated: need ${need} bytes, have ${bytes.length - pos}`);
  }
  const raw = bytes.subarray(pos, pos + need);
  let pixels: Uint8Array;
  if (maxval === 255) {
    pixels = new Uint8Array(raw);
  } else {
    pixels = new Uint8Array(need);
    for (let k = 0; k < need; k += 1) pixels[k] = Math.round((raw[k] * 255) / maxval);
  }
  return { width, height, pixels };
}

/**
 * Paint a decoded image onto a canvas.  Returns false when the environment
 * provides no 2d context (headless test DOMs); the canvas still gets sized.
 */
export function paintGray(canvas: HTMLCanvasElement, image: GrayImage): boolean {
  canvas.width = image.width;
  canvas.height = image.height;
  const ctx = canvas.getContext("2d");
  if (!ctx) return false;
  const rgba = ctx.createImageData(image.width, image.height);
  for (let k = 0; k < image.pixels.length; k += 1) {
    const v = image.pixels[k];
    rgba.data[k * 4] = v;
    rgba.data[k * 4 + 1] = v;
    rgba.data[k * 4 + 2] = v;
    rgba.data[k * 4 + 3] = 255;
  }
  ctx.putImageData(rgba, 0, 0);
  return true;
}
