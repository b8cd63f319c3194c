/** Parser for the toolkit tensor container (.evbt).
 *
 * Layout (little-endian): 8-byte magic "EVB1TENS", u8 dtype (0 = f32,
 * 1 = f64), u8 rank, u64 dims, then the row-major payload. The cloud
 * endpoint streams Nx6 tensors: xyz followed by rgb in [0, 1].
 */

import type { PointCloudData } from "./types.js";

const MAGIC = "EVB1TENS";

export interface Tensor {
  shape: number[];
  data: Float32Array | Float64Array;
}

export class EvbtError extends Error {}

export function parseTensor(buffer: ArrayBuffer): Tensor {
  const view = new DataView(buffer);
  if (buffer.byteLength < 10) {
    throw new EvbtError(`buffer too short for a tensor header (${buffer.byteLength} bytes)`);
  }
  let magic = "";
  for (let i = 0; i < 8; i++) {
    magic += String.fromCharCode(view.getUint8(i));
  }
  if (magic !== MAGIC) {
    throw new EvbtError(`magic mismatch: ${JSON.stringify(magic)}`);
  }
  const dtype = view.getUint8(8);
  const rank = view.getUint8(9);
  if (dtype !== 0 && dtype !== 1) {
    throw new EvbtError(`unknown dtype code ${dtype}`);
  }
  const headerEnd = 10 + 8 * rank;
  if (buffer.byteLength < headerEnd) {
    throw new EvbtError("truncated dims");
  }
  const shape: number[] = [];
  let count = 1;
  for (let i = 0; i < rank; i++) {
    const dim = view.getBigUint64(10 + 8 * i, true);
    if (dim > BigInt(Number.MAX_SAFE_INTEGER)) {
      throw new EvbtError(`dimension ${i} too large: ${dim}`);
    }
    shape.push(Number(dim));
    count *= Number(dim);
  }
  const itemSize = dtype === 0 ? 4 : 8;
  if (buffer.byteLength !== headerEnd + count * itemSize) {
    throw new EvbtError(
      `payload length mismatch: shape [${shape}] needs ${headerEnd + count * itemSize} bytes, ` +
        `have ${buffer.byteLength}`
    );
  }
  // copy so the typed array is aligned regardless of the header offset
  const payload = buffer.slice(headerEnd);
  const data = dtype === 0 ? new Float32Array(payload) : new Float64Array(payload);
  return { shape, data };
}

/** Interpret an Nx6 (or Nx3, colorless) tensor as a renderable cloud. */
export function toPointCloud(tensor: Tensor): PointCloudData {
  if (tensor.shape.length !== 2 || (tensor.shape[1] !== 6 && tensor.shape[1] !== 3)) {
    throw new EvbtError(`expected an Nx6 or Nx3 tensor, got shape [${tensor.shape}]`);
  }
  const [count, stride] = tensor.shape;
  const positions = new Float32Array(count * 3);
  const colors = new Float32Array(count * 3);
  for (let i = 0; i < count; i++) {
    positions[3 * i] = tensor.data[stride * i];
    positions[3 * i + 1] = tensor.data[stride * i + 1];
    positions[3 * i + 2] = tensor.data[stride * i + 2];
    if (stride === 6) {
      colors[3 * i] = tensor.data[stride * i + 3];
      colors[3 * i + 1] = tensor.data[stride * i + 4];
      colors[3 * i + 2] = tensor.data[stride * i + 5];
    } else {
      colors[3 * i] = colors[3 * i + 1] = colors[3 * i + 2] = 0.8;
    }
  }
  return { count, positions, colors };
}
