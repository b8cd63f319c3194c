/** Minimal 3D math: column-major 4x4 matrices and an orbit camera. */

import type { Vec3 } from "./types.js";

export type Mat4 = Float32Array; // 16 entries, column-major

export function identity(): Mat4 {
  const m = new Float32Array(16);
  m[0] = m[5] = m[10] = m[15] = 1;
  return m;
}

export function multiply(a: Mat4, b: Mat4): Mat4 {
  const out = new Float32Array(16);
  for (let col = 0; col < 4; col++) {
    for (let row = 0; row < 4; row++) {
      let s = 0;
      for (let k = 0; k < 4; k++) {
        s += a[k * 4 + row] * b[col * 4 + k];
      }
      out[col * 4 + row] = s;
    }
  }
  return out;
}

export function perspective(fovYRad: number, aspect: number, near: number, far: number): Mat4 {
  const f = 1 / Math.tan(fovYRad / 2);
  const m = new Float32Array(16);
  m[0] = f / aspect;
  m[5] = f;
  m[10] = (far + near) / (near - far);
  m[11] = -1;
  m[14] = (2 * far * near) / (near - far);
  return m;
}

function sub(a: Vec3, b: Vec3): Vec3 {
  return [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
}

function cross(a: Vec3, b: Vec3): Vec3 {
  return [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]];
}

function dot(a: Vec3, b: Vec3): number {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

export function norm(a: Vec3): number {
  return Math.sqrt(dot(a, a));
}

function normalize(a: Vec3): Vec3 {
  const n = norm(a);
  return n > 0 ? [a[0] / n, a[1] / n, a[2] / n] : [0, 0, 0];
}

export function lookAt(eye: Vec3, target: Vec3, up: Vec3): Mat4 {
  const z = normalize(sub(eye, target)); // camera backward
  const x = normalize(cross(up, z));
  const y = cross(z, x);
  const m = identity();
  m[0] = x[0]; m[4] = x[1]; m[8] = x[2];
  m[1] = y[0]; m[5] = y[1]; m[9] = y[2];
  m[2] = z[0]; m[6] = z[1]; m[10] = z[2];
  m[12] = -dot(x, eye);
  m[13] = -dot(y, eye);
  m[14] = -dot(z, eye);
  return m;
}

export interface Projected {
  /** normalized device coordinates */
  ndc: Vec3;
  /** clip-space w; points with w <= 0 are behind the camera */
  w: number;
}

export function projectPoint(m: Mat4, p: Vec3): Projected {
  const x = m[0] * p[0] + m[4] * p[1] + m[8] * p[2] + m[12];
  const y = m[1] * p[0] + m[5] * p[1] + m[9] * p[2] + m[13];
  const z = m[2] * p[0] + m[6] * p[1] + m[10] * p[2] + m[14];
  const w = m[3] * p[0] + m[7] * p[1] + m[11] * p[2] + m[15];
  if (w === 0) {
    return { ndc: [0, 0, 0], w: 0 };
  }
  return { ndc: [x / w, y / w, z / w], w };
}

const MIN_PITCH = -Math.PI / 2 + 0.01;
const MAX_PITCH = Math.PI / 2 - 0.01;

/** Yaw/pitch/distance orbit around a target point (+y up). */
export class OrbitCamera {
  target: Vec3 = [0, 0, 0];
  distance = 5;
  yaw = 0.5;
  pitch = 0.4;
  fovYRad = (55 * Math.PI) / 180;
  near = 0.01;
  far = 10_000;

  eye(): Vec3 {
    const cp = Math.cos(this.pitch);
    return [
      this.target[0] + this.distance * cp * Math.sin(this.yaw),
      this.target[1] + this.distance * Math.sin(this.pitch),
      this.target[2] + this.distance * cp * Math.cos(this.yaw),
    ];
  }

  rotate(dxRad: number, dyRad: number): void {
    this.yaw = (this.yaw + dxRad) % (2 * Math.PI);
    this.pitch = Math.min(MAX_PITCH, Math.max(MIN_PITCH, this.pitch + dyRad));
  }

  zoom(factor: number): void {
    this.distance = Math.min(1e6, Math.max(1e-4, this.distance * factor));
  }

  pan(dx: number, dy: number): void {
    // move the target in the camera's screen plane
    const view = this.viewMatrix();
    const right: Vec3 = [view[0], view[4], view[8]];
    const up: Vec3 = [view[1], view[5], view[9]];
    const s = this.distance;
    this.target = [
      this.target[0] + s * (dx * right[0] + dy * up[0]),
      this.target[1] + s * (dx * right[1] + dy * up[1]),
      this.target[2] + s * (dx * right[2] + dy * up[2]),
    ];
  }

  /** Frame a cloud: orbit target at its centroid, distance from its extent. */
  fit(positions: Float32Array): void {
    const n = positions.length / 3;
    if (n === 0) return;
    const lo: Vec3 = [Infinity, Infinity, Infinity];
    const hi: Vec3 = [-Infinity, -Infinity, -Infinity];
    for (let i = 0; i < n; i++) {
      for (let a = 0; a < 3; a++) {
        const v = positions[3 * i + a];
        lo[a] = Math.min(lo[a], v);
        hi[a] = Math.max(hi[a], v);
      }
    }
    this.target = [(lo[0] + hi[0]) / 2, (lo[1] + hi[1]) / 2, (lo[2] + hi[2]) / 2];
    const diag = norm(sub(hi, lo));
    this.distance = diag > 0 ? diag * 1.2 : 5;
    this.near = Math.max(this.distance / 1e4, 1e-4);
    this.far = this.distance * 100;
  }

  viewMatrix(): Mat4 {
    return lookAt(this.eye(), this.target, [0, 1, 0]);
  }

  viewProjection(aspect: number): Mat4 {
    return multiply(perspective(this.fovYRad, aspect, this.near, this.far), this.viewMatrix());
  }
}
