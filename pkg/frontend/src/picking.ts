/** Screen-space point picking against the rendered cloud. */

import type { Mat4 } from "./math3.js";
import { projectPoint } from "./math3.js";
import type { Vec3 } from "./types.js";

export const DEFAULT_PICK_RADIUS_PX = 8;

export interface PickResult {
  index: number;
  point: Vec3;
  distancePx: number;
}

/**
 * Nearest rendered point within `radiusPx` of the click, or null when the
 * click lands in empty space. Points behind the camera never match; ties in
 * screen distance go to the point nearer the camera.
 */
export function pickPoint(
  clickX: number,
  clickY: number,
  viewportW: number,
  viewportH: number,
  positions: Float32Array,
  viewProj: Mat4,
  radiusPx: number = DEFAULT_PICK_RADIUS_PX
): PickResult | null {
  const n = positions.length / 3;
  let best: PickResult | null = null;
  let bestDepth = Infinity;
  for (let i = 0; i < n; i++) {
    const p: Vec3 = [positions[3 * i], positions[3 * i + 1], positions[3 * i + 2]];
    const { ndc, w } = projectPoint(viewProj, p);
    if (w <= 0) continue; // behind the camera
    const sx = (ndc[0] * 0.5 + 0.5) * viewportW;
    const sy = (1 - (ndc[1] * 0.5 + 0.5)) * viewportH; // y down in screen space
    const d = Math.hypot(sx - clickX, sy - clickY);
    if (d > radiusPx) continue;
    if (best === null || d < best.distancePx || (d === best.distancePx && ndc[2] < bestDepth)) {
      best = { index: i, point: p, distancePx: d };
      bestDepth = ndc[2];
    }
  }
  return best;
}
