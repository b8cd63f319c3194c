/** Annotation state machine for the viewer page.
 *
 * Submission is enabled only when a quality label is chosen and, for "good"
 * scenes, both line endpoints are picked and the measurement parses as a
 * positive decimal. "bad" scenes need no line. The client never computes the
 * stored scale; the service derives and validates it.
 */

import type { AnnotationSubmission, Quality, Vec3 } from "./types.js";

const POSITIVE_DECIMAL = /^\s*\+?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?\s*$/;

export class ViewerState {
  quality: Quality | null = null;
  endpointA: Vec3 | null = null;
  endpointB: Vec3 | null = null;
  measurementText = "";
  annotator = "";

  /** First pick fills A, second fills B, a third restarts the line. */
  addPick(point: Vec3): void {
    if (this.endpointA === null) {
      this.endpointA = point;
    } else if (this.endpointB === null) {
      this.endpointB = point;
    } else {
      this.endpointA = point;
      this.endpointB = null;
    }
  }

  clearLine(): void {
    this.endpointA = null;
    this.endpointB = null;
  }

  hasLine(): boolean {
    return this.endpointA !== null && this.endpointB !== null;
  }

  lineLength(): number | null {
    if (this.endpointA === null || this.endpointB === null) return null;
    const dx = this.endpointB[0] - this.endpointA[0];
    const dy = this.endpointB[1] - this.endpointA[1];
    const dz = this.endpointB[2] - this.endpointA[2];
    return Math.hypot(dx, dy, dz);
  }

  /** Strictly positive decimal meters, else null. */
  parsedMeasurement(): number | null {
    if (!POSITIVE_DECIMAL.test(this.measurementText)) return null;
    const v = Number(this.measurementText);
    return Number.isFinite(v) && v > 0 ? v : null;
  }

  /** Scale implied by the current line + measurement (display only). */
  impliedScale(): number | null {
    const len = this.lineLength();
    const measured = this.parsedMeasurement();
    if (len === null || measured === null || len < 1e-12) return null;
    return measured / len;
  }

  canSubmit(): boolean {
    if (this.quality === "bad") return true;
    if (this.quality !== "good") return false;
    const len = this.lineLength();
    return len !== null && len > 1e-12 && this.parsedMeasurement() !== null;
  }

  buildSubmission(): AnnotationSubmission {
    if (!this.canSubmit() || this.quality === null) {
      throw new Error("submission is not ready");
    }
    const body: AnnotationSubmission = { quality: this.quality, annotator: this.annotator };
    if (this.quality === "good") {
      body.line = [Array.from(this.endpointA!), Array.from(this.endpointB!)];
      body.measured_meters = this.parsedMeasurement()!;
    }
    return body;
  }

  resetForScene(): void {
    this.quality = null;
    this.clearLine();
    this.measurementText = "";
  }
}
