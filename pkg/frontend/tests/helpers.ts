/** Shared test utilities: raw tensor buffers and a fake service fetch. */

import type { AnnotationRecord } from "../src/types.js";

export function makeTensorBuffer(
  shape: number[],
  values: number[],
  dtype: 0 | 1 = 0
): ArrayBuffer {
  const itemSize = dtype === 0 ? 4 : 8;
  const headerEnd = 10 + 8 * shape.length;
  const buffer = new ArrayBuffer(headerEnd + values.length * itemSize);
  const view = new DataView(buffer);
  "EVB1TENS".split("").forEach((c, i) => view.setUint8(i, c.charCodeAt(0)));
  view.setUint8(8, dtype);
  view.setUint8(9, shape.length);
  shape.forEach((d, i) => view.setBigUint64(10 + 8 * i, BigInt(d), true));
  values.forEach((v, i) => {
    if (dtype === 0) view.setFloat32(headerEnd + 4 * i, v, true);
    else view.setFloat64(headerEnd + 8 * i, v, true);
  });
  return buffer;
}

function jsonResponse(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

/**
 * In-memory stand-in for the annotation service: same routes, same
 * validation rules (positive measurement, distinct endpoints, scale
 * recomputed server-side).
 */
export function fakeService(cloudRows: number[][]) {
  const store = new Map<string, AnnotationRecord>();
  const scenes = ["castle"];
  const fetchImpl = async (input: string, init?: RequestInit): Promise<Response> => {
    const url = new URL(input, "http://fake");
    const parts = url.pathname.split("/").filter(Boolean);
    if (parts[0] !== "api" || parts[1] !== "scenes") {
      return jsonResponse(404, { error: "unknown endpoint" });
    }
    if (parts.length === 2) {
      return jsonResponse(
        200,
        scenes.map((id) => ({ id, n_images: 4, annotated: store.has(id) }))
      );
    }
    const sceneId = parts[2];
    if (!scenes.includes(sceneId)) {
      return jsonResponse(404, { error: `unknown scene '${sceneId}'` });
    }
    if (parts[3] === "cloud") {
      const buffer = makeTensorBuffer([cloudRows.length, 6], cloudRows.flat());
      return new Response(buffer, {
        status: 200,
        headers: { "Content-Type": "application/octet-stream" },
      });
    }
    if (parts[3] === "images") {
      return jsonResponse(200, {
        images: [{ image_id: 1, name: "img_0001.jpg" }],
      });
    }
    if (parts[3] === "annotation" && (!init || !init.method || init.method === "GET")) {
      const record = store.get(sceneId);
      return record ? jsonResponse(200, record) : jsonResponse(404, { error: "no annotation yet" });
    }
    if (parts[3] === "annotation" && init?.method === "POST") {
      let body: Record<string, unknown>;
      try {
        body = JSON.parse(String(init.body));
      } catch {
        return jsonResponse(400, { error: "malformed JSON" });
      }
      const quality = body.quality;
      if (quality !== "good" && quality !== "bad") {
        return jsonResponse(400, { error: "quality must be 'good' or 'bad'" });
      }
      let scale: number | null = null;
      let line: [number[], number[]] | null = null;
      let measured: number | null = null;
      if (quality === "good") {
        line = body.line as [number[], number[]];
        measured = Number(body.measured_meters);
        if (!line || line.length !== 2) {
          return jsonResponse(400, { error: "a 'good' annotation needs a line" });
        }
        if (!Number.isFinite(measured) || measured <= 0) {
          return jsonResponse(400, { error: "measured_meters must be positive" });
        }
        const len = Math.hypot(
          line[1][0] - line[0][0],
          line[1][1] - line[0][1],
          line[1][2] - line[0][2]
        );
        if (len < 1e-12) {
          return jsonResponse(400, { error: "line endpoints must be distinct" });
        }
        scale = measured / len;
      }
      const record: AnnotationRecord = {
        scene_id: sceneId,
        quality,
        annotator: String(body.annotator ?? ""),
        line,
        measured_meters: measured,
        scale_to_meters: scale,
        timestamp: "2000-01-01T00:00:00+00:00",
      };
      store.set(sceneId, record);
      return jsonResponse(200, record);
    }
    return jsonResponse(404, { error: "unknown endpoint" });
  };
  return { fetchImpl, store };
}
