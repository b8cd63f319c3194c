/** End-to-end acceptance against the real annotation service.
 *
 * Spawns `python3 -m evbench.cli annotate serve` on a fixture scene, drives
 * the client exactly like the page does (fetch cloud, pick two points via
 * the real picking math, submit, reload) and checks the stored record.
 * Skipped when the Python toolkit is not importable.
 */

import { execFileSync, spawn, type ChildProcess } from "node:child_process";
import { mkdtempSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { fileURLToPath } from "node:url";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient, ApiError } from "../src/api.js";
import { OrbitCamera, projectPoint } from "../src/math3.js";
import { pickPoint } from "../src/picking.js";
import { ViewerState } from "../src/state.js";
import type { Vec3 } from "../src/types.js";

const REPO_TESTS_DIR = fileURLToPath(new URL("../../tests", import.meta.url));

function pythonAvailable(): boolean {
  try {
    execFileSync("python3", ["-c", "import evbench"], { stdio: "ignore" });
    return true;
  } catch {
    return false;
  }
}

const HAVE_PYTHON = pythonAvailable();

describe.skipIf(!HAVE_PYTHON)("annotator end-to-end against the real service", () => {
  let workDir: string;
  let server: ChildProcess | null = null;
  let baseUrl = "";

  beforeAll(async () => {
    workDir = mkdtempSync(join(tmpdir(), "annotator-e2e-"));
    execFileSync(
      "python3",
      [
        "-c",
        [
          "import numpy as np, conftest",
          "from evbench.colmap_io import write_sparse_model",
          "scene = conftest.make_scene(np.random.default_rng(5), n_images=4, n_points=40)",
          `write_sparse_model(scene, r'${join(workDir, "scenes", "castle", "sparse")}', 'binary')`,
        ].join("\n"),
      ],
      { cwd: REPO_TESTS_DIR }
    );
    server = spawn(
      "python3",
      [
        "-m",
        "evbench.cli",
        "annotate",
        "serve",
        "--scenes",
        join(workDir, "scenes"),
        "--state",
        join(workDir, "state"),
        "--bind",
        "127.0.0.1:0",
      ],
      { stdio: ["ignore", "pipe", "inherit"] }
    );
    baseUrl = await new Promise<string>((resolve, reject) => {
      const timer = setTimeout(() => reject(new Error("service did not start")), 15_000);
      let buffer = "";
      server!.stdout!.on("data", (chunk: Buffer) => {
        buffer += chunk.toString();
        const m = buffer.match(/listening on (http:\/\/[\d.]+:\d+)/);
        if (m) {
          clearTimeout(timer);
          resolve(m[1]);
        }
      });
      server!.on("exit", (code) => reject(new Error(`service exited early (${code})`)));
    });
  }, 30_000);

  afterAll(() => {
    server?.kill();
    if (workDir) rmSync(workDir, { recursive: true, force: true });
  });

  it("pick two points, submit, reload: stored scale matches to 1e-9", async () => {
    const api = new ApiClient(baseUrl);
    const scenes = await api.listScenes();
    expect(scenes.map((s) => s.id)).toEqual(["castle"]);
    expect(scenes[0].annotated).toBe(false);

    const cloud = await api.fetchCloud("castle");
    expect(cloud.count).toBeGreaterThan(10);

    // drive the real viewer machinery: frame the cloud, click two points
    const camera = new OrbitCamera();
    camera.fit(cloud.positions);
    const W = 1280;
    const H = 800;
    const vp = camera.viewProjection(W / H);
    const state = new ViewerState();
    state.quality = "good";
    state.annotator = "e2e";
    for (const index of [0, cloud.count - 1]) {
      const p: Vec3 = [
        cloud.positions[3 * index],
        cloud.positions[3 * index + 1],
        cloud.positions[3 * index + 2],
      ];
      const { ndc } = projectPoint(vp, p);
      const sx = (ndc[0] * 0.5 + 0.5) * W;
      const sy = (1 - (ndc[1] * 0.5 + 0.5)) * H;
      const hit = pickPoint(sx, sy, W, H, cloud.positions, vp);
      expect(hit).not.toBeNull();
      state.addPick(hit!.point);
    }
    state.measurementText = "27.14";
    expect(state.canSubmit()).toBe(true);
    const lineLength = state.lineLength()!;

    const stored = await api.submitAnnotation("castle", state.buildSubmission());
    const expectedScale = 27.14 / lineLength;
    expect(Math.abs(stored.scale_to_meters! - expectedScale)).toBeLessThan(
      1e-9 * Math.max(1, expectedScale)
    );

    // reload reproduces the stored annotation exactly
    const reloaded = await api.latestAnnotation("castle");
    expect(reloaded).toEqual(stored);
    const after = await api.listScenes();
    expect(after[0].annotated).toBe(true);
  }, 30_000);

  it("invalid measurement: blocked client-side, rejected server-side", async () => {
    const api = new ApiClient(baseUrl);
    const state = new ViewerState();
    state.quality = "good";
    state.addPick([0, 0, 0]);
    state.addPick([1, 0, 0]);
    state.measurementText = "0";
    expect(state.canSubmit()).toBe(false); // client-side gate

    await expect(
      api.submitAnnotation("castle", {
        quality: "good",
        annotator: "e2e",
        line: [
          [0, 0, 0],
          [1, 0, 0],
        ],
        measured_meters: 0,
      })
    ).rejects.toThrowError(ApiError); // server-side gate
  }, 15_000);
});
