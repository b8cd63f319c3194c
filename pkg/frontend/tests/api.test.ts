import { describe, expect, it } from "vitest";

import { ApiClient, ApiError } from "../src/api.js";
import { ViewerState } from "../src/state.js";
import { fakeService } from "./helpers.js";

const ROWS = [
  [0, 0, 0, 1, 0, 0],
  [1.3799, 0, 0, 0, 1, 0],
  [0, 2, 0, 0, 0, 1],
];

describe("ApiClient against the fake service", () => {
  it("lists scenes", async () => {
    const { fetchImpl } = fakeService(ROWS);
    const api = new ApiClient("", fetchImpl);
    const scenes = await api.listScenes();
    expect(scenes).toEqual([{ id: "castle", n_images: 4, annotated: false }]);
  });

  it("decodes the cloud stream", async () => {
    const { fetchImpl } = fakeService(ROWS);
    const api = new ApiClient("", fetchImpl);
    const cloud = await api.fetchCloud("castle");
    expect(cloud.count).toBe(3);
    expect(Array.from(cloud.positions.slice(3, 6))).toEqual([Math.fround(1.3799), 0, 0]);
  });

  it("latestAnnotation returns null before any submission", async () => {
    const { fetchImpl } = fakeService(ROWS);
    const api = new ApiClient("", fetchImpl);
    expect(await api.latestAnnotation("castle")).toBeNull();
  });

  it("unknown scenes raise ApiError with the server message", async () => {
    const { fetchImpl } = fakeService(ROWS);
    const api = new ApiClient("", fetchImpl);
    await expect(api.fetchCloud("nope")).rejects.toThrowError(ApiError);
    await expect(api.fetchCloud("nope")).rejects.toThrow(/unknown scene/);
  });

  it("good submission round-trips with the server-computed scale", async () => {
    const { fetchImpl } = fakeService(ROWS);
    const api = new ApiClient("", fetchImpl);
    const state = new ViewerState();
    state.quality = "good";
    state.annotator = "alice";
    const cloud = await api.fetchCloud("castle");
    state.addPick([cloud.positions[0], cloud.positions[1], cloud.positions[2]]);
    state.addPick([cloud.positions[3], cloud.positions[4], cloud.positions[5]]);
    state.measurementText = "27.14";
    const stored = await api.submitAnnotation("castle", state.buildSubmission());
    expect(stored.scale_to_meters).toBeCloseTo(27.14 / state.lineLength()!, 9);
    // reload reproduces the stored annotation exactly
    const reloaded = await api.latestAnnotation("castle");
    expect(reloaded).toEqual(stored);
    const scenes = await api.listScenes();
    expect(scenes[0].annotated).toBe(true);
  });

  it("invalid measurement is rejected server-side", async () => {
    const { fetchImpl } = fakeService(ROWS);
    const api = new ApiClient("", fetchImpl);
    await expect(
      api.submitAnnotation("castle", {
        quality: "good",
        annotator: "mallory",
        line: [
          [0, 0, 0],
          [1, 0, 0],
        ],
        measured_meters: -5,
      })
    ).rejects.toThrow(/positive/);
  });

  it("bad-quality submissions need no line", async () => {
    const { fetchImpl } = fakeService(ROWS);
    const api = new ApiClient("", fetchImpl);
    const stored = await api.submitAnnotation("castle", { quality: "bad", annotator: "bob" });
    expect(stored.line).toBeNull();
    expect(stored.scale_to_meters).toBeNull();
  });
});
