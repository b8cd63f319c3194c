/** Thin client for the annotation service HTTP API. */

import { parseTensor, toPointCloud } from "./evbt.js";
import type {
  AnnotationRecord,
  AnnotationSubmission,
  ImageEntry,
  PointCloudData,
  SceneSummary,
} from "./types.js";

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private baseUrl: string = "",
    private fetchImpl: FetchLike = (input, init) => fetch(input, init)
  ) {}

  private async request(path: string, init?: RequestInit): Promise<Response> {
    const resp = await this.fetchImpl(this.baseUrl + path, init);
    if (!resp.ok) {
      let message = `${resp.status}`;
      try {
        const body = await resp.json();
        if (body && typeof body.error === "string") message = body.error;
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(resp.status, message);
    }
    return resp;
  }

  async listScenes(): Promise<SceneSummary[]> {
    const resp = await this.request("/api/scenes");
    return (await resp.json()) as SceneSummary[];
  }

  async fetchCloud(sceneId: string, maxPoints?: number): Promise<PointCloudData> {
    const query = maxPoints ? `?max_points=${maxPoints}` : "";
    const resp = await this.request(`/api/scenes/${encodeURIComponent(sceneId)}/cloud${query}`);
    return toPointCloud(parseTensor(await resp.arrayBuffer()));
  }

  async fetchImages(sceneId: string): Promise<ImageEntry[]> {
    const resp = await this.request(`/api/scenes/${encodeURIComponent(sceneId)}/images`);
    const body = (await resp.json()) as { images: ImageEntry[] };
    return body.images;
  }

  /** Latest stored annotation, or null when the scene has none yet. */
  async latestAnnotation(sceneId: string): Promise<AnnotationRecord | null> {
    try {
      const resp = await this.request(`/api/scenes/${encodeURIComponent(sceneId)}/annotation`);
      return (await resp.json()) as AnnotationRecord;
    } catch (e) {
      if (e instanceof ApiError && e.status === 404) return null;
      throw e;
    }
  }

  async submitAnnotation(
    sceneId: string,
    submission: AnnotationSubmission
  ): Promise<AnnotationRecord> {
    const resp = await this.request(`/api/scenes/${encodeURIComponent(sceneId)}/annotation`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(submission),
    });
    return (await resp.json()) as AnnotationRecord;
  }
}
