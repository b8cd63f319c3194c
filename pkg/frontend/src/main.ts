/** Page wiring: scene list, orbit viewer, picking, annotation form. */

import { ApiClient, ApiError } from "./api.js";
import { OrbitCamera } from "./math3.js";
import { pickPoint } from "./picking.js";
import { CloudRenderer } from "./renderer.js";
import { ViewerState } from "./state.js";
import type { PointCloudData, SceneSummary } from "./types.js";

const api = new ApiClient("");
const state = new ViewerState();
const camera = new OrbitCamera();

let activeScene: string | null = null;
let cloud: PointCloudData | null = null;
let renderer: CloudRenderer | null = null;

const $ = <T extends HTMLElement>(id: string): T => document.getElementById(id) as T;

function setStatus(text: string, isError = false): void {
  const el = $("status");
  el.textContent = text;
  el.className = isError ? "status error" : "status";
}

function redraw(): void {
  if (!renderer) return;
  renderer.render(camera.viewProjection(renderer.aspect()), state.endpointA, state.endpointB);
}

function refreshForm(): void {
  const len = state.lineLength();
  $("line-length").textContent =
    len === null ? "pick two points on the cloud" : `${len.toPrecision(6)} model units`;
  const scale = state.impliedScale();
  $("implied-scale").textContent = scale === null ? "-" : `${scale.toPrecision(6)} m / unit`;
  ($("submit") as HTMLButtonElement).disabled = !state.canSubmit() || activeScene === null;
  const measurementRow = $("measurement-row");
  measurementRow.style.opacity = state.quality === "good" ? "1" : "0.45";
}

async function refreshSceneList(): Promise<void> {
  const scenes = await api.listScenes();
  const list = $("scene-list");
  list.innerHTML = "";
  scenes.forEach((scene: SceneSummary) => {
    const item = document.createElement("li");
    item.textContent = `${scene.id} (${scene.n_images} images)`;
    if (scene.annotated) item.classList.add("annotated");
    if (scene.id === activeScene) item.classList.add("active");
    item.onclick = () => void openScene(scene.id);
    list.appendChild(item);
  });
}

async function openScene(sceneId: string): Promise<void> {
  setStatus(`loading ${sceneId}...`);
  activeScene = sceneId;
  state.resetForScene();
  ($("quality-good") as HTMLInputElement).checked = false;
  ($("quality-bad") as HTMLInputElement).checked = false;
  ($("measurement") as HTMLInputElement).value = "";
  cloud = await api.fetchCloud(sceneId, 200_000);
  renderer!.setCloud(cloud);
  camera.fit(cloud.positions);
  const existing = await api.latestAnnotation(sceneId);
  setStatus(
    existing
      ? `loaded ${sceneId}: already annotated (${existing.quality}` +
          (existing.scale_to_meters ? `, scale ${existing.scale_to_meters.toPrecision(6)})` : ")")
      : `loaded ${sceneId}: ${cloud.count} points`
  );
  const images = await api.fetchImages(sceneId);
  const strip = $("image-strip");
  strip.innerHTML = "";
  images.slice(0, 12).forEach((entry) => {
    if (entry.url) {
      const img = document.createElement("img");
      img.src = entry.url;
      img.title = entry.name;
      strip.appendChild(img);
    } else {
      const tag = document.createElement("span");
      tag.textContent = entry.name;
      strip.appendChild(tag);
    }
  });
  await refreshSceneList();
  refreshForm();
  redraw();
}

async function submit(): Promise<void> {
  if (activeScene === null) return;
  try {
    const stored = await api.submitAnnotation(activeScene, state.buildSubmission());
    setStatus(
      stored.scale_to_meters
        ? `saved: scale ${stored.scale_to_meters.toPrecision(8)} m / unit`
        : "saved"
    );
    await refreshSceneList();
  } catch (e) {
    if (e instanceof ApiError) {
      setStatus(`rejected by the service: ${e.message}`, true);
    } else {
      setStatus(`network failure, nothing lost: retry submit (${e})`, true);
    }
  }
}

function wireViewer(canvas: HTMLCanvasElement): void {
  let dragging = false;
  let moved = 0;
  let lastX = 0;
  let lastY = 0;
  canvas.addEventListener("mousedown", (ev) => {
    dragging = true;
    moved = 0;
    lastX = ev.clientX;
    lastY = ev.clientY;
  });
  window.addEventListener("mouseup", (ev) => {
    if (!dragging) return;
    dragging = false;
    if (moved < 4 && cloud) {
      const rect = canvas.getBoundingClientRect();
      const hit = pickPoint(
        ev.clientX - rect.left,
        ev.clientY - rect.top,
        rect.width,
        rect.height,
        cloud.positions,
        camera.viewProjection(rect.width / rect.height)
      );
      if (hit) {
        state.addPick(hit.point);
      } else {
        setStatus("no point within reach of the click");
      }
      refreshForm();
      redraw();
    }
  });
  window.addEventListener("mousemove", (ev) => {
    if (!dragging) return;
    const dx = ev.clientX - lastX;
    const dy = ev.clientY - lastY;
    moved += Math.abs(dx) + Math.abs(dy);
    lastX = ev.clientX;
    lastY = ev.clientY;
    if (ev.shiftKey) {
      camera.pan(-dx / 600, dy / 600);
    } else {
      camera.rotate(-dx * 0.006, -dy * 0.006);
    }
    redraw();
  });
  canvas.addEventListener("wheel", (ev) => {
    ev.preventDefault();
    camera.zoom(Math.exp(ev.deltaY * 0.001));
    redraw();
  });
}

function resizeCanvas(canvas: HTMLCanvasElement): void {
  const rect = canvas.getBoundingClientRect();
  canvas.width = Math.max(1, Math.floor(rect.width * window.devicePixelRatio));
  canvas.height = Math.max(1, Math.floor(rect.height * window.devicePixelRatio));
  redraw();
}

window.addEventListener("DOMContentLoaded", () => {
  const canvas = $("viewer") as unknown as HTMLCanvasElement;
  renderer = new CloudRenderer(canvas);
  wireViewer(canvas);
  resizeCanvas(canvas);
  window.addEventListener("resize", () => resizeCanvas(canvas));

  ($("quality-good") as HTMLInputElement).onchange = () => {
    state.quality = "good";
    refreshForm();
  };
  ($("quality-bad") as HTMLInputElement).onchange = () => {
    state.quality = "bad";
    refreshForm();
  };
  ($("measurement") as HTMLInputElement).oninput = (ev) => {
    state.measurementText = (ev.target as HTMLInputElement).value;
    refreshForm();
  };
  ($("annotator") as HTMLInputElement).oninput = (ev) => {
    state.annotator = (ev.target as HTMLInputElement).value;
  };
  $("clear-line").onclick = () => {
    state.clearLine();
    refreshForm();
    redraw();
  };
  $("submit").onclick = () => void submit();

  refreshForm();
  void refreshSceneList().catch((e) => setStatus(`cannot reach the service: ${e}`, true));
});
