import { OrbitCamera } from "./camera";
import { ServiceClient } from "./client";
import { Renderer } from "./renderer";
import { EditSession } from "./session";
import type { Vec3 } from "./types";

const $ = <T extends HTMLElement>(id: string): T => {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
};

const canvas = $<HTMLCanvasElement>("viewport");
const ctx = canvas.getContext("2d");
if (!ctx) throw new Error("no 2d context");

const status = $<HTMLElement>("status");
const log = (msg: string) => {
  status.textContent = msg;
};

const client = new ServiceClient($<HTMLInputElement>("service-url").value);
const camera = new OrbitCamera(canvas.width, canvas.height);
const renderer = new Renderer(ctx);

let session: EditSession | null = null;
let faces: [number, number, number][] = [];
let vertices: Vec3[] = [];
let selectedNode: number | null = null;

function redraw() {
  if (!session) return;
  renderer.draw(
    {
      vertices,
      faces,
      nodes: session.currentPose,
      edges: session.edges,
      pending: [...session.pending.values()],
      selectedNode,
    },
    camera,
  );
}

async function refreshMesh() {
  if (!session) return;
  const resp = await client.deform(session.assetId, session.currentPose);
  vertices = resp.vertices;
  redraw();
}

$<HTMLInputElement>("asset-file").addEventListener("change", async (ev) => {
  const input = ev.target as HTMLInputElement;
  const file = input.files?.[0];
  if (!file) return;
  try {
    const doc = JSON.parse(await file.text());
    const meta = await client.uploadAsset(doc);
    faces = doc.mesh.faces;
    session = new EditSession(client, meta);
    session.onChange = () => {
      void refreshMesh();
      log(
        session!.lastResiduals.length
          ? `residuals: ${session!.lastResiduals.map((r) => r.toFixed(4)).join(", ")}`
          : "ready",
      );
    };
    await refreshMesh();
    log(`loaded asset ${meta.asset_id}: ${meta.n_nodes} nodes, ${meta.n_vertices} vertices`);
  } catch (err) {
    log(`asset load failed: ${err}`);
  }
});

$<HTMLButtonElement>("btn-sample").addEventListener("click", async () => {
  if (!session) return;
  const seed = Number($<HTMLInputElement>("seed").value) || 0;
  const resp = await client.sample(session.assetId, seed, session.steps);
  session.setPose(resp.nodes, resp.pose_id);
  lastPoseIds.push(resp.pose_id);
  log(`sampled pose ${resp.pose_id} (seed ${seed})`);
});

$<HTMLButtonElement>("btn-apply").addEventListener("click", async () => {
  if (!session || session.pending.size === 0) return;
  log("projecting...");
  try {
    await session.apply();
    if (session.currentPoseId !== null) lastPoseIds.push(session.currentPoseId);
  } catch (err) {
    log(`project failed: ${err}`);
  }
});

$<HTMLButtonElement>("btn-clear").addEventListener("click", () => {
  session?.clearPending();
  log("pending constraints cleared");
});

const lastPoseIds: number[] = [];

$<HTMLButtonElement>("btn-interp").addEventListener("click", async () => {
  if (!session || lastPoseIds.length < 2) {
    log("need two service poses (sample or apply twice) to interpolate");
    return;
  }
  const a = lastPoseIds[lastPoseIds.length - 2];
  const b = lastPoseIds[lastPoseIds.length - 1];
  const frames = Number($<HTMLInputElement>("frames").value) || 10;
  await session.loadTimeline(a, b, frames);
  const slider = $<HTMLInputElement>("timeline");
  slider.max = String(frames - 1);
  slider.value = "0";
  log(`timeline loaded: poses ${a} -> ${b}, ${frames} frames`);
});

$<HTMLInputElement>("timeline").addEventListener("input", (ev) => {
  if (!session?.timeline) return;
  const idx = Number((ev.target as HTMLInputElement).value);
  const pose = session.scrub(idx);
  if (!pose) return;
  void session.previewSettled.then(() => {
    if (!session?.previewVertices) return;
    renderer.draw(
      {
        vertices: session.previewVertices,
        faces,
        nodes: pose,
        edges: session.edges,
        pending: [],
        selectedNode: null,
      },
      camera,
    );
    log(`frame ${session.timelineIndex}`);
  });
});

for (const [id, setter] of [
  ["weight", (v: number) => session && (session.defaultWeight = v)],
  ["scale", (v: number) => session && (session.guidanceScale = v)],
] as const) {
  $<HTMLInputElement>(id).addEventListener("input", (ev) => {
    setter(Number((ev.target as HTMLInputElement).value));
  });
}

// ---- mouse interaction ------------------------------------------------------

let dragging: { node: number; startX: number; startY: number } | null = null;
let orbiting: { x: number; y: number } | null = null;

canvas.addEventListener("mousedown", (ev) => {
  if (!session) return;
  const rect = canvas.getBoundingClientRect();
  const sx = ev.clientX - rect.left;
  const sy = ev.clientY - rect.top;
  const node = renderer.pickNode(session.currentPose, camera, sx, sy);
  if (node !== null) {
    dragging = { node, startX: sx, startY: sy };
    selectedNode = node;
  } else {
    orbiting = { x: sx, y: sy };
  }
  redraw();
});

canvas.addEventListener("mousemove", (ev) => {
  if (!session) return;
  const rect = canvas.getBoundingClientRect();
  const sx = ev.clientX - rect.left;
  const sy = ev.clientY - rect.top;
  if (dragging) {
    const node = session.currentPose[dragging.node];
    const target = camera.dragOnNodePlane(node, sx - dragging.startX, sy - dragging.startY);
    session.dragHandle(dragging.node, target);
    redraw();
  } else if (orbiting) {
    camera.orbit((sx - orbiting.x) * 0.01, (sy - orbiting.y) * 0.01);
    orbiting = { x: sx, y: sy };
    redraw();
  }
});

window.addEventListener("mouseup", () => {
  dragging = null; // release without apply: pose unchanged, constraint stays pending
  orbiting = null;
  selectedNode = null;
  redraw();
});

canvas.addEventListener("wheel", (ev) => {
  ev.preventDefault();
  camera.zoom(ev.deltaY > 0 ? 1.1 : 0.9);
  redraw();
});

log("upload an asset JSON to begin");
