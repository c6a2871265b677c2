import type { OrbitCamera } from "./camera";
import type { PendingConstraint } from "./session";
import type { Vec3 } from "./types";

export interface SceneData {
  vertices: Vec3[];
  faces: [number, number, number][];
  nodes: Vec3[];
  edges: [number, number][];
  pending: PendingConstraint[];
  selectedNode: number | null;
}

export const HANDLE_RADIUS_PX = 7;

const LIGHT: Vec3 = [0.4, 0.35, 0.85];

/** Canvas 2D painter renderer: depth-sorted flat-shaded triangles, skeleton
 * overlay, node handles, pending drag targets in orange (resolved pose is
 * drawn green). */
export class Renderer {
  constructor(private ctx: CanvasRenderingContext2D) {}

  draw(scene: SceneData, camera: OrbitCamera): void {
    const { ctx } = this;
    ctx.fillStyle = "#11151c";
    ctx.fillRect(0, 0, camera.width, camera.height);

    const projected = scene.vertices.map((v) => camera.project(v));
    const tris = scene.faces
      .map((f) => {
        const [a, b, c] = f;
        const depth = (projected[a].depth + projected[b].depth + projected[c].depth) / 3;
        return { f, depth };
      })
      .filter((t) => t.depth > 0)
      .sort((p, q) => q.depth - p.depth);

    for (const { f } of tris) {
      const [a, b, c] = f;
      const pa = scene.vertices[a];
      const pb = scene.vertices[b];
      const pc = scene.vertices[c];
      const u: Vec3 = [pb[0] - pa[0], pb[1] - pa[1], pb[2] - pa[2]];
      const v: Vec3 = [pc[0] - pa[0], pc[1] - pa[1], pc[2] - pa[2]];
      const n: Vec3 = [
        u[1] * v[2] - u[2] * v[1],
        u[2] * v[0] - u[0] * v[2],
        u[0] * v[1] - u[1] * v[0],
      ];
      const len = Math.hypot(n[0], n[1], n[2]) || 1;
      const lambert = Math.abs(n[0] * LIGHT[0] + n[1] * LIGHT[1] + n[2] * LIGHT[2]) / len;
      const shade = Math.round(70 + 140 * lambert);
      ctx.fillStyle = `rgb(${shade * 0.55}, ${shade * 0.75}, ${shade})`;
      ctx.beginPath();
      ctx.moveTo(projected[a].x, projected[a].y);
      ctx.lineTo(projected[b].x, projected[b].y);
      ctx.lineTo(projected[c].x, projected[c].y);
      ctx.closePath();
      ctx.fill();
    }

    // skeleton overlay
    const nodePx = scene.nodes.map((p) => camera.project(p));
    ctx.strokeStyle = "#e8e49a";
    ctx.lineWidth = 2;
    for (const [p, c] of scene.edges) {
      ctx.beginPath();
      ctx.moveTo(nodePx[p].x, nodePx[p].y);
      ctx.lineTo(nodePx[c].x, nodePx[c].y);
      ctx.stroke();
    }

    // node handles: resolved pose is green; selected handle highlighted
    nodePx.forEach((s, i) => {
      ctx.beginPath();
      ctx.arc(s.x, s.y, HANDLE_RADIUS_PX, 0, Math.PI * 2);
      ctx.fillStyle = i === scene.selectedNode ? "#8cff8c" : "#3dbb3d";
      ctx.fill();
      ctx.strokeStyle = "#0c300c";
      ctx.stroke();
    });

    // pending drag targets in orange, tethered to their node
    ctx.strokeStyle = "#ffae42";
    for (const p of scene.pending) {
      const from = nodePx[p.node];
      const to = camera.project(p.target);
      ctx.setLineDash([4, 3]);
      ctx.beginPath();
      ctx.moveTo(from.x, from.y);
      ctx.lineTo(to.x, to.y);
      ctx.stroke();
      ctx.setLineDash([]);
      ctx.beginPath();
      ctx.arc(to.x, to.y, HANDLE_RADIUS_PX, 0, Math.PI * 2);
      ctx.fillStyle = "#ffae42";
      ctx.fill();
    }
  }

  /** Index of the node handle under the cursor, or null. */
  pickNode(nodes: Vec3[], camera: OrbitCamera, sx: number, sy: number): number | null {
    let best: number | null = null;
    let bestD = HANDLE_RADIUS_PX + 2;
    nodes.forEach((p, i) => {
      const s = camera.project(p);
      const d = Math.hypot(s.x - sx, s.y - sy);
      if (d < bestD) {
        bestD = d;
        best = i;
      }
    });
    return best;
  }
}
