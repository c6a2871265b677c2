import type { Vec3 } from "./types";

const sub = (a: Vec3, b: Vec3): Vec3 => [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
const add = (a: Vec3, b: Vec3): Vec3 => [a[0] + b[0], a[1] + b[1], a[2] + b[2]];
const scale = (a: Vec3, s: number): Vec3 => [a[0] * s, a[1] * s, a[2] * s];
const dot = (a: Vec3, b: Vec3): number => a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
const cross = (a: Vec3, b: Vec3): Vec3 => [
  a[1] * b[2] - a[2] * b[1],
  a[2] * b[0] - a[0] * b[2],
  a[0] * b[1] - a[1] * b[0],
];
const norm = (a: Vec3): number => Math.sqrt(dot(a, a));
const normalize = (a: Vec3): Vec3 => scale(a, 1 / norm(a));

export interface Projected {
  x: number;
  y: number;
  depth: number;
}

/**
 * Orbit camera around a target point with a z-up convention. Screen
 * coordinates are pixels, origin at the top-left of the viewport.
 */
export class OrbitCamera {
  theta = 0.6; // azimuth, radians
  phi = 0.35; // elevation
  radius = 2.4;
  target: Vec3 = [0, 0, 0];
  fov = Math.PI / 4;

  constructor(
    public width: number,
    public height: number,
  ) {}

  eye(): Vec3 {
    const ct = Math.cos(this.theta);
    const st = Math.sin(this.theta);
    const cp = Math.cos(this.phi);
    const sp = Math.sin(this.phi);
    return add(this.target, scale([cp * ct, cp * st, sp], this.radius));
  }

  /** forward / right / up basis of the view. */
  basis(): { forward: Vec3; right: Vec3; up: Vec3 } {
    const forward = normalize(sub(this.target, this.eye()));
    const worldUp: Vec3 = Math.abs(forward[2]) > 0.999 ? [1, 0, 0] : [0, 0, 1];
    const right = normalize(cross(forward, worldUp));
    const up = cross(right, forward);
    return { forward, right, up };
  }

  private focal(): number {
    return this.height / 2 / Math.tan(this.fov / 2);
  }

  project(p: Vec3): Projected {
    const { forward, right, up } = this.basis();
    const rel = sub(p, this.eye());
    const depth = dot(rel, forward);
    const f = this.focal() / Math.max(depth, 1e-9);
    return {
      x: this.width / 2 + dot(rel, right) * f,
      y: this.height / 2 - dot(rel, up) * f,
      depth,
    };
  }

  /** World-space ray direction through a pixel. */
  rayThrough(sx: number, sy: number): Vec3 {
    const { forward, right, up } = this.basis();
    const f = this.focal();
    return normalize(
      add(
        forward,
        add(scale(right, (sx - this.width / 2) / f), scale(up, -(sy - this.height / 2) / f)),
      ),
    );
  }

  /** Intersect the pixel ray with the camera-parallel plane through planePoint. */
  unprojectOnPlane(sx: number, sy: number, planePoint: Vec3): Vec3 {
    const { forward } = this.basis();
    const eye = this.eye();
    const dir = this.rayThrough(sx, sy);
    const t = dot(sub(planePoint, eye), forward) / dot(dir, forward);
    return add(eye, scale(dir, t));
  }

  /**
   * Drag target for a node: move its screen projection by (dx, dy) pixels and
   * unproject back onto the camera-parallel plane through the node. A zero
   * delta returns the node position exactly.
   */
  dragOnNodePlane(node: Vec3, dx: number, dy: number): Vec3 {
    if (dx === 0 && dy === 0) {
      return [...node];
    }
    const s = this.project(node);
    return this.unprojectOnPlane(s.x + dx, s.y + dy, node);
  }

  orbit(dTheta: number, dPhi: number): void {
    this.theta += dTheta;
    const cap = Math.PI / 2 - 0.01;
    this.phi = Math.min(cap, Math.max(-cap, this.phi + dPhi));
  }

  zoom(factor: number): void {
    this.radius = Math.min(50, Math.max(0.2, this.radius * factor));
  }
}
