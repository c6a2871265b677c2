import type { AssetMeta, Constraint, PoseService, Vec3 } from "./types";

export interface PendingConstraint {
  node: number;
  target: Vec3;
  weight: number;
}

/**
 * Editing state for one asset: the current pose (always a verbatim service
 * payload, never mutated locally), pending drag constraints, and an
 * interpolation timeline.
 *
 * At most one /project request is in flight; applies issued meanwhile only
 * remember the latest pending constraints. Responses superseded by a newer
 * apply are discarded.
 */
export class EditSession {
  readonly assetId: number;
  readonly edges: [number, number][];
  readonly restNodes: Vec3[];

  currentPose: Vec3[];
  currentPoseId: number | null = null;
  lastResiduals: number[] = [];

  pending = new Map<number, PendingConstraint>();

  timeline: Vec3[][] | null = null;
  timelineIndex = 0;
  previewVertices: Vec3[] | null = null;

  guidanceScale = 10;
  steps = 100;
  seed = 0;
  defaultWeight = 1.0;

  projectCount = 0;
  discardedCount = 0;

  private applyToken = 0;
  private inFlight = false;
  private queued = false;
  private deformToken = 0;
  onChange: () => void = () => {};

  constructor(
    private service: PoseService,
    meta: AssetMeta,
  ) {
    this.assetId = meta.asset_id;
    this.edges = meta.edges;
    this.restNodes = meta.rest_nodes;
    this.currentPose = meta.rest_nodes;
  }

  /** Adopt a pose returned by the service (e.g. from /sample). */
  setPose(nodes: Vec3[], poseId: number | null): void {
    this.currentPose = nodes;
    this.currentPoseId = poseId;
    this.lastResiduals = [];
    this.onChange();
  }

  /** Record or update the pending drag target for a node. */
  dragHandle(node: number, target: Vec3, weight?: number): PendingConstraint {
    const pending: PendingConstraint = {
      node,
      target,
      weight: weight ?? this.pending.get(node)?.weight ?? this.defaultWeight,
    };
    this.pending.set(node, pending);
    this.onChange();
    return pending;
  }

  /** Release without applying: the pose is untouched, constraints stay pending. */
  clearPending(): void {
    this.pending.clear();
    this.onChange();
  }

  pendingConstraints(): Constraint[] {
    return [...this.pending.values()].map((p) => ({
      node: p.node,
      target: p.target,
      weight: p.weight,
    }));
  }

  /**
   * Send the pending constraints to /project. Resolves once this apply (or
   * the one that superseded it) has settled.
   */
  async apply(): Promise<void> {
    if (this.inFlight) {
      this.queued = true; // latest pending constraints win
      return;
    }
    const token = ++this.applyToken;
    const constraints = this.pendingConstraints();
    this.inFlight = true;
    try {
      const resp = await this.service.project(
        this.assetId,
        this.currentPose,
        constraints,
        this.seed,
        this.guidanceScale,
        this.steps,
      );
      this.projectCount++;
      if (token === this.applyToken && !this.queued) {
        this.currentPose = resp.nodes;
        this.currentPoseId = resp.pose_id;
        this.lastResiduals = resp.constraint_residuals;
        this.pending.clear();
        this.onChange();
      } else {
        this.discardedCount++; // superseded while in flight
      }
    } finally {
      this.inFlight = false;
      if (this.queued) {
        this.queued = false;
        await this.apply();
      }
    }
  }

  /** Load an interpolation timeline between two cached poses. */
  async loadTimeline(poseIdA: number, poseIdB: number, frames: number): Promise<void> {
    const resp = await this.service.interpolate(this.assetId, poseIdA, poseIdB, frames, this.steps);
    this.timeline = resp.poses;
    this.timelineIndex = 0;
    this.onChange();
  }

  /**
   * Move the timeline cursor (clamped) and kick off a deform preview for
   * that frame. Returns the frame pose immediately; the preview lands
   * asynchronously and only the latest response is kept.
   */
  scrub(frameIndex: number): Vec3[] | null {
    if (!this.timeline || this.timeline.length === 0) {
      return null;
    }
    const idx = Math.min(this.timeline.length - 1, Math.max(0, Math.floor(frameIndex)));
    this.timelineIndex = idx;
    const pose = this.timeline[idx];
    const token = ++this.deformToken;
    this.previewSettled = this.service.deform(this.assetId, pose).then((resp) => {
      if (token === this.deformToken) {
        this.previewVertices = resp.vertices;
        this.onChange();
      }
    });
    return pose;
  }

  /** Resolves when the most recent scrub preview has settled (test hook). */
  previewSettled: Promise<void> = Promise.resolve();
}
