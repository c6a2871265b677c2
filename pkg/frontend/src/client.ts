import type {
  AssetMeta,
  Constraint,
  DeformResponse,
  InterpolateResponse,
  PoseResponse,
  PoseService,
  ProjectResponse,
  Vec3,
} from "./types";

export class ServiceError extends Error {
  constructor(
    public code: string,
    message: string,
    public status: number,
  ) {
    super(message);
  }
}

type FetchLike = (url: string, init: RequestInit) => Promise<Response>;

/**
 * Typed JSON client for the posespace service. Every request carries a
 * unique request_id so callers can correlate and drop stale responses.
 */
export class ServiceClient implements PoseService {
  private nextRequest = 1;

  constructor(
    private baseUrl: string,
    private fetchImpl: FetchLike = (url, init) => fetch(url, init),
  ) {}

  requestId(): string {
    return `ui-${this.nextRequest++}`;
  }

  private async post<T>(path: string, payload: Record<string, unknown>): Promise<T> {
    const body = JSON.stringify({ ...payload, request_id: this.requestId() });
    const resp = await this.fetchImpl(`${this.baseUrl}${path}`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body,
    });
    const data = await resp.json();
    if (!resp.ok) {
      throw new ServiceError(data.code ?? "error", data.message ?? resp.statusText, resp.status);
    }
    return data as T;
  }

  uploadAsset(assetDoc: unknown): Promise<AssetMeta> {
    return this.post<AssetMeta>("/asset", { asset: assetDoc });
  }

  sample(assetId: number, seed: number, steps: number): Promise<PoseResponse> {
    return this.post<PoseResponse>("/sample", { asset_id: assetId, seed, steps });
  }

  project(
    assetId: number,
    basePose: Vec3[],
    constraints: Constraint[],
    seed: number,
    scale: number,
    steps: number,
  ): Promise<ProjectResponse> {
    return this.post<ProjectResponse>("/project", {
      asset_id: assetId,
      base_pose: basePose,
      constraints,
      seed,
      scale,
      steps,
    });
  }

  interpolate(
    assetId: number,
    poseIdA: number,
    poseIdB: number,
    frames: number,
    steps: number,
  ): Promise<InterpolateResponse> {
    return this.post<InterpolateResponse>("/interpolate", {
      asset_id: assetId,
      pose_id_a: poseIdA,
      pose_id_b: poseIdB,
      frames,
      steps,
    });
  }

  deform(assetId: number, nodes: Vec3[]): Promise<DeformResponse> {
    return this.post<DeformResponse>("/deform", { asset_id: assetId, nodes });
  }
}
