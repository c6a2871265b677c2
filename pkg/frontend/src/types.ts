export type Vec3 = [number, number, number];

export interface AssetMeta {
  asset_id: number;
  n_nodes: number;
  n_vertices: number;
  edges: [number, number][];
  rest_nodes: Vec3[];
  request_id: string;
}

export interface PoseResponse {
  pose_id: number;
  nodes: Vec3[];
  request_id: string;
}

export interface ProjectResponse extends PoseResponse {
  constraint_residuals: number[];
}

export interface InterpolateResponse {
  poses: Vec3[][];
  request_id: string;
}

export interface DeformResponse {
  vertices: Vec3[];
  request_id: string;
}

export interface Constraint {
  node: number;
  target: Vec3;
  weight: number;
}

/** The slice of the service the edit session depends on (mockable). */
export interface PoseService {
  project(
    assetId: number,
    basePose: Vec3[],
    constraints: Constraint[],
    seed: number,
    scale: number,
    steps: number,
  ): Promise<ProjectResponse>;
  interpolate(
    assetId: number,
    poseIdA: number,
    poseIdB: number,
    frames: number,
    steps: number,
  ): Promise<InterpolateResponse>;
  deform(assetId: number, nodes: Vec3[]): Promise<DeformResponse>;
}
