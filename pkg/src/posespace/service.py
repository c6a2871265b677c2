"""Local JSON-over-HTTP inference service for the pose editor.

One trained denoiser per process; assets are uploaded per session and poses
are cached server-side under monotonically increasing ids so the editor can
reference them instead of re-uploading arrays. The model is immutable after
load, so sampling requests run concurrently; registry mutation is locked.

Endpoints (all JSON, POST unless noted):
  /asset        {asset document}                     -> asset metadata
  /sample       {asset_id, seed, steps}              -> pose
  /project      {asset_id, base_pose, constraints,
                 seed, scale, steps, jacobian}       -> guided pose + residuals
  /interpolate  {asset_id, pose_id_a, pose_id_b,
                 frames, steps}                      -> pose list
  /deform       {asset_id, nodes}                    -> vertices
  /health (GET)                                      -> {"status": "ok"}

Every response echoes the request's `request_id` (or assigns one). Errors
come back as {"code", "message", "request_id"} with HTTP 4xx/5xx.
"""

from __future__ import annotations

import json
import sys
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np

from .denoiser import DenoiserModel, load_checkpoint
from .diffusion import (
    ConstraintSet,
    DiffusionSchedule,
    GuidanceConfig,
    ddim_invert,
    guided_sample,
    interpolate_poses,
    sample,
)
from .errors import DataError, NumericalError, PoseSpaceError
from .features import aggregate_node_features, synth_features
from .geometry import Asset, Pose, deform, parse_asset


class Session:
    """Model plus asset/pose registries for one service process."""

    def __init__(self, model: DenoiserModel, t_total: int = 1000, feat_seed: int = 0):
        self.model = model
        self.schedule = DiffusionSchedule.linear(t_total)
        self.feat_seed = feat_seed
        self._lock = threading.Lock()
        self._assets: dict[int, tuple] = {}
        self._poses: dict[int, tuple[int, Pose]] = {}
        self._next_asset = 1
        self._next_pose = 1
        self._next_request = 1

    def request_id(self, payload) -> str:
        rid = payload.get("request_id") if isinstance(payload, dict) else None
        if rid is not None:
            return str(rid)
        with self._lock:
            rid = self._next_request
            self._next_request += 1
        return f"srv-{rid}"

    def add_asset(self, doc) -> int:
        asset = parse_asset(doc, fallback_name="uploaded")
        feats = aggregate_node_features(
            asset, synth_features(asset, self.model.config.n_f, self.feat_seed))
        with self._lock:
            asset_id = self._next_asset
            self._next_asset += 1
            self._assets[asset_id] = (asset, feats)
        return asset_id

    def asset(self, asset_id) -> tuple[Asset, object]:
        try:
            return self._assets[int(asset_id)]
        except (KeyError, TypeError, ValueError):
            raise DataError(f"unknown asset_id {asset_id!r}")

    def add_pose(self, asset_id: int, pose: Pose) -> int:
        with self._lock:
            pose_id = self._next_pose
            self._next_pose += 1
            self._poses[pose_id] = (asset_id, pose)
        return pose_id

    def pose(self, pose_id) -> tuple[int, Pose]:
        try:
            return self._poses[int(pose_id)]
        except (KeyError, TypeError, ValueError):
            raise DataError(f"unknown pose_id {pose_id!r}")


def _handle_asset(session: Session, payload: dict) -> dict:
    doc = payload.get("asset", payload)
    asset_id = session.add_asset(doc)
    asset, _ = session.asset(asset_id)
    return {
        "asset_id": asset_id,
        "n_nodes": asset.n_nodes,
        "n_vertices": asset.n_vertices,
        "edges": asset.skeleton.edges.tolist(),
        "rest_nodes": asset.skeleton.nodes.tolist(),
    }


def _handle_sample(session: Session, payload: dict) -> dict:
    asset, feats = session.asset(payload.get("asset_id"))
    seed = int(payload.get("seed", 0))
    steps = int(payload.get("steps", 100))
    pose = sample(session.model, asset, feats, session.schedule, steps=steps, seed=seed)
    pose_id = session.add_pose(int(payload["asset_id"]), pose)
    return {"pose_id": pose_id, "nodes": pose.node_positions.tolist()}


def _parse_service_constraints(session: Session, asset, constraints) -> tuple[ConstraintSet, list]:
    items, world = [], []
    sigma = session.model.stats.sigma_p
    for c in constraints or []:
        node = int(c["node"])
        target = np.asarray(c["target"], dtype=np.float64).reshape(3)
        weight = float(c.get("weight", 1.0))
        items.append((node, (target - asset.skeleton.nodes[node]) / sigma, weight))
        world.append((node, target))
    cs = ConstraintSet(tuple(items))
    cs.validate_for(asset.n_nodes)
    return cs, world


def _handle_project(session: Session, payload: dict) -> dict:
    asset, feats = session.asset(payload.get("asset_id"))
    base = payload.get("base_pose")
    if base is None:
        raise DataError("project requires base_pose")
    base_pose = Pose(np.asarray(base, dtype=np.float64))
    if len(base_pose) != asset.n_nodes:
        raise DataError("base_pose length does not match asset")
    constraints, world = _parse_service_constraints(session, asset,
                                                    payload.get("constraints"))
    cfg = GuidanceConfig(scale=float(payload.get("scale", 10.0)),
                         jacobian_mode=str(payload.get("jacobian", "exact")),
                         steps=int(payload.get("steps", 100)))
    seed = int(payload.get("seed", 0))
    # edit-preserving projection: guidance starts from the inversion of the
    # user's pose, not from fresh noise
    latent = ddim_invert(session.model, asset, feats, base_pose, session.schedule,
                         steps=cfg.steps)
    pose = guided_sample(session.model, asset, feats, constraints, session.schedule,
                         cfg, seed=seed, init_latent=latent)
    residuals = [float(np.linalg.norm(pose.node_positions[node] - target))
                 for node, target in world]
    pose_id = session.add_pose(int(payload["asset_id"]), pose)
    return {"pose_id": pose_id, "nodes": pose.node_positions.tolist(),
            "constraint_residuals": residuals}


def _handle_interpolate(session: Session, payload: dict) -> dict:
    asset_id_a, pose_a = session.pose(payload.get("pose_id_a"))
    asset_id_b, pose_b = session.pose(payload.get("pose_id_b"))
    if asset_id_a != asset_id_b:
        raise DataError("poses belong to different assets")
    asset, feats = session.asset(asset_id_a)
    frames = int(payload.get("frames", 10))
    steps = int(payload.get("steps", 100))
    poses = interpolate_poses(session.model, asset, feats, pose_a, pose_b, frames,
                              session.schedule, steps=steps)
    return {"poses": [p.node_positions.tolist() for p in poses]}


def _handle_deform(session: Session, payload: dict) -> dict:
    asset, _ = session.asset(payload.get("asset_id"))
    nodes = payload.get("nodes")
    if nodes is None:
        raise DataError("deform requires nodes")
    mesh = deform(asset, Pose(np.asarray(nodes, dtype=np.float64)))
    return {"vertices": mesh.vertices.tolist()}


_ROUTES = {
    "/asset": _handle_asset,
    "/sample": _handle_sample,
    "/project": _handle_project,
    "/interpolate": _handle_interpolate,
    "/deform": _handle_deform,
}


def make_handler(session: Session):
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, fmt, *args):  # stderr only, quiet by default
            pass

        def _send(self, status: int, body: dict) -> None:
            data = json.dumps(body).encode()
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(data)))
            self.send_header("Access-Control-Allow-Origin", "*")
            self.end_headers()
            self.wfile.write(data)

        def do_OPTIONS(self):  # CORS preflight for the browser editor
            self.send_response(204)
            self.send_header("Access-Control-Allow-Origin", "*")
            self.send_header("Access-Control-Allow-Methods", "POST, GET, OPTIONS")
            self.send_header("Access-Control-Allow-Headers", "Content-Type")
            self.send_header("Content-Length", "0")
            self.end_headers()

        def do_GET(self):
            if self.path == "/health":
                self._send(200, {"status": "ok"})
            else:
                self._send(404, {"code": "not_found", "message": f"no route {self.path}"})

        def do_POST(self):
            payload = {}
            rid = None
            try:
                length = int(self.headers.get("Content-Length") or 0)
                raw = self.rfile.read(length) if length else b"{}"
                try:
                    payload = json.loads(raw.decode() or "{}")
                except (json.JSONDecodeError, UnicodeDecodeError) as e:
                    raise DataError(f"invalid JSON body: {e}")
                rid = session.request_id(payload)
                handler = _ROUTES.get(self.path)
                if handler is None:
                    self._send(404, {"code": "not_found",
                                     "message": f"no route {self.path}",
                                     "request_id": rid})
                    return
                body = handler(session, payload)
                body["request_id"] = rid
                self._send(200, body)
            except DataError as e:
                self._send(400, {"code": "data_error", "message": str(e),
                                 "request_id": rid or session.request_id(payload)})
            except NumericalError as e:
                self._send(500, {"code": "numerical_error", "message": str(e),
                                 "request_id": rid or session.request_id(payload)})
            except PoseSpaceError as e:
                self._send(500, {"code": "error", "message": str(e),
                                 "request_id": rid or session.request_id(payload)})

    return Handler


def make_server(model: DenoiserModel, host: str = "127.0.0.1", port: int = 0,
                t_total: int = 1000) -> ThreadingHTTPServer:
    """Build (but do not start) the HTTP server; port 0 picks a free port."""
    session = Session(model, t_total=t_total)
    server = ThreadingHTTPServer((host, port), make_handler(session))
    server.daemon_threads = True
    return server


def serve(model_path: str, port: int, host: str = "127.0.0.1") -> None:
    """Load a checkpoint and serve until interrupted."""
    try:
        model = load_checkpoint(model_path)
    except OSError as e:
        raise DataError(f"cannot load checkpoint {model_path}: {e}") from e
    try:
        server = make_server(model, host=host, port=port)
    except OSError as e:
        raise DataError(f"cannot bind {host}:{port}: {e}") from e
    print(f"posespace service on http://{host}:{server.server_address[1]}", file=sys.stderr)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
