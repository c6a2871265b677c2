"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
Every command that writes an output also writes `<output>.manifest.json`
next to it (command, resolved configuration, seeds, paths, version,
wall-clock). Seeded commands are bit-reproducible with --threads 1.
All logging goes to stderr; stdout stays clean.
"""

from __future__ import annotations

import argparse
import os
import sys
import time

# numpy & friends are imported lazily inside command handlers so that
# --threads can pin BLAS pools before the first numpy import


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's default 2
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


def _set_threads(n: int) -> None:
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS",
                "NUMEXPR_NUM_THREADS", "VECLIB_MAXIMUM_THREADS"):
        os.environ[var] = str(n)


def _write_manifest(out_path: str, command: str, args, inputs: list[str],
                    outputs: list[str], seeds: list[int], t_start: float) -> None:
    import posespace
    from .jsonio import save_json

    cfg = {}
    for key, val in sorted(vars(args).items()):
        if key in ("func", "command"):
            continue
        cfg[key] = val if isinstance(val, (int, float, str, bool, type(None))) else str(val)
    save_json(out_path + ".manifest.json", {
        "command": command,
        "config": cfg,
        "seeds": seeds,
        "inputs": inputs,
        "outputs": outputs,
        "tool_version": posespace.__version__,
        "wall_clock_sec": time.time() - t_start,
    })


def _load_targets(path: str):
    import numpy as np

    from .errors import DataError
    from .jsonio import load_json

    doc = load_json(path)
    frames = doc["frames"] if isinstance(doc, dict) and "frames" in doc else doc
    if not isinstance(frames, list) or not frames:
        raise DataError(f"targets file {path} must hold a non-empty list of vertex arrays")
    return [np.asarray(f, dtype=np.float64) for f in frames]


def _parse_constraint(text: str):
    from .errors import DataError

    head, _, rest = text.partition(":")
    parts = rest.split(",")
    if len(parts) < 3:
        raise DataError(f"constraint must be node:x,y,z[:w], got {text!r}")
    tail = parts[2].split(":")
    weight = 1.0
    if len(tail) == 2:
        parts[2], weight = tail[0], float(tail[1])
    elif len(tail) != 1:
        raise DataError(f"constraint must be node:x,y,z[:w], got {text!r}")
    try:
        return int(head), [float(parts[0]), float(parts[1]), float(parts[2])], float(weight)
    except ValueError as e:
        raise DataError(f"cannot parse constraint {text!r}: {e}") from e


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------


def cmd_fit(args) -> None:
    t0 = time.time()
    from .fit import FitConfig, fit_sequence
    from .geometry import Mesh, PoseSet, load_asset, save_poses

    asset = load_asset(args.asset)
    targets = [Mesh(v, asset.mesh.faces) for v in _load_targets(args.targets)]
    cfg = FitConfig(lam=getattr(args, "lambda"), max_iters=args.max_iters,
                    learning_rate=args.lr, convergence_tol=args.tol)
    results = fit_sequence(asset, targets, cfg)
    for k, r in enumerate(results):
        _log(f"frame {k}: recon={r.final_recon_loss:.3e} edge={r.final_edge_loss:.3e} "
             f"iters={r.iterations_used} converged={r.converged}")
    save_poses(PoseSet(asset_name=asset.name, poses=tuple(r.pose for r in results),
                       tags=tuple("fit" for _ in results)), args.out)
    _write_manifest(args.out, "fit", args, [args.asset, args.targets], [args.out], [], t0)


def cmd_datagen(args) -> None:
    t0 = time.time()
    from .datagen import CreatureSpec, gen_creature, sample_gt_poses
    from .geometry import save_asset, save_poses

    os.makedirs(args.out, exist_ok=True)
    spec = CreatureSpec(template=args.template, n_bones=args.n_bones,
                        tube_radius=args.tube_radius)
    outputs = []
    for k in range(args.n_creatures):
        asset, handle = gen_creature(spec, seed=args.seed + k)
        poses = sample_gt_poses(handle, args.poses, seed=args.seed + 10_000 + k)
        asset_path = os.path.join(args.out, f"{asset.name}.asset.json")
        poses_path = os.path.join(args.out, f"{asset.name}.gt.poses.json")
        save_asset(asset, asset_path)
        save_poses(poses, poses_path)
        outputs += [asset_path, poses_path]
        _log(f"creature {asset.name}: {asset.n_nodes} nodes, {asset.n_vertices} verts, "
             f"{len(poses)} poses")
    _write_manifest(os.path.join(args.out, "datagen"), "datagen", args, [], outputs,
                    [args.seed], t0)


def _load_data_dir(data_dir: str, n_f: int, feat_seed: int):
    import glob as _glob

    from .errors import DataError
    from .features import aggregate_node_features, synth_features
    from .geometry import load_asset, load_poses

    assets = {}
    for path in sorted(_glob.glob(os.path.join(data_dir, "*.asset.json"))):
        asset = load_asset(path)
        feats = aggregate_node_features(asset, synth_features(asset, n_f, feat_seed))
        assets[asset.name] = (asset, feats)
    if not assets:
        raise DataError(f"no *.asset.json files in {data_dir}")
    dataset = []
    for path in sorted(_glob.glob(os.path.join(data_dir, "*.poses.json"))):
        ps = load_poses(path)
        if ps.asset_name not in assets:
            raise DataError(f"pose file {path} references unknown asset {ps.asset_name!r}")
        asset, feats = assets[ps.asset_name]
        dataset += [(asset, feats, p) for p in ps]
    if not dataset:
        raise DataError(f"no *.poses.json files in {data_dir}")
    return assets, dataset


def cmd_train(args) -> None:
    t0 = time.time()
    from .denoiser import DenoiserConfig, init_params, save_checkpoint
    from .diffusion import DiffusionSchedule, train
    from .jsonio import save_json

    _, dataset = _load_data_dir(args.data, args.n_f, args.feat_seed)
    cfg = DenoiserConfig(n_f=args.n_f, d_model=args.d_model, n_heads=args.n_heads,
                         n_layers=args.n_layers, d_ff=args.d_ff,
                         max_graph_dist=args.max_graph_dist)
    model0 = init_params(cfg, seed=args.seed)
    schedule = DiffusionSchedule.linear(args.t_total)
    model, curve = train(model0, dataset, schedule, epochs=args.epochs, batch=args.batch,
                         lr=args.lr, seed=args.seed, select=args.select,
                         weighting=args.weighting,
                         log=lambda e, l: _log(f"epoch {e}: probe loss {l:.6f}"))
    save_checkpoint(model, args.out)
    save_json(args.out + ".losses.json", {"probe_losses": curve})
    _write_manifest(args.out, "train", args, [args.data], [args.out], [args.seed], t0)


def _load_model_asset(args):
    from .denoiser import load_checkpoint
    from .features import aggregate_node_features, synth_features
    from .geometry import load_asset

    model = load_checkpoint(args.model)
    asset = load_asset(args.asset)
    feats = aggregate_node_features(asset, synth_features(asset, model.config.n_f,
                                                          args.feat_seed))
    return model, asset, feats


def cmd_sample(args) -> None:
    t0 = time.time()
    from .diffusion import DiffusionSchedule, sample_set
    from .geometry import save_poses

    model, asset, feats = _load_model_asset(args)
    schedule = DiffusionSchedule.linear(args.t_total)
    poses = sample_set(model, asset, feats, schedule, steps=args.steps, seed=args.seed,
                       n=args.n)
    save_poses(poses, args.out)
    _write_manifest(args.out, "sample", args, [args.model, args.asset], [args.out],
                    [args.seed], t0)


def cmd_invert(args) -> None:
    t0 = time.time()
    from .diffusion import DiffusionSchedule, ddim_invert_batch, normalized_matrix
    from .geometry import load_poses
    from .jsonio import save_json

    model, asset, feats = _load_model_asset(args)
    schedule = DiffusionSchedule.linear(args.t_total)
    pose_set = load_poses(args.poses)
    x0 = normalized_matrix(pose_set, asset, model.stats)
    latents = ddim_invert_batch(model, asset, feats, x0, schedule, steps=args.steps)
    save_json(args.out, {"asset": asset.name, "steps": args.steps,
                         "latents": latents.tolist()})
    _write_manifest(args.out, "invert", args, [args.model, args.asset, args.poses],
                    [args.out], [], t0)


def cmd_edit(args) -> None:
    t0 = time.time()
    import numpy as np

    from .diffusion import (ConstraintSet, DiffusionSchedule, GuidanceConfig,
                            guided_sample)
    from .geometry import PoseSet, save_poses

    model, asset, feats = _load_model_asset(args)
    schedule = DiffusionSchedule.linear(args.t_total)
    items = []
    for text in args.constraint or []:
        node, target_world, weight = _parse_constraint(text)
        normalized = (np.asarray(target_world) - asset.skeleton.nodes[node]) / model.stats.sigma_p
        items.append((node, normalized, weight))
    constraints = ConstraintSet(tuple(items))
    constraints.validate_for(asset.n_nodes)
    cfg = GuidanceConfig(scale=args.scale, jacobian_mode=args.jacobian, steps=args.steps)
    pose = guided_sample(model, asset, feats, constraints, schedule, cfg, seed=args.seed)
    save_poses(PoseSet(asset_name=asset.name, poses=(pose,), tags=("edit",)), args.out)
    _write_manifest(args.out, "edit", args, [args.model, args.asset], [args.out],
                    [args.seed], t0)


def cmd_interp(args) -> None:
    t0 = time.time()
    from .diffusion import DiffusionSchedule, interpolate_poses
    from .geometry import PoseSet, load_poses, save_poses

    model, asset, feats = _load_model_asset(args)
    schedule = DiffusionSchedule.linear(args.t_total)
    pose_a = load_poses(args.a)[0]
    pose_b = load_poses(args.b)[0]
    frames = interpolate_poses(model, asset, feats, pose_a, pose_b, args.frames,
                               schedule, steps=args.steps)
    save_poses(PoseSet(asset_name=asset.name, poses=tuple(frames),
                       tags=tuple("interp" for _ in frames)), args.out)
    _write_manifest(args.out, "interp", args, [args.model, args.asset, args.a, args.b],
                    [args.out], [], t0)


def cmd_walk(args) -> None:
    t0 = time.time()
    from .diffusion import DiffusionSchedule, pose_walk
    from .geometry import PoseSet, save_poses

    model, asset, feats = _load_model_asset(args)
    schedule = DiffusionSchedule.linear(args.t_total)
    frames = pose_walk(model, asset, feats, length=args.len, rho=args.rho,
                       schedule=schedule, seed=args.seed, steps=args.steps)
    save_poses(PoseSet(asset_name=asset.name, poses=tuple(frames),
                       tags=tuple("walk" for _ in frames)), args.out)
    _write_manifest(args.out, "walk", args, [args.model, args.asset], [args.out],
                    [args.seed], t0)


def cmd_filter(args) -> None:
    t0 = time.time()
    import glob as _glob

    from .datagen import filter_rig, filter_static
    from .geometry import load_asset, load_poses
    from .jsonio import save_json

    assets = {}
    for path in sorted(_glob.glob(os.path.join(args.clips, "*.asset.json"))):
        asset = load_asset(path)
        assets[asset.name] = asset
    clips = []
    for path in sorted(_glob.glob(os.path.join(args.clips, "*.poses.json"))):
        pose_set = load_poses(path)
        if pose_set.asset_name not in assets:
            continue
        asset = assets[pose_set.asset_name]
        keep, stats = filter_static(pose_set, asset, threshold=args.threshold,
                                    frame_fraction=args.frame_fraction)
        clips.append({
            "clip": os.path.basename(path),
            "asset": pose_set.asset_name,
            "keep": keep,
            "fraction_below_threshold": stats.fraction_below_threshold,
            "rms_displacements": stats.rms_displacements.tolist(),
        })
    rigs = []
    for name, asset in sorted(assets.items()):
        report = filter_rig(asset, outside_fraction_max=args.outside_max,
                            surface_dist_max=args.surface_max,
                            samples_per_bone=args.samples_per_bone)
        rigs.append({
            "asset": name,
            "accepted": report.accepted,
            "acyclic": report.acyclic,
            "open_mesh": report.open_mesh,
            "bones": [{
                "fraction_outside": b.fraction_outside,
                "max_surface_distance": b.max_surface_distance,
                "valid": b.valid,
            } for b in report.bones],
        })
    save_json(args.report, {"clips": clips, "rigs": rigs,
                            "thresholds": {"static": args.threshold,
                                           "frame_fraction": args.frame_fraction,
                                           "outside_fraction_max": args.outside_max,
                                           "surface_dist_max": args.surface_max}})
    _write_manifest(args.report, "filter", args, [args.clips], [args.report], [], t0)


def cmd_eval(args) -> None:
    t0 = time.time()
    from .errors import DataError
    from .geometry import compute_sigma_p, load_asset, load_poses
    from .jsonio import save_json
    from .metrics import fsd, o_nn

    asset = load_asset(args.asset)
    gen = load_poses(args.gen)
    ref = load_poses(args.ref)
    # normalization stats come from the reference set (recorded below)
    stats = compute_sigma_p([(asset, p) for p in ref])
    wanted = [m.strip() for m in args.metrics.split(",") if m.strip()]
    report = {"gen": args.gen, "ref": args.ref, "asset": asset.name,
              "normalization": {"source": "reference_set", "sigma_p": stats.sigma_p},
              "metrics": {}}
    for metric in wanted:
        if metric == "fsd":
            report["metrics"]["fsd"] = fsd(gen, ref, asset, stats)
        elif metric == "onn":
            report["metrics"]["onn"] = o_nn(gen, ref, asset, stats)
        else:
            raise DataError(f"unknown metric {metric!r} (expected fsd, onn)")
    save_json(args.out, report)
    _write_manifest(args.out, "eval", args, [args.gen, args.ref, args.asset],
                    [args.out], [], t0)


def cmd_lsr(args) -> None:
    t0 = time.time()
    import numpy as np

    from .jsonio import load_json, save_json
    from .metrics import lsr

    doc = load_json(args.counts)
    if isinstance(doc, dict):
        items = doc.get("items")
        counts = np.asarray(doc["counts"], dtype=np.float64)
    else:
        items, counts = None, np.asarray(doc, dtype=np.float64)
    scores, meta = lsr(counts, alpha=args.alpha, return_meta=True)
    out = {"scores": scores.tolist(), "regularized": meta["regularized"],
           "alpha": meta["alpha"]}
    if items:
        out["items"] = items
    save_json(args.out, out)
    _write_manifest(args.out, "lsr", args, [args.counts], [args.out], [], t0)


def cmd_export(args) -> None:
    t0 = time.time()
    from .geometry import deform, load_asset, load_poses, save_poses

    asset = load_asset(args.asset)
    pose_set = load_poses(args.poses)
    os.makedirs(args.out, exist_ok=True)
    outputs = []
    for k, pose in enumerate(pose_set):
        mesh = deform(asset, pose)
        path = os.path.join(args.out, f"frame_{k:04d}.obj")
        lines = [f"v {v[0]:.17g} {v[1]:.17g} {v[2]:.17g}" for v in mesh.vertices]
        lines += [f"f {f[0] + 1} {f[1] + 1} {f[2] + 1}" for f in mesh.faces]
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")
        outputs.append(path)
    poses_out = os.path.join(args.out, "poses.json")
    save_poses(pose_set, poses_out)
    outputs.append(poses_out)
    _log(f"exported {len(pose_set)} frames to {args.out}")
    _write_manifest(os.path.join(args.out, "export"), "export", args,
                    [args.asset, args.poses], outputs, [], t0)


def cmd_serve(args) -> None:
    from .service import serve

    serve(model_path=args.model, port=args.port, host=args.host)


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="posespace",
                     description="Pose-space engine for rigged meshes")
    parser.add_argument("--threads", type=int, default=1,
                        help="cap internal parallelism (1 = determinism reference)")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("fit", help="fit poses to target vertex sequences")
    p.add_argument("--asset", required=True)
    p.add_argument("--targets", required=True,
                   help="JSON list of per-frame vertex arrays sharing the asset topology")
    p.add_argument("--lambda", type=float, default=20.0, dest="lambda")
    p.add_argument("--max-iters", type=int, default=500)
    p.add_argument("--lr", type=float, default=1e-2)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("datagen", help="generate procedural creatures + ground-truth poses")
    p.add_argument("--template", choices=["chain", "quadruped", "biped"], required=True)
    p.add_argument("--n-creatures", type=int, default=1)
    p.add_argument("--n-bones", type=int, default=None, help="chain template only")
    p.add_argument("--poses", type=int, default=100)
    p.add_argument("--tube-radius", type=float, default=0.06)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_datagen)

    p = sub.add_parser("train", help="train the pose denoiser on a data directory")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--batch", type=int, default=64)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--select", choices=["final", "best"], default="final")
    p.add_argument("--weighting", choices=["uniform", "epsilon"], default="uniform")
    p.add_argument("--d-model", type=int, default=128)
    p.add_argument("--n-heads", type=int, default=4)
    p.add_argument("--n-layers", type=int, default=4)
    p.add_argument("--d-ff", type=int, default=0, help="0 = 4 * d_model")
    p.add_argument("--n-f", type=int, default=32)
    p.add_argument("--max-graph-dist", type=int, default=8)
    p.add_argument("--t-total", type=int, default=1000)
    p.add_argument("--feat-seed", type=int, default=0)
    p.set_defaults(func=cmd_train)

    def model_asset_args(p):
        p.add_argument("--model", required=True)
        p.add_argument("--asset", required=True)
        p.add_argument("--t-total", type=int, default=1000)
        p.add_argument("--feat-seed", type=int, default=0)

    p = sub.add_parser("sample", help="sample poses from a trained model")
    model_asset_args(p)
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("invert", help="DDIM-invert poses to terminal latents")
    model_asset_args(p)
    p.add_argument("--poses", required=True)
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_invert)

    p = sub.add_parser("edit", help="constraint-guided sampling (IK-style)")
    model_asset_args(p)
    p.add_argument("--constraint", action="append",
                   help="node:x,y,z[:w] with the target in asset units; repeatable")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scale", type=float, default=10.0)
    p.add_argument("--jacobian", choices=["exact", "identity"], default="exact")
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_edit)

    p = sub.add_parser("interp", help="latent-space interpolation between two poses")
    model_asset_args(p)
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--frames", type=int, default=10)
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_interp)

    p = sub.add_parser("walk", help="correlated latent walk decoded to poses")
    model_asset_args(p)
    p.add_argument("--len", type=int, default=10)
    p.add_argument("--rho", type=float, default=0.9)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_walk)

    p = sub.add_parser("filter", help="static-clip and rig-validity filters")
    p.add_argument("--clips", required=True, help="directory of assets and pose clips")
    p.add_argument("--report", required=True)
    p.add_argument("--threshold", type=float, default=0.0015)
    p.add_argument("--frame-fraction", type=float, default=0.9)
    p.add_argument("--outside-max", type=float, default=0.5)
    p.add_argument("--surface-max", type=float, default=0.1)
    p.add_argument("--samples-per-bone", type=int, default=32)
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("eval", help="distribution metrics between two pose sets")
    p.add_argument("--gen", required=True)
    p.add_argument("--ref", required=True)
    p.add_argument("--asset", required=True)
    p.add_argument("--metrics", default="fsd,onn")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("lsr", help="spectral ranking from pairwise comparison counts")
    p.add_argument("--counts", required=True)
    p.add_argument("--alpha", type=float, default=0.1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_lsr)

    p = sub.add_parser("export", help="write deformed meshes as OBJ keyframes")
    p.add_argument("--asset", required=True)
    p.add_argument("--poses", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("serve", help="run the local JSON-over-HTTP inference service")
    p.add_argument("--model", required=True)
    p.add_argument("--port", type=int, default=8741)
    p.add_argument("--host", default="127.0.0.1")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    # pin thread pools before numpy is first imported
    if "--threads" in argv:
        try:
            _set_threads(int(argv[argv.index("--threads") + 1]))
        except (IndexError, ValueError):
            pass  # argparse reports the usage error below
    else:
        _set_threads(1)

    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    from .errors import DataError, NumericalError, PoseSpaceError

    try:
        args.func(args)
        return 0
    except DataError as e:
        _log(f"data error: {e}")
        return 2
    except NumericalError as e:
        _log(f"numerical failure: {e}")
        return 3
    except PoseSpaceError as e:
        _log(f"error: {e}")
        return 2
    except OSError as e:
        _log(f"i/o error: {e}")
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
