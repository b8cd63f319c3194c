"""Command-line interface.

Subcommands: pairs curate, eval pose|recon|depth, sample greedy, loss batch,
layers select|mask, annotate serve. Every flattened config key is exposed as
a --section.key flag; EVB_SECTION_KEY environment variables override the
config file and flags override both. Commands are pure functions of
(inputs, config, seed): reruns produce byte-identical outputs.

Exit codes: 0 ok, 1 usage, 2 input error, 3 internal error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__, config as config_mod
from . import curation, depth_eval, loss as loss_mod, pose_eval, repr_analysis, sampler
from . import recon as recon_mod
from .annotations import AnnotationStore
from .colmap_io import ColmapParseError, read_sparse_model
from .config import ConfigError, ToolConfig, config_hash, flat_keys, load_config, set_key
from .curation import read_pairs_jsonl, write_pairs_jsonl
from .recon import PointCloud, scene_point_cloud
from .service import ServiceState, create_server, discover_scenes
from .tensor_io import TensorFormatError, read_tensor

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INPUT = 2
EXIT_INTERNAL = 3


class UsageError(Exception):
    pass


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's 2
        raise UsageError(message)


def _add_config_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--config", metavar="FILE", help="YAML config file")
    group = parser.add_argument_group("config overrides (--section.key value)")
    for key in sorted(flat_keys(ToolConfig())):
        group.add_argument(f"--{key}", dest=f"cfgkey__{key.replace('.', '__')}", metavar="VALUE")


def _resolve_config(args, environ) -> ToolConfig:
    cfg = load_config(args.config)
    config_mod.apply_env_overrides(cfg, environ)
    for name, value in vars(args).items():
        if name.startswith("cfgkey__") and value is not None:
            set_key(cfg, name[len("cfgkey__") :].replace("__", "."), value)
    return cfg


def _write_report(path: str | Path, payload: dict, cfg: ToolConfig):
    payload = dict(payload)
    payload["toolkit_version"] = __version__
    payload["config_hash"] = config_hash(cfg)
    Path(path).write_text(json.dumps(payload, sort_keys=True) + "\n")


def _scene_map(scenes_dir: str) -> dict[str, Path]:
    scenes = discover_scenes(scenes_dir)
    if not scenes:
        raise InputError(f"no sparse models found under {scenes_dir}")
    return scenes


# ---------------------------------------------------------------------------
# commands


def cmd_pairs_curate(args, cfg: ToolConfig) -> int:
    scenes = _scene_map(args.scenes)
    verification = (
        curation.load_verification_table(args.verification) if args.verification else None
    )
    exclusions = curation.load_exclusion_list(args.exclusions) if args.exclusions else None
    balance = cfg.curation.balance
    per_scene_cfg = dataclasses.replace(cfg.curation, balance=False)  # balance globally below
    all_pairs = []
    for scene_id, model_dir in sorted(scenes.items()):
        scene = read_sparse_model(model_dir)
        all_pairs.extend(
            curation.curate(scene, scene_id, per_scene_cfg, verification, exclusions)
        )
    if balance:
        all_pairs = curation.balance_categories(all_pairs, per_scene_cfg.seed)
    write_pairs_jsonl(all_pairs, args.out)
    counts = {c.value: 0 for c in curation.OverlapCategory}
    for p in all_pairs:
        counts[p.category.value] += 1
    stats = {"n_scenes": len(scenes), "n_pairs": len(all_pairs), "per_category": counts}
    print(json.dumps(stats, sort_keys=True))
    if args.stats:
        _write_report(args.stats, stats, cfg)
    return EXIT_OK


def cmd_eval_pose(args, cfg: ToolConfig) -> int:
    pairs = read_pairs_jsonl(args.pairs)
    preds, row_errors = pose_eval.read_predictions_jsonl(args.pred, permissive=not cfg.pose.strict)
    report = pose_eval.evaluate_pairs(
        pairs,
        preds,
        thresholds=tuple(cfg.pose.thresholds),
        auc_max=cfg.pose.auc_max,
        strict=cfg.pose.strict,
        workers=cfg.pose.workers,
        row_errors=row_errors,
    )
    _write_report(args.out, report.to_json_dict(), cfg)
    if args.per_pair:
        pose_eval.write_per_pair_csv(report.records, args.per_pair)
    return EXIT_OK


def _load_pred_cloud(pred_path: str, gt_scene, poses_path: str | None) -> PointCloud:
    path = Path(pred_path)
    if path.suffix == ".evbt":
        arr = read_tensor(path)
        return PointCloud(np.asarray(arr, dtype=np.float64).reshape(-1, 3))
    spec = json.loads(path.read_text())
    if "pointmaps" in spec:
        parts = [
            np.asarray(read_tensor(path.parent / p), dtype=np.float64).reshape(-1, 3)
            for p in spec["pointmaps"]
        ]
        return PointCloud(np.vstack(parts) if parts else np.empty((0, 3)))
    if "depths" in spec:
        if gt_scene is None:
            raise InputError("depth-based predictions need --gt pointing at a sparse model")
        poses = {}
        if poses_path:
            for line in Path(poses_path).read_text().splitlines():
                if line.strip():
                    d = json.loads(line)
                    poses[d["image"]] = (
                        np.asarray(d["q"], dtype=np.float64),
                        np.asarray(d["t"], dtype=np.float64),
                    )
        by_name = {img.name: img for img in gt_scene.images.values()}
        parts = []
        for entry in spec["depths"]:
            name = entry["image"]
            if name not in by_name:
                raise InputError(f"depth entry references unknown image {name!r}")
            img = by_name[name]
            cam = gt_scene.cameras[img.camera_id]
            depth = read_tensor(path.parent / entry["path"])
            if name in poses:
                from .so3 import quat_to_matrix

                rotation, tvec = quat_to_matrix(poses[name][0]), poses[name][1]
            else:
                rotation, tvec = img.rotation(), img.tvec
            cloud = recon_mod.unproject_depth(
                depth, cam, rotation, tvec, downscale=float(entry.get("downscale", 1.0))
            )
            parts.append(cloud.points)
        return PointCloud(np.vstack(parts) if parts else np.empty((0, 3)))
    raise InputError(f"{pred_path}: expected .evbt or a manifest with 'pointmaps' or 'depths'")


def _load_gt(gt_path: str):
    path = Path(gt_path)
    if path.is_file() and path.suffix == ".evbt":
        return None, PointCloud(np.asarray(read_tensor(path), dtype=np.float64).reshape(-1, 3))
    scene = read_sparse_model(path)
    return scene, scene_point_cloud(scene)


def _resolve_scale(args, scene) -> float:
    if args.scale is not None:
        return args.scale
    if args.annotations:
        store = AnnotationStore(args.annotations)
        record = store.latest(args.scene_id or "")
        if record is None or record.scale_to_meters is None:
            raise InputError(
                f"no metric-scale annotation for scene {args.scene_id!r} in {args.annotations}"
            )
        return record.scale_to_meters
    if scene is not None and scene.scale_to_meters:
        return scene.scale_to_meters
    raise InputError("metric scale required: pass --scale or --annotations/--scene-id")


def _recon_one(pred_path, gt_path, scale, poses_path, cfg: ToolConfig):
    gt_scene, gt_cloud = _load_gt(gt_path)
    pred_cloud = _load_pred_cloud(pred_path, gt_scene, poses_path)
    report = recon_mod.evaluate_recon(
        pred_cloud,
        gt_cloud,
        scale,
        params=cfg.recon.icp_params(),
        subsample_cap=cfg.recon.subsample_cap,
        seed=cfg.recon.seed,
    )
    return report.to_json_dict()


def cmd_eval_recon(args, cfg: ToolConfig) -> int:
    if args.manifest:
        manifest = json.loads(Path(args.manifest).read_text())
        base = Path(args.manifest).parent
        scenes_out = {}
        summaries = []
        for entry in manifest:
            scene_id = entry["scene_id"]
            try:
                scale = entry.get("scale")
                if scale is None:
                    store = AnnotationStore(args.annotations) if args.annotations else None
                    record = store.latest(scene_id) if store else None
                    if record is None or record.scale_to_meters is None:
                        raise InputError(f"scene {scene_id!r}: no metric scale available")
                    scale = record.scale_to_meters
                result = _recon_one(
                    str(base / entry["pred"]), str(base / entry["gt"]), scale, None, cfg
                )
                scenes_out[scene_id] = result
                summaries.append(result["summary"])
            except (InputError, ValueError, OSError, ColmapParseError, TensorFormatError) as e:
                scenes_out[scene_id] = {"failed": str(e)}
        aggregate = None
        if summaries:
            aggregate = {
                k: sum(s[k] for s in summaries) / len(summaries) for k in summaries[0]
            }
        _write_report(args.out, {"scenes": scenes_out, "aggregate": aggregate}, cfg)
        return EXIT_OK
    gt_scene, _ = _load_gt(args.gt)
    scale = _resolve_scale(args, gt_scene)
    result = _recon_one(args.pred, args.gt, scale, args.poses, cfg)
    _write_report(args.out, result, cfg)
    return EXIT_OK


def cmd_eval_depth(args, cfg: ToolConfig) -> int:
    manifest = Path(args.manifest)
    frames = []
    with open(manifest, newline="") as f:
        reader = csv.DictReader(f)
        required = {"scene", "image", "pred_path", "gt_path"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise InputError(f"depth manifest needs columns {sorted(required)}")
        frames = list(reader)
    if not frames:
        raise InputError("depth manifest lists no frames")
    rows = []
    for row in frames:
        pred = read_tensor(manifest.parent / row["pred_path"])
        gt = read_tensor(manifest.parent / row["gt_path"])
        m = depth_eval.depth_metrics(pred, gt, apply_scaling=cfg.depth.apply_median_scaling)
        rows.append(
            {"scene": row["scene"], "image": row["image"], "abs_rel": m.abs_rel, "delta1": m.delta1}
        )
    aggregate = {
        "abs_rel": sum(r["abs_rel"] for r in rows) / len(rows),
        "delta1": sum(r["delta1"] for r in rows) / len(rows),
        "n_frames": len(rows),
    }
    _write_report(args.out, {"frames": rows, "aggregate": aggregate}, cfg)
    return EXIT_OK


def cmd_sample_greedy(args, cfg: ToolConfig) -> int:
    scenes = _scene_map(args.scenes)
    store = AnnotationStore(args.annotations) if args.annotations else None
    out = {}
    for scene_id, model_dir in sorted(scenes.items()):
        scene = read_sparse_model(model_dir)
        scale = args.scale
        if scale is None and store is not None:
            record = store.latest(scene_id)
            scale = record.scale_to_meters if record else None
        graph = sampler.build_covis_graph(
            scene, cfg.sampler.min_shared, cfg.sampler.min_trans_m, scale
        )
        picks = sampler.greedy_sample(
            graph, cfg.sampler.n_images, cfg.sampler.w_conn, cfg.sampler.w_div, cfg.sampler.seed
        )
        out[scene_id] = [scene.images[i].name for i in picks]
    _write_report(args.out, {"samples": out}, cfg)
    return EXIT_OK


def cmd_loss_batch(args, cfg: ToolConfig) -> int:
    rows = []
    for lineno, line in enumerate(Path(args.input).read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rows.append(loss_mod.loss_input_from_json_dict(json.loads(line)))
        except (json.JSONDecodeError, ValueError) as e:
            raise InputError(f"{args.input}: line {lineno}: {e}") from None
    if not rows:
        raise InputError(f"{args.input}: no loss rows")
    report = loss_mod.evaluate_loss_rows(rows, translation_mode=args.translation_mode)
    _write_report(args.out, report, cfg)
    return EXIT_OK


def _curves_by_kind(trace_path: str) -> dict[str, repr_analysis.SimilarityCurve]:
    traces = repr_analysis.load_trace_manifest(trace_path)
    return {kind: repr_analysis.layer_similarity(t) for kind, t in traces.items()}


def cmd_layers_select(args, cfg: ToolConfig) -> int:
    curves = _curves_by_kind(args.trace)
    out = {}
    for kind, curve in sorted(curves.items()):
        out[kind] = {
            "similarity": curve.sim.tolist(),
            "mean": curve.mean,
            "std": curve.std,
            "selected": repr_analysis.select_layers(curve, cfg.layers.delta),
        }
    _write_report(args.out, {"kinds": out}, cfg)
    return EXIT_OK


def cmd_layers_mask(args, cfg: ToolConfig) -> int:
    family = args.family.lower()
    if family in repr_analysis.FIXED_LAYER_FAMILIES:
        layers = sorted(repr_analysis.fixed_layer_set(family))
        by_kind = {"frame": layers, "global": layers}
    else:
        if not args.trace:
            raise InputError(f"family {args.family!r} needs --trace with measured similarity curves")
        by_kind = {
            kind: repr_analysis.select_layers(curve, cfg.layers.delta)
            for kind, curve in sorted(_curves_by_kind(args.trace).items())
        }
    rows = repr_analysis.bias_tuning_manifest(by_kind)
    Path(args.out).write_text(json.dumps(rows, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_annotate_serve(args, cfg: ToolConfig) -> int:
    host, _, port = args.bind.rpartition(":")
    state = ServiceState(
        args.scenes,
        args.state,
        static_dir=args.static,
        max_points=cfg.service.max_points,
        downsample_seed=cfg.service.downsample_seed,
    )
    server = create_server(state, host or "127.0.0.1", int(port))
    print(f"listening on http://{server.server_address[0]}:{server.server_address[1]}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.shutdown()
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser wiring


def build_parser() -> _Parser:
    parser = _Parser(prog="evbench", description=__doc__)
    parser.add_argument("--version", action="version", version=f"evbench {__version__}")
    top = parser.add_subparsers(dest="command", required=True)

    def sub(group, name, func, **kwargs):
        p = group.add_parser(name, **kwargs)
        p.set_defaults(func=func)
        _add_config_flags(p)
        return p

    pairs = top.add_parser("pairs", help="pair-set curation").add_subparsers(
        dest="subcommand", required=True
    )
    p = sub(pairs, "curate", cmd_pairs_curate, help="build a curated pair file from sparse models")
    p.add_argument("--scenes", required=True, help="scene dir (or parent of scene dirs)")
    p.add_argument("--out", required=True, help="output pair JSONL")
    p.add_argument("--verification", help="match-count CSV (image_a,image_b,match_count,coverage)")
    p.add_argument("--exclusions", help="exclusion list (scene_id,image_a,image_b per line)")
    p.add_argument("--stats", help="write curation stats JSON here")

    ev = top.add_parser("eval", help="evaluation commands").add_subparsers(
        dest="subcommand", required=True
    )
    p = sub(ev, "pose", cmd_eval_pose, help="relative-pose metrics for a prediction file")
    p.add_argument("--pairs", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--per-pair", help="also write per-pair errors CSV")

    p = sub(ev, "recon", cmd_eval_recon, help="point-cloud ACC/CMP after Umeyama+ICP alignment")
    p.add_argument("--pred", help=".evbt cloud or manifest JSON (pointmaps/depths)")
    p.add_argument("--gt", help="sparse model dir or fused .evbt cloud")
    p.add_argument("--manifest", help="multi-scene manifest JSON")
    p.add_argument("--out", required=True)
    p.add_argument("--scale", type=float, help="model units -> meters")
    p.add_argument("--annotations", help="annotation store with metric scales")
    p.add_argument("--scene-id", help="scene id for --annotations lookup")
    p.add_argument("--poses", help="predicted poses JSONL for depth unprojection")

    p = sub(ev, "depth", cmd_eval_depth, help="AbsRel / delta1 over a frame manifest")
    p.add_argument("--manifest", required=True, help="CSV: scene,image,pred_path,gt_path")
    p.add_argument("--out", required=True)

    sample = top.add_parser("sample", help="image sampling").add_subparsers(
        dest="subcommand", required=True
    )
    p = sub(sample, "greedy", cmd_sample_greedy, help="graph-based greedy image selection")
    p.add_argument("--scenes", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--scale", type=float)
    p.add_argument("--annotations")

    lo = top.add_parser("loss", help="alignment objective").add_subparsers(
        dest="subcommand", required=True
    )
    p = sub(lo, "batch", cmd_loss_batch, help="evaluate the loss on a JSONL batch")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument(
        "--translation-mode", choices=loss_mod.TRANSLATION_MODES, help="add the L1 translation term"
    )

    la = top.add_parser("layers", help="backbone layer analysis").add_subparsers(
        dest="subcommand", required=True
    )
    p = sub(la, "select", cmd_layers_select, help="similarity curves and selected layers")
    p.add_argument("--trace", required=True, help="trace manifest JSON")
    p.add_argument("--out", required=True)
    p = sub(la, "mask", cmd_layers_mask, help="bias-parameter fine-tuning mask manifest")
    p.add_argument("--family", required=True, help="vggt | wm | pi3")
    p.add_argument("--trace", help="trace manifest (required for curve-based families)")
    p.add_argument("--out", required=True)

    an = top.add_parser("annotate", help="annotation workflow").add_subparsers(
        dest="subcommand", required=True
    )
    p = sub(an, "serve", cmd_annotate_serve, help="serve the annotation API and UI")
    p.add_argument("--scenes", required=True)
    p.add_argument("--state", required=True)
    p.add_argument("--bind", default="127.0.0.1:8080")
    p.add_argument("--static", help="static asset dir (annotator UI build)")

    return parser


def main(argv: list[str] | None = None, environ: dict[str, str] | None = None) -> int:
    import os

    environ = os.environ if environ is None else environ
    try:
        parser = build_parser()
        args = parser.parse_args(argv)
        cfg = _resolve_config(args, environ)
        return args.func(args, cfg)
    except UsageError as e:
        print(json.dumps({"error": "usage", "message": str(e)}), file=sys.stderr)
        return EXIT_USAGE
    except (
        InputError,
        ConfigError,
        FileNotFoundError,
        ColmapParseError,
        TensorFormatError,
        pose_eval.PredictionFormatError,
        pose_eval.MissingPredictionError,
        pose_eval.EmptyInputError,
        sampler.MissingScaleError,
        ValueError,
        OSError,
    ) as e:
        print(json.dumps({"error": type(e).__name__, "message": str(e)}), file=sys.stderr)
        return EXIT_INPUT
    except Exception as e:  # pragma: no cover - defensive
        print(json.dumps({"error": "internal", "message": f"{type(e).__name__}: {e}"}), file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
