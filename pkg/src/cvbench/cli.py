"""The ``cvb`` command line tool.

Stages mirror the library: synth, align, covis, criteria, build, eval,
report. Each stage reads and writes plain files, so a benchmark run is a
sequence of shell commands. All randomness is seeded and per-pair work is
order-independent, so outputs do not depend on --threads.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import io
from .alignment import apply_and_filter, lo_ransac_align
from .binning import build_manifest
from .covisibility import CovisParams, covisibility_pair
from .criteria import criteria_from_maps
from .depthops import normals_from_depth
from .errors import CvbError, DataError, EmptyCovisibility, InsufficientData
from .geometry import RelativePose, relative_pose
from .poseeval import EvalRecord, evaluate_pair, judge, pose_errors
from .rasters import write_covis
from .reporting import aggregate, emit_report
from .suite import make_fixture_suite

log = logging.getLogger("cvb")


def _thread_count(args) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    env = os.environ.get("CVB_THREADS", "")
    if env.strip():
        try:
            return max(1, int(env))
        except ValueError:
            raise DataError(f"CVB_THREADS is not an integer: {env!r}") from None
    return 1


def _map_ordered(fn, items, threads: int) -> list:
    """Apply fn to each item, preserving order; threads only add workers."""
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def cmd_synth(args) -> int:
    truth = make_fixture_suite(args.out, seed=args.seed)
    log.info("wrote fixture suite with %d pairs to %s", len(truth), args.out)
    return 0


def cmd_align(args) -> int:
    est = io.read_cameras(args.cameras)
    ref = io.read_cameras(args.ref)
    common = sorted(set(est) & set(ref))
    if len(common) < 3:
        raise InsufficientData(
            f"only {len(common)} image ids shared between {args.cameras} and {args.ref}"
        )
    src = np.stack([est[i].pose.translation for i in common])
    dst = np.stack([ref[i].pose.translation for i in common])
    result = lo_ransac_align(
        src, dst, threshold=args.threshold, seed=args.seed, max_iters=args.max_iters
    )
    poses = [est[i].pose for i in common]
    aligned = apply_and_filter(poses, result.model, result.inliers)
    kept = [i for i, keep in zip(common, result.inliers) if keep]
    records = [
        io.CameraRecord(image_id=i, intr=est[i].intr, pose=p)
        for i, p in zip(kept, aligned)
    ]
    io.write_cameras(args.out, records)
    io.write_alignment_report(args.report, result)
    log.info(
        "aligned %d/%d cameras (scale %.6g) -> %s",
        len(kept),
        len(common),
        result.model.scale,
        args.out,
    )
    return 0


def _load_view(data: Path, cameras: dict, image_id: str, window: int):
    if image_id not in cameras:
        raise DataError(f"image id {image_id!r} missing from {data / 'cameras.json'}")
    cam = cameras[image_id]
    depth = io.load_depth(data / "depth", image_id)
    if io.normal_path(data / "normal", image_id).exists():
        normals = io.load_normals(data / "normal", image_id)
    else:
        normals = normals_from_depth(depth, cam.intr, window=window)
    return cam, depth, normals


def cmd_covis(args) -> int:
    data = Path(args.data)
    pairs = io.read_pairs(data / "pairs.jsonl")
    cameras = io.read_cameras(data / "cameras.json")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    params = CovisParams(tau=args.tau, epsilon_deg=args.epsilon_deg)

    def work(pair):
        cam_a, depth_a, norm_a = _load_view(data, cameras, pair["image_a"], args.normal_window)
        cam_b, depth_b, norm_b = _load_view(data, cameras, pair["image_b"], args.normal_window)
        covis_ab, covis_ba = covisibility_pair(
            cam_a.intr, depth_a, norm_a, cam_a.pose,
            cam_b.intr, depth_b, norm_b, cam_b.pose,
            params,
        )
        path_ab, path_ba = io.covis_paths(out, pair["pair_id"])
        write_covis(path_ab, covis_ab)
        write_covis(path_ba, covis_ba)
        return pair["pair_id"]

    done = _map_ordered(work, pairs, _thread_count(args))
    log.info("labelled %d pairs -> %s", len(done), out)
    return 0


def cmd_criteria(args) -> int:
    data = Path(args.data)
    covis_dir = Path(args.covis)
    pairs = io.read_pairs(data / "pairs.jsonl")
    cameras = io.read_cameras(data / "cameras.json")

    def work(pair):
        pair_id = pair["pair_id"]
        cam_a = cameras[pair["image_a"]]
        cam_b = cameras[pair["image_b"]]
        depth_a = io.load_depth(data / "depth", pair["image_a"])
        depth_b = io.load_depth(data / "depth", pair["image_b"])
        covis_ab, covis_ba = io.load_covis_pair(covis_dir, pair_id)
        rec = {
            "pair_id": pair_id,
            "image_a": pair["image_a"],
            "image_b": pair["image_b"],
            "baseline_m": relative_pose(cam_a.pose, cam_b.pose).baseline,
        }
        try:
            crit = criteria_from_maps(
                cam_a.intr, depth_a, cam_a.pose,
                cam_b.intr, depth_b, cam_b.pose,
                covis_ab, covis_ba,
            )
        except EmptyCovisibility:
            rec["criteria_undefined"] = "EmptyCovisibility"
            return rec
        rec.update(
            {
                "omega": crit.omega,
                "delta": crit.delta,
                "theta_deg": crit.theta_deg,
                "covis_ab": crit.covis_pixels_ab,
                "covis_ba": crit.covis_pixels_ba,
            }
        )
        return rec

    records = _map_ordered(work, pairs, _thread_count(args))
    io.write_criteria(args.out, records)
    defined = sum(1 for r in records if "omega" in r)
    log.info("criteria for %d pairs (%d defined) -> %s", len(records), defined, args.out)
    return 0


def cmd_build(args) -> int:
    records = io.read_criteria(args.criteria)
    usable = []
    for rec in records:
        if "criteria_undefined" in rec:
            continue
        if args.min_baseline > 0.0:
            if "baseline_m" not in rec:
                raise DataError(
                    f"record for pair {rec.get('pair_id')!r} lacks baseline_m; "
                    "--min-baseline needs it"
                )
            if float(rec["baseline_m"]) < args.min_baseline:
                continue
        usable.append(rec)
    manifest = build_manifest(
        usable, target=args.target, seed=args.seed, allow_any_boxes=args.allow_any_box
    )
    io.write_manifest(args.out, manifest)
    n_pairs = sum(len(b.pair_ids) for b in manifest.boxes)
    log.info(
        "manifest with %d boxes / %d pairs (from %d usable records) -> %s",
        len(manifest.boxes),
        n_pairs,
        len(usable),
        args.out,
    )
    return 0


def cmd_eval(args) -> int:
    data = Path(args.data)
    manifest = io.read_manifest(args.manifest)
    cameras = io.read_cameras(data / "cameras.json")
    pairs = {p["pair_id"]: p for p in io.read_pairs(data / "pairs.jsonl")}
    pair_ids = sorted({pid for box in manifest.boxes for pid in box.pair_ids})

    matches = io.read_matches(args.matches) if args.matches else None
    poses = io.read_pred_poses(args.poses) if args.poses else None

    def truth_for(pair_id: str) -> RelativePose:
        pair = pairs.get(pair_id)
        if pair is None:
            raise DataError(f"manifest pair {pair_id!r} missing from pairs.jsonl")
        cam_a = cameras[pair["image_a"]]
        cam_b = cameras[pair["image_b"]]
        return relative_pose(cam_a.pose, cam_b.pose)

    def work_matches(pair_id: str) -> EvalRecord:
        if pair_id not in matches:
            return EvalRecord(pair_id=pair_id, success=False, failure_reason="MissingPrediction")
        pair = pairs[pair_id]
        cam_a = cameras[pair["image_a"]]
        cam_b = cameras[pair["image_b"]]
        depth_a = io.load_depth(data / "depth", pair["image_a"])
        return evaluate_pair(
            pair_id,
            matches[pair_id],
            cam_a.intr,
            cam_b.intr,
            depth_a,
            truth_for(pair_id),
            threshold_px=args.threshold_px,
            seed=args.seed,
        )

    def work_poses(pair_id: str) -> EvalRecord:
        if pair_id not in poses:
            return EvalRecord(pair_id=pair_id, success=False, failure_reason="MissingPrediction")
        est = RelativePose(
            rotation=poses[pair_id]["rotation"], translation=poses[pair_id]["translation"]
        )
        rot_err, trans_err = pose_errors(est, truth_for(pair_id))
        return EvalRecord(
            pair_id=pair_id,
            success=judge(rot_err, trans_err),
            rot_err_deg=rot_err,
            trans_err_m=trans_err,
        )

    work = work_matches if matches is not None else work_poses
    records = _map_ordered(work, pair_ids, _thread_count(args))
    io.write_eval_records(args.out, args.method, records)
    n_ok = sum(1 for r in records if r.success)
    log.info(
        "evaluated %d pairs for %s: %d successes -> %s",
        len(records),
        args.method,
        n_ok,
        args.out,
    )
    return 0


def cmd_report(args) -> int:
    manifest = io.read_manifest(args.manifest)
    records_by_method = {}
    for path in args.records:
        method, records = io.read_eval_records(path)
        if method in records_by_method:
            raise DataError(f"method {method!r} appears in more than one records file")
        records_by_method[method] = records
    report = aggregate(records_by_method, manifest, missing_policy=args.missing_policy)
    emit_report(report, args.out)
    log.info("report for %s -> %s", ", ".join(sorted(records_by_method)), args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cvb",
        description="difficulty-binned benchmarking of two-view pose estimation",
    )
    parser.add_argument(
        "--threads",
        type=int,
        default=None,
        help="worker threads for per-pair stages (default: CVB_THREADS or 1)",
    )
    parser.add_argument("-q", "--quiet", action="store_true", help="only warnings")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="render the built-in synthetic fixture suite")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("align", help="align estimated camera centers to a reference")
    p.add_argument("--cameras", required=True, help="estimated cameras.json")
    p.add_argument("--ref", required=True, help="reference cameras.json")
    p.add_argument("--out", required=True, help="aligned cameras.json (inliers only)")
    p.add_argument("--report", required=True, help="alignment report json")
    p.add_argument("--threshold", type=float, default=1.0, help="inlier radius in metres")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-iters", type=int, default=5000)
    p.set_defaults(func=cmd_align)

    p = sub.add_parser("covis", help="label per-pixel co-visibility for each pair")
    p.add_argument("--data", required=True, help="dir with cameras.json, pairs.jsonl, depth/")
    p.add_argument("--out", required=True, help="output dir for label maps")
    p.add_argument("--tau", type=float, default=0.05, help="relative depth tolerance")
    p.add_argument("--epsilon-deg", type=float, default=5.0, help="facing-test margin")
    p.add_argument(
        "--normal-window",
        type=int,
        default=5,
        help="plane-fit window when normal rasters are absent",
    )
    p.set_defaults(func=cmd_covis)

    p = sub.add_parser("criteria", help="reduce label maps to difficulty criteria")
    p.add_argument("--data", required=True)
    p.add_argument("--covis", required=True, help="dir written by cvb covis")
    p.add_argument("--out", required=True, help="criteria.jsonl")
    p.set_defaults(func=cmd_criteria)

    p = sub.add_parser("build", help="sample a benchmark manifest from criteria")
    p.add_argument("--criteria", required=True)
    p.add_argument("--out", required=True, help="manifest.json")
    p.add_argument("--target", type=int, default=500, help="pairs per difficulty box")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument(
        "--min-baseline",
        type=float,
        default=0.0,
        help="drop pairs with camera centres closer than this (metres)",
    )
    p.add_argument(
        "--allow-any-box",
        action="store_true",
        help="also keep pairs outside the curated difficulty grid",
    )
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("eval", help="judge pose estimates over a manifest")
    p.add_argument("--data", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--method", required=True, help="method name for the records")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--matches", help="matches.jsonl to estimate poses from")
    group.add_argument("--poses", help="pred_poses.jsonl with metric relative poses")
    p.add_argument("--out", required=True, help="records.jsonl")
    p.add_argument("--threshold-px", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("report", help="aggregate eval records into tables and plots")
    p.add_argument("--manifest", required=True)
    p.add_argument(
        "--records", action="append", required=True, help="records.jsonl (repeatable)"
    )
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument(
        "--missing-policy",
        choices=("fail", "exclude"),
        default="fail",
        help="what to do when a method lacks records for manifest pairs",
    )
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(levelname)s %(message)s",
    )
    try:
        return args.func(args)
    except CvbError as exc:
        log.error("%s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
