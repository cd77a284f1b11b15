"""Readers and writers for the pipeline's JSON-based interchange files.

JSON files are written with sorted keys and JSONL files one record per
line, so identical data always serializes to identical bytes. Readers
validate eagerly and raise DataError with the offending path and line.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .alignment import AlignmentResult
from .binning import BenchmarkManifest
from .errors import DataError
from .geometry import CameraIntrinsics, RigidPose, quat_to_rotation, rotation_to_quat
from .poseeval import EvalRecord, MatchSet
from .rasters import CovisibilityMap, DepthMap, NormalMap, read_covis, read_depth, read_normals


@dataclass(frozen=True)
class CameraRecord:
    image_id: str
    intr: CameraIntrinsics
    pose: RigidPose


def _load_json(path: Path):
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise DataError(f"{path}: {exc.strerror}") from exc
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise DataError(f"{path}: invalid JSON: {exc}") from exc


def _dump_json(path: Path, data) -> None:
    path.write_text(json.dumps(data, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def _iter_jsonl(path: Path):
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError as exc:
        raise DataError(f"{path}: {exc.strerror}") from exc
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            yield json.loads(line)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}:{lineno}: invalid JSON: {exc}") from exc


def _dump_jsonl(path: Path, records) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def write_cameras(path: str | Path, cameras: list[CameraRecord]) -> None:
    records = []
    for cam in cameras:
        records.append(
            {
                "image_id": cam.image_id,
                "fx": cam.intr.fx,
                "fy": cam.intr.fy,
                "cx": cam.intr.cx,
                "cy": cam.intr.cy,
                "width": cam.intr.width,
                "height": cam.intr.height,
                "q_wxyz": [float(v) for v in rotation_to_quat(cam.pose.rotation)],
                "t_xyz": [float(v) for v in cam.pose.translation],
            }
        )
    _dump_json(Path(path), records)


def read_cameras(path: str | Path) -> dict[str, CameraRecord]:
    path = Path(path)
    data = _load_json(path)
    if not isinstance(data, list):
        raise DataError(f"{path}: expected a list of camera records")
    cameras: dict[str, CameraRecord] = {}
    for rec in data:
        try:
            image_id = str(rec["image_id"])
            intr = CameraIntrinsics(
                fx=float(rec["fx"]),
                fy=float(rec["fy"]),
                cx=float(rec["cx"]),
                cy=float(rec["cy"]),
                width=int(rec["width"]),
                height=int(rec["height"]),
            )
            q = np.asarray(rec["q_wxyz"], dtype=np.float64)
            t = np.asarray(rec["t_xyz"], dtype=np.float64)
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"{path}: malformed camera record: {exc}") from exc
        if q.shape != (4,) or t.shape != (3,):
            raise DataError(f"{path}: camera {image_id!r} has bad q_wxyz/t_xyz shapes")
        norm = float(np.linalg.norm(q))
        if abs(norm - 1.0) > 1e-3:
            raise DataError(f"{path}: camera {image_id!r} quaternion norm {norm:.4f} != 1")
        if image_id in cameras:
            raise DataError(f"{path}: duplicate image_id {image_id!r}")
        pose = RigidPose(rotation=quat_to_rotation(q), translation=t)
        cameras[image_id] = CameraRecord(image_id=image_id, intr=intr, pose=pose)
    return cameras


def read_pairs(path: str | Path) -> list[dict]:
    path = Path(path)
    pairs = []
    seen = set()
    for rec in _iter_jsonl(path):
        try:
            pair = {
                "pair_id": str(rec["pair_id"]),
                "image_a": str(rec["image_a"]),
                "image_b": str(rec["image_b"]),
            }
        except KeyError as exc:
            raise DataError(f"{path}: pair record lacks {exc}") from exc
        if pair["pair_id"] in seen:
            raise DataError(f"{path}: duplicate pair_id {pair['pair_id']!r}")
        seen.add(pair["pair_id"])
        pairs.append(pair)
    return pairs


def write_pairs(path: str | Path, pairs: list[dict]) -> None:
    _dump_jsonl(Path(path), pairs)


def depth_path(depth_dir: str | Path, image_id: str) -> Path:
    return Path(depth_dir) / f"{image_id}.cvb"


def normal_path(normal_dir: str | Path, image_id: str) -> Path:
    return Path(normal_dir) / f"{image_id}.cvb"


def covis_paths(covis_dir: str | Path, pair_id: str) -> tuple[Path, Path]:
    base = Path(covis_dir)
    return base / f"{pair_id}.ab.cvb", base / f"{pair_id}.ba.cvb"


def load_depth(depth_dir: str | Path, image_id: str) -> DepthMap:
    return read_depth(depth_path(depth_dir, image_id))


def load_normals(normal_dir: str | Path, image_id: str) -> NormalMap:
    return read_normals(normal_path(normal_dir, image_id))


def load_covis_pair(covis_dir: str | Path, pair_id: str) -> tuple[CovisibilityMap, CovisibilityMap]:
    path_ab, path_ba = covis_paths(covis_dir, pair_id)
    return read_covis(path_ab), read_covis(path_ba)


def write_criteria(path: str | Path, records: list[dict]) -> None:
    _dump_jsonl(Path(path), records)


def read_criteria(path: str | Path) -> list[dict]:
    path = Path(path)
    records = []
    for rec in _iter_jsonl(path):
        if "pair_id" not in rec:
            raise DataError(f"{path}: criteria record lacks pair_id")
        records.append(rec)
    return records


def read_matches(path: str | Path) -> dict[str, MatchSet]:
    path = Path(path)
    out: dict[str, MatchSet] = {}
    for rec in _iter_jsonl(path):
        try:
            pair_id = str(rec["pair_id"])
            pts_a = np.asarray(rec["points_a"], dtype=np.float64).reshape(-1, 2)
            pts_b = np.asarray(rec["points_b"], dtype=np.float64).reshape(-1, 2)
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"{path}: malformed match record: {exc}") from exc
        if pair_id in out:
            raise DataError(f"{path}: duplicate matches for pair {pair_id!r}")
        if pts_a.shape != pts_b.shape:
            raise DataError(f"{path}: pair {pair_id!r} has mismatched point counts")
        out[pair_id] = MatchSet(points1=pts_a, points2=pts_b)
    return out


def write_matches(path: str | Path, matches: dict[str, MatchSet]) -> None:
    records = []
    for pair_id in sorted(matches):
        mset = matches[pair_id]
        records.append(
            {
                "pair_id": pair_id,
                "points_a": [[float(x), float(y)] for x, y in mset.points1],
                "points_b": [[float(x), float(y)] for x, y in mset.points2],
            }
        )
    _dump_jsonl(Path(path), records)


def read_pred_poses(path: str | Path) -> dict[str, dict]:
    """Externally supplied metric relative poses, keyed by pair_id."""
    path = Path(path)
    out: dict[str, dict] = {}
    for rec in _iter_jsonl(path):
        try:
            pair_id = str(rec["pair_id"])
            q = np.asarray(rec["q_wxyz"], dtype=np.float64)
            t = np.asarray(rec["t_xyz"], dtype=np.float64)
            metric = bool(rec.get("metric", False))
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"{path}: malformed pose record: {exc}") from exc
        if q.shape != (4,) or t.shape != (3,):
            raise DataError(f"{path}: pose for {pair_id!r} has bad shapes")
        if not metric:
            raise DataError(f"{path}: pose for {pair_id!r} is not marked metric")
        if pair_id in out:
            raise DataError(f"{path}: duplicate pose for pair {pair_id!r}")
        out[pair_id] = {"rotation": quat_to_rotation(q), "translation": t}
    return out


def write_manifest(path: str | Path, manifest: BenchmarkManifest) -> None:
    _dump_json(Path(path), manifest.to_dict())


def read_manifest(path: str | Path) -> BenchmarkManifest:
    data = _load_json(Path(path))
    try:
        return BenchmarkManifest.from_dict(data)
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{path}: malformed manifest: {exc}") from exc


def write_eval_records(path: str | Path, method: str, records: list[EvalRecord]) -> None:
    rows = []
    for rec in sorted(records, key=lambda r: r.pair_id):
        rows.append(
            {
                "pair_id": rec.pair_id,
                "method": method,
                "success": bool(rec.success),
                "rot_err_deg": rec.rot_err_deg,
                "trans_err_m": rec.trans_err_m,
                "failure_reason": rec.failure_reason,
            }
        )
    _dump_jsonl(Path(path), rows)


def read_eval_records(path: str | Path) -> tuple[str, list[EvalRecord]]:
    path = Path(path)
    method = None
    records = []
    for rec in _iter_jsonl(path):
        try:
            rec_method = str(rec["method"])
            record = EvalRecord(
                pair_id=str(rec["pair_id"]),
                success=bool(rec["success"]),
                rot_err_deg=rec.get("rot_err_deg"),
                trans_err_m=rec.get("trans_err_m"),
                failure_reason=rec.get("failure_reason"),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"{path}: malformed eval record: {exc}") from exc
        if method is None:
            method = rec_method
        elif method != rec_method:
            raise DataError(f"{path}: mixed methods {method!r} and {rec_method!r}")
        records.append(record)
    if method is None:
        raise DataError(f"{path}: no eval records")
    return method, records


def write_alignment_report(
    path: str | Path, result: AlignmentResult
) -> None:
    report = {
        "scale": float(result.model.scale),
        "rotation_q_wxyz": [float(v) for v in rotation_to_quat(result.model.rotation)],
        "translation_xyz": [float(v) for v in result.model.translation],
        "inlier_count": int(result.inliers.sum()),
        "iterations": int(result.iterations),
        "inliers": [bool(v) for v in result.inliers],
        "residuals_m": [float(v) for v in result.residuals],
    }
    _dump_json(Path(path), report)
