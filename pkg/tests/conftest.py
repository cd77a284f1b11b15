"""Session-wide fixtures: the rendered synthetic suite, loaded once."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import pytest

from cvbench import io
from cvbench.covisibility import covisibility_pair, warp_depth
from cvbench.geometry import relative_pose
from cvbench.suite import make_fixture_suite

SUITE_SEED = 0


@pytest.fixture(scope="session")
def suite_dir(tmp_path_factory) -> Path:
    out = tmp_path_factory.mktemp("suite")
    make_fixture_suite(out, seed=SUITE_SEED)
    return out


@dataclass
class PairData:
    pair_id: str
    cam_a: io.CameraRecord
    cam_b: io.CameraRecord
    depth_a: object
    depth_b: object
    normals_a: object
    normals_b: object
    oracle_ab: object
    oracle_ba: object
    _covis: tuple | None = None
    _warps: tuple | None = None

    @property
    def covis(self):
        """Module label maps, computed once per pair."""
        if self._covis is None:
            self._covis = covisibility_pair(
                self.cam_a.intr, self.depth_a, self.normals_a, self.cam_a.pose,
                self.cam_b.intr, self.depth_b, self.normals_b, self.cam_b.pose,
            )
        return self._covis

    @property
    def warps(self):
        if self._warps is None:
            rel_ab = relative_pose(self.cam_a.pose, self.cam_b.pose)
            rel_ba = relative_pose(self.cam_b.pose, self.cam_a.pose)
            self._warps = (
                warp_depth(self.depth_a, self.depth_b, self.cam_a.intr, self.cam_b.intr, rel_ab),
                warp_depth(self.depth_b, self.depth_a, self.cam_b.intr, self.cam_a.intr, rel_ba),
            )
        return self._warps


@pytest.fixture(scope="session")
def suite(suite_dir) -> dict[str, PairData]:
    cams = io.read_cameras(suite_dir / "cameras.json")
    pairs = io.read_pairs(suite_dir / "pairs.jsonl")
    out: dict[str, PairData] = {}
    for pair in pairs:
        pid = pair["pair_id"]
        o_ab, o_ba = io.load_covis_pair(suite_dir / "oracle_covis", pid)
        out[pid] = PairData(
            pair_id=pid,
            cam_a=cams[pair["image_a"]],
            cam_b=cams[pair["image_b"]],
            depth_a=io.load_depth(suite_dir / "depth", pair["image_a"]),
            depth_b=io.load_depth(suite_dir / "depth", pair["image_b"]),
            normals_a=io.load_normals(suite_dir / "normal", pair["image_a"]),
            normals_b=io.load_normals(suite_dir / "normal", pair["image_b"]),
            oracle_ab=o_ab,
            oracle_ba=o_ba,
        )
    return out


@pytest.fixture(scope="session")
def suite_truth(suite_dir) -> dict:
    import json

    return json.loads((suite_dir / "truth.json").read_text())
