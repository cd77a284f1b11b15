"""End-to-end tests of the ``cvb`` command line tool.

The pipeline fixture drives covis -> criteria -> build -> eval -> report
over the rendered suite once per module; individual tests then assert on
the produced files. Usage-error and crash-path cases run the installed
console script in a subprocess to also cover the entry point.
"""

import json
import subprocess

import numpy as np
import pytest

from cvbench import io
from cvbench.cli import main
from cvbench.geometry import RigidPose, relative_pose, rotation_to_quat
from cvbench.poseeval import EvalRecord
from cvbench.suite import DEFAULT_INTR

from helpers import random_rotation


def files_under(root):
    return sorted(p.relative_to(root) for p in root.rglob("*") if p.is_file())


@pytest.fixture(scope="module")
def pipeline(suite_dir, tmp_path_factory):
    """Everything the CLI produces for the suite, keyed by artifact."""
    work = tmp_path_factory.mktemp("cli")
    covis = work / "covis"
    covis_mt = work / "covis_mt"
    criteria = work / "criteria.jsonl"
    manifest = work / "manifest.json"
    manifest_all = work / "manifest_all.json"
    records = work / "records.jsonl"
    report = work / "report"

    assert main(["--quiet", "covis", "--data", str(suite_dir), "--out", str(covis)]) == 0
    assert (
        main(
            ["--quiet", "--threads", "4", "covis", "--data", str(suite_dir), "--out", str(covis_mt)]
        )
        == 0
    )
    assert (
        main(
            [
                "--quiet",
                "criteria",
                "--data",
                str(suite_dir),
                "--covis",
                str(covis),
                "--out",
                str(criteria),
            ]
        )
        == 0
    )
    assert (
        main(
            [
                "--quiet",
                "build",
                "--criteria",
                str(criteria),
                "--out",
                str(manifest),
                "--min-baseline",
                "0.001",
            ]
        )
        == 0
    )
    assert (
        main(["--quiet", "build", "--criteria", str(criteria), "--out", str(manifest_all)]) == 0
    )
    assert (
        main(
            [
                "--quiet",
                "eval",
                "--data",
                str(suite_dir),
                "--manifest",
                str(manifest),
                "--method",
                "oracle",
                "--matches",
                str(suite_dir / "matches.jsonl"),
                "--out",
                str(records),
            ]
        )
        == 0
    )
    assert (
        main(
            [
                "--quiet",
                "report",
                "--manifest",
                str(manifest),
                "--records",
                str(records),
                "--out",
                str(report),
            ]
        )
        == 0
    )
    return {
        "work": work,
        "covis": covis,
        "covis_mt": covis_mt,
        "criteria": criteria,
        "manifest": manifest,
        "manifest_all": manifest_all,
        "records": records,
        "report": report,
    }


class TestPipeline:
    def test_covis_writes_both_directions(self, pipeline, suite):
        names = {p.name for p in pipeline["covis"].iterdir()}
        for pid in suite:
            assert f"{pid}.ab.cvb" in names
            assert f"{pid}.ba.cvb" in names

    def test_threads_do_not_change_output(self, pipeline):
        one = pipeline["covis"]
        four = pipeline["covis_mt"]
        assert files_under(one) == files_under(four)
        for rel in files_under(one):
            assert (one / rel).read_bytes() == (four / rel).read_bytes(), rel

    def test_criteria_records(self, pipeline, suite):
        records = io.read_criteria(pipeline["criteria"])
        assert {r["pair_id"] for r in records} == set(suite)
        by_id = {r["pair_id"]: r for r in records}
        assert by_id["opposite"]["criteria_undefined"] == "EmptyCovisibility"
        assert by_id["identity"]["omega"] == 1.0
        assert by_id["rot_yaw12"]["baseline_m"] == 0.0

    def test_manifest_respects_baseline_and_grid(self, pipeline):
        manifest = io.read_manifest(pipeline["manifest"])
        picked = {pid for box in manifest.boxes for pid in box.pair_ids}
        # zero-baseline pairs fall to --min-baseline; the undefined pair and
        # the two pairs outside the curated difficulty grid never enter
        for pid in ("identity", "rot_yaw12", "opposite", "plane_half", "forward_5m"):
            assert pid not in picked
        for pid in ("forward_1m", "arc30", "arc45", "arc75", "facing_down"):
            assert pid in picked

    def test_eval_records_all_succeed(self, pipeline):
        method, records = io.read_eval_records(pipeline["records"])
        assert method == "oracle"
        manifest = io.read_manifest(pipeline["manifest"])
        wanted = {pid for box in manifest.boxes for pid in box.pair_ids}
        assert {r.pair_id for r in records} == wanted
        assert all(r.success for r in records)
        assert all(r.rot_err_deg < 0.1 for r in records)
        assert all(r.trans_err_m < 0.01 for r in records)

    def test_report_outputs(self, pipeline):
        report = pipeline["report"]
        csv = (report / "results.csv").read_text().splitlines()
        assert csv[0].startswith("method,")
        assert csv[1].startswith("oracle,")
        assert csv[1].endswith(",100.00,1.00")
        summary = json.loads((report / "summary.json").read_text())
        assert summary["overall"]["oracle"]["success_pct"] == 100.0
        assert summary["missing"]["oracle"] == []
        for plot in ("cumulative.svg", "overlap.svg", "scale.svg", "angle.svg"):
            assert (report / "plots" / plot).exists()


class TestEvalWithPoses:
    def test_supplied_poses_are_judged(self, pipeline, suite_dir, suite, tmp_path):
        manifest = io.read_manifest(pipeline["manifest_all"])
        pair_ids = sorted({pid for box in manifest.boxes for pid in box.pair_ids})
        assert "identity" in pair_ids  # zero baseline is fine for given poses
        skipped = pair_ids[0]
        wrong = pair_ids[1]
        rows = []
        for pid in pair_ids:
            if pid == skipped:
                continue
            pair = suite[pid]
            rel = relative_pose(pair.cam_a.pose, pair.cam_b.pose)
            translation = rel.translation.copy()
            if pid == wrong:
                translation = translation + np.array([0.0, 0.0, 3.0])
            rows.append(
                {
                    "pair_id": pid,
                    "q_wxyz": [float(v) for v in rotation_to_quat(rel.rotation)],
                    "t_xyz": [float(v) for v in translation],
                    "metric": True,
                }
            )
        poses_path = tmp_path / "pred_poses.jsonl"
        poses_path.write_text("".join(json.dumps(r, sort_keys=True) + "\n" for r in rows))
        out = tmp_path / "records.jsonl"
        rc = main(
            [
                "--quiet",
                "eval",
                "--data",
                str(suite_dir),
                "--manifest",
                str(pipeline["manifest_all"]),
                "--method",
                "given",
                "--poses",
                str(poses_path),
                "--out",
                str(out),
            ]
        )
        assert rc == 0
        _, records = io.read_eval_records(out)
        by_id = {r.pair_id: r for r in records}
        assert len(by_id) == len(pair_ids)
        assert not by_id[skipped].success
        assert by_id[skipped].failure_reason == "MissingPrediction"
        assert not by_id[wrong].success
        assert by_id[wrong].trans_err_m == pytest.approx(3.0)
        for pid in pair_ids:
            if pid in (skipped, wrong):
                continue
            assert by_id[pid].success
            assert by_id[pid].rot_err_deg == pytest.approx(0.0, abs=1e-9)


class TestAlign:
    def test_recovers_similarity_and_drops_outlier(self, tmp_path):
        rng = np.random.default_rng(7)
        scale = 2.0
        ang = np.radians(30.0)
        rot = np.array(
            [
                [np.cos(ang), -np.sin(ang), 0.0],
                [np.sin(ang), np.cos(ang), 0.0],
                [0.0, 0.0, 1.0],
            ]
        )
        shift = np.array([5.0, -7.0, 0.3])
        ref_records = []
        est_records = []
        for i in range(12):
            center = np.array([rng.uniform(0, 50), rng.uniform(0, 50), 0.0])
            orient = random_rotation(rng)
            ref_records.append(
                io.CameraRecord(
                    image_id=f"img{i:02d}",
                    intr=DEFAULT_INTR,
                    pose=RigidPose(rotation=orient, translation=center),
                )
            )
            est_center = rot.T @ (center - shift) / scale
            if i == 5:
                est_center = est_center + np.array([7.0, 7.0, 0.0])
            est_records.append(
                io.CameraRecord(
                    image_id=f"img{i:02d}",
                    intr=DEFAULT_INTR,
                    pose=RigidPose(rotation=rot.T @ orient, translation=est_center),
                )
            )
        io.write_cameras(tmp_path / "ref.json", ref_records)
        io.write_cameras(tmp_path / "est.json", est_records)
        rc = main(
            [
                "--quiet",
                "align",
                "--cameras",
                str(tmp_path / "est.json"),
                "--ref",
                str(tmp_path / "ref.json"),
                "--out",
                str(tmp_path / "aligned.json"),
                "--report",
                str(tmp_path / "align_report.json"),
            ]
        )
        assert rc == 0
        aligned = io.read_cameras(tmp_path / "aligned.json")
        assert "img05" not in aligned
        assert len(aligned) == 11
        for rec in ref_records:
            if rec.image_id == "img05":
                continue
            got = aligned[rec.image_id]
            np.testing.assert_allclose(got.pose.translation, rec.pose.translation, atol=1e-6)
            np.testing.assert_allclose(got.pose.rotation, rec.pose.rotation, atol=1e-6)
        report = json.loads((tmp_path / "align_report.json").read_text())
        assert report["inlier_count"] == 11
        assert report["scale"] == pytest.approx(2.0, rel=1e-6)

    def test_too_few_shared_ids(self, tmp_path):
        records = [
            io.CameraRecord(
                image_id="only",
                intr=DEFAULT_INTR,
                pose=RigidPose(rotation=np.eye(3), translation=np.zeros(3)),
            )
        ]
        io.write_cameras(tmp_path / "a.json", records)
        io.write_cameras(tmp_path / "b.json", records)
        rc = main(
            [
                "--quiet",
                "align",
                "--cameras",
                str(tmp_path / "a.json"),
                "--ref",
                str(tmp_path / "b.json"),
                "--out",
                str(tmp_path / "out.json"),
                "--report",
                str(tmp_path / "rep.json"),
            ]
        )
        assert rc == 1


class TestReportPolicies:
    def make_inputs(self, tmp_path):
        from cvbench import BenchmarkManifest, DifficultyBox, ManifestBox

        manifest = BenchmarkManifest(
            seed=0,
            target=2,
            boxes=[ManifestBox(box=DifficultyBox(3, 0, 0), pair_ids=["p1", "p2"])],
        )
        io.write_manifest(tmp_path / "manifest.json", manifest)
        records = [EvalRecord(pair_id="p1", success=True, rot_err_deg=0.1, trans_err_m=0.1)]
        io.write_eval_records(tmp_path / "records.jsonl", "m1", records)

    def test_missing_pair_counts_as_failure(self, tmp_path):
        self.make_inputs(tmp_path)
        rc = main(
            [
                "--quiet",
                "report",
                "--manifest",
                str(tmp_path / "manifest.json"),
                "--records",
                str(tmp_path / "records.jsonl"),
                "--out",
                str(tmp_path / "out"),
            ]
        )
        assert rc == 0
        summary = json.loads((tmp_path / "out" / "summary.json").read_text())
        assert summary["missing"]["m1"] == ["p2"]
        assert summary["overall"]["m1"]["success_pct"] == 50.0

    def test_missing_pair_can_be_excluded(self, tmp_path):
        self.make_inputs(tmp_path)
        rc = main(
            [
                "--quiet",
                "report",
                "--manifest",
                str(tmp_path / "manifest.json"),
                "--records",
                str(tmp_path / "records.jsonl"),
                "--out",
                str(tmp_path / "out"),
                "--missing-policy",
                "exclude",
            ]
        )
        assert rc == 0
        summary = json.loads((tmp_path / "out" / "summary.json").read_text())
        assert summary["missing"]["m1"] == ["p2"]
        assert summary["overall"]["m1"]["success_pct"] == 100.0


class TestErrorPaths:
    def test_missing_required_flag_is_usage_error(self):
        proc = subprocess.run(
            ["cvb", "align", "--ref", "r.json", "--out", "o.json", "--report", "p.json"],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 2
        assert "usage" in proc.stderr.lower()
        assert "--cameras" in proc.stderr

    def test_corrupt_raster_names_the_file(self, tmp_path):
        records = [
            io.CameraRecord(
                image_id=f"v{i}",
                intr=DEFAULT_INTR,
                pose=RigidPose(rotation=np.eye(3), translation=np.zeros(3)),
            )
            for i in range(2)
        ]
        io.write_cameras(tmp_path / "cameras.json", records)
        io.write_pairs(
            tmp_path / "pairs.jsonl",
            [{"pair_id": "pair0", "image_a": "v0", "image_b": "v1"}],
        )
        (tmp_path / "depth").mkdir()
        bad = tmp_path / "depth" / "v0.cvb"
        bad.write_bytes(b"this is not a raster file")
        proc = subprocess.run(
            [
                "cvb",
                "covis",
                "--data",
                str(tmp_path),
                "--out",
                str(tmp_path / "covis"),
            ],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 1
        assert "v0.cvb" in proc.stderr

    def test_bad_thread_env_is_data_error(self, suite_dir, tmp_path, monkeypatch):
        monkeypatch.setenv("CVB_THREADS", "many")
        rc = main(["--quiet", "covis", "--data", str(suite_dir), "--out", str(tmp_path / "c")])
        assert rc == 1
