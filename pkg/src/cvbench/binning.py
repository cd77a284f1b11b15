"""Difficulty grid: criterion bins, the valid boxes, and manifest sampling.

The three criteria are discretized into a grid of boxes. Bins are
half-open [lo, hi) except the last bin of each criterion, which includes
its upper edge. Only 33 of the 5*4*4 combinations occur in practice on
driving-style capture (high overlap together with large scale change, for
instance, is contradictory); that fixed set is what valid_boxes() returns,
listed from empirically easiest to hardest.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

log = logging.getLogger(__name__)

OVERLAP_EDGES_PCT = (5.0, 20.0, 40.0, 60.0, 80.0, 100.0)
SCALE_EDGES = (1.0, 1.5, 2.5, 4.0, 6.0)
ANGLE_EDGES_DEG = (0.0, 30.0, 60.0, 120.0, 180.0)

# (overlap_bin, scale_bin, angle_bin), easiest first.
DIFFICULTY_ORDER: tuple[tuple[int, int, int], ...] = (
    (3, 0, 0),
    (2, 0, 0),
    (3, 0, 1),
    (3, 0, 2),
    (2, 0, 1),
    (4, 0, 0),
    (1, 0, 0),
    (2, 0, 2),
    (1, 0, 1),
    (2, 1, 2),
    (0, 0, 0),
    (1, 1, 0),
    (1, 1, 1),
    (1, 0, 2),
    (2, 2, 2),
    (0, 0, 1),
    (1, 1, 2),
    (0, 1, 0),
    (1, 2, 1),
    (0, 1, 1),
    (1, 2, 2),
    (0, 0, 2),
    (0, 2, 1),
    (0, 2, 0),
    (0, 1, 2),
    (0, 3, 0),
    (0, 0, 3),
    (0, 2, 2),
    (0, 1, 3),
    (0, 2, 3),
    (0, 3, 1),
    (1, 3, 2),
    (0, 3, 2),
)


@dataclass(frozen=True, order=True)
class DifficultyBox:
    overlap_bin: int
    scale_bin: int
    angle_bin: int

    def __post_init__(self):
        if not 0 <= self.overlap_bin < len(OVERLAP_EDGES_PCT) - 1:
            raise ConfigError(f"overlap_bin {self.overlap_bin} out of range")
        if not 0 <= self.scale_bin < len(SCALE_EDGES) - 1:
            raise ConfigError(f"scale_bin {self.scale_bin} out of range")
        if not 0 <= self.angle_bin < len(ANGLE_EDGES_DEG) - 1:
            raise ConfigError(f"angle_bin {self.angle_bin} out of range")

    @property
    def overlap_range_pct(self) -> tuple[float, float]:
        return OVERLAP_EDGES_PCT[self.overlap_bin], OVERLAP_EDGES_PCT[self.overlap_bin + 1]

    @property
    def scale_range(self) -> tuple[float, float]:
        return SCALE_EDGES[self.scale_bin], SCALE_EDGES[self.scale_bin + 1]

    @property
    def angle_range_deg(self) -> tuple[float, float]:
        return ANGLE_EDGES_DEG[self.angle_bin], ANGLE_EDGES_DEG[self.angle_bin + 1]

    def key(self) -> str:
        """Compact stable identifier, e.g. 'o60-80_s1.0-1.5_a0-30'."""
        olo, ohi = self.overlap_range_pct
        slo, shi = self.scale_range
        alo, ahi = self.angle_range_deg
        return (
            f"o{olo:g}-{ohi:g}_s{slo:g}-{shi:g}_a{alo:g}-{ahi:g}"
        )


def valid_boxes() -> tuple[DifficultyBox, ...]:
    """The 33 criterion combinations the benchmark is defined over."""
    return tuple(DifficultyBox(*bins) for bins in DIFFICULTY_ORDER)


_VALID_SET = frozenset(DIFFICULTY_ORDER)


def _find_bin(value: float, edges: tuple[float, ...]) -> int | None:
    if value < edges[0] or value > edges[-1]:
        return None
    for idx in range(len(edges) - 2):
        if value < edges[idx + 1]:
            return idx
    return len(edges) - 2  # last bin includes its upper edge


def assign_box(
    omega: float, delta: float, theta_deg: float, allow_any: bool = False
) -> DifficultyBox | None:
    """Box for a criteria triple, or None when it falls outside the grid.

    omega is a fraction in [0, 1]; the grid's overlap edges are percentages.
    Combinations outside the 33 valid boxes also map to None unless
    allow_any is set, which admits any in-range triple.
    """
    ob = _find_bin(omega * 100.0, OVERLAP_EDGES_PCT)
    sb = _find_bin(delta, SCALE_EDGES)
    ab = _find_bin(theta_deg, ANGLE_EDGES_DEG)
    if ob is None or sb is None or ab is None:
        return None
    if not allow_any and (ob, sb, ab) not in _VALID_SET:
        return None
    return DifficultyBox(ob, sb, ab)


@dataclass
class ManifestBox:
    box: DifficultyBox
    pair_ids: list[str]


@dataclass
class BenchmarkManifest:
    seed: int
    target: int
    boxes: list[ManifestBox]

    def pair_count(self) -> int:
        return sum(len(b.pair_ids) for b in self.boxes)

    def to_dict(self) -> dict:
        out_boxes = []
        for mb in self.boxes:
            out_boxes.append(
                {
                    "overlap": list(mb.box.overlap_range_pct),
                    "scale": list(mb.box.scale_range),
                    "angle": list(mb.box.angle_range_deg),
                    "pairs": list(mb.pair_ids),
                }
            )
        return {"seed": self.seed, "target": self.target, "boxes": out_boxes}

    @classmethod
    def from_dict(cls, data: dict) -> "BenchmarkManifest":
        boxes = []
        for entry in data["boxes"]:
            ob = _find_bin(float(entry["overlap"][0]), OVERLAP_EDGES_PCT)
            sb = _find_bin(float(entry["scale"][0]), SCALE_EDGES)
            ab = _find_bin(float(entry["angle"][0]), ANGLE_EDGES_DEG)
            if ob is None or sb is None or ab is None:
                raise ConfigError(f"manifest box has unknown ranges: {entry}")
            boxes.append(
                ManifestBox(box=DifficultyBox(ob, sb, ab), pair_ids=list(entry["pairs"]))
            )
        return cls(seed=int(data["seed"]), target=int(data["target"]), boxes=boxes)


def build_manifest(
    records: list[dict],
    target: int = 500,
    seed: int = 0,
    allow_any_boxes: bool = False,
) -> BenchmarkManifest:
    """Sample up to ``target`` pairs per difficulty box.

    Each record needs pair_id, omega, delta and theta_deg. Sampling is
    uniform without replacement, seeded per box by (seed, box bins), so the
    draw for one box does not depend on what other boxes contain. Boxes and
    the pairs inside them are emitted in sorted order; reruns with the same
    records, target and seed are byte-identical.
    """
    if target <= 0:
        raise ConfigError(f"target must be positive, got {target}")
    by_box: dict[DifficultyBox, list[str]] = {}
    seen: set[str] = set()
    for rec in records:
        pair_id = str(rec["pair_id"])
        if pair_id in seen:
            raise ConfigError(f"duplicate pair_id {pair_id!r} in criteria records")
        seen.add(pair_id)
        box = assign_box(
            float(rec["omega"]),
            float(rec["delta"]),
            float(rec["theta_deg"]),
            allow_any=allow_any_boxes,
        )
        if box is None:
            continue
        by_box.setdefault(box, []).append(pair_id)

    boxes = []
    for box in sorted(by_box):
        candidates = sorted(by_box[box])
        if len(candidates) < target:
            log.warning(
                "box %s has only %d candidates for a target of %d; keeping all",
                box.key(),
                len(candidates),
                target,
            )
        take = min(target, len(candidates))
        rng = np.random.default_rng(
            [seed, box.overlap_bin, box.scale_bin, box.angle_bin]
        )
        picked = rng.choice(len(candidates), size=take, replace=False)
        pair_ids = sorted(candidates[i] for i in picked)
        boxes.append(ManifestBox(box=box, pair_ids=pair_ids))
    return BenchmarkManifest(seed=seed, target=target, boxes=boxes)
