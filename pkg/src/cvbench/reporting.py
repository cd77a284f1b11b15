"""Aggregation of per-pair results into tables, rankings and plots.

Everything here is deterministic text generation: method names are
iterated in sorted order, floats are printed through fixed format strings,
and the SVG plots are written by hand rather than through a plotting
library, so identical inputs produce identical bytes.
"""

from __future__ import annotations

import json
from pathlib import Path

from .binning import (
    ANGLE_EDGES_DEG,
    BenchmarkManifest,
    OVERLAP_EDGES_PCT,
    SCALE_EDGES,
)
from .errors import ConfigError
from .poseeval import EvalRecord

_CRITERIA_EDGES = {
    "overlap": OVERLAP_EDGES_PCT,
    "scale": SCALE_EDGES,
    "angle": ANGLE_EDGES_DEG,
}
_BIN_ATTR = {"overlap": "overlap_bin", "scale": "scale_bin", "angle": "angle_bin"}

_PALETTE = ("#4269d0", "#efb118", "#ff725c", "#6cc5b0", "#3ca951", "#ff8ab7", "#a463f2")


def _mean_ranks(values: list[float]) -> list[float]:
    """Ranks of values, highest first, ties sharing the mean rank."""
    order = sorted(range(len(values)), key=lambda i: -values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        mean_rank = (i + j) / 2.0 + 1.0
        for k in range(i, j + 1):
            ranks[order[k]] = mean_rank
        i = j + 1
    return ranks


def aggregate(
    records_by_method: dict[str, list[EvalRecord]],
    manifest: BenchmarkManifest,
    missing_policy: str = "fail",
) -> dict:
    """Reduce per-pair records to per-box, marginal and overall statistics.

    missing_policy decides what a manifest pair without a record means for
    a method: "fail" counts it as a failure, "exclude" removes it from that
    method's denominators. Missing pairs are listed either way.
    """
    if missing_policy not in ("fail", "exclude"):
        raise ConfigError(f"unknown missing_policy {missing_policy!r}")
    if not records_by_method:
        raise ConfigError("no methods to aggregate")
    methods = sorted(records_by_method)

    by_pair: dict[str, dict[str, EvalRecord]] = {}
    for method in methods:
        seen: dict[str, EvalRecord] = {}
        for rec in records_by_method[method]:
            if rec.pair_id in seen:
                raise ConfigError(f"method {method!r} has duplicate pair {rec.pair_id!r}")
            seen[rec.pair_id] = rec
        by_pair[method] = seen

    manifest_pairs = [pid for mb in manifest.boxes for pid in mb.pair_ids]
    missing = {
        m: sorted(pid for pid in manifest_pairs if pid not in by_pair[m]) for m in methods
    }

    boxes_out = []
    for mb in manifest.boxes:
        entry: dict = {
            "key": mb.box.key(),
            "overlap": list(mb.box.overlap_range_pct),
            "scale": list(mb.box.scale_range),
            "angle": list(mb.box.angle_range_deg),
            "n_pairs": len(mb.pair_ids),
            "methods": {},
        }
        for method in methods:
            n_counted = 0
            n_success = 0
            for pid in mb.pair_ids:
                rec = by_pair[method].get(pid)
                if rec is None:
                    if missing_policy == "exclude":
                        continue
                    n_counted += 1
                else:
                    n_counted += 1
                    n_success += bool(rec.success)
            pct = 100.0 * n_success / n_counted if n_counted else None
            entry["methods"][method] = {
                "n_pairs": n_counted,
                "n_success": n_success,
                "success_pct": pct,
            }
        boxes_out.append(entry)

    rank_sums = {m: 0.0 for m in methods}
    ranked_boxes = 0
    for entry in boxes_out:
        values = [entry["methods"][m]["success_pct"] for m in methods]
        if any(v is None for v in values):
            continue
        ranked_boxes += 1
        for method, rank in zip(methods, _mean_ranks(values)):
            rank_sums[method] += rank

    overall = {}
    for method in methods:
        n_counted = sum(entry["methods"][method]["n_pairs"] for entry in boxes_out)
        n_success = sum(entry["methods"][method]["n_success"] for entry in boxes_out)
        overall[method] = {
            "n_pairs": n_counted,
            "n_success": n_success,
            "success_pct": 100.0 * n_success / n_counted if n_counted else None,
            "avg_rank": rank_sums[method] / ranked_boxes if ranked_boxes else None,
        }

    marginals: dict[str, list] = {}
    for crit, edges in _CRITERIA_EDGES.items():
        attr = _BIN_ATTR[crit]
        rows = []
        for bin_idx in range(len(edges) - 1):
            row = {"range": [edges[bin_idx], edges[bin_idx + 1]], "methods": {}}
            selected = [
                (entry, mb)
                for entry, mb in zip(boxes_out, manifest.boxes)
                if getattr(mb.box, attr) == bin_idx
            ]
            for method in methods:
                n_counted = sum(e["methods"][method]["n_pairs"] for e, _ in selected)
                n_success = sum(e["methods"][method]["n_success"] for e, _ in selected)
                row["methods"][method] = (
                    100.0 * n_success / n_counted if n_counted else None
                )
            rows.append(row)
        marginals[crit] = rows

    # Cumulative curve: accumulate boxes from easiest down, by the mean
    # success over methods; ties broken by the box sort order.
    order = sorted(
        range(len(boxes_out)),
        key=lambda i: (
            -_mean_over_methods(boxes_out[i], methods),
            manifest.boxes[i].box,
        ),
    )
    cum_counts = []
    cum_methods: dict[str, list] = {m: [] for m in methods}
    run_pairs = {m: 0 for m in methods}
    run_success = {m: 0 for m in methods}
    total_pairs = 0
    for i in order:
        entry = boxes_out[i]
        total_pairs += entry["n_pairs"]
        cum_counts.append(total_pairs)
        for method in methods:
            run_pairs[method] += entry["methods"][method]["n_pairs"]
            run_success[method] += entry["methods"][method]["n_success"]
            cum_methods[method].append(
                100.0 * run_success[method] / run_pairs[method]
                if run_pairs[method]
                else None
            )

    return {
        "methods": methods,
        "missing_policy": missing_policy,
        "boxes": boxes_out,
        "overall": overall,
        "marginals": marginals,
        "cumulative": {
            "order": [boxes_out[i]["key"] for i in order],
            "n_pairs": cum_counts,
            "methods": cum_methods,
        },
        "missing": missing,
    }


def _mean_over_methods(entry: dict, methods: list[str]) -> float:
    vals = [entry["methods"][m]["success_pct"] for m in methods]
    vals = [v for v in vals if v is not None]
    return sum(vals) / len(vals) if vals else -1.0


def _fmt(value) -> str:
    return "" if value is None else f"{value:.2f}"


def results_csv(report: dict) -> str:
    """One row per method: per-box success, overall success, average rank."""
    box_keys = [entry["key"] for entry in report["boxes"]]
    lines = [",".join(["method", *box_keys, "overall_pct", "avg_rank"])]
    for method in report["methods"]:
        cells = [method]
        for entry in report["boxes"]:
            cells.append(_fmt(entry["methods"][method]["success_pct"]))
        cells.append(_fmt(report["overall"][method]["success_pct"]))
        cells.append(_fmt(report["overall"][method]["avg_rank"]))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def _svg_header(width: int, height: int, title: str) -> list[str]:
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="16" text-anchor="middle" font-size="13">{title}</text>',
    ]


def _axes(x0: float, y0: float, x1: float, y1: float) -> list[str]:
    return [
        f'<line x1="{x0:.1f}" y1="{y1:.1f}" x2="{x1:.1f}" y2="{y1:.1f}" stroke="black"/>',
        f'<line x1="{x0:.1f}" y1="{y0:.1f}" x2="{x0:.1f}" y2="{y1:.1f}" stroke="black"/>',
    ]


def cumulative_svg(report: dict) -> str:
    """Success over accumulated pairs, easiest boxes first."""
    width, height = 640, 400
    x0, y0, x1, y1 = 50.0, 30.0, 620.0, 360.0
    parts = _svg_header(width, height, "Cumulative success over accumulated pairs")
    parts += _axes(x0, y0, x1, y1)
    counts = report["cumulative"]["n_pairs"]
    total = counts[-1] if counts else 1
    for tick in range(0, 101, 20):
        y = y1 - (y1 - y0) * tick / 100.0
        parts.append(
            f'<text x="{x0 - 6:.1f}" y="{y + 4:.1f}" text-anchor="end">{tick}</text>'
        )
        parts.append(
            f'<line x1="{x0:.1f}" y1="{y:.1f}" x2="{x1:.1f}" y2="{y:.1f}" '
            f'stroke="#dddddd"/>'
        )
    for idx, method in enumerate(report["methods"]):
        color = _PALETTE[idx % len(_PALETTE)]
        pts = []
        for count, pct in zip(counts, report["cumulative"]["methods"][method]):
            if pct is None:
                continue
            x = x0 + (x1 - x0) * count / total
            y = y1 - (y1 - y0) * pct / 100.0
            pts.append(f"{x:.2f},{y:.2f}")
        if pts:
            parts.append(
                f'<polyline points="{" ".join(pts)}" fill="none" stroke="{color}" '
                f'stroke-width="1.5"/>'
            )
        ly = y0 + 14 * idx
        parts.append(
            f'<line x1="{x0 + 8:.1f}" y1="{ly:.1f}" x2="{x0 + 28:.1f}" y2="{ly:.1f}" '
            f'stroke="{color}" stroke-width="1.5"/>'
        )
        parts.append(f'<text x="{x0 + 32:.1f}" y="{ly + 4:.1f}">{method}</text>')
    parts.append(
        f'<text x="{(x0 + x1) / 2:.1f}" y="{height - 8}" text-anchor="middle">'
        "accumulated pairs</text>"
    )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def marginal_svg(report: dict, criterion: str) -> str:
    """Grouped bars of per-bin success for one criterion."""
    rows = report["marginals"][criterion]
    methods = report["methods"]
    width, height = 640, 400
    x0, y0, x1, y1 = 50.0, 30.0, 620.0, 340.0
    parts = _svg_header(width, height, f"Success by {criterion} bin")
    parts += _axes(x0, y0, x1, y1)
    for tick in range(0, 101, 20):
        y = y1 - (y1 - y0) * tick / 100.0
        parts.append(
            f'<text x="{x0 - 6:.1f}" y="{y + 4:.1f}" text-anchor="end">{tick}</text>'
        )
    group_w = (x1 - x0) / max(len(rows), 1)
    bar_w = group_w * 0.8 / max(len(methods), 1)
    for gi, row in enumerate(rows):
        gx = x0 + gi * group_w
        lo, hi = row["range"]
        parts.append(
            f'<text x="{gx + group_w / 2:.1f}" y="{y1 + 16:.1f}" text-anchor="middle">'
            f"{lo:g}-{hi:g}</text>"
        )
        for mi, method in enumerate(methods):
            pct = row["methods"][method]
            if pct is None:
                continue
            color = _PALETTE[mi % len(_PALETTE)]
            bx = gx + group_w * 0.1 + mi * bar_w
            bh = (y1 - y0) * pct / 100.0
            parts.append(
                f'<rect x="{bx:.2f}" y="{y1 - bh:.2f}" width="{bar_w:.2f}" '
                f'height="{bh:.2f}" fill="{color}"/>'
            )
    for idx, method in enumerate(methods):
        color = _PALETTE[idx % len(_PALETTE)]
        ly = y0 + 14 * idx
        parts.append(
            f'<rect x="{x1 - 120:.1f}" y="{ly - 8:.1f}" width="10" height="10" '
            f'fill="{color}"/>'
        )
        parts.append(f'<text x="{x1 - 106:.1f}" y="{ly + 1:.1f}">{method}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def emit_report(report: dict, out_dir: str | Path) -> None:
    """Write results.csv, summary.json and the SVG plots under out_dir."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "results.csv").write_text(results_csv(report), encoding="utf-8")
    (out / "summary.json").write_text(
        json.dumps(report, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    plots = out / "plots"
    plots.mkdir(exist_ok=True)
    (plots / "cumulative.svg").write_text(cumulative_svg(report), encoding="utf-8")
    for criterion in _CRITERIA_EDGES:
        (plots / f"{criterion}.svg").write_text(
            marginal_svg(report, criterion), encoding="utf-8"
        )
