"""Run the alpha x SNR grid with repetitions and folds; aggregate results.

Completed cells are cached on disk keyed by the resolved config hash, so
re-running an extended grid only executes the new cells.  All emitted CSV
and JSON files are byte-reproducible from config plus master seed; wall
clock goes to a separate timing sidecar.
"""

from __future__ import annotations

import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import ExperimentConfig
from .pipeline import RunRecord, run_pipeline

METRIC_KEYS = ("accuracy", "macro_recall", "macro_f1", "macro_auc", "minority_recall")


def record_metrics(record: RunRecord) -> dict[str, float]:
    """Flatten the metrics the aggregate tables care about."""
    if record.report is None:
        return {}
    rep = record.report
    minority = rep.get("metadata", {}).get("minority", "out3")
    per_class = rep.get("per_class", {})
    return {
        "accuracy": rep["accuracy"],
        "macro_recall": rep["macro_recall"],
        "macro_f1": rep["macro_f1"],
        "macro_auc": rep["macro_auc"],
        "minority_recall": per_class.get(minority, {}).get("recall", float("nan")),
    }


def cell_dir_for(base: Path, cfg: ExperimentConfig, alpha, snr, rep, fold) -> Path:
    return base / "runs" / cfg.config_hash() / f"a{alpha}_snr{snr}_r{rep}_f{fold}"


def _run_cell(args) -> RunRecord:
    cfg, alpha, snr, rep, fold, cell_dir = args
    return run_pipeline(cfg, alpha, snr, rep, fold, cell_dir)


@dataclass
class GridResult:
    records: list[RunRecord]
    summary_path: Path
    failed: int

    @property
    def ok(self) -> bool:
        return self.failed == 0


def run_grid(cfg: ExperimentConfig, write_heatmaps: bool = True) -> GridResult:
    base = Path(cfg.out_dir)
    base.mkdir(parents=True, exist_ok=True)
    cells = [
        (alpha, snr, rep, fold)
        for alpha, snr in cfg.grid_points()
        for rep in range(cfg.repetitions)
        for fold in cfg.fold_ids()
    ]
    pending = []
    records: dict[tuple, RunRecord] = {}
    for alpha, snr, rep, fold in cells:
        cdir = cell_dir_for(base, cfg, alpha, snr, rep, fold)
        marker = cdir / "record.json"
        if marker.exists():
            records[(alpha, snr, rep, fold)] = RunRecord.load(marker)
        else:
            pending.append((cfg, alpha, snr, rep, fold, cdir))

    if cfg.jobs > 1 and len(pending) > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            for rec in pool.map(_run_cell, pending):
                records[rec.key()] = rec
    else:
        for args in pending:
            rec = _run_cell(args)
            records[rec.key()] = rec

    ordered = [records[c] for c in cells]
    summary_path = base / "grid_summary.csv"
    write_summary(summary_path, cfg, ordered)
    if write_heatmaps:
        aggregates = aggregate(cfg, ordered)
        for metric in METRIC_KEYS:
            write_heatmap_svg(base / f"heatmap_{metric}.svg", cfg, aggregates, metric)
    failed = sum(1 for r in ordered if r.status != "ok")
    return GridResult(ordered, summary_path, failed)


def aggregate(cfg: ExperimentConfig, records: list[RunRecord]) -> dict[tuple, dict]:
    """Per grid point: mean/std per metric over successful runs plus counts."""
    out: dict[tuple, dict] = {}
    for alpha, snr in cfg.grid_points():
        runs = [r for r in records if (r.alpha, r.snr) == (alpha, snr)]
        good = [r for r in runs if r.status == "ok" and r.report is not None]
        entry: dict = {"n_runs": len(runs), "n_ok": len(good), "n_failed": len(runs) - len(good)}
        for metric in METRIC_KEYS:
            values = [record_metrics(r)[metric] for r in good]
            values = [v for v in values if not np.isnan(v)]
            entry[f"{metric}_mean"] = float(np.mean(values)) if values else float("nan")
            entry[f"{metric}_std"] = float(np.std(values)) if values else float("nan")
        out[(alpha, snr)] = entry
    return out


def write_summary(path: Path, cfg: ExperimentConfig, records: list[RunRecord]) -> None:
    aggregates = aggregate(cfg, records)
    header = ["alpha", "snr", "n_runs", "n_ok", "n_failed"]
    for metric in METRIC_KEYS:
        header.extend([f"{metric}_mean", f"{metric}_std"])
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for (alpha, snr), entry in aggregates.items():
            row = [repr(float(alpha)), repr(float(snr)) if snr is not None else ""]
            row.extend([entry["n_runs"], entry["n_ok"], entry["n_failed"]])
            for metric in METRIC_KEYS:
                row.extend([repr(entry[f"{metric}_mean"]), repr(entry[f"{metric}_std"])])
            writer.writerow(row)


def _heat_color(value: float) -> str:
    """Three-stop linear color map over [0, 1]: dark blue, teal, yellow."""
    stops = [(13, 8, 135), (33, 145, 140), (253, 231, 37)]
    if np.isnan(value):
        return "#cccccc"
    v = min(1.0, max(0.0, value)) * 2.0
    i = min(1, int(v))
    t = v - i
    rgb = tuple(round(stops[i][k] + t * (stops[i + 1][k] - stops[i][k])) for k in range(3))
    return "#{:02x}{:02x}{:02x}".format(*rgb)


def write_heatmap_svg(path: Path, cfg: ExperimentConfig, aggregates: dict, metric: str) -> None:
    """Convenience rendering of the aggregate CSV; the CSV is the contract."""
    alphas = sorted(set(cfg.alphas), reverse=True)
    snrs = sorted(set(cfg.snrs))
    cell, margin = 64, 70
    width = margin + cell * len(snrs) + 20
    height = margin + cell * len(alphas) + 20
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<text x="{margin}" y="20" font-size="14">{metric} (mean over runs)</text>',
    ]
    for row, alpha in enumerate(alphas):
        y = margin + row * cell
        parts.append(
            f'<text x="8" y="{y + cell // 2}" font-size="11">a={alpha}</text>'
        )
        for col, snr in enumerate(snrs):
            x = margin + col * cell
            entry = aggregates.get((alpha, snr), {})
            value = entry.get(f"{metric}_mean", float("nan"))
            color = _heat_color(value)
            label = "" if np.isnan(value) else f"{value:.3f}"
            parts.append(
                f'<rect x="{x}" y="{y}" width="{cell}" height="{cell}" fill="{color}" stroke="#444"/>'
            )
            parts.append(
                f'<text x="{x + 6}" y="{y + cell // 2 + 4}" font-size="11">{label}</text>'
            )
    for col, snr in enumerate(snrs):
        x = margin + col * cell
        parts.append(
            f'<text x="{x + 10}" y="{margin - 8}" font-size="11">snr={snr}</text>'
        )
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n")
