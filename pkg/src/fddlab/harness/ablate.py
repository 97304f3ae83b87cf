"""Paired toggle comparisons: per-seed metric deltas and win counts."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .grid import METRIC_KEYS, record_metrics
from .pipeline import RunRecord


@dataclass
class AblationResult:
    toggle: str
    pair_rows: list[dict]  # one row per (grid point, rep, fold)
    summary_rows: list[dict]  # one row per grid point and metric

    def pairs_to_csv(self, path) -> None:
        header = ["alpha", "snr", "repetition", "fold"]
        for metric in METRIC_KEYS:
            header.extend([f"{metric}_on", f"{metric}_off", f"{metric}_delta"])
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=header)
            writer.writeheader()
            for row in self.pair_rows:
                writer.writerow({k: _fmt(row.get(k)) for k in header})

    def summary_to_csv(self, path) -> None:
        header = ["alpha", "snr", "metric", "wins", "losses", "ties", "mean_delta"]
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=header)
            writer.writeheader()
            for row in self.summary_rows:
                writer.writerow({k: _fmt(row.get(k)) for k in header})


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


def ablation_report(records: list[RunRecord], toggle: str) -> AblationResult:
    """Pair runs that differ only in ``toggle`` at identical grid point,
    repetition, and fold.  Unpaired or duplicated runs are rejected with
    pairing diagnostics."""
    if toggle not in ("gan", "classic", "weighting"):
        raise ValueError(f"unknown toggle {toggle!r}")
    on: dict[tuple, RunRecord] = {}
    off: dict[tuple, RunRecord] = {}
    for rec in records:
        side = on if rec.toggles.get(toggle) else off
        if rec.key() in side:
            raise ValueError(f"duplicate record for cell {rec.key()} with {toggle} "
                             f"{'on' if rec.toggles.get(toggle) else 'off'}")
        side[rec.key()] = rec
    missing_off = sorted(set(on) - set(off))
    missing_on = sorted(set(off) - set(on))
    if missing_off or missing_on:
        raise ValueError(
            f"unpaired records for toggle {toggle!r}: "
            f"{len(missing_off)} cells lack the off run (e.g. {missing_off[:3]}), "
            f"{len(missing_on)} lack the on run (e.g. {missing_on[:3]})"
        )
    if not on:
        raise ValueError("no records to compare")

    pair_rows: list[dict] = []
    for key in sorted(on):
        rec_on, rec_off = on[key], off[key]
        if rec_on.status != "ok" or rec_off.status != "ok":
            continue
        m_on = record_metrics(rec_on)
        m_off = record_metrics(rec_off)
        row = {
            "alpha": rec_on.alpha,
            "snr": rec_on.snr,
            "repetition": rec_on.repetition,
            "fold": rec_on.fold,
        }
        for metric in METRIC_KEYS:
            row[f"{metric}_on"] = m_on[metric]
            row[f"{metric}_off"] = m_off[metric]
            row[f"{metric}_delta"] = m_on[metric] - m_off[metric]
        pair_rows.append(row)

    summary_rows: list[dict] = []
    points = sorted({(r["alpha"], r["snr"]) for r in pair_rows})
    for alpha, snr in points:
        at_point = [r for r in pair_rows if (r["alpha"], r["snr"]) == (alpha, snr)]
        for metric in METRIC_KEYS:
            deltas = np.array([r[f"{metric}_delta"] for r in at_point])
            summary_rows.append(
                {
                    "alpha": alpha,
                    "snr": snr,
                    "metric": metric,
                    "wins": int(np.sum(deltas > 0)),
                    "losses": int(np.sum(deltas < 0)),
                    "ties": int(np.sum(deltas == 0)),
                    "mean_delta": float(np.mean(deltas)) if len(deltas) else float("nan"),
                }
            )
    return AblationResult(toggle, pair_rows, summary_rows)
