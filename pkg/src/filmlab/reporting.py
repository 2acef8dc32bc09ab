"""Post-hoc campaign reports: CSV tables and static SVG plots."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
from matplotlib.patches import Ellipse

from . import acquisition
from .campaign import CampaignError, CampaignState, hypervolume_trace
from .domain import CanonicalObjectives, pareto_front_indices


def report(state: CampaignState, out_dir) -> list[Path]:
    """Write per-sample, hypervolume, batch-mean and Pareto tables plus
    SVG plots into out_dir; returns the created file paths."""
    if not state.records or state.completed_batches < 1:
        raise CampaignError("cannot report an empty campaign state")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    files.append(_write_samples_csv(state, out / "samples.csv"))
    files.append(_write_hv_csv(state, out / "hv_trace.csv"))
    files.append(_write_batch_means_csv(state, out / "batch_means.csv"))
    files.append(_write_pareto_csv(state, out / "pareto_members.csv"))
    files.append(_plot_objectives(state, out / "objectives_vs_sample.svg"))
    files.append(_plot_hv(state, out / "hv_trace.svg"))
    files.append(_plot_pareto(state, out / "pareto_fronts.svg"))
    return files


def _write_samples_csv(state, path):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["sample_id", "batch_index", "param_set_index", "replicate_index",
                    "concentration", "spin_speed", "spin_acceleration", "spin_time",
                    "optical_density", "defect_bright", "defect_dark", "defect_total",
                    "temperature_c", "humidity_pct"])
        for r in state.records:
            w.writerow([r.sample_id, r.batch_index, r.param_set_index, r.replicate_index,
                        r.params.concentration, r.params.spin_speed,
                        r.params.spin_acceleration, r.params.spin_time,
                        r.objectives.optical_density, r.objectives.defect_bright,
                        r.objectives.defect_dark, r.objectives.total_defect,
                        r.ambient[0], r.ambient[1]])
    return path


def _write_hv_csv(state, path):
    per_pair, per_iter = hypervolume_trace(state)
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["pair_index", "hypervolume"])
        for i, v in enumerate(per_pair):
            w.writerow([i, v])
        w.writerow([])
        w.writerow(["iteration", "hypervolume"])
        for i, v in enumerate(per_iter):
            w.writerow([i, v])
    return path


def _write_batch_means_csv(state, path):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["batch_index", "mean_optical_density", "mean_defect_total"])
        for b in range(state.completed_batches):
            w.writerow([b, state.batch_mean_od[b], state.batch_mean_defect[b]])
    return path


def _pair_table(state):
    """(batch, set) -> (mean OD, mean total defect, std OD, std defect, mean sample id)."""
    groups = {}
    for r in state.records:
        groups.setdefault((r.batch_index, r.param_set_index), []).append(r)
    table = {}
    for k, recs in sorted(groups.items()):
        od = np.array([r.objectives.optical_density for r in recs])
        dd = np.array([r.objectives.total_defect for r in recs])
        sid = np.mean([r.sample_id for r in recs])
        table[k] = (od.mean(), dd.mean(), od.std(), dd.std(), sid)
    return table


def _write_pareto_csv(state, path):
    table = _pair_table(state)
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["up_to_batch", "batch_index", "param_set_index",
                    "mean_optical_density", "mean_defect_total"])
        for b in range(state.completed_batches):
            keys = [k for k in table if k[0] <= b]
            pts = [(-table[k][1], table[k][0]) for k in keys]  # maximize (-defect, OD)
            idx = pareto_front_indices([CanonicalObjectives((p[1], p[0])) for p in pts])
            for i in idx:
                k = keys[i]
                w.writerow([b, k[0], k[1], table[k][0], table[k][1]])
    return path


def _batch_boundaries(state):
    per_batch = state.config.sets_per_iteration * state.config.replicates
    return [b * per_batch for b in range(1, state.completed_batches)]


def _plot_objectives(state, path):
    ids = [r.sample_id for r in state.records]
    od = [r.objectives.optical_density for r in state.records]
    dd = [r.objectives.total_defect for r in state.records]
    fig, axes = plt.subplots(2, 1, figsize=(8, 6), sharex=True)
    for ax, y, label in ((axes[0], od, "optical density"),
                         (axes[1], dd, "defect area [%]")):
        ax.plot(ids, y, ".", ms=4)
        for x in _batch_boundaries(state):
            ax.axvline(x - 0.5, color="red", ls="--", lw=0.8)
        ax.set_ylabel(label)
    per_batch = state.config.sets_per_iteration * state.config.replicates
    for b in range(state.completed_batches):
        x0, x1 = b * per_batch, (b + 1) * per_batch - 1
        axes[0].hlines(state.batch_mean_od[b], x0, x1, color="k", ls=":", lw=1)
        axes[1].hlines(state.batch_mean_defect[b], x0, x1, color="k", ls=":", lw=1)
    axes[1].set_xlabel("sample id")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def _plot_hv(state, path):
    per_pair, _ = hypervolume_trace(state)
    fig, ax = plt.subplots(figsize=(8, 4))
    ax.plot(np.arange(len(per_pair)), per_pair, "r.-", ms=5)
    sets = state.config.sets_per_iteration
    for b in range(1, state.completed_batches):
        ax.axvline(b * sets - 0.5, color="gray", ls="--", lw=0.8)
    ax.set_xlabel("parameter-set pair")
    ax.set_ylabel("hypervolume")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def _plot_pareto(state, path):
    table = _pair_table(state)
    fig, ax = plt.subplots(figsize=(7, 6))
    cmap = plt.get_cmap("viridis")
    nb = max(state.completed_batches, 1)
    for k, (od, dd, od_s, dd_s, sid) in table.items():
        color = cmap(k[0] / nb)
        for nsig in (1, 2):
            ax.add_patch(Ellipse((dd, od), 2 * nsig * max(dd_s, 1e-3),
                                 2 * nsig * max(od_s, 1e-3),
                                 alpha=0.12, color=color, lw=0))
        ax.plot(dd, od, "o", ms=4, color=color)
    for b in range(state.completed_batches):
        keys = [k for k in table if k[0] <= b]
        pts = [(table[k][1], table[k][0]) for k in keys]  # (defect, od)
        idx = pareto_front_indices([CanonicalObjectives((p[1], -p[0])) for p in pts])
        front = sorted((pts[i] for i in idx), key=lambda p: p[0])
        ax.plot([p[0] for p in front], [p[1] for p in front],
                ls="--", lw=1, color=cmap(b / nb))
    ax.set_xlabel("defect area [%]")
    ax.set_ylabel("optical density")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path
