"""Closed-loop campaign runner, persistence and campaign metrics.

The campaign log is an append-only JSON-lines file of sample records;
together with a config snapshot and an RNG cursor it makes interrupted
campaigns resumable with byte-identical continuations.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import acquisition, gp, spectra, virtlab, vision
from .acquisition import AcquisitionConfig
from .domain import (CanonicalObjectives, ObjectiveVector, ParameterBounds,
                     ParameterSet, ReferencePoint, SampleRecord, canonicalize,
                     pareto_front_indices)
from .gp import GpConfig
from .virtlab import ExperimentData, GroundTruthParams, NoiseModel
from .vision import VisionConfig


def default_reference_point(mode: int) -> ReferencePoint:
    """Minimal acceptable performance in canonical space: zero optical
    density, at most 2 percent defect per channel."""
    if mode == 3:
        return ReferencePoint((0.0, -2.0, -2.0))
    return ReferencePoint((0.0, -2.0))


@dataclass(frozen=True)
class CampaignConfig:
    bounds: ParameterBounds = ParameterBounds()
    objective_mode: int = 3
    iterations: int = 10
    sets_per_iteration: int = 10
    replicates: int = 2
    reference_point: ReferencePoint | None = None  # None -> default for mode
    gp_config: GpConfig = GpConfig()
    acq_config: AcquisitionConfig = AcquisitionConfig()
    noise: NoiseModel = NoiseModel()
    vision_config: VisionConfig = VisionConfig()
    ground_truth: GroundTruthParams = GroundTruthParams()
    master_seed: int = 0
    run_dir: str | None = None
    image_size: int = virtlab.IMAGE_SIZE
    persist_raw: bool = True
    fit_on_replicate_means: bool = False

    def __post_init__(self):
        if self.iterations * self.sets_per_iteration * self.replicates <= 0:
            raise ValueError("iterations * sets * replicates must be positive")
        if self.objective_mode not in (2, 3):
            raise ValueError("objective mode must be 2 or 3")

    @property
    def ref(self) -> ReferencePoint:
        return self.reference_point or default_reference_point(self.objective_mode)

    def to_json_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["reference_point"] = None if self.reference_point is None else list(self.reference_point.values)
        return d

    @staticmethod
    def from_json_dict(d: dict) -> "CampaignConfig":
        d = dict(d)
        for key, cls in (("bounds", ParameterBounds), ("gp_config", GpConfig),
                         ("acq_config", AcquisitionConfig), ("noise", NoiseModel),
                         ("vision_config", VisionConfig), ("ground_truth", GroundTruthParams)):
            if key in d and isinstance(d[key], dict):
                sub = d[key]
                if key == "bounds":
                    sub = {k: tuple(v) for k, v in sub.items()}
                if key == "vision_config" and sub.get("crop_rect") is not None:
                    sub["crop_rect"] = tuple(sub["crop_rect"])
                if key == "gp_config":
                    for bk in ("lengthscale_bounds", "signal_bounds", "noise_bounds"):
                        sub[bk] = tuple(sub[bk])
                d[key] = cls(**sub)
        if d.get("reference_point") is not None:
            d["reference_point"] = ReferencePoint(tuple(d["reference_point"]))
        return CampaignConfig(**d)


@dataclass
class CampaignState:
    config: CampaignConfig
    records: list[SampleRecord] = field(default_factory=list)
    hv_per_iteration: list[float] = field(default_factory=list)
    batch_mean_od: list[float] = field(default_factory=list)
    batch_mean_defect: list[float] = field(default_factory=list)
    pareto_member_ids: list[int] = field(default_factory=list)
    completed_batches: int = 0

    def pair_midpoints(self) -> tuple[np.ndarray, list[tuple[int, int]]]:
        """Replicate-midpoint canonical objectives per parameter set, in
        sample order; returns (matrix, list of (batch, set) keys)."""
        groups: dict[tuple[int, int], list[SampleRecord]] = {}
        for r in self.records:
            groups.setdefault((r.batch_index, r.param_set_index), []).append(r)
        keys = sorted(groups)
        rows = []
        for k in keys:
            objs = [canonicalize(r.objectives, self.config.objective_mode).as_array()
                    for r in groups[k]]
            rows.append(np.mean(objs, axis=0))
        return (np.vstack(rows) if rows else np.empty((0, len(self.config.ref.values)))), keys


def measure_objectives(data: ExperimentData, cfg: VisionConfig = VisionConfig()) -> ObjectiveVector:
    """Full analysis pipeline: spectrum -> optical density, images ->
    bright/dark defect fractions."""
    t = spectra.transmittance(data.spectrum)
    od = spectra.optical_density(t.wavelengths, spectra.absorbance(t))
    bright = vision.analyze_defects(data.bright_image, "bright", cfg)
    dark = vision.analyze_defects(data.dark_image, "dark", cfg)
    return ObjectiveVector(optical_density=od,
                           defect_bright=bright.defect_fraction,
                           defect_dark=dark.defect_fraction)


def _seed_int(master: int, *key: int) -> int:
    return int(np.random.SeedSequence(master, spawn_key=tuple(key)).generate_state(1)[0])


def _sample_seed(master: int, batch: int, pset: int, rep: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(master, spawn_key=(30, batch, pset, rep))


class CampaignError(RuntimeError):
    pass


def _fit_models(cfg: CampaignConfig, records: list[SampleRecord], batch: int):
    """One GP per canonical objective on all prior rows, with jitter
    escalation on numerical failure."""
    if cfg.fit_on_replicate_means:
        state = CampaignState(cfg, list(records))
        Y, keys = state.pair_midpoints()
        groups = {}
        for r in records:
            groups.setdefault((r.batch_index, r.param_set_index), r.params)
        X = np.vstack([groups[k].as_array() for k in keys])
    else:
        X = np.vstack([r.params.as_array() for r in records])
        Y = np.vstack([canonicalize(r.objectives, cfg.objective_mode).as_array()
                       for r in records])
    lo, hi = cfg.bounds.as_arrays()
    models = []
    for k in range(Y.shape[1]):
        jitter = cfg.gp_config.jitter
        last_err = None
        while jitter <= 1e-4:
            try:
                gpc = dataclasses.replace(cfg.gp_config, jitter=jitter)
                models.append(gp.fit(X, Y[:, k], gpc,
                                     seed=_seed_int(cfg.master_seed, 20, batch, k),
                                     bounds=(lo, hi)))
                last_err = None
                break
            except gp.GpError as e:
                last_err = e
                jitter = max(jitter * 100.0, 1e-8)
        if last_err is not None:
            raise CampaignError(f"surrogate fit failed for objective {k}: {last_err}")
    return models


def _persist_paths(run_dir: Path, batch: int, pset: int, rep: int) -> dict:
    stem = f"b{batch}_p{pset}_r{rep}"
    return {"spectrum": f"{stem}.spectrum.csv",
            "bright_image": f"{stem}.bright.pgm",
            "dark_image": f"{stem}.dark.pgm"}


def _append_log(run_dir: Path | None, record: SampleRecord) -> None:
    if run_dir is None:
        return
    with open(run_dir / "campaign.jsonl", "a") as f:
        f.write(json.dumps(record.to_json_dict(), sort_keys=True) + "\n")


def _write_cursor(run_dir: Path | None, completed: int) -> None:
    if run_dir is None:
        return
    (run_dir / "cursor.json").write_text(json.dumps({"completed_batches": completed}))


def load_state(log_path, config: CampaignConfig | None = None) -> CampaignState:
    """Rebuild campaign state from a JSON-lines log. Incomplete trailing
    batches are dropped (they are regenerated deterministically on
    resume)."""
    log_path = Path(log_path)
    run_dir = log_path.parent
    if config is None:
        cfg_path = run_dir / "config.json"
        if not cfg_path.exists():
            raise CampaignError(f"no config snapshot next to {log_path}")
        config = CampaignConfig.from_json_dict(json.loads(cfg_path.read_text()))
    records = []
    if log_path.exists():
        with open(log_path) as f:
            for line in f:
                line = line.strip()
                if line:
                    records.append(SampleRecord.from_json_dict(json.loads(line)))
    per_batch = config.sets_per_iteration * config.replicates
    completed = len(records) // per_batch
    records = records[: completed * per_batch]
    state = CampaignState(config, records, completed_batches=completed)
    _recompute_metrics(state)
    return state


def _recompute_metrics(state: CampaignState) -> None:
    cfg = state.config
    state.hv_per_iteration = []
    state.batch_mean_od = []
    state.batch_mean_defect = []
    Y, keys = state.pair_midpoints()
    ref = cfg.ref
    for b in range(state.completed_batches):
        sel = [i for i, k in enumerate(keys) if k[0] <= b]
        state.hv_per_iteration.append(acquisition.hypervolume(Y[sel], ref))
        batch_recs = [r for r in state.records if r.batch_index == b]
        state.batch_mean_od.append(float(np.mean([r.objectives.optical_density for r in batch_recs])))
        state.batch_mean_defect.append(float(np.mean([r.objectives.total_defect for r in batch_recs])))
    if len(Y):
        front = pareto_front_indices([CanonicalObjectives(tuple(row)) for row in Y])
        front_keys = {keys[i] for i in front}
        state.pareto_member_ids = sorted(
            r.sample_id for r in state.records
            if (r.batch_index, r.param_set_index) in front_keys)
    else:
        state.pareto_member_ids = []


def run_campaign(config: CampaignConfig, resume: bool = False) -> CampaignState:
    """Run (or resume) the closed loop: batch 1 from a Latin-hypercube
    design, later batches from GP surrogates and the NEHVI acquisition,
    every suggestion measured `replicates` times through the virtual lab
    and the analysis pipeline. Deterministic per master seed."""
    run_dir = None
    if config.run_dir is not None:
        run_dir = Path(config.run_dir)
        run_dir.mkdir(parents=True, exist_ok=True)
        cfg_path = run_dir / "config.json"
        if not cfg_path.exists():
            cfg_path.write_text(json.dumps(config.to_json_dict(), indent=2, sort_keys=True))

    state = CampaignState(config)
    if resume and run_dir is not None and (run_dir / "campaign.jsonl").exists():
        state = load_state(run_dir / "campaign.jsonl", config)
        # truncate any partial batch from the log before appending
        with open(run_dir / "campaign.jsonl", "w") as f:
            for r in state.records:
                f.write(json.dumps(r.to_json_dict(), sort_keys=True) + "\n")

    q = config.sets_per_iteration
    for b in range(state.completed_batches, config.iterations):
        if b == 0:
            suggestions = acquisition.initial_design(
                config.bounds, q, _seed_int(config.master_seed, 10, 0))
        else:
            models = _fit_models(config, state.records, b)
            acq = dataclasses.replace(config.acq_config, q=q,
                                      seed=_seed_int(config.master_seed, 10, b))
            suggestions = acquisition.suggest_batch(models, config.bounds,
                                                    config.ref, acq)
        for j, params in enumerate(suggestions):
            for rep in range(config.replicates):
                data = virtlab.run_experiment(params, config.noise,
                                              _sample_seed(config.master_seed, b, j, rep),
                                              gt=config.ground_truth,
                                              bounds=config.bounds,
                                              image_size=config.image_size)
                objectives = measure_objectives(data, config.vision_config)
                provenance = {}
                if run_dir is not None and config.persist_raw:
                    provenance = _persist_paths(run_dir, b, j, rep)
                    spectra.write_spectrum_csv(run_dir / provenance["spectrum"], data.spectrum)
                    vision.write_pgm(run_dir / provenance["bright_image"], data.bright_image)
                    vision.write_pgm(run_dir / provenance["dark_image"], data.dark_image)
                record = SampleRecord(
                    sample_id=len(state.records),
                    batch_index=b,
                    param_set_index=j,
                    replicate_index=rep,
                    params=params,
                    ambient=data.ambient,
                    objectives=objectives,
                    provenance=provenance)
                state.records.append(record)
                _append_log(run_dir, record)
        state.completed_batches = b + 1
        _write_cursor(run_dir, state.completed_batches)
    _recompute_metrics(state)
    return state


def hypervolume_trace(state: CampaignState) -> tuple[np.ndarray, np.ndarray]:
    """Cumulative hypervolume after each replicate pair (midpoint
    objectives) and per iteration; both series are non-decreasing."""
    if state.completed_batches < 1:
        raise CampaignError("hypervolume trace requires a completed batch")
    Y, keys = state.pair_midpoints()
    ref = state.config.ref
    per_pair = np.array([acquisition.hypervolume(Y[: i + 1], ref)
                         for i in range(Y.shape[0])])
    per_iter = []
    for b in range(state.completed_batches):
        last = max(i for i, k in enumerate(keys) if k[0] <= b)
        per_iter.append(per_pair[last])
    return per_pair, np.array(per_iter)


def reproducibility_stats(state: CampaignState) -> dict:
    """Median and 5th/95th percentiles of replicate half-differences
    |x1 - x2| / 2 per objective channel."""
    if state.config.replicates != 2:
        raise CampaignError("reproducibility statistics require duplicate samples")
    groups: dict[tuple[int, int], list[SampleRecord]] = {}
    for r in state.records:
        groups.setdefault((r.batch_index, r.param_set_index), []).append(r)
    channels = {"optical_density": [], "defect_bright": [], "defect_dark": [],
                "defect_total": []}
    for recs in groups.values():
        if len(recs) != 2:
            raise CampaignError("incomplete replicate pair in state")
        a, b = recs[0].objectives, recs[1].objectives
        channels["optical_density"].append(abs(a.optical_density - b.optical_density) / 2)
        channels["defect_bright"].append(abs(a.defect_bright - b.defect_bright) / 2)
        channels["defect_dark"].append(abs(a.defect_dark - b.defect_dark) / 2)
        channels["defect_total"].append(abs(a.total_defect - b.total_defect) / 2)
    out = {}
    for name, vals in channels.items():
        arr = np.array(vals)
        out[name] = {"median": float(np.median(arr)),
                     "p5": float(np.percentile(arr, 5)),
                     "p95": float(np.percentile(arr, 95))}
    return out
