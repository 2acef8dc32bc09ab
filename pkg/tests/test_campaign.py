"""Closed-loop campaign runner: persistence, resume, metrics, reports."""

import dataclasses
import json
from pathlib import Path

import numpy as np
import pytest

from filmlab import acquisition, reporting, spectra, vision
from filmlab.acquisition import AcquisitionConfig
from filmlab.campaign import (CampaignConfig, CampaignError, CampaignState,
                              default_reference_point, hypervolume_trace,
                              load_state, measure_objectives,
                              reproducibility_stats, run_campaign)
from filmlab.domain import (CanonicalObjectives, ObjectiveVector,
                            ParameterSet, SampleRecord, canonicalize,
                            pareto_front_indices)
from filmlab.gp import GpConfig
from filmlab.virtlab import run_experiment, NoiseModel


def small_config(**overrides) -> CampaignConfig:
    """A scaled-down campaign that keeps the full loop but runs in seconds."""
    defaults = dict(
        iterations=2,
        sets_per_iteration=4,
        replicates=2,
        image_size=256,
        gp_config=GpConfig(restarts=2),
        acq_config=AcquisitionConfig(mc_samples=16, candidate_pool=64,
                                     refine_top=4, refine_iters=8),
        master_seed=0,
    )
    defaults.update(overrides)
    return CampaignConfig(**defaults)


@pytest.fixture(scope="module")
def persisted_run(tmp_path_factory):
    run_dir = tmp_path_factory.mktemp("campaign")
    cfg = small_config(run_dir=str(run_dir))
    state = run_campaign(cfg)
    return cfg, state, run_dir


# ---------------------------------------------------------------------------
# loop shape

def test_record_count_and_indexing(persisted_run):
    cfg, state, _ = persisted_run
    assert len(state.records) == cfg.iterations * cfg.sets_per_iteration * cfg.replicates
    assert [r.sample_id for r in state.records] == list(range(len(state.records)))
    assert state.completed_batches == cfg.iterations
    for r in state.records:
        assert 0 <= r.batch_index < cfg.iterations
        assert 0 <= r.param_set_index < cfg.sets_per_iteration
        assert r.replicate_index in (0, 1)
        r.params.validate(cfg.bounds)


def test_replicates_share_parameters(persisted_run):
    _, state, _ = persisted_run
    groups = {}
    for r in state.records:
        groups.setdefault((r.batch_index, r.param_set_index), []).append(r)
    for recs in groups.values():
        assert len(recs) == 2
        assert recs[0].params == recs[1].params


def test_single_iteration_is_pure_random_design(monkeypatch):
    import filmlab.campaign as campaign_mod

    def boom(*a, **k):
        raise AssertionError("no surrogate fit expected for iterations=1")

    monkeypatch.setattr(campaign_mod, "_fit_models", boom)
    state = run_campaign(small_config(iterations=1))
    assert len(state.records) == 8
    assert state.completed_batches == 1


def test_campaign_deterministic(persisted_run):
    cfg, state, _ = persisted_run
    again = run_campaign(dataclasses.replace(cfg, run_dir=None))

    def strip(r):  # provenance paths only exist when a run dir is set
        d = r.to_json_dict()
        d.pop("provenance")
        return d

    assert [strip(r) for r in again.records] == [strip(r) for r in state.records]


def test_config_validation():
    with pytest.raises(ValueError):
        CampaignConfig(iterations=0)
    with pytest.raises(ValueError):
        CampaignConfig(objective_mode=4)


def test_default_reference_point_modes():
    assert default_reference_point(3).values == (0.0, -2.0, -2.0)
    assert default_reference_point(2).values == (0.0, -2.0)
    assert CampaignConfig(objective_mode=2).ref.values == (0.0, -2.0)


def test_config_json_round_trip():
    cfg = small_config(run_dir="/tmp/somewhere",
                       reference_point=default_reference_point(3))
    back = CampaignConfig.from_json_dict(json.loads(json.dumps(cfg.to_json_dict())))
    assert back == cfg


# ---------------------------------------------------------------------------
# persistence and resume

def test_log_and_cursor_files(persisted_run):
    cfg, state, run_dir = persisted_run
    lines = (run_dir / "campaign.jsonl").read_text().strip().splitlines()
    assert len(lines) == len(state.records)
    assert json.loads((run_dir / "cursor.json").read_text()) == \
        {"completed_batches": cfg.iterations}
    assert (run_dir / "config.json").exists()


def test_load_state_round_trip(persisted_run):
    cfg, state, run_dir = persisted_run
    loaded = load_state(run_dir / "campaign.jsonl")
    assert loaded.records == state.records
    assert loaded.completed_batches == state.completed_batches
    assert np.allclose(loaded.hv_per_iteration, state.hv_per_iteration)


def test_resume_equivalence(tmp_path):
    # interrupted-after-batch-1 + resume == uninterrupted, byte for byte
    full_dir = tmp_path / "full"
    part_dir = tmp_path / "part"
    cfg_full = small_config(run_dir=str(full_dir))
    run_campaign(cfg_full)
    cfg_first = small_config(run_dir=str(part_dir), iterations=1)
    run_campaign(cfg_first)
    (part_dir / "config.json").unlink()  # snapshot of the truncated config
    cfg_resume = small_config(run_dir=str(part_dir))
    run_campaign(cfg_resume, resume=True)
    assert (part_dir / "campaign.jsonl").read_bytes() == \
        (full_dir / "campaign.jsonl").read_bytes()


def test_resume_truncates_partial_batch(tmp_path):
    full_dir = tmp_path / "full"
    cut_dir = tmp_path / "cut"
    cfg_full = small_config(run_dir=str(full_dir))
    run_campaign(cfg_full)
    full_lines = (full_dir / "campaign.jsonl").read_text().splitlines(keepends=True)
    cut_dir.mkdir()
    # first batch complete plus 3 orphan records of batch 2
    (cut_dir / "campaign.jsonl").write_text("".join(full_lines[:11]))
    (cut_dir / "config.json").write_text(
        json.dumps(small_config(run_dir=str(cut_dir)).to_json_dict()))
    resumed = run_campaign(small_config(run_dir=str(cut_dir)), resume=True)
    assert (cut_dir / "campaign.jsonl").read_text() == "".join(full_lines)
    assert len(resumed.records) == 16


def test_log_integrity_replay_from_raw_files(persisted_run):
    cfg, state, run_dir = persisted_run
    for r in state.records[:6]:
        raw = spectra.read_spectrum_csv(run_dir / r.provenance["spectrum"])
        t = spectra.transmittance(raw)
        od = spectra.optical_density(t.wavelengths, spectra.absorbance(t))
        bright = vision.read_netpbm(run_dir / r.provenance["bright_image"])
        dark = vision.read_netpbm(run_dir / r.provenance["dark_image"])
        b = vision.analyze_defects(bright, "bright", cfg.vision_config)
        d = vision.analyze_defects(dark, "dark", cfg.vision_config)
        # CSV stores counts at 1e-6 resolution; OD replays to that precision
        assert od == pytest.approx(r.objectives.optical_density, abs=1e-6)
        assert b.defect_fraction == r.objectives.defect_bright
        assert d.defect_fraction == r.objectives.defect_dark


def test_load_state_requires_config(tmp_path):
    (tmp_path / "campaign.jsonl").write_text("")
    with pytest.raises(CampaignError):
        load_state(tmp_path / "campaign.jsonl")


# ---------------------------------------------------------------------------
# metrics

def _midpoint_rows(state):
    groups = {}
    for r in state.records:
        groups.setdefault((r.batch_index, r.param_set_index), []).append(r)
    keys = sorted(groups)
    rows = []
    for k in keys:
        vals = [canonicalize(r.objectives, state.config.objective_mode).as_array()
                for r in groups[k]]
        rows.append(np.mean(vals, axis=0))
    return np.vstack(rows), keys


def test_hv_trace_matches_from_scratch_recomputation(persisted_run):
    _, state, _ = persisted_run
    per_pair, per_iter = hypervolume_trace(state)
    Y, keys = _midpoint_rows(state)
    ref = state.config.ref
    for i in range(Y.shape[0]):
        assert per_pair[i] == pytest.approx(
            acquisition.hypervolume(Y[: i + 1], ref), abs=1e-12)
    assert np.all(np.diff(per_pair) >= -1e-12)
    assert list(per_iter) == pytest.approx(state.hv_per_iteration)


def test_hv_trace_single_batch_plateau():
    state = run_campaign(small_config(iterations=1))
    per_pair, per_iter = hypervolume_trace(state)
    assert per_iter.shape == (1,)
    assert per_iter[0] >= 0.0
    assert per_pair[-1] == per_iter[0]


def test_cumulative_front_dominates_batch1_front(persisted_run):
    _, state, _ = persisted_run
    Y, keys = _midpoint_rows(state)
    first = Y[[i for i, k in enumerate(keys) if k[0] == 0]]
    front1 = first[pareto_front_indices(first)]
    final_front = Y[pareto_front_indices(Y)]
    for p in front1:
        assert any(np.all(q >= p - 1e-12) for q in final_front)


def _synthetic_state(pairs):
    cfg = small_config()
    recs = []
    for i, (a, b) in enumerate(pairs):
        for rep, obj in enumerate((a, b)):
            recs.append(SampleRecord(
                sample_id=2 * i + rep, batch_index=0, param_set_index=i,
                replicate_index=rep,
                params=ParameterSet(3.0, 1000.0, 2000.0, 20.0),
                ambient=(22.0, 45.0), objectives=obj))
    return CampaignState(cfg, recs, completed_batches=1)


def test_reproducibility_identical_pairs_all_zero():
    obj = ObjectiveVector(1.0, 0.2, 0.1)
    stats = reproducibility_stats(_synthetic_state([(obj, obj)] * 4))
    for channel in stats.values():
        assert channel["median"] == 0.0
        assert channel["p95"] == 0.0


def test_reproducibility_injected_pair():
    pair = (ObjectiveVector(1.0, 0.2, 0.1), ObjectiveVector(1.2, 0.2, 0.1))
    stats = reproducibility_stats(_synthetic_state([pair]))
    assert stats["optical_density"]["median"] == pytest.approx(0.1)
    assert stats["defect_bright"]["median"] == 0.0


def test_reproducibility_requires_duplicates():
    state = CampaignState(small_config(replicates=3))
    with pytest.raises(CampaignError):
        reproducibility_stats(state)


def test_measure_objectives_pipeline():
    p = ParameterSet(3.5, 700.0, 3500.0, 25.0)
    data = run_experiment(p, NoiseModel(), seed=77, image_size=256)
    obj = measure_objectives(data)
    assert obj.optical_density > 0
    assert 0 <= obj.defect_bright <= 100 and 0 <= obj.defect_dark <= 100


# ---------------------------------------------------------------------------
# reporting

def test_report_writes_tables_and_plots(persisted_run, tmp_path):
    cfg, state, _ = persisted_run
    files = reporting.report(state, tmp_path / "report")
    names = {Path(f).name for f in files}
    assert names == {"samples.csv", "hv_trace.csv", "batch_means.csv",
                     "pareto_members.csv", "objectives_vs_sample.svg",
                     "hv_trace.svg", "pareto_fronts.svg"}
    rows = (tmp_path / "report" / "samples.csv").read_text().strip().splitlines()
    assert len(rows) == len(state.records) + 1  # header + one row per record


def test_report_single_batch(tmp_path):
    state = run_campaign(small_config(iterations=1))
    files = reporting.report(state, tmp_path / "rep1")
    assert len(files) == 7
    svg = (tmp_path / "rep1" / "pareto_fronts.svg").read_text()
    assert "<svg" in svg


def test_report_empty_state_errors(tmp_path):
    out = tmp_path / "never"
    with pytest.raises(CampaignError):
        reporting.report(CampaignState(small_config()), out)
    assert not out.exists()  # no partial files
