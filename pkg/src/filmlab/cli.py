"""Command-line interface.

Exit codes: 0 success, 2 validation error, 3 numerical failure, 4 I/O
failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import acquisition, reporting, spectra, vision
from .campaign import (CampaignConfig, CampaignError, load_state, run_campaign,
                       reproducibility_stats)
from .gp import GpError
from .spectra import PeakFitError, SpectrumError

EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4


def _load_config(path: str | None) -> CampaignConfig:
    if path is None:
        return CampaignConfig()
    return CampaignConfig.from_json_dict(json.loads(Path(path).read_text()))


def _cmd_run_campaign(args) -> int:
    cfg = _load_config(args.config)
    if args.run_dir is not None:
        cfg = dataclasses.replace(cfg, run_dir=args.run_dir)
    state = run_campaign(cfg, resume=args.resume)
    print(json.dumps({
        "records": len(state.records),
        "batches": state.completed_batches,
        "final_hypervolume": state.hv_per_iteration[-1] if state.hv_per_iteration else 0.0,
        "run_dir": cfg.run_dir,
    }))
    return 0


def _cmd_suggest(args) -> int:
    from .campaign import _fit_models
    state = load_state(args.state)
    if not state.records:
        raise CampaignError("no completed batches in state")
    models = _fit_models(state.config, state.records, state.completed_batches)
    acq = dataclasses.replace(state.config.acq_config, q=args.q)
    batch = acquisition.suggest_batch(models, state.config.bounds, state.config.ref, acq)
    print(json.dumps([dataclasses.asdict(p) for p in batch]))
    return 0


def _cmd_analyze_image(args) -> int:
    pixels = vision.read_netpbm(args.input)
    rep = vision.analyze_defects(pixels, args.background)
    print(json.dumps(rep.to_json_dict()))
    return 0


def _cmd_analyze_spectrum(args) -> int:
    raw = spectra.read_spectrum_csv(args.input)
    t = spectra.transmittance(raw)
    out = {"optical_density": spectra.optical_density(t.wavelengths, spectra.absorbance(t))}
    try:
        lab = spectra.cielab(t)
        out.update({"L_star": lab.L_star, "a_star": lab.a_star, "b_star": lab.b_star})
        out["tau_v"] = spectra.tau_v(t)
    except SpectrumError:
        pass  # OD window covered but visible range is not
    print(json.dumps(out))
    return 0


def _cmd_pareto(args) -> int:
    state = load_state(args.state)
    Y, keys = state.pair_midpoints()
    from .domain import CanonicalObjectives, pareto_front_indices
    idx = pareto_front_indices([CanonicalObjectives(tuple(r)) for r in Y])
    print(json.dumps([{"batch_index": keys[i][0], "param_set_index": keys[i][1],
                       "objectives": list(Y[i])} for i in idx]))
    return 0


def _cmd_hv(args) -> int:
    ref = np.array([float(v) for v in args.ref.split(",")])
    front = np.loadtxt(args.front, delimiter=",", ndmin=2)
    print(json.dumps({"hypervolume": acquisition.hypervolume(front, ref)}))
    return 0


def _cmd_report(args) -> int:
    state = load_state(args.state)
    files = reporting.report(state, args.out)
    out = {"files": [str(f) for f in files]}
    if state.config.replicates == 2 and state.records:
        out["reproducibility"] = reproducibility_stats(state)
    print(json.dumps(out))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="filmlab",
                                description="Closed-loop thin-film coating optimization")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("run-campaign", help="run or resume a campaign")
    s.add_argument("--config", help="campaign config JSON")
    s.add_argument("--run-dir", help="override run directory")
    s.add_argument("--resume", action="store_true")
    s.set_defaults(func=_cmd_run_campaign)

    s = sub.add_parser("suggest", help="suggest the next candidate batch")
    s.add_argument("--state", required=True, help="campaign JSON-lines log")
    s.add_argument("--q", type=int, default=10)
    s.set_defaults(func=_cmd_suggest)

    s = sub.add_parser("analyze-image", help="defect report for a PGM/PPM image")
    s.add_argument("--input", required=True)
    s.add_argument("--background", required=True, choices=["bright", "dark"])
    s.set_defaults(func=_cmd_analyze_image)

    s = sub.add_parser("analyze-spectrum", help="OD, L*a*b*, tau_v for a spectrum CSV")
    s.add_argument("--input", required=True)
    s.set_defaults(func=_cmd_analyze_spectrum)

    s = sub.add_parser("pareto", help="Pareto front of a campaign log")
    s.add_argument("--state", required=True)
    s.set_defaults(func=_cmd_pareto)

    s = sub.add_parser("hv", help="exact hypervolume of a CSV front")
    s.add_argument("--front", required=True, help="CSV, one objective vector per row")
    s.add_argument("--ref", required=True, help="comma-separated reference point")
    s.set_defaults(func=_cmd_hv)

    s = sub.add_parser("report", help="tables and plots for a campaign log")
    s.add_argument("--state", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=_cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, SpectrumError, CampaignError, json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except (GpError, PeakFitError, np.linalg.LinAlgError) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as e:
        print(f"i/o failure: {e}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
