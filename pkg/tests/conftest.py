"""Prints a one-line PASS/FAIL verdict per acceptance criterion after the
test run (the criteria live in test_acceptance.py)."""

import pytest

CRITERIA = {
    "test_criterion_01_campaign_shape_and_runtime":
        "criterion 1  - campaign shape (200 records) and < 10 min runtime",
    "test_criterion_02_optimization_efficacy":
        "criterion 2  - OD ratio >= 4 and front point (OD >= 1.3, defects <= 0.4%) on >= 7/10 seeds",
    "test_criterion_03_hypervolume_behavior":
        "criterion 3  - HV trace non-decreasing (10/10) and final-batch plateau on >= 5/10 seeds",
    "test_criterion_04_hypervolume_correctness":
        "criterion 4  - exact HV vs 1e6-point MC oracle on 200 fronts + worked examples",
    "test_criterion_05_pareto_correctness":
        "criterion 5  - pareto front equals brute-force oracle on 1000 instances",
    "test_criterion_06_gp_numerics":
        "criterion 6  - LML gradients vs finite differences; noise-free interpolation",
    "test_criterion_07_acquisition_sanity":
        "criterion 7  - q=1 NEHVI vs dense quadrature; dominated candidates score <= tau",
    "test_criterion_08_measurement_round_trip":
        "criterion 8  - zero-noise round trip: OD +/-0.02, defects +/-0.05 pp on 200 sets",
    "test_criterion_09_reproducibility_statistics":
        "criterion 9  - replicate half-difference medians within 30% of 0.013 / 0.043",
    "test_criterion_10_spectral_invariants":
        "criterion 10 - tau_v / CIELAB / absorbance identities",
    "test_criterion_11_peak_fitting":
        "criterion 11 - three-Gaussian centers within 2 nm on >= 48/50 noisy instances",
}

_verdicts: dict[str, bool] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if item.name in CRITERIA and rep.when in ("setup", "call") and not rep.skipped:
        # a setup failure (broken fixture) counts as a criterion failure
        _verdicts[item.name] = _verdicts.get(item.name, True) and rep.passed


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _verdicts:
        return
    terminalreporter.section("acceptance criteria")
    for name, label in CRITERIA.items():
        if name in _verdicts:
            verdict = "PASS" if _verdicts[name] else "FAIL"
            terminalreporter.write_line(f"{verdict}  {label}")
