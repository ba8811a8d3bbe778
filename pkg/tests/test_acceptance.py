"""Acceptance gates, each at its stated tolerance.

The full validation pipeline runs once per session (sample sizes from the
``full`` profile unless SINEGAP_ACCEPTANCE_PROFILE overrides it for
development); every criterion below asserts its gate and prints the
headline numbers.
"""

import json
import os

import pytest

from sinegap.validate import run_validation

pytestmark = pytest.mark.acceptance

_PROFILE = os.environ.get("SINEGAP_ACCEPTANCE_PROFILE", "full")
_SEED = int(os.environ.get("SINEGAP_ACCEPTANCE_SEED", "20260808"))


@pytest.fixture(scope="session")
def report(tmp_path_factory):
    out = tmp_path_factory.mktemp("acceptance")
    rep = run_validation(out, profile=_PROFILE, seed=_SEED)
    (out / "validation_report.json").exists()
    return rep


def _criterion(report, name):
    for c in report["criteria"]:
        if c["name"] == name:
            return c
    raise AssertionError(f"criterion {name} missing from report")


def test_01_oracle_triangle(report):
    c = _criterion(report, "oracle-triangle")
    for leg, chk in c["details"].items():
        print(f"{leg}: {chk['first']:.5f} vs {chk['second']:.5f} "
              f"(tol {chk['tolerance']:.5f})")
    assert c["passed"], c["details"]


def test_02_is_consistency(report):
    c = _criterion(report, "is-consistency")
    for key, chk in c["details"].items():
        print(f"{key}: IS {chk['first']:.5f} vs direct {chk['second']:.5f} "
              f"(tol {chk['tolerance']:.5f})")
    assert c["passed"], c["details"]


def test_03_kappa_recovery(report):
    c = _criterion(report, "kappa-recovery")
    for key, chk in c["details"].items():
        print(f"{key}: kappa_hat {chk['kappa_hat']:.5f} vs {chk['target']:.5f} "
              f"(rel {chk['relative_error']:.3%}, "
              f"last doubling {chk['last_doubling_variation']:.3%})")
    assert c["passed"], {k: v["relative_error"] for k, v in c["details"].items()}


def test_04_leading_order_law(report):
    c = _criterion(report, "leading-order-law")
    d = c["details"]
    print(f"a = {d['a_fit']:.6f} (target {d['a_target']}, "
          f"rel {d['a_relative_error']:.3%}); "
          f"c = {d['c_fit']:.4f} (target {d['c_target']}, "
          f"rel {d['c_relative_error']:.1%}, gated: no)")
    assert c["passed"], d


def test_05_g_master_equivalence(report):
    c = _criterion(report, "g-master-equivalence")
    d = c["details"]
    print(f"RMS {d['rms_dt_1e-3']:.4f} -> {d['rms_dt_5e-4']:.4f} "
          f"(ratio {d['ratio']:.2f})")
    assert c["passed"], d


def test_06_lemma_tail_bound(report):
    c = _criterion(report, "lemma-tail-bound")
    assert c["passed"], c["details"]


def test_07_martingale_absorption(report):
    c = _criterion(report, "martingale-absorption")
    for key, chk in c["details"].items():
        print(f"{key}: mean {chk['mean']:.4f} (target {chk['mean_target']:.4f}), "
              f"P(2pi) {chk['p_absorb_high']:.4f} (target {chk['p_target']:.4f})")
    assert c["passed"], c["details"]


def test_08_monotone_couplings(report):
    c = _criterion(report, "monotone-couplings")
    d = c["details"]
    print(f"X violations: {d['x_ordering']['violations']}, "
          f"Y nesting worst gap: {d['y_nesting_worst_gap']:.2e}, "
          f"Z domination worst gap: {d['z_domination_worst_gap']:.2e}")
    assert c["passed"], d


def test_09_z_stationarity(report):
    c = _criterion(report, "z-stationarity")
    d = c["details"]
    print(f"chi2 {d['chi2']:.1f} < {d['threshold']:.1f} over {d['bins']} bins")
    assert c["passed"], d


def test_10_btw_slope(report):
    c = _criterion(report, "btw-slope")
    d = c["details"]
    print(f"lambda coefficient {d['lambda_coefficient']:.4f} "
          f"(target {d['target']}, rel {d['relative_error']:.3%}); "
          f"log coefficient {d['log_coefficient']:.3f} "
          f"(target {d['log_coefficient_target']}, reported only)")
    assert c["passed"], d


def test_11_reproducibility(report):
    c = _criterion(report, "reproducibility")
    print(f"byte identical across threads: {c['details']['byte_identical']}")
    assert c["passed"], c["details"]


def test_all_criteria_present(report):
    assert len(report["criteria"]) == 11
    assert json.dumps(report["criteria"][0]["name"])  # serialisable
