"""Statistical verification layer: null calibration and negative controls."""

import math

import numpy as np
import pytest

from levyhom.limits import LimitLaw, exact_symmetric_stable_1d, sample_limit
from levyhom.pathsim import SimConfig
from levyhom.spec_model import SphericalMeasure
from levyhom.verify import (ecf_distance, ks_projection, ks_statistic,
                            projection_directions, tail_index, theorem_check)

from conftest import make_spec


def stable_law(alpha=0.5, kbar=1.0):
    rho = SphericalMeasure.uniform(1, 1.0)
    return LimitLaw(kind="stable", alpha=alpha, rho0=rho,
                    kbar0=np.full(2, kbar), convention="none")


# --------------------------------------------------------------------------
# KS machinery
# --------------------------------------------------------------------------

def test_ks_identical_batches_zero():
    x = np.random.default_rng(0).standard_normal(500)
    assert ks_statistic(x, x) == 0.0
    assert ks_statistic(x, np.random.default_rng(1).permutation(x)) == 0.0


def test_ks_projection_normalizes_direction():
    rng = np.random.default_rng(2)
    a = rng.standard_normal((400, 2))
    assert ks_projection(a, a, [3.0, 4.0]) == 0.0


def test_ks_null_distribution_calibration():
    # same-sampler draws with different seeds stay below the 1% critical value
    law = stable_law()
    crit = 1.63 * math.sqrt(2.0 / 5000)
    hits = 0
    reps = 20
    for rep in range(reps):
        a = sample_limit(law, 1.0, 5000, seed=100 + rep,
                         cfg=SimConfig(delta=0.1))
        b = sample_limit(law, 1.0, 5000, seed=900 + rep,
                         cfg=SimConfig(delta=0.1))
        if ks_statistic(a.samples[:, 0], b.samples[:, 0]) < crit:
            hits += 1
    assert hits >= 0.95 * reps


def test_projection_directions_deterministic():
    d1 = projection_directions(2, seed=5)
    d2 = projection_directions(2, seed=5)
    assert len(d1) == 2 + 4
    for u, v in zip(d1, d2):
        assert np.array_equal(u, v)


# --------------------------------------------------------------------------
# empirical characteristic function distance
# --------------------------------------------------------------------------

def test_ecf_zero_batch_against_zero_law():
    law = LimitLaw(kind="gaussian", A=np.zeros((1, 1)))
    batch = np.zeros((200, 1))
    worst, rows = ecf_distance(batch, law, t=1.0)
    assert worst == 0.0


def test_ecf_gaussian_matches_within_3se():
    law = LimitLaw(kind="gaussian", A=np.eye(1))
    misses = 0
    reps = 20
    for rep in range(reps):
        batch = sample_limit(law, 1.0, 4000, seed=rep)
        _, rows = ecf_distance(batch, law)
        if not all(r["within_3se"] for r in rows):
            misses += 1
    assert misses <= 0.05 * reps + 1


def test_ecf_negative_control_mismatched_index():
    rho = SphericalMeasure.uniform(1, 1.0)
    law_wrong = LimitLaw(kind="stable", alpha=1.5, rho0=rho,
                         kbar0=np.full(2, 1.0), convention="full")
    batch = sample_limit(stable_law(alpha=0.5), 1.0, 5000, seed=4,
                         cfg=SimConfig(delta=0.05))
    _, rows = ecf_distance(batch, law_wrong)
    z_scores = [r["gap"] / max(r["se"], 1e-12) for r in rows]
    assert max(z_scores) > 5.0


# --------------------------------------------------------------------------
# tail index
# --------------------------------------------------------------------------

def test_hill_recovers_stable_index():
    c = math.gamma(0.5) * math.cos(math.pi * 0.25) / 0.5
    hits = 0
    reps = 20
    for rep in range(reps):
        x = exact_symmetric_stable_1d(0.5, c, 1.0, 4000, seed=50 + rep)
        out = tail_index(x[:, None], seed=rep)
        lo, hi = out["ci90"]
        if lo <= 0.5 <= hi:
            hits += 1
    assert hits >= 0.9 * reps


def test_hill_flags_gaussian():
    law = LimitLaw(kind="gaussian", A=np.eye(1))
    batch = sample_limit(law, 1.0, 5000, seed=8)
    out = tail_index(batch)
    assert not out["heavy_tailed"]
    assert out["estimate"] > 2.0


def test_hill_rejects_constant_batch():
    with pytest.raises(ValueError):
        tail_index(np.ones((2000, 1)))


# --------------------------------------------------------------------------
# theorem-level checks (small smoke versions; the full-size runs live in
# the acceptance suite)
# --------------------------------------------------------------------------

def test_theorem_check_pure_stable_passes():
    spec = make_spec(alpha=0.5, alpha0=0.5)
    report = theorem_check(spec, "stable_no_center", [1.0 / 8, 1.0 / 32],
                           n=2000, seed=3, sim=SimConfig(delta=0.1))
    assert report.verdict == "PASS", report.to_json()


def test_theorem_check_negative_control_fails():
    spec = make_spec(alpha=0.5, alpha0=0.5)
    rho = spec.rho0
    wrong = LimitLaw(kind="stable", alpha=0.5, rho0=rho,
                     kbar0=np.full(len(rho.weights), 2.0), convention="none")
    report = theorem_check(spec, "stable_no_center", [1.0 / 8, 1.0 / 32],
                           n=2000, seed=3, law=wrong,
                           sim=SimConfig(delta=0.1))
    assert report.verdict == "FAIL"


def test_theorem_check_annotates_upstream_errors():
    spec = make_spec(alpha=0.5, alpha0=0.5)
    report = theorem_check(spec, "stable_no_center", [0.25], n=50, seed=1,
                           sim=SimConfig(delta=0.1, rmax=2.0))
    assert report.verdict == "ERROR"
    assert report.rows[0].error


def test_report_serialization(tmp_path):
    spec = make_spec(alpha=0.5, alpha0=0.5)
    report = theorem_check(spec, "stable_no_center", [0.25], n=500, seed=2,
                           sim=SimConfig(delta=0.1))
    payload = report.to_json(tmp_path / "report.json")
    assert "marginal" in payload["scope"]
    report.to_csv(tmp_path / "report.csv")
    assert (tmp_path / "report.csv").read_text().startswith("eps,")
