"""Invariant measure estimators, mixing fits, and ergodic-average decay."""

import numpy as np
import pytest

from levyhom.corrector import fourier_multiplier
from levyhom.ergodic import (TorusMeasure, effective_drifts,
                             ergodic_average_decay, estimate_invariant_measure,
                             kernel_tail_constant, mixing_rate, mu_average,
                             stationary_measure_grid)
from levyhom.pathsim import SimConfig
from levyhom.spec_model import PeriodicKernel, SphericalMeasure
from levyhom.trigpoly import TrigPoly

from conftest import make_spec


def harmonic_profile_measure(n):
    """Analytic invariant law for k(x) = 1 + 0.5 cos(2 pi x): density 1/k."""
    x = np.arange(n) / n
    w = 1.0 / (1.0 + 0.5 * np.cos(2 * np.pi * x))
    return w / w.sum()


def test_torus_measure_invariants():
    mu = TorusMeasure.uniform(1, 16)
    assert mu.weights.sum() == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        TorusMeasure(mu.grid, np.full(16, 0.5))


def test_mu_average_trivials():
    mu = TorusMeasure.uniform(1, 64)
    assert mu_average(mu, lambda pts: np.full(len(pts), 2.5)) == \
        pytest.approx(2.5)
    val = mu_average(mu, lambda pts: np.cos(2 * np.pi * pts[:, 0]))
    assert abs(val) < 1e-12


def test_grid_measure_uniform_for_x_independent(constant_spec_1d):
    mu = stationary_measure_grid(constant_spec_1d, 64)
    assert mu.tv_distance(TorusMeasure.uniform(1, 64)) < 1e-10


def test_grid_measure_matches_analytic_profile(xdep_spec_1d):
    # symmetric jumps with intensity k(x): invariant density proportional 1/k
    mu = stationary_measure_grid(xdep_spec_1d, 64)
    want = harmonic_profile_measure(64)
    assert 0.5 * np.abs(mu.weights - want).sum() < 0.01


def test_mc_measure_uniform_for_x_independent(constant_spec_1d):
    cfg = SimConfig(paths=200, horizon=200.0, delta=0.25, seed=3)
    mu = estimate_invariant_measure(constant_spec_1d, cfg, grid_n=16)
    assert mu.tv_distance(TorusMeasure.uniform(1, 16)) <= 0.05
    assert mu.meta["warning"] == ""


def test_mc_measure_matches_grid_for_x_dependent(xdep_spec_1d):
    cfg = SimConfig(paths=200, horizon=150.0, delta=0.25, seed=5)
    mu_mc = estimate_invariant_measure(xdep_spec_1d, cfg, grid_n=16)
    mu_grid = stationary_measure_grid(xdep_spec_1d, 16)
    assert mu_mc.tv_distance(mu_grid) <= 0.05


def test_mc_measure_seed_agreement(constant_spec_1d):
    cfgs = [SimConfig(paths=200, horizon=200.0, delta=0.25, seed=s)
            for s in (11, 12)]
    mus = [estimate_invariant_measure(constant_spec_1d, c, grid_n=16)
           for c in cfgs]
    assert mus[0].tv_distance(mus[1]) <= 0.05


def test_stationarity_residual(xdep_spec_1d):
    # evolve draws from the estimated measure a short time; averages of test
    # functions should not move beyond Monte Carlo noise
    from levyhom.pathsim import simulate_snapshots
    mu = stationary_measure_grid(xdep_spec_1d, 64)
    gen = np.random.Generator(np.random.Philox(key=np.uint64(17)))
    n_paths = 4000
    cells = gen.choice(mu.grid.size, p=mu.weights, size=n_paths)
    # start each path from its sampled cell center via per-start snapshots
    fs = [lambda p: np.cos(2 * np.pi * p[:, 0]),
          lambda p: np.sin(2 * np.pi * p[:, 0]),
          lambda p: np.cos(4 * np.pi * p[:, 0]),
          lambda p: np.sin(4 * np.pi * p[:, 0]),
          lambda p: np.cos(6 * np.pi * p[:, 0])]
    delta_t = 0.5
    # group by unique start cells to reuse the engine efficiently
    ends = np.empty((n_paths, 1))
    for cell in np.unique(cells):
        rows = np.nonzero(cells == cell)[0]
        cfg = SimConfig(paths=len(rows), horizon=delta_t, delta=0.25,
                        seed=1000 + int(cell))
        snaps = simulate_snapshots(xdep_spec_1d, cfg, [delta_t],
                                   x0=mu.centers[cell])
        ends[rows] = snaps[:, 0, :]
    ends_mod = ends - np.floor(ends)
    for f in fs:
        target = float(mu_average(mu, f))
        vals = np.asarray(f(ends_mod))
        resid = abs(vals.mean() - target)
        se = vals.std() / np.sqrt(n_paths)
        assert resid <= 3 * se + 0.01


def test_effective_drifts_symmetric_zero():
    spec = make_spec(alpha=1.5, alpha0=1.2)
    mu = stationary_measure_grid(spec, 32)
    drifts = effective_drifts(spec, mu)
    assert abs(drifts.b_bar[0]) < 1e-12
    assert abs(drifts.b_inf_bar[0]) < 1e-10
    assert abs(drifts.b_trunc_bar(8.0)[0]) < 1e-10


def test_kernel_tail_constant_converges(xdep_spec_1d):
    mu = stationary_measure_grid(xdep_spec_1d, 64)
    k0, cauchy, table = kernel_tail_constant(xdep_spec_1d, mu)
    # z-independent kernel: k0 = int k dmu = harmonic mean of the profile
    assert cauchy
    assert k0 == pytest.approx(np.sqrt(1 - 0.25), abs=2e-3)


def test_kernel_tail_constant_flags_oscillation():
    poly = TrigPoly.const(1, 1, 1.0) + TrigPoly.cos_z(1, 1, (1,), 0.5)
    spec = make_spec(kernel=PeriodicKernel.trig(poly))
    mu = stationary_measure_grid(spec, 32)
    radii = (100.0, 316.2277660168379, 1000.3)
    k0, cauchy, table = kernel_tail_constant(spec, mu, radii=radii)
    assert not cauchy


def test_mixing_rate_matches_multiplier(constant_spec_1d):
    m1 = fourier_multiplier(constant_spec_1d, [1.0])
    fs = [lambda p: np.cos(2 * np.pi * p[:, 0])]
    tgrid = np.linspace(0.05, 0.6, 8)
    est = mixing_rate(constant_spec_1d, fs, tgrid,
                      SimConfig(paths=4000, delta=0.25, seed=29), starts=4)
    assert est.ok
    assert est.lambda1 == pytest.approx(-m1.real, rel=0.3)


def test_mixing_rate_skips_zero_function(constant_spec_1d):
    est = mixing_rate(constant_spec_1d, [lambda p: np.zeros(len(p))],
                      np.linspace(0.1, 1.0, 4),
                      SimConfig(paths=100, delta=0.25, seed=1), starts=2)
    assert not est.ok


def test_ergodic_average_decay_bounded(constant_spec_1d):
    f = lambda p: np.cos(2 * np.pi * p[:, 0])
    out = ergodic_average_decay(constant_spec_1d, f, [0.25, 0.125, 0.0625],
                                SimConfig(paths=2000, delta=0.25, seed=7))
    assert out["bounded_within_factor_4"], out


def test_ergodic_average_decay_zero_function(constant_spec_1d):
    f = lambda p: np.zeros(len(p))
    out = ergodic_average_decay(constant_spec_1d, f, [0.25, 0.125],
                                SimConfig(paths=50, delta=0.25, seed=7))
    assert all(r["moment"] == 0.0 for r in out["rows"])


def test_ergodic_average_decay_rejects_biased_function(constant_spec_1d):
    f = lambda p: np.full(len(p), 0.7)
    with pytest.raises(ValueError):
        ergodic_average_decay(constant_spec_1d, f, [0.25],
                              SimConfig(paths=50, delta=0.25, seed=7))
