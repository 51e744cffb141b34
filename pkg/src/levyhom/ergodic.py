"""Invariant measure of the quotient process and ergodic averages.

Two estimators are provided: the Monte Carlo occupation histogram (time
average of simulated quotient paths) and, for d <= 2, the deterministic left
null vector of the assembled generator matrix. The latter is orders of
magnitude more accurate and is what the prediction pipeline uses; the Monte
Carlo route exists to validate it and to reach d = 3.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .corrector import assemble_operator, fourier_multiplier
from .grid import TorusGrid
from .pathsim import (SimConfig, occupation_counts, simulate_endpoints,
                      simulate_quotient_time_integrals, simulate_snapshots)
from .regimes import EffectiveDrifts
from .spec_model import (IntegrabilityError, JumpSpec, full_drift,
                         truncated_drift)


@dataclass
class TorusMeasure:
    grid: TorusGrid
    weights: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        if np.any(self.weights < 0):
            raise ValueError("measure weights must be nonnegative")
        s = self.weights.sum()
        if not np.isfinite(s) or abs(s - 1.0) > 1e-12:
            raise ValueError("weights must sum to one within 1e-12")

    @property
    def centers(self):
        return self.grid.centers

    @classmethod
    def uniform(cls, d, n):
        grid = TorusGrid(d, n)
        return cls(grid, np.full(grid.size, 1.0 / grid.size))

    @classmethod
    def from_counts(cls, grid, counts, meta=None):
        counts = np.asarray(counts, dtype=float)
        total = counts.sum()
        if total <= 0:
            raise ValueError("empty occupation histogram")
        w = counts / total
        w = w / w.sum()
        return cls(grid, w, meta or {})

    def tv_distance(self, other):
        if isinstance(other, TorusMeasure):
            other = other.weights
        return 0.5 * float(np.abs(self.weights - np.asarray(other)).sum())

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["cell"] + [f"x_{a}" for a in range(self.grid.d)]
                       + ["weight"])
            for i, (c, wt) in enumerate(zip(self.centers, self.weights)):
                w.writerow([i] + [f"{v:.17g}" for v in c] + [f"{wt:.17g}"])


def default_grid_n(d):
    return 64 if d <= 2 else 32


# ---------------------------------------------------------------------------
# estimators
# ---------------------------------------------------------------------------

def estimate_invariant_measure(spec: JumpSpec, cfg: SimConfig, grid_n=None,
                               burn_in=None) -> TorusMeasure:
    """Occupation-histogram estimate of the invariant measure.

    Paths start from two antithetic points (0 and the cell-diagonal midpoint);
    a total-variation gap above 0.1 between the two half-ensembles is recorded
    as a non-convergence warning in the measure's metadata.
    """
    n = grid_n or default_grid_n(spec.d)
    burn = burn_in if burn_in is not None else 0.2 * cfg.horizon
    half = max(1, cfg.paths // 2)
    cfg_a = SimConfig(paths=half, horizon=cfg.horizon, dt=cfg.dt,
                      delta=cfg.delta, rmax=cfg.rmax, seed=cfg.seed,
                      workers=cfg.workers)
    cfg_b = SimConfig(paths=cfg.paths - half, horizon=cfg.horizon, dt=cfg.dt,
                      delta=cfg.delta, rmax=cfg.rmax,
                      seed=cfg.seed ^ 0x9E3779B97F4A7C15, workers=cfg.workers)
    x_a = np.zeros(spec.d)
    x_b = np.full(spec.d, 0.5)
    counts_a = occupation_counts(spec, cfg_a, n, burn_in=burn, x0=x_a)
    counts_b = occupation_counts(spec, cfg_b, n, burn_in=burn, x0=x_b)
    grid = TorusGrid(spec.d, n)
    mu_a = TorusMeasure.from_counts(grid, counts_a)
    mu_b = TorusMeasure.from_counts(grid, counts_b)
    gap = mu_a.tv_distance(mu_b)
    meta = {"antithetic_tv_gap": gap, "burn_in": burn,
            "warning": "antithetic starts disagree; chains may not have "
                       "converged" if gap > 0.1 else ""}
    return TorusMeasure.from_counts(grid, counts_a + counts_b, meta)


def stationary_measure_grid(spec: JumpSpec, n=None) -> TorusMeasure:
    """Invariant measure of the discretized generator (deterministic, d <= 2)."""
    n = n or default_grid_n(spec.d)
    op = assemble_operator(spec, n)
    w = op.stationary_weights()
    return TorusMeasure(op.grid, w, {"estimator": "grid_adjoint"})


def stationary_measure_fourier(spec: JumpSpec, grid_n=None, modes=40
                               ) -> TorusMeasure:
    """Spectral invariant measure for d=1 trig kernels independent of z.

    For generators of the form k(x) M + b(x) d/dx, with M a constant
    coefficient jump operator, the stationarity condition closes on finitely
    coupled Fourier modes of the density and solves to near machine
    precision. Weights are point values of the density on the grid, which
    integrates trig polynomials exactly against it.
    """
    if spec.d != 1:
        raise ValueError("spectral stationary solve implemented for d=1")
    if not spec.kernel.is_trig or spec.kernel.depends_on_z():
        raise ValueError("needs a trig kernel independent of z")
    if not spec.drift.is_trig:
        raise ValueError("needs a trig-poly drift")
    from .spec_model import DriftField, PeriodicKernel
    unit = JumpSpec(1, spec.small, spec.rho0, spec.phi, spec.kappa,
                    PeriodicKernel.constant(1, 1.0), DriftField.zero(1))
    m0 = {0: 0.0 + 0.0j}
    for n in range(1, modes + 1):
        m0[n] = fourier_multiplier(unit, [float(n)])
        m0[-n] = np.conj(m0[n])
    khat = {mx[0]: complex(c) for (mx, _), c in spec.kernel.poly.coeffs.items()}
    bhat = {mx[0]: complex(c)
            for (mx, _), c in spec.drift.components[0].coeffs.items()}
    N = modes
    cols = [l for l in range(-N, N + 1) if l != 0]
    pos = {l: i for i, l in enumerate(cols)}
    A = np.zeros((2 * N, 2 * N), dtype=complex)
    rhs = np.zeros(2 * N, dtype=complex)
    for row, n in enumerate(cols):
        for q, kq in khat.items():
            coef = m0[n] * kq
            l = -n - q
            if l == 0:
                rhs[row] -= coef
            elif abs(l) <= N:
                A[row, pos[l]] += coef
        for j, bj in bhat.items():
            coef = 2j * np.pi * n * bj
            l = -n - j
            if l == 0:
                rhs[row] -= coef
            elif abs(l) <= N:
                A[row, pos[l]] += coef
    u, res, *_ = np.linalg.lstsq(A, rhs, rcond=None)
    grid = TorusGrid(1, grid_n or 128)
    x = grid.centers[:, 0]
    dens = np.ones(grid.size)
    for l, i in pos.items():
        dens = dens + np.real(u[i] * np.exp(2j * np.pi * l * x))
    dens = np.maximum(dens, 0.0)
    w = dens / dens.sum()
    return TorusMeasure(grid, w, {"estimator": "fourier_modes", "modes": N})


def stationary_measure(spec: JumpSpec, n=None) -> TorusMeasure:
    """Best available deterministic invariant-measure estimate."""
    if (spec.d == 1 and spec.kernel.is_trig
            and not spec.kernel.depends_on_z() and spec.drift.is_trig):
        return stationary_measure_fourier(spec, grid_n=n or 128)
    return stationary_measure_grid(spec, n)


def mu_average(mu: TorusMeasure, g):
    """Integral of a field against the measure: sum of cell values * weights.

    ``g`` is a callable of the cell centers (vector values allowed) or an
    array of per-cell values.
    """
    vals = np.asarray(g(mu.centers) if callable(g) else g, dtype=float)
    return np.tensordot(mu.weights, vals, axes=(0, 0))


def effective_drifts(spec: JumpSpec, mu: TorusMeasure) -> EffectiveDrifts:
    """Invariant averages of the drift fields entering the recentering."""
    b_bar = mu_average(mu, lambda pts: spec.drift(pts).reshape(len(pts),
                                                               spec.d))
    try:
        b_inf = mu_average(mu, lambda pts: np.array(
            [full_drift(spec, x) for x in pts]))
    except IntegrabilityError:
        b_inf = None

    def b_trunc_bar(R):
        vals = np.array([truncated_drift(spec, x, R) for x in mu.centers])
        return mu.weights @ vals

    return EffectiveDrifts(b_bar=np.atleast_1d(b_bar), b_inf_bar=b_inf,
                           b_trunc_bar=b_trunc_bar)


def kernel_tail_constant(spec: JumpSpec, mu: TorusMeasure,
                         radii=(1e2, 1e3, 1e4)):
    """Estimate of lim_{|z| -> inf} int k(x, z) mu(dx) along angular nodes.

    Returns (k0, cauchy_flag, table); the flag is False when the values are
    not settling in the radius, meaning the limit hypothesis fails.
    """
    vals = []
    for r in radii:
        per_theta = []
        for th in spec.rho0.thetas:
            z = (r * th)[None, :]
            kv = spec.kernel(mu.centers, np.broadcast_to(z, mu.centers.shape))
            per_theta.append(float(mu.weights @ kv))
        vals.append(float(np.mean(per_theta)))
    diffs = np.abs(np.diff(vals))
    scale = max(abs(vals[-1]), 1e-12)
    cauchy = bool(np.all(diffs <= 0.02 * scale + 1e-12))
    return vals[-1], cauchy, list(zip(radii, vals))


# ---------------------------------------------------------------------------
# mixing rate
# ---------------------------------------------------------------------------

@dataclass
class MixingEstimate:
    lambda1: float
    prefactor: float
    fit_residual: float
    table: list
    ok: bool

    def to_json(self, path=None):
        payload = {"lambda1": self.lambda1, "prefactor": self.prefactor,
                   "fit_residual": self.fit_residual, "ok": self.ok,
                   "table": self.table}
        if path:
            with open(path, "w") as fh:
                json.dump(payload, fh, indent=2)
        return payload


def mixing_rate(spec: JumpSpec, test_functions, time_grid, cfg: SimConfig,
                mu: Optional[TorusMeasure] = None, starts=8) -> MixingEstimate:
    """Least-squares decay fit of sup_x |E_x f(X_t) - mu(f)| over the time grid.

    Test functions must be mean-free under the supplied measure; identically
    zero functions are skipped. Fit failure is reported, not raised.
    """
    mu = mu if mu is not None else stationary_measure_grid(spec)
    time_grid = np.asarray(sorted(time_grid), dtype=float)
    fs = [f for f in test_functions
          if np.max(np.abs(np.asarray(f(mu.centers)))) > 0]
    if not fs:
        return MixingEstimate(float("nan"), float("nan"), float("nan"), [],
                              False)
    g = np.arange(starts) / starts
    start_pts = (np.stack(np.meshgrid(*([g] * spec.d), indexing="ij"),
                          axis=-1).reshape(-1, spec.d)
                 if spec.d > 1 else g[:, None])
    sup_curve = np.zeros(len(time_grid))
    for si, x0 in enumerate(start_pts):
        sub = SimConfig(paths=cfg.paths, horizon=float(time_grid[-1]),
                        dt=cfg.dt, delta=cfg.delta, rmax=cfg.rmax,
                        seed=cfg.seed + 7919 * si, workers=cfg.workers)
        snaps = simulate_snapshots(spec, sub, time_grid, x0=x0)
        snaps_mod = snaps - np.floor(snaps)
        for f in fs:
            target = float(mu_average(mu, f))
            for ti in range(len(time_grid)):
                est = float(np.mean(np.asarray(f(snaps_mod[:, ti, :]))))
                sup_curve[ti] = max(sup_curve[ti], abs(est - target))
    noise = 3.0 / math.sqrt(cfg.paths)
    usable = sup_curve > noise
    table = list(zip(time_grid.tolist(), sup_curve.tolist()))
    if usable.sum() < 2:
        return MixingEstimate(float("nan"), float("nan"), float("nan"),
                              table, False)
    t_u = time_grid[usable]
    y = np.log(sup_curve[usable])
    A = np.stack([np.ones_like(t_u), -t_u], axis=1)
    coef, res, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = float(np.sqrt(res[0] / len(t_u))) if len(res) else 0.0
    lam = float(coef[1])
    return MixingEstimate(lam, float(np.exp(coef[0])), resid, table,
                          ok=lam > 0)


# ---------------------------------------------------------------------------
# decay of ergodic averages under scaling
# ---------------------------------------------------------------------------

def ergodic_average_decay(spec: JumpSpec, f, eps_ladder, cfg: SimConfig,
                          window=(0.1, 1.0),
                          mu: Optional[TorusMeasure] = None):
    """Second moment of int_s^t f(X^eps_r / eps) dr per epsilon.

    ``f`` must be mean-free under the invariant measure (tolerance 3 MC
    standard errors of the integral scale); the returned table carries
    moment(eps) and the compensated value moment * phi(1/eps), which stays
    bounded when the averaging decay holds.
    """
    mu = mu if mu is not None else stationary_measure_grid(spec)
    fbar = float(mu_average(mu, f))
    if abs(fbar) > 1e-6 and abs(fbar) > 1e-3 * float(
            np.max(np.abs(np.asarray(f(mu.centers))))):
        raise ValueError(f"test function is not mean-free (mu(f)={fbar:.3e})")
    s, t = window
    rows = []
    for eps in eps_ladder:
        rho = float(spec.phi(1.0 / eps))
        sub = SimConfig(paths=cfg.paths, horizon=rho * t, dt=cfg.dt,
                        delta=cfg.delta, rmax=cfg.rmax, seed=cfg.seed,
                        workers=cfg.workers)
        acc = simulate_quotient_time_integrals(
            spec, sub, f, window=(rho * s, rho * t))
        scaled = acc / rho
        moment = float(np.mean(scaled ** 2))
        rows.append({"eps": eps, "moment": moment,
                     "compensated": moment * rho})
    comp = np.array([r["compensated"] for r in rows])
    spread = float(comp.max() / max(comp.min(), 1e-300))
    return {"rows": rows, "bounded_ratio": spread,
            "bounded_within_factor_4": bool(spread <= 4.0)}
