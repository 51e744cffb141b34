"""Statistical checks that turn the weak-convergence statements into tests.

Everything here compares fixed-time marginals only: scaled endpoint batches
against sampled draws of the predicted limit (two-sample projections) and
against the limit's characteristic function. Reports state this limitation
explicitly; nothing claims path-space convergence.

Thresholds (final Kolmogorov-Smirnov distance 0.05 at 5000 paths, monotone
slack 0.02) are calibration constants of this repository, not claims imported
from the theory.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .limits import LimitLaw, char_fn, predicted_limit, sample_limit
from .pathsim import EndpointBatch, SimConfig, scaled_endpoint_batch
from .regimes import Regime
from .spec_model import JumpSpec

KS_FINAL_THRESHOLD = 0.05
MONOTONE_SLACK = 0.02
DEFAULT_FREQ_COUNT = 20


# ---------------------------------------------------------------------------
# elementary statistics
# ---------------------------------------------------------------------------

def ks_statistic(a, b):
    """Two-sample Kolmogorov-Smirnov statistic of 1d samples."""
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    if len(a) == 0 or len(b) == 0:
        raise ValueError("empty sample")
    grid = np.concatenate([a, b])
    cdf_a = np.searchsorted(a, grid, side="right") / len(a)
    cdf_b = np.searchsorted(b, grid, side="right") / len(b)
    return float(np.max(np.abs(cdf_a - cdf_b)))


def ks_projection(batch_a, batch_b, direction):
    """KS statistic of the two batches projected on a direction."""
    direction = np.asarray(direction, dtype=float)
    direction = direction / np.linalg.norm(direction)
    sa = np.asarray(batch_a.samples if isinstance(batch_a, EndpointBatch)
                    else batch_a)
    sb = np.asarray(batch_b.samples if isinstance(batch_b, EndpointBatch)
                    else batch_b)
    return ks_statistic(sa @ direction, sb @ direction)


def projection_directions(d, seed, extra=None):
    """The d axes plus 2d seeded random unit vectors (Cramer-Wold surrogate)."""
    dirs = [np.eye(d)[a] for a in range(d)]
    gen = np.random.Generator(np.random.Philox(
        key=np.array([np.uint64(seed), np.uint64(2)], dtype=np.uint64)))
    count = extra if extra is not None else 2 * d
    for _ in range(count):
        v = gen.standard_normal(d)
        dirs.append(v / np.linalg.norm(v))
    return dirs


def ecf_distance(batch, law: LimitLaw, freqs=None, t=None):
    """Sup over the frequency grid of |empirical CF - predicted CF|.

    Returns (distance, rows); each row carries the frequency, the absolute
    gap, and the Monte Carlo standard error of the empirical CF there.
    """
    samples = np.asarray(batch.samples if isinstance(batch, EndpointBatch)
                         else batch)
    n, d = samples.shape
    t = t if t is not None else (batch.t if isinstance(batch, EndpointBatch)
                                 else 1.0)
    if freqs is None:
        base = np.linspace(0.3, 5.0, DEFAULT_FREQ_COUNT)
        freqs = [u * np.eye(d)[a] for a in range(d) for u in base]
    if len(freqs) > 100:
        raise ValueError("frequency grid capped at 100 points")
    rows = []
    worst = 0.0
    for u in freqs:
        u = np.asarray(u, dtype=float)
        phase = samples @ u
        re, im = np.cos(phase), np.sin(phase)
        emp = complex(re.mean(), im.mean())
        se = math.sqrt((re.var() + im.var()) / n)
        target = char_fn(law, u, t)
        gap = abs(emp - target)
        worst = max(worst, gap)
        rows.append({"freq": u.tolist(), "gap": gap, "se": se,
                     "within_3se": bool(gap <= 3 * se)})
    return worst, rows


def tail_index(batch, top_fraction=0.05, bootstrap=200, seed=0):
    """Hill estimate of the tail index from the largest |Y| order statistics.

    Gaussian-looking batches drift above 2 and are flagged; constant batches
    have no tail to measure and raise.
    """
    samples = np.asarray(batch.samples if isinstance(batch, EndpointBatch)
                         else batch)
    mags = np.linalg.norm(np.atleast_2d(samples.T).T, axis=1) \
        if samples.ndim > 1 else np.abs(samples)
    mags = mags[mags > 0]
    if len(mags) < 100:
        raise ValueError("need at least 100 nonzero samples")
    k = max(10, int(top_fraction * len(mags)))
    order = np.sort(mags)
    top = order[-k:]
    threshold = order[-k - 1]
    if threshold <= 0 or np.all(top == top[0]):
        raise ValueError("degenerate tail: order statistics carry no spread")
    hill = np.mean(np.log(top / threshold))
    est = 1.0 / hill
    gen = np.random.Generator(np.random.Philox(
        key=np.array([np.uint64(seed), np.uint64(3)], dtype=np.uint64)))
    boots = []
    for _ in range(bootstrap):
        res = gen.choice(mags, size=len(mags), replace=True)
        o = np.sort(res)
        tp = o[-k:]
        th = o[-k - 1]
        if th > 0 and np.any(tp > th):
            boots.append(1.0 / max(np.mean(np.log(tp / th)), 1e-12))
    lo, hi = np.percentile(boots, [5.0, 95.0])
    return {"estimate": float(est), "ci90": [float(lo), float(hi)],
            "heavy_tailed": bool(est < 2.0),
            "note": "" if est < 2.0 else
            "estimate above 2: sample looks light-tailed"}


# ---------------------------------------------------------------------------
# theorem-level convergence report
# ---------------------------------------------------------------------------

@dataclass
class ConvergenceRow:
    eps: float
    ks_by_direction: list
    ks_max: float
    ecf_gap: float
    n: int
    error: str = ""


@dataclass
class ConvergenceReport:
    regime: str
    rows: list
    verdict: str                   # "PASS" | "FAIL" | "ERROR"
    thresholds: dict
    meta: dict = field(default_factory=dict)

    def to_json(self, path=None):
        payload = {
            "regime": self.regime, "verdict": self.verdict,
            "thresholds": self.thresholds,
            "rows": [{"eps": r.eps, "ks_max": r.ks_max,
                      "ks_by_direction": r.ks_by_direction,
                      "ecf_gap": r.ecf_gap, "n": r.n, "error": r.error}
                     for r in self.rows],
            "meta": self.meta,
            "scope": "fixed-time marginal agreement at t=1 only; no "
                     "path-space statement is tested",
        }
        if path:
            with open(path, "w") as fh:
                json.dump(payload, fh, indent=2)
        return payload

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["eps", "ks_max", "ecf_gap", "n", "error"])
            for r in self.rows:
                w.writerow([f"{r.eps:.17g}", f"{r.ks_max:.17g}",
                            f"{r.ecf_gap:.17g}", r.n, r.error])


def theorem_check(spec: JumpSpec, regime_name, eps_ladder, n=5000, seed=0,
                  mu=None, drifts=None, law: Optional[LimitLaw] = None,
                  sim: Optional[SimConfig] = None, t=1.0,
                  ks_threshold=KS_FINAL_THRESHOLD, slack=MONOTONE_SLACK
                  ) -> ConvergenceReport:
    """Marginal-convergence check of a declared regime on an epsilon ladder.

    For each epsilon the scaled recentered batch is compared against a fresh
    sample of the predicted limit (two-sample KS on the projection
    directions, plus the CF gap). PASS requires the final-epsilon KS below
    the threshold on every direction and a nonincreasing KS sequence within
    the slack. ``law`` overrides the predicted limit (negative controls).
    """
    from .ergodic import effective_drifts, stationary_measure

    eps_ladder = sorted(eps_ladder, reverse=True)
    if mu is None:
        mu = stationary_measure(spec)
    if law is None:
        law = predicted_limit(spec, mu, regime_name)
    regime = Regime.from_name(regime_name)
    if drifts is None and regime.needs_centering():
        drifts = effective_drifts(spec, mu)

    sim = sim or SimConfig()
    dirs = projection_directions(spec.d, seed)
    rows = []
    for i, eps in enumerate(eps_ladder):
        try:
            cfg = SimConfig(paths=n, horizon=t, dt=sim.dt, delta=sim.delta,
                            rmax=sim.rmax, seed=seed + 1009 * i,
                            eps=eps, regime=regime_name, workers=sim.workers,
                            stationary_start=sim.stationary_start,
                            truncation_budget=sim.truncation_budget)
            batch = scaled_endpoint_batch(spec, cfg, drifts,
                                          start_measure=mu)
            ref = sample_limit(law, t, n, seed + 1009 * i + 499,
                               SimConfig(dt=sim.dt, delta=sim.delta,
                                         workers=sim.workers))
            ks_list = [ks_projection(batch, ref, v) for v in dirs]
            gap, _ = ecf_distance(batch, law)
            rows.append(ConvergenceRow(eps, ks_list, max(ks_list), gap, n))
        except Exception as exc:             # annotate, keep the ladder going
            rows.append(ConvergenceRow(eps, [], float("nan"), float("nan"),
                                       n, error=f"{type(exc).__name__}: {exc}"))
    verdict = _verdict(rows, ks_threshold, slack)
    return ConvergenceReport(regime=regime_name, rows=rows, verdict=verdict,
                             thresholds={"ks_final": ks_threshold,
                                         "monotone_slack": slack},
                             meta={"directions": [list(map(float, v))
                                                  for v in dirs],
                                   "paths": n, "seed": seed, "t": t,
                                   "law": law.kind})


def _verdict(rows, ks_threshold, slack):
    if any(r.error for r in rows):
        return "ERROR"
    seq = [r.ks_max for r in rows]
    final_ok = rows[-1].ks_max <= ks_threshold and \
        all(k <= ks_threshold for k in rows[-1].ks_by_direction)
    monotone_ok = all(b <= a + slack for a, b in zip(seq, seq[1:]))
    return "PASS" if (final_ok and monotone_ok) else "FAIL"
