"""Scaling regimes: time rescaling and recentering conventions.

Each regime fixes the scaled process Y_t = eps * (X_{rho t} - rho t c) where
rho is the regime's time scale at the given eps and c the recentering average
(zero, the truncated-tail average at radius 1/eps, or the full-tail average).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

STABLE_NO_CENTER = "stable_no_center"
CAUCHY_CENTER = "cauchy_center"
STABLE_CENTER = "stable_center"
CRITICAL_LOG = "critical_log"
DIFFUSIVE = "diffusive"

ALL_REGIMES = (STABLE_NO_CENTER, CAUCHY_CENTER, STABLE_CENTER, CRITICAL_LOG,
               DIFFUSIVE)


@dataclass
class EffectiveDrifts:
    """Invariant-measure averages of the drift fields."""
    b_bar: np.ndarray
    b_inf_bar: Optional[np.ndarray] = None
    b_trunc_bar: Optional[Callable[[float], np.ndarray]] = None


class RegimeError(ValueError):
    pass


@dataclass(frozen=True)
class Regime:
    name: str

    @classmethod
    def from_name(cls, name):
        if name not in ALL_REGIMES:
            raise RegimeError(f"unknown regime {name!r}; expected one of "
                              f"{ALL_REGIMES}")
        return cls(name)

    def time_scale(self, spec, eps):
        """rho(1/eps): unscaled horizon per unit of scaled time."""
        if self.name in (STABLE_NO_CENTER, CAUCHY_CENTER, STABLE_CENTER):
            return float(spec.phi(1.0 / eps))
        if self.name == CRITICAL_LOG:
            return eps ** -2 / abs(math.log(eps))
        return eps ** -2

    def needs_centering(self):
        return self.name != STABLE_NO_CENTER

    def centering_average(self, drifts: EffectiveDrifts, eps, d):
        """The average c subtracted at rate rho: 0, b̄_{1/eps}+b̄, or b̄_inf+b̄."""
        if self.name == STABLE_NO_CENTER:
            return np.zeros(d)
        if self.name == CAUCHY_CENTER:
            if drifts is None or drifts.b_trunc_bar is None:
                raise RegimeError("regime needs the truncated drift average "
                                  "at radius 1/eps")
            return np.asarray(drifts.b_trunc_bar(1.0 / eps)) + drifts.b_bar
        if drifts is None or drifts.b_inf_bar is None:
            raise RegimeError(f"regime {self.name!r} needs the full tail "
                              "drift average")
        return np.asarray(drifts.b_inf_bar) + drifts.b_bar

    def consistency_problems(self, spec):
        """Mismatch list between the declared regime and the scaling index."""
        idx = spec.phi.index
        problems = []
        if self.name == STABLE_NO_CENTER and not (0 < idx < 1):
            problems.append(f"scaling index {idx} outside (0,1)")
        if self.name == CAUCHY_CENTER and abs(idx - 1.0) > 1e-12:
            problems.append(f"scaling index {idx} != 1")
        if self.name == STABLE_CENTER and not (1 < idx < 2):
            problems.append(f"scaling index {idx} outside (1,2)")
        if self.name == CRITICAL_LOG and abs(idx - 2.0) > 1e-12:
            problems.append(f"scaling index {idx} != 2")
        if self.name == DIFFUSIVE and idx <= 2.0:
            problems.append(f"scaling index {idx} leaves the second moment "
                            "infinite")
        return problems
