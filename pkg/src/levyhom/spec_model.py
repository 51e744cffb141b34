"""Coefficient data for periodic Levy-type generators and derived quantities.

A :class:`JumpSpec` bundles the pieces of the integro-differential generator

    L f(x) = int (f(x+z) - f(x) - <grad f(x), z> 1_{|z|<=1}) k(x,z) Pi(dz)
             + <b(x), grad f(x)>

where the jump measure splits into an isotropic small-jump part on {|z|<=1}
and a spherically decomposed tail  1_{r>1} (rho0(dtheta) + kappa(r,dtheta))
dr / (r phi(r))  driven by a regularly varying scaling function phi.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import quad

from .quadrature import (integrate_vec, log_edges, panel_nodes,
                         radial_fourier_integral, tabulated_inverse_cdf)
from .trigpoly import TrigPoly


class IntegrabilityError(Exception):
    """Raised when a drift tail integral diverges for the given scaling function."""


def sphere_area(d: int) -> float:
    """Surface measure of the unit sphere in R^d (2 points for d=1)."""
    if d == 1:
        return 2.0
    return 2.0 * math.pi ** (d / 2.0) / math.gamma(d / 2.0)


# ---------------------------------------------------------------------------
# spherical measures
# ---------------------------------------------------------------------------

class SphericalMeasure:
    """Finite measure on the unit sphere: uniform, density, or atomic.

    Internally every variant carries a fixed node table (thetas, weights) used
    by all quadratures; for atoms the table is exact.
    """

    def __init__(self, d, variant, thetas, weights, density_fn=None, meta=None):
        self.d = int(d)
        self.variant = variant
        self.thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        self.weights = np.asarray(weights, dtype=float)
        self.density_fn = density_fn
        self.meta = meta or {}
        if self.weights.ndim != 1 or len(self.weights) != len(self.thetas):
            raise ValueError("node/weight shape mismatch")
        if np.any(self.weights < 0):
            raise ValueError("angular weights must be nonnegative")
        norms = np.linalg.norm(self.thetas, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-12):
            raise ValueError("directions must be unit vectors (within 1e-12)")
        self.total_mass = float(self.weights.sum())
        if not np.isfinite(self.total_mass) or self.total_mass <= 0:
            raise ValueError("total angular mass must be finite and positive")
        self._cum = np.cumsum(self.weights) / self.total_mass

    # -- constructors ------------------------------------------------------
    @classmethod
    def uniform(cls, d, total_mass=1.0, n_nodes=None):
        if total_mass <= 0:
            raise ValueError("total_mass must be positive")
        if d == 1:
            thetas = np.array([[1.0], [-1.0]])
            weights = np.array([0.5, 0.5]) * total_mass
        elif d == 2:
            n = n_nodes or 64
            ang = (np.arange(n) + 0.5) / n * 2 * np.pi
            thetas = np.stack([np.cos(ang), np.sin(ang)], axis=1)
            weights = np.full(n, total_mass / n)
        elif d == 3:
            npol = 16
            naz = n_nodes // npol if n_nodes else 32
            u, wu = np.polynomial.legendre.leggauss(npol)
            az = (np.arange(naz) + 0.5) / naz * 2 * np.pi
            uu, aa = np.meshgrid(u, az, indexing="ij")
            s = np.sqrt(1 - uu ** 2)
            thetas = np.stack([s * np.cos(aa), s * np.sin(aa),
                               uu], axis=-1).reshape(-1, 3)
            ww = (wu[:, None] * np.full(naz, 1.0 / naz)).ravel()
            weights = ww / ww.sum() * total_mass
        else:
            raise ValueError("d must be 1, 2 or 3")
        return cls(d, "uniform", thetas, weights,
                   meta={"total_mass": total_mass, "n_nodes": len(weights)})

    @classmethod
    def density(cls, d, fn, n_nodes=None):
        """Measure fn(theta) sigma(dtheta) against surface measure; fn >= 0."""
        base = cls.uniform(d, total_mass=sphere_area(d), n_nodes=n_nodes)
        vals = np.asarray([fn(t) for t in base.thetas], dtype=float)
        if np.any(vals < 0):
            raise ValueError("density must be nonnegative")
        return cls(d, "density", base.thetas, base.weights * vals,
                   density_fn=fn, meta={"n_nodes": len(base.weights)})

    @classmethod
    def atoms(cls, d, pairs):
        """Atomic measure from (direction, weight) pairs; directions unit."""
        thetas = np.array([p[0] for p in pairs], dtype=float).reshape(len(pairs), d)
        weights = np.array([p[1] for p in pairs], dtype=float)
        if np.any(weights <= 0):
            raise ValueError("atom weights must be positive")
        return cls(d, "atoms", thetas, weights,
                   meta={"atoms": [(list(map(float, t)), float(w))
                                   for t, w in zip(thetas, weights)]})

    # -- queries -----------------------------------------------------------
    def integrate(self, fn):
        """Integrate a (possibly vector-valued) function of theta."""
        vals = np.asarray(fn(self.thetas))
        return np.tensordot(self.weights, vals, axes=(0, 0))

    def mass(self, predicate=None):
        if predicate is None:
            return self.total_mass
        mask = np.asarray([bool(predicate(t)) for t in self.thetas])
        return float(self.weights[mask].sum())

    def mean_direction_weighted(self):
        """First angular moment int theta rho(dtheta)."""
        return self.weights @ self.thetas

    def sample_from_uniforms(self, u1, u2=None):
        """Map uniforms in [0,1) to directions; fixed draw budget of two."""
        u1 = np.asarray(u1, dtype=float)
        if self.variant == "uniform" and self.d == 2:
            ang = u1 * 2 * np.pi
            return np.stack([np.cos(ang), np.sin(ang)], axis=-1)
        if self.variant == "uniform" and self.d == 3:
            zc = 2.0 * u1 - 1.0
            az = 2 * np.pi * np.asarray(u2, dtype=float)
            s = np.sqrt(np.maximum(1 - zc ** 2, 0.0))
            return np.stack([s * np.cos(az), s * np.sin(az), zc], axis=-1)
        # atoms, densities (via node table) and d=1 all reduce to a
        # categorical draw over the node table
        idx = np.searchsorted(self._cum, u1, side="right")
        idx = np.clip(idx, 0, len(self.weights) - 1)
        return self.thetas[idx]


# ---------------------------------------------------------------------------
# scaling functions
# ---------------------------------------------------------------------------

class ScalingFunction:
    """Strictly increasing radial scaling phi on (1, infinity).

    Variants: pure power r^alpha, a finite positive mixture of powers, and
    r^alpha log(1+r). ``index`` is the regular-variation exponent at infinity.
    """

    def __init__(self, kind, **params):
        self.kind = kind
        self.params = params
        if kind == "power":
            self.index = float(params["alpha"])
            if self.index <= 0:
                raise ValueError("alpha must be positive")
        elif kind == "mixed":
            pairs = [(float(b), float(w)) for b, w in params["nu"]]
            if not pairs or any(w <= 0 for _, w in pairs):
                raise ValueError("mixture needs positive weights")
            if any(not (0 < b < 2) for b, _ in pairs):
                raise ValueError("mixture exponents must lie in (0, 2)")
            self.params["nu"] = sorted(pairs)
            self.index = max(b for b, _ in pairs)
        elif kind == "power_log":
            self.index = float(params["alpha"])
            if self.index <= 0:
                raise ValueError("alpha must be positive")
        else:
            raise ValueError(f"unknown scaling kind {kind!r}")

    @classmethod
    def power(cls, alpha):
        return cls("power", alpha=alpha)

    @classmethod
    def mixed(cls, nu):
        return cls("mixed", nu=list(nu))

    @classmethod
    def power_log(cls, alpha):
        return cls("power_log", alpha=alpha)

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        if self.kind == "power":
            return r ** self.index
        if self.kind == "mixed":
            out = np.zeros_like(r)
            for b, w in self.params["nu"]:
                out = out + w * r ** b
            return out
        return r ** self.index * np.log1p(r)

    # -- tail integrals ------------------------------------------------------
    def tail_integrable(self) -> bool:
        """Whether int_1^inf dr/phi(r) converges."""
        return self.index > 1.0

    def inv_integral(self, a, b):
        """int_a^b dr / phi(r); b may be inf (requires tail integrability)."""
        if np.isinf(b) and not self.tail_integrable():
            raise IntegrabilityError(
                "int_1^inf dr/phi diverges for scaling index <= 1")
        if self.kind == "power":
            al = self.index
            if al == 1.0:
                if np.isinf(b):
                    raise IntegrabilityError("log divergence")
                return math.log(b / a)
            upper = 0.0 if np.isinf(b) else b ** (1 - al)
            return (upper - a ** (1 - al)) / (1 - al)
        val, _ = quad(lambda r: 1.0 / self(r), a, b,
                      epsabs=1e-14, epsrel=1e-12, limit=400)
        return val

    def radial_tail_mass(self, a, b):
        """int_a^b dr / (r phi(r)), the radial factor of the large-jump mass."""
        if self.kind == "power":
            al = self.index
            upper = 0.0 if np.isinf(b) else b ** (-al)
            return (a ** (-al) - upper) / al
        val, _ = quad(lambda r: 1.0 / (r * self(r)), a, b,
                      epsabs=1e-14, epsrel=1e-12, limit=400)
        return val

    def radial_sampler(self, a, b):
        """Inverse-CDF sampler of the density 1/(r phi(r)) restricted to (a, b]."""
        if self.kind == "power":
            al = self.index
            ca, cb = a ** (-al), b ** (-al)

            def sampler(u):
                u = np.asarray(u, dtype=float)
                return (ca - u * (ca - cb)) ** (-1.0 / al)

            return self.radial_tail_mass(a, b), sampler
        return tabulated_inverse_cdf(lambda r: 1.0 / (r * self(r)), a, b,
                                     n=4096)

    def monotone_on_sample(self, r_lo=1.0, r_hi=1e6, n=512):
        r = np.geomspace(max(r_lo, 1.0 + 1e-9), r_hi, n)
        v = self(r)
        return bool(np.all(np.diff(v) > 0))

    def to_dict(self):
        if self.kind == "mixed":
            return {"variant": "mixed",
                    "nu": [[b, w] for b, w in self.params["nu"]]}
        return {"variant": self.kind, "alpha": self.index}


@dataclass
class IndexProbeResult:
    alpha_hat: float
    converged: bool
    per_lambda: list


def scaling_index_probe(phi: ScalingFunction, r_grid=None, lambda_grid=None):
    """Empirical scaling index from phi(lambda r)/phi(lambda) ~ r^alpha.

    Least-squares slope of log phi(lambda r)/phi(lambda) against log r at the
    largest lambda; the ladder of lambdas is used to flag non-convergence.
    """
    r_grid = np.asarray(r_grid if r_grid is not None else
                        [2.0, 10.0, 100.0, 1000.0], dtype=float)
    lambda_grid = np.asarray(lambda_grid if lambda_grid is not None else
                             [1e4, 1e6, 1e8], dtype=float)
    logr = np.log(r_grid)
    per_lambda = []
    for lam in lambda_grid:
        y = np.log(phi(lam * r_grid) / phi(lam))
        slope = float(logr @ y / (logr @ logr))
        per_lambda.append((float(lam), slope))
    slopes = np.array([s for _, s in per_lambda])
    converged = bool(len(slopes) < 2 or abs(slopes[-1] - slopes[-2]) < 0.02)
    return IndexProbeResult(float(slopes[-1]), converged, per_lambda)


# ---------------------------------------------------------------------------
# radial perturbation kappa(r, dtheta) = g(r) * base(dtheta)
# ---------------------------------------------------------------------------

class RadialPerturbation:
    """Separable perturbation of the large-jump angular measure."""

    def __init__(self, g=None, base=None, form=None):
        self.g = g
        self.base = base
        self.form = form or {}

    @classmethod
    def none(cls):
        return cls(g=None, base=None)

    @classmethod
    def scaled(cls, g, base, form=None):
        return cls(g=g, base=base, form=form)

    @classmethod
    def power_ratio(cls, beta, alpha, base):
        """g(r) = r^beta / (r^alpha + r^beta) with beta < alpha."""
        if beta >= alpha:
            raise ValueError("need beta < alpha for a vanishing perturbation")

        def g(r):
            r = np.asarray(r, dtype=float)
            return r ** beta / (r ** alpha + r ** beta)

        return cls(g=g, base=base,
                   form={"form": "power_ratio", "beta": beta, "alpha": alpha})

    @property
    def is_none(self):
        return self.g is None

    def decay_check(self, r_lo=2.0, r_hi=1e6, n=64):
        """(sup |g| * |base|, last value); both should be finite / tiny."""
        if self.is_none:
            return 0.0, 0.0
        r = np.geomspace(r_lo, r_hi, n)
        vals = np.abs(np.asarray(self.g(r), dtype=float)) * self.base.total_mass
        return float(vals.max()), float(vals[-1])


# ---------------------------------------------------------------------------
# small-jump part
# ---------------------------------------------------------------------------

class SmallJumpPart:
    """Jump measure on {|z| <= 1}: isotropic stable density or nothing."""

    def __init__(self, kind, alpha0=None):
        self.kind = kind
        if kind == "stable":
            self.alpha0 = float(alpha0)
            if not (0 < self.alpha0 < 2):
                raise ValueError("alpha0 must lie in (0, 2)")
        elif kind == "zero":
            self.alpha0 = None
        else:
            raise ValueError(f"unknown small-jump kind {kind!r}")

    @classmethod
    def stable_density(cls, alpha0):
        return cls("stable", alpha0)

    @classmethod
    def zero(cls):
        return cls("zero")

    def second_moment(self, d):
        """m2 = int_{|z|<=1} |z|^2 Pi(dz); always finite for alpha0 < 2."""
        if self.kind == "zero":
            return 0.0
        return sphere_area(d) / (2.0 - self.alpha0)

    def ball_second_moment(self, d, delta):
        """int_{|z|<=delta} |z|^2 Pi(dz) for delta <= 1."""
        if self.kind == "zero":
            return 0.0
        return sphere_area(d) * delta ** (2.0 - self.alpha0) / (2.0 - self.alpha0)

    def annulus_mass(self, d, a, b):
        """Pi({a < |z| <= b}) for 0 < a < b <= 1."""
        if self.kind == "zero":
            return 0.0
        a0 = self.alpha0
        return sphere_area(d) * (a ** (-a0) - b ** (-a0)) / a0

    def radial_density_exponent(self):
        return None if self.kind == "zero" else -1.0 - self.alpha0


# ---------------------------------------------------------------------------
# kernels and drift fields
# ---------------------------------------------------------------------------

class PeriodicKernel:
    """Bounded kernel k(x, z), 1-periodic in x (and optionally in z)."""

    def __init__(self, d, fn=None, poly: Optional[TrigPoly] = None,
                 kmin=None, kmax=None, periodic_in_z=False):
        self.d = int(d)
        self.poly = poly
        self.fn = fn
        if poly is not None:
            lo, hi = poly.bounds_exact()
            self.kmin = float(lo if kmin is None else kmin)
            self.kmax = float(hi if kmax is None else kmax)
            self.periodic_in_z = True
        else:
            if kmin is None or kmax is None:
                raise ValueError("callback kernels must declare kmin and kmax")
            self.kmin = float(kmin)
            self.kmax = float(kmax)
            self.periodic_in_z = bool(periodic_in_z)
        if self.kmin < 0:
            raise ValueError("kernels must be nonnegative")

    @classmethod
    def constant(cls, d, value=1.0):
        return cls(d, poly=TrigPoly.const(d, d, value))

    @classmethod
    def trig(cls, poly, kmin=None, kmax=None):
        return cls(poly.dim_x, poly=poly, kmin=kmin, kmax=kmax)

    @classmethod
    def callback(cls, d, fn, kmin, kmax, periodic_in_z=False):
        return cls(d, fn=fn, kmin=kmin, kmax=kmax, periodic_in_z=periodic_in_z)

    @property
    def is_trig(self):
        return self.poly is not None

    def depends_on_z(self):
        if self.is_trig:
            return self.poly.depends_on_z()
        return True  # assume the worst for callbacks

    def depends_on_x(self):
        if self.is_trig:
            return self.poly.depends_on_x()
        return True

    def __call__(self, x, z):
        if self.is_trig:
            return self.poly(x, z)
        return self.fn(x, z)

    def refine_bounds(self, n=64, seed=0):
        """Measured kmin/kmax from a sample grid; exact modes for trig polys."""
        if self.is_trig and self.poly.max_mode_order() == 0:
            c = self.poly.mean
            return c, c
        if self.d == 1:
            g = (np.arange(n) + 0.5) / n
            xs, zs = np.meshgrid(g, g, indexing="ij")
            vals = self(xs[..., None], zs[..., None])
        else:
            rng = np.random.Generator(np.random.Philox(key=np.uint64(seed)))
            m = n ** 2 * 16
            xs = rng.random((m, self.d))
            zs = rng.random((m, self.d)) * 4.0 - 2.0
            vals = self(xs, zs)
        return float(np.min(vals)), float(np.max(vals))

    def x_periodicity_defect(self, n=32, seed=1):
        if self.is_trig:
            return 0.0
        rng = np.random.Generator(np.random.Philox(key=np.uint64(seed)))
        xs = rng.random((n, self.d))
        zs = rng.random((n, self.d)) * 4.0 - 2.0
        defect = 0.0
        for axis in range(self.d):
            shift = np.zeros(self.d)
            shift[axis] = 1.0
            defect = max(defect, float(np.max(np.abs(
                self(xs + shift, zs) - self(xs, zs)))))
        return defect

    def z_periodicity_defect(self, n=32, seed=2):
        if self.is_trig:
            return 0.0
        rng = np.random.Generator(np.random.Philox(key=np.uint64(seed)))
        xs = rng.random((n, self.d))
        zs = rng.random((n, self.d)) * 4.0 - 2.0
        defect = 0.0
        for axis in range(self.d):
            shift = np.zeros(self.d)
            shift[axis] = 1.0
            defect = max(defect, float(np.max(np.abs(
                self(xs, zs + shift) - self(xs, zs)))))
        return defect

    def continuity_modulus(self, h_ladder=(0.1, 0.01, 0.001), n=64, seed=3):
        """Sampled sup_z |k(x+h, z) - k(x, z)| per step size h."""
        rng = np.random.Generator(np.random.Philox(key=np.uint64(seed)))
        xs = rng.random((n, self.d))
        zs = rng.random((n, self.d)) * 4.0 - 2.0
        out = []
        for h in h_ladder:
            dx = rng.standard_normal((n, self.d))
            dx = dx / np.linalg.norm(dx, axis=1, keepdims=True) * h
            out.append(float(np.max(np.abs(self(xs + dx, zs) - self(xs, zs)))))
        return out


class DriftField:
    """Bounded 1-periodic vector field b(x)."""

    def __init__(self, d, components=None, fn=None, bound=None):
        self.d = int(d)
        self.components = components
        self.fn = fn
        self.bound = bound

    @classmethod
    def zero(cls, d):
        return cls(d, components=[TrigPoly.const(d, 0, 0.0) for _ in range(d)])

    @classmethod
    def trig(cls, components):
        d = components[0].dim_x
        return cls(d, components=list(components))

    @classmethod
    def callback(cls, d, fn, bound):
        return cls(d, fn=fn, bound=bound)

    @property
    def is_trig(self):
        return self.components is not None

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.is_trig:
            vals = [comp(x) for comp in self.components]
            return np.stack(np.broadcast_arrays(*vals), axis=-1)
        return self.fn(x)

    def is_zero(self):
        return self.is_trig and all(not comp.coeffs for comp in self.components)

    def sup_norm_estimate(self):
        if self.is_trig:
            return max(sum(abs(c) for c in comp.coeffs.values())
                       for comp in self.components)
        return self.bound


# ---------------------------------------------------------------------------
# the assembled specification
# ---------------------------------------------------------------------------

@dataclass
class JumpSpec:
    d: int
    small: SmallJumpPart
    rho0: SphericalMeasure
    phi: ScalingFunction
    kappa: RadialPerturbation
    kernel: PeriodicKernel
    drift: DriftField
    config_dict: Optional[dict] = field(default=None, repr=False)

    def __post_init__(self):
        if self.rho0.d != self.d:
            raise ValueError("angular measure dimension mismatch")
        self._radial_cache = {}

    # -- radial weights of the large-jump part ------------------------------
    def angular_terms(self):
        """List of (measure, radial_weight_fn or None) making up rho0 + kappa."""
        terms = [(self.rho0, None)]
        if not self.kappa.is_none:
            terms.append((self.kappa.base, self.kappa.g))
        return terms

    def large_jump_mass(self, a, b):
        """Pi({a < |z| <= b}) of the spherical part, a >= 1."""
        total = self.rho0.total_mass * self.phi.radial_tail_mass(a, b)
        if not self.kappa.is_none:
            val, _ = quad(lambda r: self.kappa.g(r) / (r * self.phi(r)), a, b,
                          epsabs=1e-14, epsrel=1e-11, limit=400)
            total += self.kappa.base.total_mass * val
        return total

    def second_moment_total(self):
        """int |z|^2 Pi(dz); raises if the tail diverges."""
        if self.phi.index <= 2.0:
            raise IntegrabilityError(
                "second moment diverges for scaling index <= 2")
        tail, _ = quad(lambda r: r / self.phi(r), 1.0, np.inf,
                       epsabs=1e-14, epsrel=1e-11, limit=400)
        total = self.rho0.total_mass * tail + self.small.second_moment(self.d)
        if not self.kappa.is_none:
            val, _ = quad(lambda r: self.kappa.g(r) * r / self.phi(r), 1.0,
                          np.inf, epsabs=1e-14, epsrel=1e-11, limit=400)
            total += self.kappa.base.total_mass * val
        return total

    # -- truncated and full drifts ------------------------------------------
    def _radial_integral(self, s, R, weighted):
        key = (round(float(s), 14), R, weighted)
        if key not in self._radial_cache:
            wfn = self.kappa.g if weighted else None
            self._radial_cache[key] = radial_fourier_integral(
                self.phi, s, 1.0, R, weight_fn=wfn)
        return self._radial_cache[key]


def _drift_trig(spec: JumpSpec, x, R):
    """Mode-by-mode evaluation of the drift integral for trig-poly kernels."""
    x = np.asarray(x, dtype=float)
    out = np.zeros(x.shape[:-1] + (spec.d,))
    for (mx, mz), c in spec.kernel.poly.coeffs.items():
        xphase = np.exp(1j * 2 * np.pi * (x @ np.asarray(mx, dtype=float)))
        for measure, weight in [(spec.rho0, False)] + (
                [] if spec.kappa.is_none else [(spec.kappa.base, True)]):
            svals = measure.thetas @ np.asarray(mz, dtype=float)
            radial = np.array([spec._radial_integral(s, R, weight)
                               for s in svals])
            angular = (measure.weights * radial) @ measure.thetas
            out = out + np.real(c * xphase)[..., None] * np.real(angular) \
                - np.imag(c * xphase)[..., None] * np.imag(angular)
    return out


def _drift_callback(spec: JumpSpec, x, R):
    """Direct radial-angular quadrature; assumes k varies slowly in |z|.

    Rapidly oscillating z-dependence is only supported through the trig-poly
    representation, where each mode gets a dedicated oscillatory integral.
    """
    x = np.asarray(x, dtype=float)

    def angular_sum(r):
        vals = np.zeros((len(r), spec.d))
        for measure, weight in [(spec.rho0, False)] + (
                [] if spec.kappa.is_none else [(spec.kappa.base, True)]):
            w = measure.weights
            if weight:
                w = w[None, :] * np.asarray(spec.kappa.g(r))[:, None]
            else:
                w = np.broadcast_to(w, (len(r), len(w)))
            zpts = r[:, None, None] * measure.thetas[None, :, :]
            kv = spec.kernel(np.broadcast_to(x, zpts.shape), zpts)
            vals += np.einsum("rn,rn,nd->rd", w, kv, measure.thetas)
        return vals

    def integrand(r):
        return angular_sum(r) / spec.phi(r)[:, None]

    hi = min(R, 1e6)
    edges = log_edges(1.0, hi, per_decade=8)
    val = integrate_vec(integrand, 1.0, hi, rtol=1e-9, edges=edges)
    if np.isinf(R):
        # replace the dropped tail by its long-run radial average
        rs = np.geomspace(hi / 10, hi, 64)
        tail_avg = angular_sum(rs).mean(axis=0)
        val = val + tail_avg * spec.phi.inv_integral(hi, np.inf)
    return val


def truncated_drift(spec: JumpSpec, x, R):
    """Drift of jumps with 1 < |z| <= R: int_{1<|z|<=R} z k(x,z) Pi(dz)."""
    if R <= 1.0:
        raise ValueError("R must exceed 1")
    if spec.kernel.is_trig:
        return _drift_trig(spec, x, float(R))
    return _drift_callback(spec, x, float(R))


def full_drift(spec: JumpSpec, x):
    """Tail drift int_{|z|>1} z k(x,z) Pi(dz); requires an integrable tail."""
    if not spec.phi.tail_integrable():
        raise IntegrabilityError(
            "full drift undefined: int_1^inf dr/phi(r) diverges "
            f"(scaling index {spec.phi.index})")
    if spec.kernel.is_trig:
        return _drift_trig(spec, x, np.inf)
    return _drift_callback(spec, x, np.inf)


def drift_tail_bound(spec: JumpSpec, R):
    """Upper bound on |b_R - b_inf| per component: kmax |rho0+kappa| int_R^inf dr/phi."""
    mass = spec.rho0.total_mass
    if not spec.kappa.is_none:
        r = np.geomspace(R, R * 1e6, 64)
        mass += spec.kappa.base.total_mass * float(
            np.max(np.abs(spec.kappa.g(r))))
    return spec.kernel.kmax * mass * spec.phi.inv_integral(R, np.inf)


# ---------------------------------------------------------------------------
# self-similar limit jump measure
# ---------------------------------------------------------------------------

class SelfSimilarJumpMeasure:
    """The scale-covariant measure rho0(dtheta) r^{-1-alpha} dr on r > 0."""

    def __init__(self, alpha, rho0: SphericalMeasure):
        if not (0 < alpha < 2):
            raise ValueError("alpha must lie in (0, 2)")
        self.alpha = float(alpha)
        self.rho0 = rho0
        self.d = rho0.d

    def radial_mass(self, r1, r2):
        a = self.alpha
        if r1 <= 0:
            return math.inf
        upper = 0.0 if np.isinf(r2) else r2 ** (-a)
        return (r1 ** (-a) - upper) / a

    def mass(self, r1, r2, angular_predicate=None):
        """Measure of {r1 <= |z| <= r2, z/|z| in B}."""
        return self.rho0.mass(angular_predicate) * self.radial_mass(r1, r2)

    def sample(self, rng, n, r_min=1.0, r_max=np.inf):
        """Draw (radius, direction) pairs from the normalized restriction."""
        a = self.alpha
        u = rng.random(n)
        ca = r_min ** (-a)
        cb = 0.0 if np.isinf(r_max) else r_max ** (-a)
        r = (ca - u * (ca - cb)) ** (-1.0 / a)
        th = self.rho0.sample_from_uniforms(rng.random(n), rng.random(n))
        return r, th


def limit_jump_measure(spec: JumpSpec) -> SelfSimilarJumpMeasure:
    """Scale-covariant tail measure obtained by replacing phi(r) with r^alpha."""
    return SelfSimilarJumpMeasure(spec.phi.index, spec.rho0)


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------

@dataclass
class CheckResult:
    name: str
    passed: bool
    measured: dict
    note: str = ""


@dataclass
class ValidationReport:
    checks: list

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def check(self, name):
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self):
        return {"passed": self.passed,
                "checks": [{"name": c.name, "passed": c.passed,
                            "measured": c.measured, "note": c.note}
                           for c in self.checks]}

    def summary(self):
        lines = []
        for c in self.checks:
            status = "PASS" if c.passed else "FAIL"
            lines.append(f"[{status}] {c.name}: {c.measured} {c.note}".rstrip())
        return "\n".join(lines)


def validate(spec: JumpSpec, require_positive_kmin=False) -> ValidationReport:
    """Screen the hypotheses the homogenization statements rest on.

    This checks measurable sufficient conditions (kernel bounds, periodicity,
    scaling monotonicity and index, perturbation decay, small-jump moments);
    it does not prove well-posedness or ergodicity.
    """
    checks = []

    mass = spec.rho0.total_mass
    checks.append(CheckResult(
        "angular_mass_positive", bool(np.isfinite(mass) and mass > 0),
        {"total_mass": mass}))

    mono = spec.phi.monotone_on_sample()
    checks.append(CheckResult("phi_strictly_increasing", mono, {}))

    probe = scaling_index_probe(spec.phi)
    idx_ok = abs(probe.alpha_hat - spec.phi.index) <= 0.05 and probe.converged
    checks.append(CheckResult(
        "phi_index_probe", bool(idx_ok),
        {"declared": spec.phi.index, "alpha_hat": probe.alpha_hat,
         "converged": probe.converged}))

    sup_k, last_k = spec.kappa.decay_check()
    checks.append(CheckResult(
        "kappa_decay", bool(np.isfinite(sup_k) and last_k <= max(1e-3, 1e-3 * sup_k)),
        {"sup": sup_k, "at_r=1e6": last_k}))

    m2 = spec.small.second_moment(spec.d)
    checks.append(CheckResult("small_jump_second_moment",
                              bool(np.isfinite(m2)), {"m2": m2}))

    kmin_m, kmax_m = spec.kernel.refine_bounds()
    bounds_ok = (kmin_m >= spec.kernel.kmin - 1e-9 and
                 kmax_m <= spec.kernel.kmax + 1e-9 and kmin_m >= 0)
    if require_positive_kmin and min(kmin_m, spec.kernel.kmin) <= 0:
        bounds_ok = False
    checks.append(CheckResult(
        "kernel_bounds", bool(bounds_ok),
        {"declared": [spec.kernel.kmin, spec.kernel.kmax],
         "measured": [kmin_m, kmax_m]},
        "strictly positive lower bound required" if require_positive_kmin else ""))

    xdef = spec.kernel.x_periodicity_defect()
    checks.append(CheckResult("kernel_x_periodicity", bool(xdef <= 1e-10),
                              {"defect": xdef}))

    if spec.kernel.periodic_in_z:
        zdef = spec.kernel.z_periodicity_defect()
        checks.append(CheckResult("kernel_z_periodicity", bool(zdef <= 1e-10),
                                  {"defect": zdef}))

    modulus = spec.kernel.continuity_modulus()
    cont_ok = all(b <= a + 1e-12 for a, b in zip(modulus, modulus[1:]))
    checks.append(CheckResult("kernel_continuity_modulus", bool(cont_ok),
                              {"sampled_modulus": modulus}))

    bsup = spec.drift.sup_norm_estimate()
    checks.append(CheckResult("drift_bounded",
                              bool(bsup is not None and np.isfinite(bsup)),
                              {"sup_norm": bsup}))

    if require_positive_kmin:
        ok = spec.small.kind == "stable"
        checks.append(CheckResult(
            "small_jump_stable_form", bool(ok),
            {"kind": spec.small.kind},
            "well-posedness screening expects an isotropic stable small part"))

    return ValidationReport(checks)
