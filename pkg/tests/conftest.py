"""Shared fixture specs used across the test suite."""

import numpy as np
import pytest

from levyhom.spec_model import (DriftField, JumpSpec, PeriodicKernel,
                                RadialPerturbation, ScalingFunction,
                                SmallJumpPart, SphericalMeasure)
from levyhom.trigpoly import TrigPoly


class GridMeasure:
    """Minimal torus measure stand-in: uniform weights on grid centers."""

    def __init__(self, d, n, weights=None):
        g = np.arange(n) / n
        if d == 1:
            self.centers = g[:, None]
        else:
            mesh = np.meshgrid(*([g] * d), indexing="ij")
            self.centers = np.stack([m.ravel() for m in mesh], axis=-1)
        if weights is None:
            self.weights = np.full(len(self.centers), 1.0 / len(self.centers))
        else:
            self.weights = np.asarray(weights, dtype=float)


def make_spec(d=1, alpha=0.5, alpha0=0.5, kernel=None, drift=None,
              rho0=None, phi=None, kappa=None, small=None):
    kernel = kernel if kernel is not None else PeriodicKernel.constant(d)
    drift = drift if drift is not None else DriftField.zero(d)
    rho0 = rho0 if rho0 is not None else SphericalMeasure.uniform(d, 1.0)
    phi = phi if phi is not None else ScalingFunction.power(alpha)
    kappa = kappa if kappa is not None else RadialPerturbation.none()
    small = small if small is not None else (
        SmallJumpPart.stable_density(alpha0) if alpha0 else SmallJumpPart.zero())
    return JumpSpec(d=d, small=small, rho0=rho0, phi=phi, kappa=kappa,
                    kernel=kernel, drift=drift)


@pytest.fixture
def constant_spec_1d():
    """k=1, b=0, alpha=0.5, uniform angular mass 1."""
    return make_spec()


@pytest.fixture
def xdep_spec_1d():
    """k(x,z) = 1 + 0.5 cos(2 pi x), z-independent; symmetric jumps."""
    poly = TrigPoly.const(1, 1, 1.0) + TrigPoly.cos_x(1, 1, (1,), 0.5)
    return make_spec(kernel=PeriodicKernel.trig(poly))


@pytest.fixture
def one_sided_spec_1d():
    """Atomic angular measure on +1, k=1, phi = r^1.5."""
    return make_spec(alpha=1.5, rho0=SphericalMeasure.atoms(1, [((1.0,), 1.0)]))
