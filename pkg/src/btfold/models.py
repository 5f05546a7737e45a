"""Fast-slow systems with two fast and one slow variable.

A system is ``x' = f1, y' = f2, z' = eps * g`` with a stability parameter
``delta``. Two systems are built in: a symmetric example with a pair of
Bogdanov-Takens folds, and the truncated normal form of such a fold.
"""
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import _kernels as kern
from .errors import NonFinite
from .ode_core import BuiltinField

__all__ = ["Params", "BasePoint", "FastSlowSystem", "builtin_example",
           "builtin_canonical_fold", "eval_full_field", "EXAMPLE_FOLDS"]


@dataclass(frozen=True)
class Params:
    """Singular parameter ``eps`` and stability parameter ``delta``."""

    eps: float
    delta: float

    def __post_init__(self):
        if not (self.eps >= 0 and self.delta >= 0):
            raise ValueError("eps and delta must be nonnegative")


@dataclass(frozen=True)
class BasePoint:
    """Point ``(x, y, z)`` of the phase space."""

    x: float
    y: float
    z: float

    def __post_init__(self):
        if not np.all(np.isfinite([self.x, self.y, self.z])):
            raise NonFinite(f"non-finite base point {(self.x, self.y, self.z)}")

    def as_array(self):
        return np.array([self.x, self.y, self.z], dtype=float)

    @classmethod
    def from_array(cls, a):
        return cls(float(a[0]), float(a[1]), float(a[2]))


@dataclass(frozen=True)
class FastSlowSystem:
    """Fast field ``(f1, f2)``, slow field ``g`` and their derivatives.

    The callables take ``(x, y, z, eps, delta)`` and broadcast over arrays.

    Attributes
    ----------
    fast : callable
        Returns the tuple ``(f1, f2)``.
    slow : callable
        Returns ``g``.
    fast_jacobian : callable
        Returns the 2x2 matrix ``d(f1, f2)/d(x, y)``.
    name : str
    symmetry : callable or None
        Involution of ``(x, y, z)`` that maps orbits to orbits.
    fast_dz : callable or None
        ``d(f1, f2)/dz``; finite differences are used when absent.
    slow_grad : callable or None
        ``dg/d(x, y, z)``; finite differences are used when absent.
    code : int or None
        Compiled field code for built-in systems.
    extra : tuple
        Extra compiled parameters appended after ``(eps, delta)``.
    """

    fast: Callable
    slow: Callable
    fast_jacobian: Callable
    name: str
    symmetry: Optional[Callable] = None
    fast_dz: Optional[Callable] = None
    slow_grad: Optional[Callable] = None
    code: Optional[int] = None
    extra: tuple = ()

    def field(self, params):
        """Full vector field on ``(x, y, z)`` as an integrable object."""
        if self.code is not None:
            return BuiltinField(self.code, (params.eps, params.delta) + tuple(self.extra), self.name)
        eps, delta = params.eps, params.delta

        def f(u):
            f1, f2 = self.fast(u[0], u[1], u[2], eps, delta)
            return np.array([f1, f2, eps * self.slow(u[0], u[1], u[2], eps, delta)], dtype=float)
        return f

    def jacobian(self, params):
        """Callable returning the 3x3 Jacobian of the full field."""
        eps, delta = params.eps, params.delta

        def jac(u):
            x, y, z = u
            J = np.zeros((3, 3))
            J[:2, :2] = self.fast_jacobian(x, y, z, eps, delta)
            if self.fast_dz is not None:
                J[:2, 2] = self.fast_dz(x, y, z, eps, delta)
            else:
                h = 1e-6 * (1 + abs(z))
                fp = np.array(self.fast(x, y, z + h, eps, delta))
                fm = np.array(self.fast(x, y, z - h, eps, delta))
                J[:2, 2] = (fp - fm) / (2 * h)
            if self.slow_grad is not None:
                J[2] = eps * np.asarray(self.slow_grad(x, y, z, eps, delta))
            else:
                for k in range(3):
                    h = 1e-6 * (1 + abs(u[k]))
                    up = np.array(u, float)
                    um = np.array(u, float)
                    up[k] += h
                    um[k] -= h
                    J[2, k] = eps * (self.slow(*up, eps, delta) - self.slow(*um, eps, delta)) / (2 * h)
            return J
        return jac

    def tangent_field(self, params):
        """Field augmented with the variational equation, compiled when possible."""
        f = self.field(params)
        tcode = {kern.EXAMPLE: kern.EXAMPLE_TANGENT, kern.CANONICAL: kern.CANONICAL_TANGENT}.get(self.code)
        if tcode is not None:
            return BuiltinField(tcode, f.params, self.name + "+tangent")
        jac = self.jacobian(params)

        def aug(Y):
            y = Y[:3]
            M = Y[3:].reshape(3, 3)
            return np.concatenate([f(y), (jac(y) @ M).ravel()])
        return aug


# ---------------------------------------------------------------------------
# symmetric example with two folds
# ---------------------------------------------------------------------------

def _ex_fast(x, y, z, eps, delta):
    return (z + 3.0 * (y ** 3 - y) + delta * x * (1.0 / 3.0 - y ** 2), -x + 0.0 * y)


def _ex_slow(x, y, z, eps, delta):
    return np.sin(2.5 * y) + 0.0 * x


def _ex_jac(x, y, z, eps, delta):
    return np.array([[delta * (1.0 / 3.0 - y ** 2), 9.0 * y ** 2 - 3.0 - 2.0 * delta * x * y],
                     [-1.0, 0.0]])


def _ex_fast_dz(x, y, z, eps, delta):
    return np.array([1.0, 0.0])


def _ex_slow_grad(x, y, z, eps, delta):
    return np.array([0.0, 2.5 * np.cos(2.5 * y), 0.0])


def _odd(p):
    return tuple(-np.asarray(p, dtype=float))


_S3 = 1.0 / np.sqrt(3.0)
#: fold points of the example system, upper (y < 0) and lower (y > 0)
EXAMPLE_FOLDS = {"plus": (0.0, -_S3, -2.0 * _S3), "minus": (0.0, _S3, 2.0 * _S3)}


def builtin_example():
    """Example system with folds at ``(0, -1/sqrt 3, -2/sqrt 3)`` and its mirror.

    ``x' = z + 3(y^3 - y) + delta x (1/3 - y^2)``, ``y' = -x``,
    ``z' = eps sin(5y/2)``; odd under ``(x, y, z) -> -(x, y, z)``.
    """
    return FastSlowSystem(fast=_ex_fast, slow=_ex_slow, fast_jacobian=_ex_jac,
                          name="example", symmetry=_odd, fast_dz=_ex_fast_dz,
                          slow_grad=_ex_slow_grad, code=kern.EXAMPLE)


# ---------------------------------------------------------------------------
# truncated normal form of a BT fold
# ---------------------------------------------------------------------------

def builtin_canonical_fold(c1=1.0):
    """Normal form ``X' = Z - Y^2 + c1 delta X Y``, ``Y' = -X``, ``Z' = -eps``.

    Parameters
    ----------
    c1 : float
        Slope of the cross-term coefficient, which is ``c1 * delta``.
    """
    c1 = float(c1)

    def fast(x, y, z, eps, delta):
        return (z - y ** 2 + c1 * delta * x * y, -x + 0.0 * y)

    def slow(x, y, z, eps, delta):
        return -1.0 + 0.0 * x

    def jac(x, y, z, eps, delta):
        return np.array([[c1 * delta * y, -2.0 * y + c1 * delta * x], [-1.0, 0.0]])

    return FastSlowSystem(fast=fast, slow=slow, fast_jacobian=jac,
                          name=f"canonical(c1={c1:g})",
                          fast_dz=lambda *a: np.array([1.0, 0.0]),
                          slow_grad=lambda *a: np.zeros(3),
                          code=kern.CANONICAL, extra=(c1,))


def eval_full_field(sys, p, params):
    """Velocity ``(f1, f2, eps * g)`` at base point ``p``.

    Raises
    ------
    NonFinite
        If any component is NaN or infinite.
    """
    f1, f2 = sys.fast(p.x, p.y, p.z, params.eps, params.delta)
    g = sys.slow(p.x, p.y, p.z, params.eps, params.delta)
    v = np.array([f1, f2, params.eps * g], dtype=float)
    if params.eps == 0:
        v[2] = 0.0
    if not np.all(np.isfinite(v)):
        raise NonFinite(f"field is not finite at {p}")
    return v
