"""Weighted blow-up of the canonical fold in three directional charts.

Base coordinates are ``(X, Y, Z, eps)`` with ``eps`` treated as a state. The
charts are monomial maps onto the base with weights ``(3, 2, 4, 5)``:

* ``K1`` on ``Z > 0``: ``(x1, y1, r1, eps1) -> (r1^3 x1, r1^2 y1, r1^4, r1^5 eps1)``
* ``K2`` on ``eps > 0``: ``(x2, y2, z2, r2) -> (r2^3 x2, r2^2 y2, r2^4 z2, r2^5)``
* ``K3`` on ``Y > 0``: ``(x3, r3, z3, eps3) -> (r3^3 x3, r3^2, r3^4 z3, r3^5 eps3)``

Chart vector fields are the pushforward of the base field divided by the
radial coordinate (``r1``, ``r2`` or ``r3``).
"""
from dataclasses import dataclass

import numpy as np

from . import _kernels as kern
from .errors import OutOfChart, OutOfOverlap
from .ode_core import BuiltinField

__all__ = ["CHARTS", "ChartPoint", "lift", "blow_down", "chart_transition",
           "chart_field", "chart_field_numeric", "chart_vector_field", "radial_index"]

CHARTS = ("Base", "K1", "K2", "K3")
_CODES = {"K1": kern.CHART_K1, "K2": kern.CHART_K2, "K3": kern.CHART_K3}
# position of the radial coordinate inside each chart's 4-vector
_RADIAL = {"K1": 2, "K2": 3, "K3": 1}


def radial_index(chart):
    """Index of the radial coordinate in the chart's coordinate vector."""
    return _RADIAL[chart]


@dataclass(frozen=True)
class ChartPoint:
    """Coordinates tagged with the chart they belong to.

    ``Base``: ``(X, Y, Z, eps)``; ``K1``: ``(x1, y1, r1, eps1)``;
    ``K2``: ``(x2, y2, z2, r2)``; ``K3``: ``(x3, r3, z3, eps3)``.
    """

    chart: str
    coords: tuple

    def __post_init__(self):
        if self.chart not in CHARTS:
            raise ValueError(f"unknown chart {self.chart!r}")
        c = tuple(float(v) for v in self.coords)
        if len(c) != 4:
            raise ValueError("chart points have four coordinates")
        object.__setattr__(self, "coords", c)
        if self.chart != "Base" and c[_RADIAL[self.chart]] < 0:
            raise OutOfChart(f"negative radial coordinate in {self.chart}")

    def as_array(self):
        return np.array(self.coords)


def blow_down(p):
    """Image of ``p`` in base coordinates ``(X, Y, Z, eps)``."""
    c = p.coords
    if p.chart == "Base":
        return p
    if p.chart == "K1":
        x, y, r, e = c
        return ChartPoint("Base", (r ** 3 * x, r * r * y, r ** 4, r ** 5 * e))
    if p.chart == "K2":
        x, y, z, r = c
        return ChartPoint("Base", (r ** 3 * x, r * r * y, r ** 4 * z, r ** 5))
    x, r, z, e = c
    return ChartPoint("Base", (r ** 3 * x, r * r, r ** 4 * z, r ** 5 * e))


def lift(target, base):
    """Coordinates of a base point in chart ``target``.

    Raises
    ------
    OutOfChart
        If the quantity defining the radial coordinate is not positive
        (``Z`` for K1, ``eps`` for K2, ``Y`` for K3).
    """
    if base.chart != "Base":
        raise ValueError("lift expects a Base point")
    X, Y, Z, e = base.coords
    if target == "Base":
        return base
    if target == "K1":
        if not Z > 0:
            raise OutOfChart(f"K1 needs Z > 0, got {Z}")
        r = Z ** 0.25
        return ChartPoint("K1", (X / r ** 3, Y / r ** 2, r, e / r ** 5))
    if target == "K2":
        if not e > 0:
            raise OutOfChart(f"K2 needs eps > 0, got {e}")
        r = e ** 0.2
        return ChartPoint("K2", (X / r ** 3, Y / r ** 2, Z / r ** 4, r))
    if target == "K3":
        if not Y > 0:
            raise OutOfChart(f"K3 needs Y > 0, got {Y}")
        r = Y ** 0.5
        return ChartPoint("K3", (X / r ** 3, r, Z / r ** 4, e / r ** 5))
    raise ValueError(f"unknown chart {target!r}")


def _k1_to_k2(c):
    x, y, r, e = c
    if not e > 0:
        raise OutOfOverlap("K1 -> K2 needs eps1 > 0")
    return (x * e ** -0.6, y * e ** -0.4, e ** -0.8, r * e ** 0.2)


def _k2_to_k1(c):
    x, y, z, r = c
    if not z > 0:
        raise OutOfOverlap("K2 -> K1 needs z2 > 0")
    return (x * z ** -0.75, y * z ** -0.5, r * z ** 0.25, z ** -1.25)


def _k3_to_k2(c):
    x, r, z, e = c
    if not e > 0:
        raise OutOfOverlap("K3 -> K2 needs eps3 > 0")
    return (x * e ** -0.6, e ** -0.4, z * e ** -0.8, r * e ** 0.2)


def _k2_to_k3(c):
    x, y, z, r = c
    if not y > 0:
        raise OutOfOverlap("K2 -> K3 needs y2 > 0")
    return (x * y ** -1.5, r * y ** 0.5, z * y ** -2.0, y ** -2.5)


_MAPS = {("K1", "K2"): _k1_to_k2, ("K2", "K1"): _k2_to_k1,
         ("K3", "K2"): _k3_to_k2, ("K2", "K3"): _k2_to_k3}


def chart_transition(i, j, p):
    """Change chart from ``i`` to ``j``.

    The four direct maps join K2 to K1 and K3; K1 and K3 are joined through
    K2, and ``Base`` goes through :func:`lift` or :func:`blow_down`.

    Raises
    ------
    OutOfOverlap
        If the coordinate being inverted is not positive, or so small that
        the image overflows.
    """
    if p.chart != i:
        raise ValueError(f"point is in {p.chart}, not {i}")
    if i == j:
        return p
    if i == "Base":
        try:
            return lift(j, p)
        except OutOfChart as exc:
            raise OutOfOverlap(str(exc)) from exc
    if j == "Base":
        return blow_down(p)
    if (i, j) in _MAPS:
        try:
            return ChartPoint(j, _MAPS[(i, j)](p.coords))
        except OverflowError as exc:
            raise OutOfOverlap(f"{i} -> {j}: coordinate too close to zero to invert") from exc
    return chart_transition("K2", j, chart_transition(i, "K2", p))


def chart_field(chart, p, delta, c1):
    """Closed-form desingularized field of the canonical fold in a chart.

    The canonical base field is ``(Z - Y^2 + c1 delta X Y, -X, -eps, 0)``.
    """
    if isinstance(p, ChartPoint):
        if p.chart != chart:
            raise ValueError(f"point is in {p.chart}, not {chart}")
        u = p.as_array()
    else:
        u = np.asarray(p, dtype=float)
    if chart not in _CODES:
        raise ValueError(f"no chart field for {chart!r}")
    return kern.eval_rhs(_CODES[chart], np.ascontiguousarray(u, dtype=np.float64),
                         np.array([float(delta), float(c1)]))


def chart_vector_field(chart, delta, c1):
    """Compiled chart field for :func:`btfold.ode_core.integrate`."""
    return BuiltinField(_CODES[chart], (float(delta), float(c1)), f"{chart}-canonical")


def _pushforward(chart, u, V):
    # invert the (triangular) differential of the monomial chart map
    if chart == "K1":
        x, y, r, e = u
        dr = V[2] / (4 * r ** 3)
        return np.array([(V[0] - 3 * r * r * x * dr) / r ** 3,
                         (V[1] - 2 * r * y * dr) / (r * r), dr,
                         (V[3] - 5 * r ** 4 * e * dr) / r ** 5])
    if chart == "K2":
        x, y, z, r = u
        dr = V[3] / (5 * r ** 4)
        return np.array([(V[0] - 3 * r * r * x * dr) / r ** 3,
                         (V[1] - 2 * r * y * dr) / (r * r),
                         (V[2] - 4 * r ** 3 * z * dr) / r ** 4, dr])
    x, r, z, e = u
    dr = V[1] / (2 * r)
    return np.array([(V[0] - 3 * r * r * x * dr) / r ** 3, dr,
                     (V[2] - 4 * r ** 3 * z * dr) / r ** 4,
                     (V[3] - 5 * r ** 4 * e * dr) / r ** 5])


def _numeric(chart, u, sys, delta):
    X, Y, Z, e = blow_down(ChartPoint(chart, u)).coords
    f1, f2 = sys.fast(X, Y, Z, e, delta)
    V = np.array([f1, f2, e * sys.slow(X, Y, Z, e, delta), 0.0], dtype=float)
    return _pushforward(chart, u, V) / u[_RADIAL[chart]]


def chart_field_numeric(chart, p, sys, params, r_eps=1e-4):
    """Desingularized chart field of any system by numerical pushforward.

    The base field ``(f1, f2, eps g, 0)`` is pulled back through the inverse
    chart differential and divided by the radial coordinate. At zero radius
    the value is the linear extrapolation ``2 F(h) - F(2h)`` in the radius.

    Parameters
    ----------
    chart : {'K1', 'K2', 'K3'}
    p : ChartPoint
    sys : FastSlowSystem
    params : Params
        Only ``delta`` is used; ``eps`` is part of the chart point.
    r_eps : float
        Extrapolation step at zero radius.

    Raises
    ------
    OutOfChart
        If the radial coordinate is negative.
    """
    if p.chart != chart:
        raise ValueError(f"point is in {p.chart}, not {chart}")
    u = p.as_array()
    k = _RADIAL[chart]
    if u[k] < 0:
        raise OutOfChart("negative radial coordinate")
    if u[k] > 0:
        return _numeric(chart, u, sys, params.delta)
    u1, u2 = u.copy(), u.copy()
    u1[k], u2[k] = r_eps, 2 * r_eps
    return 2 * _numeric(chart, u1, sys, params.delta) - _numeric(chart, u2, sys, params.delta)
