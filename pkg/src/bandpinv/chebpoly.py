"""Polynomial approximants of ``1/x`` on ``[a, b]`` and the decay bounds.

Two constructions are provided:

* :func:`odd_pinv_poly` builds an odd polynomial ``p_{2n+1}`` from a
  Chebyshev series in ``y(x) = c - 2 x^2 / (b^2 - a^2)``. Evaluated on a
  matrix through ``A^T A`` it approximates the pseudoinverse of an arbitrary
  (indefinite or rectangular) matrix.
* :func:`psd_pinv_poly` truncates the Chebyshev expansion of ``1/x`` under
  the linear substitution ``y(x) = (a + b - 2x) / (b - a)``; it applies to
  positive definite matrices.

Both are evaluated with the scaled recurrence ``U_j = t^j T_j(y)``,
``U_{j+1} = 2 t y U_j - t^2 U_{j-1}``, which stays bounded on null
directions where ``|y| > 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import Polynomial

DEGENERATE_REL = 1e-12
_CEIL_SNAP = 1e-9


def snapped_ceil(x: float) -> int:
    """Ceiling that treats values within ``1e-9`` of an integer as that integer.

    Ratios such as ``0.3 / 0.1`` land a rounding error above an integer; a
    plain ceiling would then overshoot by one and shrink a bound unsoundly.
    """
    r = round(x)
    if abs(x - r) <= _CEIL_SNAP * max(1.0, abs(x)):
        return int(r)
    return math.ceil(x)


def _check_interval(a: float, b: float) -> None:
    if not (a > 0):
        raise ValueError(f"interval needs a > 0, got a={a}")
    if not (b > a):
        raise ValueError(f"interval needs b > a, got a={a}, b={b}")


def cheb_T(j: int, y):
    """First-kind Chebyshev polynomial ``T_j(y)`` by the three-term recurrence."""
    if j < 0:
        raise ValueError("degree must be nonnegative")
    y = np.asarray(y, dtype=float)
    prev, cur = np.ones_like(y), y
    if j == 0:
        return prev if prev.ndim else float(prev)
    for _ in range(j - 1):
        prev, cur = cur, 2.0 * y * cur - prev
    return cur if cur.ndim else float(cur)


def scaled_chebyshev_sum(n: int, t: float, y):
    """``sum_{j=0}^{n} t^j T_j(y)`` for scalar or array ``y``."""
    y = np.asarray(y, dtype=float)
    prev = np.ones_like(y)
    total = prev.copy()
    if n >= 1:
        cur = t * y
        total = total + cur
        for _ in range(n - 1):
            prev, cur = cur, 2.0 * t * y * cur - t * t * prev
            total = total + cur
    return total


def _is_degenerate(a: float, b: float) -> bool:
    return b - a < DEGENERATE_REL * b


@dataclass(frozen=True)
class OddPolySpec:
    """Odd approximant ``p_{2n+1}(x) = scale * x * (4t S_n(y(x)) - 2t) / (1 - t^2)``.

    Here ``S_n(y) = sum_{j<=n} t^j T_j(y)``, ``t = (b-a)/(b+a)``,
    ``c = (b^2+a^2)/(b^2-a^2)``, ``scale = 2/(b^2-a^2)`` and
    ``y(x) = c - scale * x^2``. On a degenerate interval (``a == b`` up to
    ``1e-12`` relative) the polynomial is ``x / (a b)``.
    """

    n: int
    a: float
    b: float
    t: float
    c: float
    scale: float
    degenerate: bool = False

    @property
    def degree(self) -> int:
        return 2 * self.n + 1

    @property
    def lead(self) -> float:
        """Factor multiplying ``x (2 S_n - 1)``."""
        if self.degenerate:
            return 1.0 / (self.a * self.b)
        return self.scale * 2.0 * self.t / (1.0 - self.t**2)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.degenerate:
            out = x * self.lead
        else:
            y = self.c - self.scale * x * x
            out = self.lead * x * (2.0 * scaled_chebyshev_sum(self.n, self.t, y) - 1.0)
        return out if out.ndim else float(out)

    def gram_polynomial(self) -> Polynomial:
        """``s`` with ``p(x) = x * s(x^2)``, in the monomial basis of ``w = x^2``."""
        if self.degenerate:
            return Polynomial([self.lead])
        y = Polynomial([self.c, -self.scale])
        total = Polynomial([1.0])
        prev, cur = Polynomial([1.0]), self.t * y
        if self.n >= 1:
            total = total + cur
            for _ in range(self.n - 1):
                prev, cur = cur, 2.0 * self.t * y * cur - self.t**2 * prev
                total = total + cur
        return self.lead * (2.0 * total - 1.0)

    def coefficients(self) -> np.ndarray:
        """Monomial coefficients of ``p`` in increasing degree; even slots are zero."""
        s = self.gram_polynomial().coef
        coef = np.zeros(2 * len(s))
        coef[1::2] = s
        return coef


@dataclass(frozen=True)
class PsdPolySpec:
    """Approximant ``q_n(x) = (1 + 2 sum_{k=1}^{n} t^k T_k(y(x))) / sqrt(ab)``.

    ``t = t_lin = (sqrt(b)-sqrt(a))/(sqrt(b)+sqrt(a))``,
    ``c_lin = (b+a)/(b-a)`` and ``y(x) = c_lin - 2x/(b-a)``. The truncation
    error on ``[a, b]`` is at most ``2 h(n)``. Degenerate intervals give the
    constant ``1/a``.
    """

    n: int
    a: float
    b: float
    t_lin: float
    c_lin: float
    degenerate: bool = False

    @property
    def degree(self) -> int:
        return self.n

    @property
    def slope(self) -> float:
        """Coefficient of ``x`` in ``y(x)`` (negated)."""
        return 2.0 / (self.b - self.a)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.degenerate:
            out = np.full_like(x, 1.0 / self.a)
        else:
            y = self.c_lin - self.slope * x
            out = (2.0 * scaled_chebyshev_sum(self.n, self.t_lin, y) - 1.0) / math.sqrt(self.a * self.b)
        return out if out.ndim else float(out)

    def coefficients(self) -> np.ndarray:
        if self.degenerate:
            return np.array([1.0 / self.a])
        y = Polynomial([self.c_lin, -self.slope])
        t = self.t_lin
        total = Polynomial([1.0])
        prev, cur = Polynomial([1.0]), t * y
        if self.n >= 1:
            total = total + cur
            for _ in range(self.n - 1):
                prev, cur = cur, 2.0 * t * y * cur - t * t * prev
                total = total + cur
        return ((2.0 * total - 1.0) / math.sqrt(self.a * self.b)).coef


def odd_pinv_poly(n: int, a: float, b: float) -> OddPolySpec:
    if n < 0:
        raise ValueError("truncation order must be nonnegative")
    if not (a > 0) or b < a:
        raise ValueError(f"need 0 < a <= b, got a={a}, b={b}")
    if _is_degenerate(a, b):
        return OddPolySpec(n, a, b, 0.0, math.inf, math.inf, degenerate=True)
    return OddPolySpec(
        n=n,
        a=a,
        b=b,
        t=(b - a) / (b + a),
        c=(b * b + a * a) / (b * b - a * a),
        scale=2.0 / (b * b - a * a),
    )


def psd_pinv_poly(n: int, a: float, b: float) -> PsdPolySpec:
    if n < 0:
        raise ValueError("truncation order must be nonnegative")
    if not (a > 0) or b < a:
        raise ValueError(f"need 0 < a <= b, got a={a}, b={b}")
    if _is_degenerate(a, b):
        return PsdPolySpec(n, a, b, 0.0, math.inf, degenerate=True)
    sa, sb = math.sqrt(a), math.sqrt(b)
    return PsdPolySpec(n=n, a=a, b=b, t_lin=(sb - sa) / (sb + sa), c_lin=(b + a) / (b - a))


def constant_factor(kind: str, a: float, b: float) -> float:
    """Prefactor of the named bound (the part not raised to a power)."""
    _check_interval(a, b)
    if kind in ("f1", "h"):
        return (math.sqrt(b) + math.sqrt(a)) ** 2 / (2.0 * a * b)
    if kind in ("f2", "g"):
        return 4.0 * (b + a) ** 1.5 / (a * b * math.sqrt(b - a))
    if kind == "demko":
        return (a + b) ** 2 / (2.0 * a * a * b)
    if kind == "shin":
        return b / (a * a)
    raise ValueError(f"unknown bound kind {kind!r}")


def decay_base(kind: str, a: float, b: float) -> float:
    """Base of the exponential factor of the named bound."""
    _check_interval(a, b)
    if kind in ("f1", "h"):
        sa, sb = math.sqrt(a), math.sqrt(b)
        return (sb - sa) / (sb + sa)
    if kind in ("f2", "g", "demko"):
        return (b - a) / (b + a)
    if kind == "shin":
        return (b * b - a * a) / (b * b + a * a)
    raise ValueError(f"unknown bound kind {kind!r}")


def bound_exponent(kind: str, arg: float) -> int:
    """Exponent applied to :func:`decay_base`.

    ``f1``: ``ceil(omega)``; ``f2``, ``demko``, ``shin``: ``ceil((omega-1)/2)``;
    ``g`` and ``h`` take the truncation order ``n`` and use ``n + 1``.
    """
    if kind == "f1":
        return snapped_ceil(arg)
    if kind in ("f2", "demko", "shin"):
        return snapped_ceil((arg - 1.0) / 2.0)
    if kind in ("g", "h"):
        if arg != int(arg):
            raise ValueError(f"{kind} takes an integer truncation order, got {arg}")
        return int(arg) + 1
    raise ValueError(f"unknown bound kind {kind!r}")


def decay_bound(kind: str, arg: float, a: float, b: float) -> float:
    """Closed-form bound of the given kind.

    ``arg`` is the bandwidth ratio ``omega = kappa / kappa_bar`` for ``f1``,
    ``f2``, ``demko`` and ``shin``, and the truncation order ``n`` for ``g``
    and ``h``.
    """
    return constant_factor(kind, a, b) * decay_base(kind, a, b) ** bound_exponent(kind, arg)


def grid_error(poly, a: float, b: float, points: int = 10_001) -> float:
    """Max of ``|1/x - poly(x)|`` over a uniform grid on ``[a, b]``."""
    x = np.linspace(a, b, points)
    return float(np.max(np.abs(1.0 / x - poly(x))))
