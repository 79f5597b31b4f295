"""Saddle-point (KKT) matrices and a certified interval for their singular values."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .backend import get_backend
from .blockmat import RANK_TOL

SYM_TOL = 1e-12


class ConstraintQualificationError(ValueError):
    """``F`` is not of full row rank (LICQ fails)."""


class SecondOrderError(ValueError):
    """``G + F^T F`` is not positive definite (SOSC fails)."""


@dataclass(frozen=True)
class SaddleSystem:
    G: np.ndarray
    F: np.ndarray
    A: np.ndarray

    @property
    def n(self) -> int:
        return self.G.shape[0]

    @property
    def m(self) -> int:
        return self.F.shape[0]


@dataclass(frozen=True)
class ThetaCertificate:
    """Constants with ``||G||_2 <= theta1``, ``theta2 I <= F F^T <= theta3 I``
    and ``G + F^T F >= theta4 I``.

    The upper end of the interval needs ``||G||_2 <= theta1``; for
    indefinite ``G`` this is stronger than ``G <= theta1 I``.
    """

    theta1: float
    theta2: float
    theta3: float
    theta4: float


def assemble_saddle(G, F) -> SaddleSystem:
    """Assemble ``[[G, F^T], [F, 0]]``; ``G`` must be symmetric."""
    G = np.asarray(G, dtype=float)
    F = np.atleast_2d(np.asarray(F, dtype=float))
    if G.ndim != 2 or G.shape[0] != G.shape[1]:
        raise ValueError(f"G must be square, got shape {G.shape}")
    n = G.shape[0]
    if F.shape[1] != n:
        raise ValueError(f"F must have {n} columns, got shape {F.shape}")
    scale = max(float(np.abs(G).max(initial=0.0)), 1e-300)
    if np.abs(G - G.T).max(initial=0.0) > SYM_TOL * scale:
        raise ValueError("G is not symmetric")
    m = F.shape[0]
    A = np.zeros((n + m, n + m))
    A[:n, :n] = G
    A[:n, n:] = F.T
    A[n:, :n] = F
    return SaddleSystem(G, F, A)


def estimate_thetas(G, F, rank_tol: float = RANK_TOL) -> ThetaCertificate:
    """Tightest constants from dense symmetric eigendecompositions.

    ``theta1`` is ``||G||_2``, which equals ``max(lambda_max(G), 0)`` for
    positive semidefinite ``G``; the LICQ and SOSC checks compare
    ``theta2`` and ``theta4`` against ``rank_tol`` relative to the scale of
    ``F F^T`` and ``G + F^T F`` respectively.
    """
    G = np.asarray(G, dtype=float)
    F = np.atleast_2d(np.asarray(F, dtype=float))
    eig = get_backend().eigvalsh
    lam_G = eig(0.5 * (G + G.T))
    lam_FF = eig(F @ F.T)
    lam_K = eig(0.5 * (G + G.T) + F.T @ F)
    theta2, theta3 = float(lam_FF[0]), float(lam_FF[-1])
    if theta3 <= 0 or theta2 <= rank_tol * theta3:
        raise ConstraintQualificationError(
            f"F is not of full row rank (lambda_min(F F^T) = {theta2:.3e}); LICQ fails"
        )
    theta4 = float(lam_K[0])
    if theta4 <= rank_tol * max(abs(float(lam_K[-1])), 1.0):
        raise SecondOrderError(f"G + F^T F is not positive definite (lambda_min = {theta4:.3e}); SOSC fails")
    theta1 = max(float(lam_G[-1]), -float(lam_G[0]), 0.0)
    return ThetaCertificate(theta1, theta2, theta3, theta4)


def singular_interval(cert: ThetaCertificate) -> tuple[float, float]:
    """Interval containing every singular value of the saddle matrix."""
    t1, t2, t3, t4 = cert.theta1, cert.theta2, cert.theta3, cert.theta4
    lo = 1.0 / (math.sqrt((1.0 + t1 / t2) / t4) + max(1.0 / t4, t1 / t2))
    hi = t1 + math.sqrt(t3)
    return lo, hi


def rescale(G, F, delta: float) -> tuple[np.ndarray, np.ndarray]:
    """Map ``(G, F)`` to ``(G / delta, F)``.

    Useful when ``G + delta F^T F`` rather than ``G + F^T F`` is positive
    definite. The new saddle matrix equals ``D A D`` with
    ``D = diag(delta^{-1/2} I, delta^{1/2} I)``, so singular values of the
    original differ from the rescaled ones by at most a factor
    ``max(delta, 1/delta)``.
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    return np.asarray(G, dtype=float) / delta, np.asarray(F, dtype=float)


def check_interval(system: SaddleSystem, cert: ThetaCertificate | None = None, slack: float = 1e-9) -> dict:
    """Compare the certified interval with the actual singular values."""
    cert = estimate_thetas(system.G, system.F) if cert is None else cert
    lo, hi = singular_interval(cert)
    s = get_backend().singular_values(system.A)
    smin, smax = float(s[-1]), float(s[0])
    return {
        "theta1": cert.theta1,
        "theta2": cert.theta2,
        "theta3": cert.theta3,
        "theta4": cert.theta4,
        "lo": lo,
        "hi": hi,
        "sigma_min_actual": smin,
        "sigma_max_actual": smax,
        "contained": smin >= lo * (1.0 - slack) and smax <= hi * (1.0 + slack),
    }
