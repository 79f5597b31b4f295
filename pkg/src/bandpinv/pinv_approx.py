"""Banded approximation of Moore-Penrose inverses.

The approximant of ``A^+`` for a ``kappa_bar``-banded ``A`` is a polynomial
expression in ``A`` whose bandwidth is at most the requested ``kappa``:

* general mode: ``S(A^T A) A^T`` where ``x S(x^2)`` is the odd polynomial of
  :func:`~bandpinv.chebpoly.odd_pinv_poly` of order
  ``n0 = ceil((kappa/kappa_bar - 3) / 2)``;
* psd mode: ``q_n(A)`` with ``n = ceil(kappa/kappa_bar - 1)``.

The result is truncated to the band to strip roundoff fill, and the exact
pseudoinverse (via SVD) serves as the oracle for the reported error.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import chebpoly
from .backend import get_backend, max_workers
from .blockmat import (
    RANK_TOL,
    BandedBlockMatrix,
    spectral_interval,
    truncate_to_band,
)
from .chebpoly import snapped_ceil
from .metric import set_distance

PSD_TOL = 1e-10
MODES = ("general", "psd", "auto")


@dataclass(frozen=True)
class ApproxReport:
    kappa: float
    kappa_bar: float
    mode: str
    n_used: int
    a: float
    b: float
    error_2norm: float
    bound: float
    bound_used_for_testing: float
    bound_demko: float
    bound_shin: float
    bound_only: bool = False

    @property
    def within_bound(self) -> bool:
        return self.error_2norm <= self.bound_used_for_testing

    def as_row(self) -> dict:
        return {
            "kappa": self.kappa,
            "kappa_bar": self.kappa_bar,
            "mode": self.mode,
            "n_used": self.n_used,
            "a": self.a,
            "b": self.b,
            "error": self.error_2norm,
            "bound_f": self.bound,
            "bound_demko": self.bound_demko,
            "bound_shin": self.bound_shin,
        }


@dataclass(frozen=True)
class DecayEntry:
    V1: tuple[int, ...]
    V2: tuple[int, ...]
    distance: float
    measured: float
    bound: float


@dataclass(frozen=True)
class DecayProfile:
    mode: str
    a: float
    b: float
    kappa_bar: float
    pairs: list[DecayEntry] = field(default_factory=list)

    def violations(self) -> list[DecayEntry]:
        return [e for e in self.pairs if e.measured > e.bound]


@dataclass(frozen=True)
class BoundSweep:
    """Reports for a list of ``kappa`` values plus the fitted error trend.

    ``slope`` is the least-squares slope of ``log(error)`` against ``kappa``;
    ``base_slope`` is the log of the theoretical per-unit-``kappa`` decay.
    """

    reports: list[ApproxReport]
    slope: float
    base_slope: float

    @property
    def exponential_trend(self) -> bool:
        return self.slope <= self.base_slope + 0.05

    def __iter__(self):
        return iter(self.reports)

    def __len__(self):
        return len(self.reports)

    def __getitem__(self, i):
        return self.reports[i]


def _data(A) -> np.ndarray:
    return A.data if isinstance(A, BandedBlockMatrix) else np.asarray(A, dtype=float)


def exact_pinv(A, rank_tol: float = RANK_TOL) -> np.ndarray:
    """``A^+ = V diag(1/sigma) U^T`` over the numerical rank. Zero maps to zero."""
    M = _data(A)
    if not np.any(M):
        return np.zeros(M.shape[::-1])
    U, s, Vt = get_backend().svd(M)
    r = int(np.count_nonzero(s > rank_tol * s[0]))
    return (Vt[:r].T / s[:r]) @ U[:, :r].T


def penrose_residuals(A, X) -> tuple[float, float, float, float]:
    """Relative residuals of the four Penrose equations for candidate ``X``.

    ``AXA = A`` and ``XAX = X`` are scaled by ``||A||`` and ``||X||``; the
    symmetry conditions by ``||AX||`` and ``||XA||`` (Frobenius norms).
    """
    A = _data(A)
    X = np.asarray(X, dtype=float)
    AX, XA = A @ X, X @ A

    def rel(r, ref):
        ref = np.linalg.norm(ref)
        return float(np.linalg.norm(r) / ref) if ref > 0 else float(np.linalg.norm(r))

    return (
        rel(AX @ A - A, A),
        rel(XA @ X - X, X),
        rel(AX - AX.T, AX),
        rel(XA - XA.T, XA),
    )


def is_symmetric_psd(M: np.ndarray, tol: float = PSD_TOL) -> bool:
    if M.shape[0] != M.shape[1]:
        return False
    norm = float(np.abs(M).max(initial=0.0))
    if not np.allclose(M, M.T, rtol=0.0, atol=tol * max(norm, 1e-300)):
        return False
    lam = get_backend().eigvalsh(0.5 * (M + M.T))
    return bool(lam[0] >= -tol * max(abs(lam[-1]), abs(lam[0])))


def resolve_mode(A, mode: str = "auto", rank_tol: float = RANK_TOL) -> str:
    """Pick ``psd`` for nonsingular symmetric PSD input and ``general`` otherwise.

    Explicit ``psd`` on a singular matrix is rejected: ``q_n(A)`` acts as
    ``q_n(0) != 0`` on the null space, so no truncation order controls the
    error there.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    if mode == "general":
        return mode
    M = _data(A)
    psd = is_symmetric_psd(M)
    full_rank = psd and spectral_interval(M, rank_tol)[2] == M.shape[0]
    if mode == "auto":
        return "psd" if full_rank else "general"
    if not psd:
        raise ValueError("psd mode requires a symmetric positive semidefinite matrix")
    if not full_rank:
        raise ValueError("psd mode requires a nonsingular matrix; use mode='general' for singular input")
    return mode


def effective_bandwidth(A: BandedBlockMatrix) -> float:
    if A.certified_bandwidth is None:
        raise ValueError("A has no certified bandwidth; call measure_bandwidth/certify first")
    return A.certified_bandwidth if A.certified_bandwidth > 0 else 1.0


def truncation_order(mode: str, omega: float) -> int:
    """Polynomial order for bandwidth ratio ``omega = kappa / kappa_bar``.

    General mode returns ``-1`` (the zero approximant) when ``omega < 1``,
    since even the degree-one term ``A^T`` would exceed the band.
    """
    if mode == "psd":
        return max(snapped_ceil(omega - 1.0), 0)
    if omega < 1.0 - chebpoly._CEIL_SNAP:
        return -1
    return max(snapped_ceil((omega - 3.0) / 2.0), 0)


def _scaled_sum(Y: np.ndarray, t: float, n: int) -> np.ndarray:
    """``sum_{j=0}^{n} t^j T_j(Y)`` for a symmetric matrix ``Y``."""
    mm = get_backend().matmul
    I = np.eye(Y.shape[0])
    prev = I
    total = I.copy()
    if n >= 1:
        cur = t * Y
        total += cur
        for _ in range(n - 1):
            prev, cur = cur, 2.0 * t * mm(Y, cur) - (t * t) * prev
            total += cur
    return total


def odd_poly_matrix(M: np.ndarray, spec: chebpoly.OddPolySpec) -> np.ndarray:
    """Evaluate ``S(M^T M) M^T`` where ``spec(x) = x S(x^2)``.

    The Gram matrix of the smaller side is used, so the cost is governed by
    ``min(m, n)``.
    """
    mm = get_backend().matmul
    m, n = M.shape
    if spec.degenerate:
        return spec.lead * M.T
    if n <= m:
        Y = spec.c * np.eye(n) - spec.scale * mm(M.T, M)
        S = 2.0 * _scaled_sum(Y, spec.t, spec.n) - np.eye(n)
        return spec.lead * mm(S, M.T)
    Y = spec.c * np.eye(m) - spec.scale * mm(M, M.T)
    S = 2.0 * _scaled_sum(Y, spec.t, spec.n) - np.eye(m)
    return spec.lead * mm(M.T, S)


def psd_poly_matrix(M: np.ndarray, spec: chebpoly.PsdPolySpec) -> np.ndarray:
    n = M.shape[0]
    if spec.degenerate:
        return np.eye(n) / spec.a
    Y = spec.c_lin * np.eye(n) - spec.slope * M
    Y = 0.5 * (Y + Y.T)
    return (2.0 * _scaled_sum(Y, spec.t_lin, spec.n) - np.eye(n)) / math.sqrt(spec.a * spec.b)


def _bounds(mode: str, omega: float, a: float, b: float) -> tuple[float, float, float, float]:
    """``(f_A, bound_for_testing, demko, shin)``; infinite on a degenerate interval."""
    if chebpoly._is_degenerate(a, b):
        return (math.inf,) * 4
    demko = chebpoly.decay_bound("demko", omega, a, b)
    shin = chebpoly.decay_bound("shin", omega, a, b)
    if mode == "psd":
        f1 = chebpoly.decay_bound("f1", omega, a, b)
        return f1, 2.0 * f1, demko, shin
    f2 = chebpoly.decay_bound("f2", omega, a, b)
    return f2, f2, demko, shin


def _interval(A, interval, rank_tol):
    if interval is None:
        a, b, _ = spectral_interval(A, rank_tol)
    else:
        a, b = map(float, interval)
    if not (a > 0):
        raise ValueError(f"interval needs a > 0, got {a}")
    if b < a:
        raise ValueError(f"interval needs a <= b, got ({a}, {b})")
    return a, b


def approx_pinv(
    A: BandedBlockMatrix,
    kappa: float,
    interval: tuple[float, float] | None = None,
    mode: str = "auto",
    *,
    rank_tol: float = RANK_TOL,
    reference: np.ndarray | None = None,
) -> tuple[BandedBlockMatrix, ApproxReport]:
    """Banded approximation of ``A^+`` with bandwidth at most ``kappa``.

    Parameters
    ----------
    A : BandedBlockMatrix
        Input with a certified bandwidth ``kappa_bar`` (0 is treated as 1).
    kappa : float
        Requested bandwidth of the approximation, ``> 0``.
    interval : (a, b), optional
        Enclosure of the nonzero singular values. Computed by
        :func:`~bandpinv.blockmat.spectral_interval` when omitted.
    mode : {"general", "psd", "auto"}
    reference : ndarray, optional
        Precomputed ``A^+`` to measure the error against.

    Returns
    -------
    approx : BandedBlockMatrix
        ``n x m`` matrix on the swapped partitions, certified at ``kappa``.
    report : ApproxReport
    """
    if not kappa > 0:
        raise ValueError("kappa must be positive")
    kbar = effective_bandwidth(A)
    mode = resolve_mode(A, mode, rank_tol)
    a, b = _interval(A, interval, rank_tol)
    omega = kappa / kbar
    n_used = truncation_order(mode, omega)
    M = A.data
    if n_used < 0:
        data = np.zeros(M.shape[::-1])
    elif mode == "psd":
        data = psd_poly_matrix(M, chebpoly.psd_pinv_poly(n_used, a, b))
    else:
        data = odd_poly_matrix(M, chebpoly.odd_pinv_poly(n_used, a, b))
    approx = truncate_to_band(BandedBlockMatrix(data, A.col_part, A.row_part), kappa)
    ref = exact_pinv(A, rank_tol) if reference is None else reference
    err = float(np.linalg.norm(ref - approx.data, 2)) if ref.size else 0.0
    f, f_test, demko, shin = _bounds(mode, omega, a, b)
    report = ApproxReport(
        kappa=float(kappa),
        kappa_bar=float(A.certified_bandwidth),
        mode=mode,
        n_used=n_used,
        a=a,
        b=b,
        error_2norm=err,
        bound=f,
        bound_used_for_testing=f_test,
        bound_demko=demko,
        bound_shin=shin,
        bound_only=kappa >= A.space.diameter,
    )
    return approx, report


def verify_bound(
    A: BandedBlockMatrix,
    kappa_list: Iterable[float],
    interval: tuple[float, float] | None = None,
    mode: str = "auto",
    *,
    rank_tol: float = RANK_TOL,
    parallel: bool = True,
) -> BoundSweep:
    """Run :func:`approx_pinv` for each ``kappa`` and fit the error trend."""
    kappas = [float(k) for k in kappa_list]
    mode = resolve_mode(A, mode, rank_tol)
    a, b = _interval(A, interval, rank_tol)
    ref = exact_pinv(A, rank_tol)

    def one(k):
        return approx_pinv(A, k, (a, b), mode, rank_tol=rank_tol, reference=ref)[1]

    workers = min(max_workers(), len(kappas)) if parallel else 1
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(one, kappas))
    else:
        reports = [one(k) for k in kappas]

    kbar = effective_bandwidth(A)
    if chebpoly._is_degenerate(a, b):
        base_slope = -math.inf
    elif mode == "psd":
        base_slope = math.log(chebpoly.decay_base("f1", a, b)) / kbar
    else:
        base_slope = math.log(chebpoly.decay_base("f2", a, b)) / (2.0 * kbar)
    if len(kappas) >= 2 and len(set(kappas)) >= 2:
        floor = np.finfo(float).tiny
        errs = np.log(np.maximum([r.error_2norm for r in reports], floor))
        slope = float(np.polyfit(kappas, errs, 1)[0])
    else:
        slope = math.nan
    return BoundSweep(reports, slope, base_slope)


def offdiag_decay(
    A: BandedBlockMatrix,
    node_set_pairs: Sequence[tuple[Iterable[int], Iterable[int]]],
    interval: tuple[float, float] | None = None,
    mode: str = "auto",
    *,
    rank_tol: float = RANK_TOL,
    reference: np.ndarray | None = None,
) -> DecayProfile:
    """Norms of off-diagonal blocks of ``A^+`` against the decay bound.

    For each ``(V1, V2)`` the block of ``A^+`` with rows owned by ``V1``
    (in the column partition of ``A``) and columns owned by ``V2`` (in the
    row partition) is compared to ``f_A((d(V1, V2) - 1) / kappa_bar, a, b)``.
    """
    kbar = effective_bandwidth(A)
    mode = resolve_mode(A, mode, rank_tol)
    a, b = _interval(A, interval, rank_tol)
    P = exact_pinv(A, rank_tol) if reference is None else reference
    degenerate = chebpoly._is_degenerate(a, b)
    kind = "f1" if mode == "psd" else "f2"
    entries = []
    for V1, V2 in node_set_pairs:
        V1, V2 = tuple(V1), tuple(V2)
        dist = set_distance(A.space, V1, V2)
        block = P[np.ix_(A.col_part.indices_of(V1), A.row_part.indices_of(V2))]
        measured = float(np.linalg.norm(block, 2)) if block.size else 0.0
        bound = math.inf if degenerate else chebpoly.decay_bound(kind, (dist - 1.0) / kbar, a, b)
        entries.append(DecayEntry(V1, V2, dist, measured, bound))
    return DecayProfile(mode, a, b, float(A.certified_bandwidth), entries)
