"""Forward-Euler discretization of the linear-quadratic optimal control problem.

Unknowns are ordered ``s_0..s_N, u_0..u_{N-1}, lambda_0..lambda_N``. The
rows of the assembled matrix ``H`` are

* ``(lambda_k - lambda_{k+1})/h - Lambda^T lambda_{k+1} + C^T C s_k = q_k``
  for ``k < N``, and ``lambda_N / h = lambdabar / h``;
* ``u_k - B^T lambda_{k+1} = r_k`` for ``k < N``;
* ``s_0 / h = sbar / h``, and
  ``(s_k - s_{k-1})/h - Lambda s_{k-1} - B u_{k-1} = d_k`` for ``k >= 1``.

``H`` is symmetric and ``h``-banded on the time-mesh metric, where node
``t_k`` owns ``s_k``, ``u_k`` and ``lambda_k``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
import scipy.linalg

from .backend import get_backend
from .blockmat import BandedBlockMatrix, BlockPartition, measure_bandwidth
from .metric import MetricSpace, line_metric
from .saddle import ThetaCertificate, estimate_thetas, singular_interval

RESIDUAL_TOL = 1e-9
BOUNDARY_WINDOW = (0.15, 0.45)
MIDDLE_WINDOW = (0.05, 0.35)


class SingularSystemError(RuntimeError):
    pass


class DataFunction:
    """Time-indexed data ``t -> R^dim``.

    Built from a JSON-style spec (``{"kind": "zero"}``,
    ``{"kind": "constant", "value": [...]}`` or
    ``{"kind": "indicator", "lo": 4, "hi": 6, "value": [...]}``) or wrapped
    around a callable. Indicators are evaluated on the closed interval.
    """

    def __init__(self, spec=None, func: Callable | None = None):
        self.spec = {"kind": "zero"} if spec is None and func is None else spec
        self.func = func
        if spec is not None:
            kind = spec.get("kind")
            if kind not in ("zero", "constant", "indicator"):
                raise ValueError(f"unknown data kind {kind!r}")
            if kind == "indicator" and not spec["lo"] <= spec["hi"]:
                raise ValueError("indicator needs lo <= hi")

    @classmethod
    def of(cls, value) -> "DataFunction":
        if isinstance(value, DataFunction):
            return value
        if value is None:
            return cls()
        if callable(value):
            return cls(func=value)
        return cls(dict(value))

    @property
    def is_zero(self) -> bool:
        return self.func is None and self.spec["kind"] == "zero"

    def support(self) -> tuple[float, float] | None:
        if self.func is None and self.spec["kind"] == "indicator":
            return float(self.spec["lo"]), float(self.spec["hi"])
        return None

    def sample(self, times: np.ndarray, dim: int) -> np.ndarray:
        """Values at ``times`` as an array of shape ``(len(times), dim)``."""
        times = np.asarray(times, dtype=float)
        if self.func is not None:
            out = np.array([np.broadcast_to(np.asarray(self.func(t), dtype=float), (dim,)) for t in times])
            return out.reshape(len(times), dim)
        kind = self.spec["kind"]
        if kind == "zero":
            return np.zeros((len(times), dim))
        value = np.broadcast_to(np.asarray(self.spec.get("value", 1.0), dtype=float), (dim,))
        if kind == "constant":
            return np.tile(value, (len(times), 1))
        inside = (times >= self.spec["lo"]) & (times <= self.spec["hi"])
        return inside[:, None] * value[None, :]

    def to_json(self):
        if self.func is not None:
            raise ValueError("callable data cannot be serialized")
        return dict(self.spec)


@dataclass(frozen=True)
class StabilityCert:
    """User-supplied stabilizing feedback and detecting injection with ``(L, alpha)``."""

    K_stab: np.ndarray
    K_det: np.ndarray
    L: float
    alpha: float

    def __post_init__(self):
        object.__setattr__(self, "K_stab", np.atleast_2d(np.asarray(self.K_stab, dtype=float)))
        object.__setattr__(self, "K_det", np.atleast_2d(np.asarray(self.K_det, dtype=float)))
        if self.L < 1:
            raise ValueError("L must be >= 1")
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")


@dataclass(frozen=True)
class OcpScenario:
    Lambda: np.ndarray
    B: np.ndarray
    C: np.ndarray
    T: float
    sbar: np.ndarray
    lambdabar: np.ndarray
    q: DataFunction = field(default_factory=DataFunction)
    r: DataFunction = field(default_factory=DataFunction)
    d: DataFunction = field(default_factory=DataFunction)
    cert: StabilityCert | None = None

    def __post_init__(self):
        for name in ("Lambda", "B", "C"):
            object.__setattr__(self, name, np.atleast_2d(np.asarray(getattr(self, name), dtype=float)))
        for name in ("sbar", "lambdabar"):
            object.__setattr__(self, name, np.atleast_1d(np.asarray(getattr(self, name), dtype=float)))
        for name in ("q", "r", "d"):
            object.__setattr__(self, name, DataFunction.of(getattr(self, name)))
        ns = self.Lambda.shape[0]
        if self.Lambda.shape != (ns, ns):
            raise ValueError("Lambda must be square")
        if self.B.shape[0] != ns:
            raise ValueError(f"B must have {ns} rows")
        if self.C.shape[1] != ns:
            raise ValueError(f"C must have {ns} columns")
        if self.sbar.shape != (ns,) or self.lambdabar.shape != (ns,):
            raise ValueError(f"sbar and lambdabar must have length {ns}")
        if not self.T > 0:
            raise ValueError("T must be positive")
        if self.cert is not None:
            if self.cert.K_stab.shape != (self.n_u, ns):
                raise ValueError(f"K_stab must be {self.n_u}x{ns}")
            if self.cert.K_det.shape != (ns, self.C.shape[0]):
                raise ValueError(f"K_det must be {ns}x{self.C.shape[0]}")

    @property
    def n_s(self) -> int:
        return self.Lambda.shape[0]

    @property
    def n_u(self) -> int:
        return self.B.shape[1]

    @property
    def n_y(self) -> int:
        return self.C.shape[0]

    def needs_cert(self) -> StabilityCert:
        if self.cert is None:
            raise ValueError("scenario carries no StabilityCert")
        return self.cert


@dataclass(frozen=True)
class DiscretizedOcp:
    scenario: OcpScenario
    N: int
    h: float
    times: np.ndarray
    H: BandedBlockMatrix
    p: np.ndarray
    s_idx: np.ndarray
    u_idx: np.ndarray
    lam_idx: np.ndarray

    @property
    def dim(self) -> int:
        return len(self.p)

    @property
    def primal_dim(self) -> int:
        return len(self.s_idx) + len(self.u_idx)

    def split(self) -> tuple[np.ndarray, np.ndarray]:
        """``(G_h, F_h)`` with ``H = [[G_h, F_h^T], [F_h, 0]]``."""
        k = self.primal_dim
        return self.H.data[:k, :k], self.H.data[k:, :k]

    def pack(self, s: np.ndarray, u: np.ndarray, lam: np.ndarray) -> np.ndarray:
        z = np.empty(self.dim)
        z[self.s_idx] = np.asarray(s, dtype=float).ravel()
        z[self.u_idx] = np.asarray(u, dtype=float).ravel()
        z[self.lam_idx] = np.asarray(lam, dtype=float).ravel()
        return z

    def unpack(self, z: np.ndarray) -> "SolutionProfile":
        sc = self.scenario
        return SolutionProfile(
            times=self.times,
            s=z[self.s_idx].reshape(self.N + 1, sc.n_s),
            u=z[self.u_idx].reshape(self.N, sc.n_u),
            lam=z[self.lam_idx].reshape(self.N + 1, sc.n_s),
        )


@dataclass(frozen=True)
class SolutionProfile:
    times: np.ndarray
    s: np.ndarray
    u: np.ndarray
    lam: np.ndarray
    residual: float = 0.0

    @property
    def s_norm(self) -> np.ndarray:
        return np.linalg.norm(self.s, axis=1)

    @property
    def u_norm(self) -> np.ndarray:
        return np.linalg.norm(self.u, axis=1)

    @property
    def lambda_norm(self) -> np.ndarray:
        return np.linalg.norm(self.lam, axis=1)

    def z_norm(self) -> np.ndarray:
        """``||(s_k, u_k, lambda_k)||`` per mesh point (``u_N`` taken as 0)."""
        u2 = np.zeros(len(self.times))
        u2[: len(self.u)] = np.sum(self.u**2, axis=1)
        return np.sqrt(np.sum(self.s**2, axis=1) + u2 + np.sum(self.lam**2, axis=1))

    def rows(self) -> list[dict]:
        out = []
        un = self.u_norm
        for k, t in enumerate(self.times):
            out.append(
                {
                    "t": float(t),
                    "s_norm": float(self.s_norm[k]),
                    "u_norm": float(un[k]) if k < len(un) else "",
                    "lambda_norm": float(self.lambda_norm[k]),
                }
            )
        return out


def mesh(T: float, N: int) -> np.ndarray:
    return T * np.arange(N + 1) / N


def assemble(scenario: OcpScenario, N: int) -> DiscretizedOcp:
    """Build ``H_h`` and ``p_h`` on the uniform mesh with ``N`` intervals."""
    if N < 2:
        raise ValueError("need N >= 2")
    sc = scenario
    ns, nu = sc.n_s, sc.n_u
    h = sc.T / N
    times = mesh(sc.T, N)
    n_s_tot, n_u_tot = ns * (N + 1), nu * N
    dim = 2 * n_s_tot + n_u_tot
    s0, u0, l0 = 0, n_s_tot, n_s_tot + n_u_tot

    def s(k):
        return slice(s0 + ns * k, s0 + ns * (k + 1))

    def u(k):
        return slice(u0 + nu * k, u0 + nu * (k + 1))

    def lam(k):
        return slice(l0 + ns * k, l0 + ns * (k + 1))

    H = np.zeros((dim, dim))
    I = np.eye(ns)
    CtC = sc.C.T @ sc.C
    sub = -I / h - sc.Lambda
    for k in range(N):
        H[s(k), s(k)] = CtC
        H[s(k), lam(k)] = I / h
        H[s(k), lam(k + 1)] = sub.T
        H[u(k), u(k)] = np.eye(nu)
        H[u(k), lam(k + 1)] = -sc.B.T
    H[s(N), lam(N)] = I / h
    H[lam(0), s(0)] = I / h
    for k in range(1, N + 1):
        H[lam(k), s(k - 1)] = sub
        H[lam(k), s(k)] = I / h
        H[lam(k), u(k - 1)] = -sc.B

    qk = sc.q.sample(times[:N], ns)
    rk = sc.r.sample(times[:N], nu)
    dk = sc.d.sample(times[1:], ns)
    p = np.concatenate([qk.ravel(), sc.lambdabar / h, rk.ravel(), sc.sbar / h, dk.ravel()])

    s_idx = np.arange(s0, u0)
    u_idx = np.arange(u0, l0)
    lam_idx = np.arange(l0, dim)
    space = line_metric(times)
    blocks = {}
    for k, node in enumerate(space.nodes):
        parts = [np.arange(s0 + ns * k, s0 + ns * (k + 1)), np.arange(l0 + ns * k, l0 + ns * (k + 1))]
        if k < N:
            parts.append(np.arange(u0 + nu * k, u0 + nu * (k + 1)))
        blocks[node] = np.concatenate(parts)
    part = BlockPartition(space, blocks)
    measured = measure_bandwidth(BandedBlockMatrix(H, part, part))
    # mesh distances carry roundoff; the structural band is exactly h
    if measured > h * (1 + 1e-9):
        raise AssertionError(f"assembled H has bandwidth {measured} > h = {h}")
    Hm = BandedBlockMatrix(H, part, part, h)
    return DiscretizedOcp(sc, N, h, times, Hm, p, s_idx, u_idx, lam_idx)


def time_major_permutation(d: DiscretizedOcp) -> tuple[np.ndarray, list[int]]:
    """Index order grouping ``(s_k, u_k, lambda_k)`` per node, and the block sizes."""
    order = [d.H.row_part.blocks[v] for v in d.H.space.nodes]
    perm = np.concatenate([np.sort(b) for b in order])
    return perm, [len(b) for b in order]


def block_tridiagonal_solve(d: DiscretizedOcp, rhs: np.ndarray) -> np.ndarray:
    """Block forward/backward elimination on the time-major reordering of ``H``.

    ``H`` couples only neighbouring mesh nodes, so after grouping each node's
    unknowns the system is block tridiagonal. Diagonal pivots are factored
    with partially pivoted LU.
    """
    perm, sizes = time_major_permutation(d)
    A = d.H.data[np.ix_(perm, perm)]
    b = np.asarray(rhs, dtype=float)[perm]
    bounds = np.concatenate([[0], np.cumsum(sizes)])
    nb = len(sizes)
    sl = [slice(bounds[k], bounds[k + 1]) for k in range(nb)]

    lus = []
    uppers = []
    y = []
    D = A[sl[0], sl[0]]
    yk = b[sl[0]]
    for k in range(nb):
        lu = scipy.linalg.lu_factor(D, check_finite=False)
        lus.append(lu)
        y.append(yk)
        if k + 1 == nb:
            break
        Uk = A[sl[k], sl[k + 1]]
        Lk1 = A[sl[k + 1], sl[k]]
        uppers.append(Uk)
        # Schur update for the next diagonal block
        X = scipy.linalg.lu_solve(lu, np.column_stack([Uk, yk]), check_finite=False)
        D = A[sl[k + 1], sl[k + 1]] - Lk1 @ X[:, :-1]
        yk = b[sl[k + 1]] - Lk1 @ X[:, -1]
    x = [None] * nb
    x[-1] = scipy.linalg.lu_solve(lus[-1], y[-1], check_finite=False)
    for k in range(nb - 2, -1, -1):
        x[k] = scipy.linalg.lu_solve(lus[k], y[k] - uppers[k] @ x[k + 1], check_finite=False)
    z = np.empty(len(b))
    z[perm] = np.concatenate(x)
    return z


def solve(d: DiscretizedOcp, method: str = "dense") -> SolutionProfile:
    """Solve ``H_h z = p_h`` by dense LU or block-tridiagonal elimination.

    Raises :class:`SingularSystemError` (reporting ``sigma_min(H_h)``) when
    the relative residual exceeds ``1e-9``.
    """
    pnorm = float(np.linalg.norm(d.p))
    if pnorm == 0.0:
        return d.unpack(np.zeros(d.dim))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        try:
            if method == "dense":
                z = get_backend().lu_solve(d.H.data, d.p)
            elif method == "banded":
                z = block_tridiagonal_solve(d, d.p)
            else:
                raise ValueError(f"unknown solve method {method!r}")
        except (np.linalg.LinAlgError, ValueError) as exc:
            if "unknown solve method" in str(exc):
                raise
            z = None
    res = math.inf if z is None or not np.all(np.isfinite(z)) else float(np.linalg.norm(d.H.data @ z - d.p) / pnorm)
    if res > RESIDUAL_TOL:
        smin = float(get_backend().singular_values(d.H.data)[-1])
        raise SingularSystemError(f"H_h is numerically singular: residual {res:.3e}, sigma_min = {smin:.3e}")
    prof = d.unpack(z)
    return SolutionProfile(prof.times, prof.s, prof.u, prof.lam, res)


def h_norm(v, h: float) -> float:
    """``sqrt(h) * ||v||_2``, the discrete L2 norm on a mesh of width ``h``."""
    if not h > 0:
        raise ValueError("h must be positive")
    return math.sqrt(h) * float(np.linalg.norm(np.asarray(v, dtype=float)))


def dtilde(L: float, alpha: float) -> float:
    """Stability constant bounding ``||H_h^{-1}||`` as ``h -> 0``."""
    if L < 1:
        raise ValueError("L must be >= 1")
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    a2 = alpha * alpha
    first = L * (1 + 2 * L) * math.sqrt(a2 + L**4 * (1 + L) ** 2) / a2
    second = L**2 * (1 + 2 * L) ** 2 / a2 * max(1.0, L**2 * (1 + L) ** 2 / (1 + 2 * L) ** 2)
    return first + second


def decay_exponent(L: float, alpha: float) -> float:
    """Rate ``1 / (4 dtilde)`` of the continuous-time decay bound."""
    return 1.0 / (4.0 * dtilde(L, alpha))


def verify_cert(scenario: OcpScenario, samples: int = 200, rel_slack: float = 1e-9) -> dict:
    """Check a :class:`StabilityCert` by sampling matrix exponentials.

    Norm conditions ``||Lambda||, ||B||, ||C||, ||K|| <= L`` are checked
    exactly; ``||exp(Phi t)|| <= L exp(-alpha t)`` for both closed-loop
    matrices is checked at ``samples`` points on ``[0, max(T, 10/alpha)]``.
    """
    cert = scenario.needs_cert()
    L, alpha = cert.L, cert.alpha
    norms = {
        "Lambda": np.linalg.norm(scenario.Lambda, 2),
        "B": np.linalg.norm(scenario.B, 2),
        "C": np.linalg.norm(scenario.C, 2),
        "K_stab": np.linalg.norm(cert.K_stab, 2),
        "K_det": np.linalg.norm(cert.K_det, 2),
    }
    failures = [f"||{k}|| = {v:.6g} > L" for k, v in norms.items() if v > L * (1 + rel_slack)]
    ts = np.linspace(0.0, max(scenario.T, 10.0 / alpha), samples)
    for name, Phi in (
        ("Lambda - B K_stab", scenario.Lambda - scenario.B @ cert.K_stab),
        ("Lambda - K_det C", scenario.Lambda - cert.K_det @ scenario.C),
    ):
        for t in ts:
            val = np.linalg.norm(scipy.linalg.expm(Phi * t), 2)
            if val > L * math.exp(-alpha * t) * (1 + rel_slack):
                failures.append(f"||exp(({name}) t)|| = {val:.6g} exceeds L e^(-alpha t) at t = {t:.6g}")
                break
    return {"valid": not failures, "failures": failures}


def benchmark_scenario(case: str = "regular", perturbation: str = "boundary", with_cert: bool = True) -> OcpScenario:
    """Scalar test problems with ``Lambda = 1.1`` on ``[0, 10]``.

    ``case`` is ``"regular"`` (``C = B = 1``) or ``"near_singular"``
    (``C = 1e-3``, ``B = 1e-6``). ``perturbation`` is ``"boundary"``
    (``sbar = lambdabar = 1``) or ``"middle"`` (``q = r = d`` the indicator of
    ``[4, 6]``). The regular case carries the certificate
    ``K_stab = K_det = 2.1`` with ``(L, alpha) = (2.1, 1)``: both closed-loop
    matrices equal ``-1``.
    """
    if case == "regular":
        B, C = 1.0, 1.0
    elif case == "near_singular":
        B, C = 1e-6, 1e-3
    else:
        raise ValueError(f"unknown case {case!r}")
    if perturbation == "boundary":
        data = dict(sbar=1.0, lambdabar=1.0)
    elif perturbation == "middle":
        ind = {"kind": "indicator", "lo": 4.0, "hi": 6.0, "value": [1.0]}
        data = dict(sbar=0.0, lambdabar=0.0, q=ind, r=ind, d=ind)
    else:
        raise ValueError(f"unknown perturbation {perturbation!r}")
    cert = StabilityCert(2.1, 2.1, 2.1, 1.0) if with_cert and case == "regular" else None
    return OcpScenario(Lambda=1.1, B=B, C=C, T=10.0, cert=cert, **data)


def default_window(scenario: OcpScenario) -> tuple[tuple[float, float], str]:
    """Decay-fit window and direction for a scenario.

    Boundary sources are fitted forward on ``[0.15T, 0.45T]``. Interior
    sources are fitted on ``[0.05T, 0.35T]`` moving backward in time, i.e.
    away from a source placed to the right of the window.
    """
    T = scenario.T
    interior = not (scenario.q.is_zero and scenario.r.is_zero and scenario.d.is_zero)
    boundary = bool(np.any(scenario.sbar) or np.any(scenario.lambdabar))
    if interior and not boundary:
        return (MIDDLE_WINDOW[0] * T, MIDDLE_WINDOW[1] * T), "backward"
    return (BOUNDARY_WINDOW[0] * T, BOUNDARY_WINDOW[1] * T), "forward"


def fit_decay_rate(times, magnitudes, window: tuple[float, float], direction: str = "forward") -> float:
    """Least-squares decay rate of ``log(magnitude)`` over ``window``.

    ``forward`` returns the negated slope (decay as ``t`` grows),
    ``backward`` returns the slope (decay as ``t`` shrinks).
    """
    t = np.asarray(times, dtype=float)
    y = np.asarray(magnitudes, dtype=float)
    if direction not in ("forward", "backward"):
        raise ValueError("direction must be 'forward' or 'backward'")
    mask = (t >= window[0]) & (t <= window[1])
    if mask.sum() < 10:
        raise ValueError(f"window {window} holds {int(mask.sum())} samples; need >= 10")
    if np.any(y[mask] <= 1e-300):
        raise ValueError("magnitudes in the fit window must be positive")
    slope = np.polyfit(t[mask], np.log(y[mask]), 1)[0]
    return float(-slope if direction == "forward" else slope)


def parallel_map(func, items, parallel: bool):
    from .backend import max_workers

    items = list(items)
    if not parallel or len(items) < 2:
        return [func(x) for x in items]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=min(max_workers(), len(items))) as ex:
        return list(ex.map(func, items))


def inverse_norm(d: DiscretizedOcp) -> float:
    """``||H_h^{-1}||_2 = 1 / sigma_min(H_h)``."""
    smin = float(get_backend().singular_values(d.H.data)[-1])
    if smin <= 0:
        raise SingularSystemError("H_h is singular (sigma_min = 0)")
    return 1.0 / smin


@dataclass(frozen=True)
class StabilitySweep:
    rows: list[dict]
    dtilde: float | None
    non_diverging: bool
    within_2dtilde: bool | None


def stability_sweep(scenario: OcpScenario, N_list: Sequence[int], parallel: bool = True, theta_check: bool = False) -> StabilitySweep:
    """``||H_h^{-1}||_2`` per mesh, with the ``2 dtilde`` comparison when certified.

    With ``theta_check`` each row also records whether the saddle-point
    interval from ``(G_h, F_h)`` contains the singular values of ``H_h``.
    """
    N_list = list(N_list)
    dt = None
    if scenario.cert is not None:
        dt = dtilde(scenario.cert.L, scenario.cert.alpha)

    def one(N):
        d = assemble(scenario, N)
        sv = get_backend().singular_values(d.H.data)
        row = {"N": N, "h": d.h, "inv_norm": 1.0 / float(sv[-1])}
        if theta_check:
            G, F = d.split()
            lo, hi = singular_interval(estimate_thetas(G, F))
            row["theta_lo"], row["theta_hi"] = lo, hi
            row["theta_contained"] = bool(sv[-1] >= lo * (1 - 1e-9) and sv[0] <= hi * (1 + 1e-9))
        return row

    rows = parallel_map(one, N_list, parallel)
    vals = [r["inv_norm"] for r in rows]
    non_div = all(b <= 1.1 * a for a, b in zip(vals, vals[1:]))
    within = None if dt is None else bool(vals[-1] <= 2 * dt)
    for r in rows:
        r["two_dtilde"] = "" if dt is None else 2 * dt
    return StabilitySweep(rows, dt, non_div, within)


def subsample(profile: SolutionProfile, N: int) -> SolutionProfile:
    """Restrict a fine-mesh profile to the mesh with ``N`` intervals."""
    N_ref = len(profile.times) - 1
    if N_ref % N:
        raise ValueError(f"reference mesh {N_ref} is not a multiple of {N}")
    step = N_ref // N
    return SolutionProfile(profile.times[::step], profile.s[::step], profile.u[::step], profile.lam[::step])


@dataclass(frozen=True)
class ConsistencySweep:
    rows: list[dict]
    decreasing: bool


def consistency_sweep(
    scenario: OcpScenario,
    N_list: Sequence[int],
    reference_N: int | None = None,
    exact: Callable | None = None,
    parallel: bool = True,
) -> ConsistencySweep:
    """Residuals ``||H_h z_h - p_h||_h`` for a surrogate of the continuous solution.

    The surrogate is either ``exact(t) -> (s, u, lambda)`` evaluated at the
    mesh points or the solution on a finer mesh (``reference_N``, default
    ``16 * max(N_list)``) subsampled onto each mesh.
    """
    N_list = sorted(N_list)
    if N_list[-1] < 4 * N_list[0]:
        raise ValueError("finest N must be at least 4x the coarsest")
    ref = None
    if exact is None:
        reference_N = 16 * N_list[0] if reference_N is None else reference_N
        ref = solve(assemble(scenario, reference_N), method="banded")

    def one(N):
        d = assemble(scenario, N)
        if exact is None:
            prof = subsample(ref, N)
        else:
            vals = [exact(t) for t in d.times]
            s = np.array([np.atleast_1d(v[0]) for v in vals], dtype=float)
            u = np.array([np.atleast_1d(v[1]) for v in vals[:-1]], dtype=float)
            lam = np.array([np.atleast_1d(v[2]) for v in vals], dtype=float)
            prof = SolutionProfile(d.times, s, u, lam)
        z = d.pack(prof.s, prof.u, prof.lam)
        return {"N": N, "h": d.h, "residual": h_norm(d.H.data @ z - d.p, d.h), "p_norm": h_norm(d.p, d.h)}

    rows = parallel_map(one, N_list, parallel)
    res = [r["residual"] for r in rows]
    # residuals at roundoff level count as converged
    floor = 1e-12 * max(max(r.pop("p_norm") for r in rows), 1.0)
    return ConsistencySweep(rows, all(b < a or max(a, b) <= floor for a, b in zip(res, res[1:])))


def _interval_distance(I1: tuple[float, float], I2: tuple[float, float]) -> float:
    return max(0.0, I2[0] - I1[1], I1[0] - I2[1])


def decay_experiment(scenario: OcpScenario, N: int, probes: Sequence[tuple[float, float]], method: str = "banded") -> list[dict]:
    """Local response ``[sum_{t_k in I1} h ||z_k||^2]^{1/2}`` per probe interval.

    The bound column evaluates the full exponential-decay estimate with
    ``I2`` the support of the interior source (``[0, T]`` when the source is
    not an indicator); it is left empty, with a warning, when the scenario
    has no :class:`StabilityCert`.
    """
    sc = scenario
    d = assemble(sc, N)
    prof = solve(d, method=method)
    zn = prof.z_norm()
    T = sc.T
    dt = None
    if sc.cert is None:
        warnings.warn("scenario has no StabilityCert; bound column omitted", stacklevel=2)
    else:
        dt = dtilde(sc.cert.L, sc.cert.alpha)

    supports = [f.support() for f in (sc.q, sc.r, sc.d) if not f.is_zero]
    if supports and all(x is not None for x in supports):
        I2 = (min(x[0] for x in supports), max(x[1] for x in supports))
    else:
        I2 = (0.0, T)
    fine = mesh(T, 20 * N)
    hf = T / (20 * N)
    pf = np.hstack([f.sample(fine, dim) for f, dim in ((sc.q, sc.n_s), (sc.r, sc.n_u), (sc.d, sc.n_s))])
    sq = np.sum(pf**2, axis=1)
    inside = (fine >= I2[0]) & (fine <= I2[1])
    # left-endpoint Riemann sums for the source energy on I2 and its complement
    p_in = math.sqrt(hf * sq[:-1][inside[:-1]].sum())
    p_out = math.sqrt(hf * sq[:-1][~inside[:-1]].sum())

    rows = []
    for I1 in probes:
        mask = (d.times >= I1[0]) & (d.times <= I1[1])
        resp = math.sqrt(d.h * float(np.sum(zn[mask] ** 2)))
        row = {"I1_lo": float(I1[0]), "I1_hi": float(I1[1]), "response": resp, "bound": ""}
        if dt is not None:
            rate = 1.0 / (4.0 * dt)
            dist_out = 0.0 if p_out == 0 else _complement_distance(I1, I2, T)
            bound = 8 * dt * (
                math.exp(-rate * _interval_distance(I1, (0.0, 0.0))) * float(np.linalg.norm(sc.sbar))
                + math.exp(-rate * _interval_distance(I1, (T, T))) * float(np.linalg.norm(sc.lambdabar))
                + math.exp(-rate * _interval_distance(I1, I2)) * p_in
                + math.exp(-rate * dist_out) * p_out
            )
            row["bound"] = bound
        rows.append(row)
    return rows


def _complement_distance(I1, I2, T) -> float:
    pieces = [(0.0, I2[0]), (I2[1], T)]
    dists = [_interval_distance(I1, p) for p in pieces if p[1] > p[0]]
    return min(dists) if dists else math.inf


def scenario_from_json(doc) -> OcpScenario:
    """Build a scenario from a JSON document (dict or path)."""
    import json
    from pathlib import Path

    if not isinstance(doc, Mapping):
        doc = json.loads(Path(doc).read_text())
    if "benchmark" in doc:
        spec = doc["benchmark"]
        return benchmark_scenario(spec.get("case", "regular"), spec.get("perturbation", "boundary"), spec.get("cert", True))
    missing = [k for k in ("Lambda", "B", "C", "T", "sbar", "lambdabar") if k not in doc]
    if missing:
        raise ValueError(f"scenario is missing fields {missing}")
    cert = doc.get("cert")
    if cert is not None:
        cert = StabilityCert(cert["K_stab"], cert["K_det"], float(cert["L"]), float(cert["alpha"]))
    return OcpScenario(
        Lambda=doc["Lambda"],
        B=doc["B"],
        C=doc["C"],
        T=float(doc["T"]),
        sbar=doc["sbar"],
        lambdabar=doc["lambdabar"],
        q=doc.get("q"),
        r=doc.get("r"),
        d=doc.get("d"),
        cert=cert,
    )
