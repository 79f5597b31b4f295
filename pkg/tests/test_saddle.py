import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bandpinv.instances import random_saddle
from bandpinv.ocp import benchmark_scenario, assemble
from bandpinv.saddle import (
    ConstraintQualificationError,
    SecondOrderError,
    ThetaCertificate,
    assemble_saddle,
    check_interval,
    estimate_thetas,
    rescale,
    singular_interval,
)


def test_assembly_examples():
    assert np.array_equal(assemble_saddle([[0.0]], [[1.0]]).A, [[0, 1], [1, 0]])
    sys = assemble_saddle(np.eye(2), [[1.0, 0.0]])
    assert np.array_equal(sys.A, [[1, 0, 1], [0, 1, 0], [1, 0, 0]])
    assert (sys.n, sys.m) == (2, 1)


def test_assembly_errors():
    with pytest.raises(ValueError, match="symmetric"):
        assemble_saddle([[1.0, 2.0], [0.0, 1.0]], [[1.0, 0.0]])
    with pytest.raises(ValueError):
        assemble_saddle(np.eye(2), [[1.0, 0.0, 0.0]])


def test_ocp_split_matches_H_under_permutation():
    d = assemble(benchmark_scenario(), 12)
    G, F = d.split()
    A = assemble_saddle(G, F).A
    perm = np.concatenate([d.s_idx, d.u_idx, d.lam_idx])
    assert np.array_equal(A, d.H.data[np.ix_(perm, perm)])


def test_theta_examples():
    c = estimate_thetas(np.zeros((3, 3)), np.eye(3))
    assert (c.theta1, c.theta2, c.theta3, c.theta4) == pytest.approx((0, 1, 1, 1))
    c = estimate_thetas(2 * np.eye(2), [[1.0, 0.0]])
    assert (c.theta1, c.theta2, c.theta3, c.theta4) == pytest.approx((2, 1, 1, 2))


def test_licq_and_sosc_failures():
    with pytest.raises(ConstraintQualificationError, match="LICQ"):
        estimate_thetas(np.eye(2), [[1.0, 0.0], [0.0, 0.0]])
    with pytest.raises(SecondOrderError, match="SOSC"):
        estimate_thetas(-np.eye(2), [[1.0, 0.0]])


def test_interval_examples():
    lo, hi = singular_interval(ThetaCertificate(0, 1, 1, 1))
    assert (lo, hi) == (0.5, 1.0)
    s = np.linalg.svd([[0.0, 1.0], [1.0, 0.0]], compute_uv=False)
    assert np.all((s >= lo) & (s <= hi))
    lo, hi = singular_interval(ThetaCertificate(1, 1, 1, 1))
    assert lo == pytest.approx(1 / (math.sqrt(2) + 1))
    assert hi == 2


@given(
    st.floats(0, 10),
    st.floats(0.1, 10),
    st.floats(0, 10),
    st.floats(0.1, 10),
    st.floats(0, 10),
)
def test_hi_monotone_in_theta3(t1, t2, extra, t4, more):
    t3 = t2 + extra
    lo1, hi1 = singular_interval(ThetaCertificate(t1, t2, t3, t4))
    lo2, hi2 = singular_interval(ThetaCertificate(t1, t2, t3 + more, t4))
    assert hi2 >= hi1 and lo2 == lo1


@given(st.integers(0, 2**32), st.integers(2, 25), st.data())
def test_interval_contains_spectrum(seed, n, data):
    m = data.draw(st.integers(1, n))
    rng = np.random.default_rng(seed)
    G, F = random_saddle(rng, n, m)
    rep = check_interval(assemble_saddle(G, F))
    assert rep["contained"]


def test_thetas_match_independent_eigensolver(rng):
    G, F = random_saddle(rng, 12, 5)
    c = estimate_thetas(G, F)
    ev = np.linalg.eigvalsh
    assert c.theta1 == pytest.approx(np.abs(ev(G)).max(), rel=1e-10)
    assert c.theta2 == pytest.approx(ev(F @ F.T)[0], rel=1e-10)
    assert c.theta3 == pytest.approx(ev(F @ F.T)[-1], rel=1e-10)
    assert c.theta4 == pytest.approx(ev(G + F.T @ F)[0], rel=1e-10)


def test_indefinite_G_uses_spectral_norm():
    # lambda_max(G) = 0.25 would give hi = 1.25 < sigma_max = 1.443
    G = np.diag([-0.75, 0.25])
    F = np.array([[1.0, 0.0]])
    c = estimate_thetas(G, F)
    assert c.theta1 == pytest.approx(0.75)
    assert check_interval(assemble_saddle(G, F), c)["contained"]
    assert not check_interval(assemble_saddle(G, F), ThetaCertificate(0.25, 1, 1, c.theta4))["contained"]


def test_rescale_makes_sosc_hold_and_bounds_scale():
    G = np.diag([-3.0, 1.0])
    F = np.array([[1.0, 0.0]])
    with pytest.raises(SecondOrderError):
        estimate_thetas(G, F)
    delta = 4.0
    Gs, Fs = rescale(G, F, delta)
    rep = check_interval(assemble_saddle(Gs, Fs))
    assert rep["contained"]
    s = np.linalg.svd(assemble_saddle(G, F).A, compute_uv=False)
    assert s[-1] >= rep["lo"] / delta * (1 - 1e-12)
    assert s[0] <= rep["hi"] * delta * (1 + 1e-12)
    with pytest.raises(ValueError):
        rescale(G, F, 0.0)
