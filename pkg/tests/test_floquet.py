import math

import numpy as np
import pytest

from embedspec import bounds
from embedspec.floquet import (
    FrameError,
    PeriodicPotential,
    QuasiEigenvalue,
    asymptotic_anchor,
    audit_asymptotic_bounds,
    audit_eta_bounds,
    band_structure,
    discriminant,
    eigenvalue,
    floquet_frame,
    fundamental_pair,
    lk_thresholds,
    measured_delta,
    monodromy,
    quasimomentum,
)
from hill_oracle import HillOracle

ZERO = PeriodicPotential.zero()
COS2 = PeriodicPotential.cosine(2.0)
ORACLE = HillOracle(acos=(2.0,))


# --- background -----------------------------------------------------------

def test_l1_norm_cosine():
    assert COS2.A == pytest.approx(4.0 / math.pi, rel=1e-10)
    assert PeriodicPotential.cosine(0.1).A == pytest.approx(0.2 / math.pi, rel=1e-10)


def test_piecewise_norm_and_periodicity():
    V = PeriodicPotential.piecewise([0.0, 0.25, 1.0], [[1.0], [-2.0, 1.0]])
    # |1| on [0,.25) and |-2 + (x-.25)| on [.25, 1)
    want = 0.25 + (2.0 * 0.75 - 0.75**2 / 2)
    assert V.A == pytest.approx(want, rel=1e-9)
    xs = np.linspace(0.01, 0.99, 17)
    assert np.allclose(V(xs), V(xs + 3.0))


def test_piecewise_rejects_bad_breaks():
    with pytest.raises(ValueError):
        PeriodicPotential.piecewise([0.0, 0.6, 0.5, 1.0], [[1], [1], [1]])


def test_dict_round_trip():
    for V in (ZERO, COS2, PeriodicPotential.fourier(0.5, [1.0, 0.2], [0.3])):
        assert PeriodicPotential.from_dict(V.to_dict()) == V


# --- fundamental pair and discriminant ------------------------------------

def test_free_pair_at_pi_squared():
    fp = fundamental_pair(ZERO, math.pi**2)
    C, Cp, S, Sp = fp(1.0)
    assert (C, S, Sp) == pytest.approx((-1.0, 0.0, -1.0), abs=1e-8)


def test_free_pair_quarter():
    _, _, S, _ = fundamental_pair(ZERO, (math.pi / 2) ** 2)(1.0)
    assert S == pytest.approx(2.0 / math.pi, abs=1e-8)


def test_pair_against_hill_oracle():
    E = 1.0
    ref = ORACLE.hill_monodromy(E)
    C1, Cp1, S1, Sp1 = monodromy(COS2, E)
    assert C1 == pytest.approx(ref["C1"], abs=1e-7)
    assert S1 == pytest.approx(ref["S1"], abs=1e-7)
    assert Sp1 == pytest.approx(ref["Sp1"], abs=1e-7)


def test_pair_initial_data_and_wronskian():
    fp = fundamental_pair(COS2, 50.0, x_max=3.0)
    assert (fp.C[0], fp.Cp[0], fp.S[0], fp.Sp[0]) == (1.0, 0.0, 0.0, 1.0)
    assert fp.wronskian_deviation() <= 1e-8 * math.sqrt(51.0)


@pytest.mark.parametrize("E,want", [(math.pi**2, -2.0), ((math.pi / 2) ** 2, 0.0)])
def test_free_discriminant(E, want):
    assert discriminant(ZERO, E) == pytest.approx(want, abs=1e-9)


@pytest.mark.parametrize("E", [0.0, 3.0, 25.0, 60.0])
def test_discriminant_against_hill_oracle(E):
    assert discriminant(COS2, E) == pytest.approx(ORACLE.hill_discriminant(E), abs=1e-7)


# --- bands ------------------------------------------------------------------

def test_free_bands():
    bands = band_structure(ZERO, 3)
    for b in bands:
        assert b.lower == pytest.approx(((b.n - 1) * math.pi) ** 2, abs=1e-7)
        assert b.upper == pytest.approx((b.n * math.pi) ** 2, abs=1e-7)
    assert [b.direction for b in bands] == ["decreasing", "increasing", "decreasing"]


def test_cosine_bands_match_oracle():
    bands = band_structure(COS2, 3)
    assert bands[1].lower - bands[0].upper > 1e-3
    for b in bands[:2]:
        lo, hi = ORACLE.band_edges(b.n)
        assert b.lower == pytest.approx(lo, abs=1e-6)
        assert b.upper == pytest.approx(hi, abs=1e-6)
    # third gap is ~3e-4 wide and D stays within 1e-10 of -2 across it, so the
    # edge is only resolved to the gap width
    lo, hi = ORACLE.band_edges(3)
    top = ORACLE.hill_eigs(math.pi)[3]
    b = bands[2]
    assert b.lower == pytest.approx(lo, abs=1e-6)
    assert hi - 1e-6 <= b.upper <= top + 1e-6


def test_constant_shift():
    c = 3.5
    for b in band_structure(PeriodicPotential.constant(c), 2):
        assert b.lower == pytest.approx(((b.n - 1) * math.pi) ** 2 + c, abs=1e-7)
        assert b.upper == pytest.approx((b.n * math.pi) ** 2 + c, abs=1e-7)


def test_band_invariants():
    for b in band_structure(COS2, 3):
        assert abs(abs(discriminant(COS2, b.lower)) - 2) <= 1e-7
        assert abs(abs(discriminant(COS2, b.upper)) - 2) <= 1e-7
        es = np.linspace(b.lower, b.upper, 66)[1:-1]
        d = np.diff([discriminant(COS2, e) for e in es])
        assert np.all(d < 0) if b.direction == "decreasing" else np.all(d > 0)


# --- eigenvalues -------------------------------------------------------------

def test_free_eigenvalue_examples():
    assert eigenvalue(ZERO, 1.0, 1).E == pytest.approx(1.0, rel=1e-12)
    assert eigenvalue(ZERO, math.pi / 2, 2).E == pytest.approx((1.5 * math.pi) ** 2, rel=1e-12)


@pytest.mark.parametrize("k,n", [(math.pi / 2, 1), (0.3, 2), (2.5, 3), (1.0, 5)])
def test_eigenvalue_against_oracle(k, n):
    assert eigenvalue(COS2, k, n).E == pytest.approx(ORACLE.eigenvalue(k, n), abs=1e-7)


def test_quasimomentum_round_trip():
    rng = np.random.default_rng(3)
    for _ in range(8):
        k, n = float(rng.uniform(0.05, math.pi - 0.05)), int(rng.integers(1, 6))
        q = eigenvalue(COS2, k, n)
        assert quasimomentum(COS2, q.E) == pytest.approx(k, abs=1e-7)
        assert discriminant(COS2, q.E) == pytest.approx(2 * math.cos(k), abs=1e-8)


def test_eigenvalue_errors():
    with pytest.raises(ValueError):
        eigenvalue(ZERO, 0.0, 1)
    with pytest.raises(ValueError):
        eigenvalue(ZERO, math.pi - 1e-4, 1)
    with pytest.raises(ValueError):
        eigenvalue(ZERO, 1.0, 0)


# --- closed-form constants ------------------------------------------------------

def test_anchor_examples():
    a, d = asymptotic_anchor(0.0, 1.3, 7)
    assert d == 0.0 and a == pytest.approx(6 * math.pi + 1.3)
    assert asymptotic_anchor(1.0, 1.0, 10)[0] == pytest.approx(10 * math.pi - 1)
    d = asymptotic_anchor(1.0, math.pi / 2, 10)[1]
    want = math.e**3 / (10 * math.sin(99 * math.pi / 200) * math.sin(50.5 * math.pi / 100))
    assert d == pytest.approx(want, rel=1e-12)
    assert d == pytest.approx(2.0090, abs=1e-4)


def test_lk_examples():
    assert lk_thresholds(0.0, 1.0) == (1.0, 0.0)
    L, dk = lk_thresholds(4 / math.pi, math.pi / 2)
    assert L == pytest.approx(5162.5, abs=0.5)
    assert dk == pytest.approx(3214, abs=1)
    for k in (0.4, 1.1, 1.5):
        assert lk_thresholds(0.7, k) == pytest.approx(lk_thresholds(0.7, math.pi - k), rel=1e-12)


# --- frames ------------------------------------------------------------------

def test_free_frame_quarter():
    f = floquet_frame(ZERO, eigenvalue(ZERO, math.pi / 2, 1))
    xs = np.linspace(0, 1, 33)
    assert f.omega == pytest.approx(math.pi, rel=1e-10)
    assert np.allclose(f.phi_sq(xs), 1.0, atol=1e-10)
    assert np.allclose(f.eta_prime(xs), math.pi / 2, atol=1e-10)


@pytest.mark.parametrize("k,n", [(0.7, 1), (2.0, 3)])
def test_free_frame_odd(k, n):
    f = floquet_frame(ZERO, eigenvalue(ZERO, k, n))
    xs = np.linspace(0, 3, 41)
    assert np.allclose(f.eta_prime(xs), (n - 1) * math.pi + k, atol=1e-9)
    assert np.allclose(f.eta_second(xs), 0.0, atol=1e-8)


@pytest.mark.parametrize("k,n", [(0.4, 1), (1.9, 2), (math.pi / 2, 3), (2.6, 4)])
def test_frame_invariants(k, n):
    f = floquet_frame(COS2, eigenvalue(COS2, k, n))
    xs = np.linspace(0, 1, 257)
    assert f.omega == pytest.approx(2 * math.sin(k) / f.S1, rel=1e-8)
    assert f.omega_dev <= 1e-7
    assert (-1) ** (n + 1) * f.omega > 0
    assert f.phi_sq(0.0) == pytest.approx(1.0, abs=1e-14)
    assert np.all(f.phi_sq(xs) > 0)
    assert np.allclose(f.phi_sq(xs + 1.0), f.phi_sq(xs), atol=1e-8)
    assert np.allclose(f.eta_prime(xs), f.omega / (2 * f.phi_sq(xs)), rtol=1e-12)
    e = np.abs(f.eta_prime(xs))
    assert f.eta_min <= e.min() + 1e-9 and e.max() <= f.eta_max + 1e-9
    # analytic eta'' against a centred difference of eta'
    h = 1e-5
    fd = (f.eta_prime(xs[1:-1] + h) - f.eta_prime(xs[1:-1] - h)) / (2 * h)
    assert np.allclose(f.eta_second(xs[1:-1]), fd, atol=1e-5 * f.eta_max)
    # phase advance per period is k mod 2 pi
    assert (f.eta(1.0) - k) / (2 * math.pi) == pytest.approx(round((f.eta(1.0) - k) / (2 * math.pi)), abs=1e-9)


def test_frame_phi_matches_oracle_floquet_property():
    f = floquet_frame(COS2, eigenvalue(COS2, 1.2, 2))
    p0, dp0 = f.phi(0.3)
    p1, dp1 = f.phi(1.3)
    assert p1 == pytest.approx(np.exp(1.2j) * p0, abs=1e-9)
    assert dp1 == pytest.approx(np.exp(1.2j) * dp0, abs=1e-8)


def test_frame_too_close_to_edge():
    qe = QuasiEigenvalue(k=1e-9, n=2, E=math.pi**2)
    with pytest.raises(FrameError):
        floquet_frame(ZERO, qe)


# --- audits -------------------------------------------------------------------

def test_free_audits_full_margin():
    rep = audit_asymptotic_bounds(ZERO, eigenvalue(ZERO, 1.0, 3))
    assert rep.passed
    for it in rep.items:
        if it.applicable and not it.label.startswith("|"):
            assert it.lhs <= 1e-8
    fr = audit_eta_bounds(floquet_frame(ZERO, eigenvalue(ZERO, 1.0, 3)))
    assert fr.passed and fr.applicable


def test_cosine_n20_eigen_bound():
    rep = audit_asymptotic_bounds(COS2, eigenvalue(COS2, math.pi / 2, 20))
    assert rep["|sqrtE-a|"].lhs <= rep["|sqrtE-a|"].rhs


def test_fundamental_bound_at_sqrtE_30():
    C1, _, _, _ = monodromy(COS2, 900.0)
    assert abs(C1 - math.cos(30.0)) <= 2 * COS2.A / 30.0
    rep = audit_asymptotic_bounds(COS2, QuasiEigenvalue(k=math.acos(discriminant(COS2, 900.0) / 2),
                                                        n=10, E=900.0))
    assert rep["C-cos"].applicable and rep["C-cos"].passed


@pytest.mark.parametrize("n", [260, 300])
def test_eta_bounds_small_cosine(n):
    V = PeriodicPotential.cosine(0.1)
    L, _ = lk_thresholds(V.A, math.pi / 2)
    assert L == pytest.approx(259.08, abs=0.01)
    rep = audit_eta_bounds(floquet_frame(V, eigenvalue(V, math.pi / 2, n)))
    assert rep.applicable and rep.passed


@pytest.mark.parametrize("n", [131, 200])
def test_eta_bounds_tenth_norm(n):
    # A = 0.1/pi puts L(pi/2) just above 130
    V = PeriodicPotential.cosine(0.05)
    assert V.A == pytest.approx(0.1 / math.pi)
    L, _ = lk_thresholds(V.A, math.pi / 2)
    assert 130 < L < 131
    rep = audit_eta_bounds(floquet_frame(V, eigenvalue(V, math.pi / 2, n)))
    assert rep.applicable and rep.passed


def test_eta_bounds_not_applicable_below_threshold():
    rep = audit_eta_bounds(floquet_frame(COS2, eigenvalue(COS2, 1.0, 2)))
    assert not rep.applicable and rep.passed and rep.notes


def test_measured_delta_free_is_zero():
    assert measured_delta(floquet_frame(ZERO, eigenvalue(ZERO, 1.0, 2))) <= 1e-8


def test_bounds_module_formulas():
    assert bounds.s_const(1.0, 1.0, 1.0) == pytest.approx(100 + 1e4)
    assert bounds.r_const(1.0, 1.0, 1.0) == pytest.approx(30 + 10 * math.pi)
    assert bounds.r_alpha(math.inf) == 0.0
    assert bounds.alpha_two(math.pi / 3) == pytest.approx(2 * math.pi / 3)
