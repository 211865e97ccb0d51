import math
from fractions import Fraction

import numpy as np
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from scipy.linalg import eigh_tridiagonal

from embedded_eigen import _kernels, averaging, verify
from embedded_eigen.model import (
    PieceKind,
    Potential,
    PotentialPiece,
    PruferState,
    format_value,
    make_energy_point,
    potential_from_dict,
    potential_to_dict,
)
from embedded_eigen.prufer import (
    SolutionPair,
    prufer_step,
    prufer_to_solution,
    solution_to_prufer,
    transfer_step,
)

energies = st.floats(-1.95, 1.95).filter(lambda E: abs(E) > 1e-6)
angles = st.floats(0.0, 2.0, exclude_max=True)
fractions_ = st.floats(-0.49, 0.49)


@st.composite
def state_and_potential(draw):
    ep = make_energy_point(draw(energies))
    st_ = PruferState(draw(st.floats(-5, 5)), draw(angles), draw(st.integers(-1000, 1000)))
    V = draw(fractions_) * ep.s
    return ep, st_, V


@given(state_and_potential())
def test_prufer_step_agrees_with_transfer(args):
    ep, s0, V = args
    p0 = prufer_to_solution(s0, ep)
    ref = transfer_step(p0, V, ep.E)
    got = prufer_to_solution(prufer_step(s0, V, ep), ep)
    scale = math.exp(s0.logR) * (1 + abs(ep.E) + abs(V))
    assert abs(got.uPrev - ref.uPrev) <= 1e-12 * scale
    assert abs(got.uCur - ref.uCur) <= 1e-12 * scale


@given(state_and_potential())
def test_one_step_bounds(args):
    ep, s0, V = args
    s1 = prufer_step(s0, V, ep)
    t = abs(V) / ep.s
    dphi = s1.phi - s0.phi - ep.k
    assert abs(dphi) <= math.asin(t) / math.pi + 1e-12
    assert abs(dphi) <= t + 1e-12
    assert abs(s1.logR - s0.logR) <= -math.log1p(-t) + 1e-14


@given(energies, st.floats(-1e3, 1e3), st.floats(-1e3, 1e3))
def test_solution_round_trip(E, a, b):
    assume(math.hypot(a, b) > 1e-6)
    ep = make_energy_point(E)
    st0 = solution_to_prufer(SolutionPair(a, b), ep)
    assert 0.0 <= st0.frac < 2.0
    back = prufer_to_solution(st0, ep)
    scale = math.hypot(a, b) / ep.s
    assert abs(back.uPrev - a) <= 1e-12 * scale
    assert abs(back.uCur - b) <= 1e-12 * scale


@given(st.floats(-1e7, 1e7), st.integers(-10**6, 10**6))
def test_wrap_keeps_unwrapped_angle(f, w):
    f1, w1 = _kernels.wrap(f, float(w))
    assert 0.0 <= f1 < 2.0 and w1 == int(w1)
    assert abs((f1 + 2 * w1) - (f + 2 * w)) <= 4 * math.ulp(abs(f) + 2 * abs(w) + 2)


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_real_formatting_round_trip(x):
    assert float(format_value(x)) == x


@given(st.lists(st.integers(1, 400), min_size=1, max_size=6), angles, angles,
       st.floats(0.01, 0.5))
def test_potential_document_round_trip(lengths, a, b, K1):
    ep = make_energy_point(1.0)
    pieces, start = [], 0
    for i, L in enumerate(lengths):
        if i % 2 == 0:
            pieces.append(PotentialPiece(start, start + L, PieceKind.ZERO))
        else:
            pieces.append(PotentialPiece(start, start + L, PieceKind.PAIR, energy=ep, K1=K1,
                                         b=-2000, targets=(0, 1), anchors={0: a, 1: b}))
        start += L
    V = Potential(tuple(pieces), start, None, {})
    back = potential_from_dict(potential_to_dict(V))
    assert np.array_equal(back.values(), V.values())


@given(st.integers(3, 40), st.integers(1, 39), st.sampled_from([2, 4]), st.sampled_from([1, -1]),
       st.integers(1, 4), st.floats(0, 2 * math.pi))
def test_rational_full_period_average_vanishes(q, p, nu, sign, m, theta):
    assume(p < q and math.gcd(p, q) == 1 and (nu * p) % (2 * q) != 0)
    k = p / q
    avg = averaging.trig_average(theta, k, nu, sign, q * m)
    assert abs(float(avg)) < 1e-12


@given(st.floats(0.01, 0.99), st.integers(1, 200), st.sampled_from([2, 4]),
       st.sampled_from([1, -1]), st.floats(0, 2 * math.pi))
def test_dirichlet_modulus_bounds_average(k, N, nu, sign, theta):
    avg = abs(float(averaging.trig_average(theta, k, nu, sign, N)))
    assert avg <= float(averaging.dirichlet_modulus(nu * math.pi * k, N)) + 1e-12


@settings(max_examples=40)
@given(st.lists(st.floats(-3, 3), min_size=2, max_size=60), st.floats(-5, 5))
def test_sturm_count_matches_dense(d, x):
    d = np.array(d)
    lam = eigh_tridiagonal(d, np.ones(d.size - 1), eigvals_only=True)
    assume(np.min(np.abs(lam - x)) > 1e-9)
    assert verify.sturm_count(d, x) == int(np.count_nonzero(lam < x))


@given(st.floats(-6, 2), st.floats(-3, 3))
def test_power_fit_recovers_exponent(p, c):
    x = np.geomspace(10, 1e6, 200)
    slope, intercept, rms = verify.power_fit(x, p * np.log(x) + c)
    assert abs(slope - p) < 1e-10 and abs(intercept - c) < 1e-8


@given(st.floats(0.01, 0.99))
def test_convergents_are_best_approximations(x):
    for fr in averaging.convergents(x, 12):
        if 1 < fr.denominator <= 150:
            # any fraction with a smaller denominator is no closer
            best = min(abs(x - Fraction(a, q)) for q in range(1, fr.denominator) for a in range(q + 1))
            assert abs(x - fr) <= best + 1e-15
