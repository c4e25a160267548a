import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dbarkit.core import (
    GuardBandError,
    InvalidArgument,
    PeriodicGrid,
    check_lambda,
    energy_sqrt,
    exp_factor,
    exp_zeta,
    lambda_to_zeta,
    reduce_zeta,
)

nonzero_lambda = st.complex_numbers(
    min_magnitude=1e-3, max_magnitude=50.0, allow_nan=False, allow_infinity=False
)
negative_energy = st.floats(min_value=-100.0, max_value=-1e-3)


def test_energy_sqrt_branch():
    assert energy_sqrt(-1.0) == 1j
    assert energy_sqrt(-4.0) == 2j
    s = energy_sqrt(-1.23 - 0.041j)
    assert abs(s * s - (-1.23 - 0.041j)) < 1e-14
    with pytest.raises(InvalidArgument):
        energy_sqrt(1.0)


def test_zeta_forced_examples():
    z1, z2 = lambda_to_zeta(1.0, -1.0)
    assert abs(z1 - 1j) < 1e-14 and abs(z2) < 1e-14
    z1, z2 = lambda_to_zeta(2.0, -1.0)
    assert abs(z1 - 1.25j) < 1e-14
    assert abs(z2 - 0.75) < 1e-14
    assert abs(z1 * z1 + z2 * z2 + 1.0) < 1e-14


def test_zeta_identities_complex_energy():
    lam, E = 1 + 1j, -4.0
    z1, z2 = lambda_to_zeta(lam, E)
    assert abs(z1 * z1 + z2 * z2 - E) < 1e-12
    assert abs((z1 + 1j * z2) / energy_sqrt(E) - lam) < 1e-12


@settings(max_examples=200, deadline=None)
@given(lam=nonzero_lambda, E=negative_energy)
def test_zeta_identities_property(lam, E):
    z1, z2 = lambda_to_zeta(lam, E)
    scale = max(1.0, abs(z1) ** 2 + abs(z2) ** 2)
    assert abs(z1 * z1 + z2 * z2 - E) < 1e-10 * scale
    assert abs((z1 + 1j * z2) - lam * energy_sqrt(E)) < 1e-10 * max(1.0, abs(lam))


def test_zero_lambda_rejected():
    with pytest.raises(InvalidArgument):
        lambda_to_zeta(0.0, -1.0)
    with pytest.raises(InvalidArgument):
        exp_factor(0.3, 0.0, -1.0)


def test_guard_band():
    with pytest.raises(GuardBandError):
        check_lambda(1.01, guard=0.05)
    check_lambda(1.06, guard=0.05)
    check_lambda(0.5, guard=0.05)


def test_reduce_zeta_example():
    rz = reduce_zeta(2.0, -1.0)
    assert rz.k1 == pytest.approx(0.75, abs=1e-14)
    assert rz.k2 == pytest.approx(1.25, abs=1e-14)
    assert rz.energy == pytest.approx(-1.0, abs=1e-14)


def test_reduce_zeta_rotated_same_moduli():
    base = reduce_zeta(2.0, -1.0)
    rot = reduce_zeta(2.0 * cmath.exp(1j * math.pi / 3), -1.0)
    assert rot.k1 == pytest.approx(base.k1, abs=1e-14)
    assert rot.k2 == pytest.approx(base.k2, abs=1e-14)
    assert rot.rotation == pytest.approx(base.rotation - math.pi / 3, abs=1e-12)


def test_reduce_zeta_matches_zeta_moduli():
    # |Re zeta| = |k1| and |Im zeta| = k2 as 2-vectors
    for lam in (2.0, 0.4 + 0.1j, 1.3 - 2.2j):
        z1, z2 = lambda_to_zeta(lam, -2.0)
        rz = reduce_zeta(lam, -2.0)
        re_norm = math.hypot(z1.real, z2.real)
        im_norm = math.hypot(z1.imag, z2.imag)
        assert re_norm == pytest.approx(abs(rz.k1), abs=1e-12)
        assert im_norm == pytest.approx(rz.k2, abs=1e-12)
        assert rz.k2 > abs(rz.k1) > 0.0
        assert rz.k1**2 - rz.k2**2 == pytest.approx(-2.0, abs=1e-12)


def test_reduce_zeta_degenerate():
    with pytest.raises(InvalidArgument):
        reduce_zeta(1.0, -1.0)
    with pytest.raises(InvalidArgument):
        reduce_zeta(cmath.exp(0.3j), -1.0)


def test_exp_factor_unit_circle_identity():
    for z in (0.0, 0.7 + 0.1j, -2.0 + 3.0j):
        assert exp_factor(z, cmath.exp(0.4j), -1.0) == pytest.approx(1.0)


def test_exp_factor_unimodular_and_reciprocal():
    rng = np.random.default_rng(0)
    for _ in range(50):
        z = complex(*rng.normal(size=2))
        lam = complex(*rng.normal(size=2))
        if abs(lam) < 1e-3:
            continue
        ep = exp_factor(z, lam, -1.0, +1)
        em = exp_factor(z, lam, -1.0, -1)
        assert abs(abs(ep) - 1.0) < 1e-14
        assert abs(ep * em - 1.0) < 1e-14
        assert abs(em - np.conj(ep)) < 1e-14


def test_exp_factor_vectorized():
    z = np.array([0.1, 0.5 + 0.2j, -1.0j])
    vals = exp_factor(z, 2.0, -1.0)
    assert vals.shape == (3,)
    assert np.allclose(np.abs(vals), 1.0)


def test_exp_zeta_matches_zeta_dot_z():
    lam, E = 1.7 - 0.6j, -2.5
    z1, z2 = lambda_to_zeta(lam, E)
    for z in (0.3 + 0.4j, -1.0 + 0.2j):
        direct = cmath.exp(1j * (z1 * z.real + z2 * z.imag))
        assert exp_zeta(z, lam, E) == pytest.approx(direct, abs=1e-12)


def test_periodic_grid():
    g = PeriodicGrid(m=6, half_width=2.1)
    assert g.n == 64
    assert g.spacing == pytest.approx(4.2 / 64)
    ax = g.axis()
    assert ax[0] == pytest.approx(-2.1)
    assert ax[-1] == pytest.approx(2.1 - g.spacing)
    zz = g.nodes()
    assert zz.shape == (64, 64)
    assert zz[0, 0] == pytest.approx(-2.1 - 2.1j)
    w = g.wrapped_axis()
    assert w[0] == 0.0
    assert w[1] == pytest.approx(g.spacing)
    assert w[-1] == pytest.approx(-g.spacing)
    with pytest.raises(InvalidArgument):
        PeriodicGrid(m=4, half_width=2.1)
    with pytest.raises(InvalidArgument):
        PeriodicGrid(m=6, half_width=-1.0)
