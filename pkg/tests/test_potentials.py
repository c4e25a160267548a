import numpy as np
import pytest

from dbarkit.core import InvalidArgument, PeriodicGrid
from dbarkit.potentials import (
    Bump2D,
    DotScene,
    ExceptionalFamily,
    RadialBump,
    RadialProfile,
    case1_potential,
    case2_potential,
    case3_sigma,
    case4_sigma,
    conductivity_potential,
    phi_bump,
)


class TestBumps:
    def test_compact_support_and_smoothness(self):
        b = RadialBump(amplitude=2.0, width=0.8)
        r = np.linspace(0, 1.2, 500)
        v = b(r)
        assert np.all(v[r >= 0.8] == 0.0)
        assert v[0] == pytest.approx(2.0)
        # C^2 at the support edge: value, d1, d2 all vanish
        eps = 1e-6
        assert abs(b(np.array([0.8 - eps]))[0]) < 1e-15
        assert abs(b.d1(np.array([0.8 - eps]))[0]) < 1e-10
        assert abs(b.d2(np.array([0.8 - eps]))[0]) < 1e-3

    def test_derivatives_match_finite_differences(self):
        b = RadialBump(amplitude=1.5, width=0.6, center=0.3)
        r = np.linspace(0.05, 0.85, 40)
        h = 1e-6
        fd1 = (b(r + h) - b(r - h)) / (2 * h)
        fd2 = (b(r + h) - 2 * b(r) + b(r - h)) / h**2
        assert np.allclose(b.d1(r), fd1, atol=1e-6)
        assert np.allclose(b.d2(r), fd2, atol=1e-3)

    def test_profile_support_radius(self):
        p = RadialProfile(bumps=(RadialBump(1.0, 0.3, 0.45),
                                 RadialBump(-0.5, 0.2)))
        assert p.support_radius == pytest.approx(0.75)

    def test_bump2d(self):
        b = Bump2D(amplitude=3.0, width=0.4, center=0.5j)
        assert b(np.array([0.5j]))[0] == pytest.approx(3.0)
        assert b(np.array([0.5j + 0.41]))[0] == 0.0


class TestCaseProfiles:
    def test_potentials_supported_in_disk(self):
        r = np.linspace(0.96, 2.0, 50)
        assert np.all(case1_potential(r) == 0.0)
        assert np.all(case2_potential(r) == 0.0)
        assert np.all(phi_bump(r) == 0.0)

    def test_sigmas_positive_and_one_at_boundary(self):
        r = np.linspace(0, 1.0, 200)
        for sigma in (case3_sigma, case4_sigma):
            assert np.all(sigma(r) > 0.2)
            assert sigma(np.array([0.98]))[0] == pytest.approx(1.0)


class TestConductivityPotential:
    def test_matches_fft_laplacian(self):
        grid = PeriodicGrid(m=7, half_width=2.1)
        zz = grid.nodes()
        sq = np.sqrt(case3_sigma(np.abs(zz)))
        kx = 2 * np.pi * np.fft.fftfreq(grid.n, grid.spacing)
        KX, KY = np.meshgrid(kx, kx)
        lap = np.fft.ifft2(-(KX**2 + KY**2) * np.fft.fft2(sq - 1.0)).real
        q_spectral = lap / sq
        q = conductivity_potential(case3_sigma)(np.abs(zz))
        mask = np.abs(zz) < 1.3
        scale = np.max(np.abs(q))
        assert np.max(np.abs(q - q_spectral)[mask]) < 0.05 * scale

    def test_zero_near_boundary(self):
        q = conductivity_potential(case3_sigma)
        assert np.all(q(np.linspace(0.95, 1.0, 20)) == 0.0)

    def test_rejects_nonpositive_sigma(self):
        bad = RadialProfile(offset=0.5,
                            bumps=(RadialBump(amplitude=-1.0, width=0.5),))
        with pytest.raises(InvalidArgument):
            conductivity_potential(bad)(np.linspace(0, 1, 10))


class TestExceptionalFamily:
    def test_alpha_phi(self):
        fam = ExceptionalFamily(kind="alpha_phi")
        r = np.linspace(0, 1, 30)
        assert np.all(fam.potential(0.0)(r) == 0.0)
        assert np.allclose(fam.potential(2.5)(r), 2.5 * phi_bump(r))

    def test_conductivity_family(self):
        fam = ExceptionalFamily(kind="conductivity_plus_alpha_phi")
        r = np.linspace(0, 0.99, 30)
        base = conductivity_potential(case3_sigma)(r)
        assert np.allclose(fam.potential(0.0)(r), base)

    def test_unknown_kind(self):
        with pytest.raises(InvalidArgument):
            ExceptionalFamily(kind="bogus")


class TestDotScene:
    def test_energy_matches_published_values(self):
        scene = DotScene(omega=1e8)
        E = scene.energy
        assert E.real == pytest.approx(-1.23, rel=1e-3)
        assert E.imag == pytest.approx(-0.041, rel=1e-3)
        assert DotScene(omega=0.0).energy == pytest.approx(-1.23, rel=1e-3)

    def test_boundary_diffusion(self):
        scene = DotScene()
        assert scene.boundary_diffusion == pytest.approx(1 / 12.3, rel=1e-12)

    def test_q0_compactly_supported(self):
        scene = DotScene(omega=1e8)
        ring = 0.97 * np.exp(1j * np.linspace(0, 2 * np.pi, 16))
        q0 = scene.q0(ring)
        assert np.max(np.abs(q0)) < 1e-6

    def test_q_is_q0_minus_energy(self):
        scene = DotScene(omega=1e8)
        z = np.array([0.1 + 0.2j, -0.4j])
        assert np.allclose(scene.schrodinger_q(z),
                           scene.q0(z) - scene.energy)

    def test_fields_positive(self):
        scene = DotScene()
        zz = np.linspace(-0.9, 0.9, 21)[None, :] \
            + 1j * np.linspace(-0.9, 0.9, 21)[:, None]
        assert np.all(scene.mu_a(zz) > 0)
        assert np.all(scene.mu_s(zz) > 0)
        assert np.all(scene.diffusion(zz) > 0)
