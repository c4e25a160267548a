import numpy as np
import pytest

from dbarkit.bie import ScatteringGrid, TruncationSpec, radial_profile_to_grid, truncate_scattering
from dbarkit.core import InvalidArgument, PeriodicGrid, energy_sqrt
from dbarkit.lippmann import PotentialField, solve_mu, scattering_at
from dbarkit.potentials import case1_potential
from dbarkit.reconstruct import (
    radial_l2_error,
    reconstruct_conductivity,
    reconstruct_potential,
)


def zero_scattering(m=6, half=8.4):
    grid = PeriodicGrid(m=m, half_width=half)
    shape = (grid.n, grid.n)
    return ScatteringGrid(grid=grid, values=np.zeros(shape, complex),
                          mask=np.zeros(shape, bool))


@pytest.fixture(scope="module")
def t_case1():
    gz = PeriodicGrid(m=6, half_width=2.1)
    q0 = PotentialField.from_function(gz, case1_potential, radial=True)
    radii = np.linspace(1.1, 6.0, 24)
    tvals = np.array([scattering_at(q0, complex(r), -1.0) for r in radii])
    grid = PeriodicGrid(m=7, half_width=2.1 * 6.0)
    t = radial_profile_to_grid(radii, tvals, np.ones(radii.size, bool), grid)
    return truncate_scattering(t, TruncationSpec(a=5.8, b=5.8, r1=1.12))


class TestZeroData:
    def test_potential_identically_zero(self):
        res = reconstruct_potential(zero_scattering(), -1.0, [0.0, 0.3 + 0.2j])
        assert np.all(res.ok)
        assert np.max(np.abs(res.values)) == 0.0

    def test_conductivity_identically_one(self):
        res = reconstruct_conductivity(zero_scattering(), -1.0, [0.0, 0.5],
                                       boundary_value=1.0)
        assert np.all(res.values == 1.0)

    def test_boundary_value_scales(self):
        res = reconstruct_conductivity(zero_scattering(), -1.0, [0.2],
                                       boundary_value=0.08)
        assert res.values[0] == pytest.approx(0.08)


class TestValidation:
    def test_dz_positive(self, t_case1):
        with pytest.raises(InvalidArgument):
            reconstruct_potential(t_case1, -1.0, [0.0], dz=0.0)

    def test_empty_annulus(self, t_case1):
        with pytest.raises(InvalidArgument):
            reconstruct_conductivity(t_case1, -1.0, [0.0], r_star=2.5,
                                     width=1e-9)
        with pytest.raises(InvalidArgument):
            reconstruct_conductivity(t_case1, -1.0, [0.0],
                                     r_star=100.0, width=0.1)

    def test_positive_boundary_value(self, t_case1):
        with pytest.raises(InvalidArgument):
            reconstruct_conductivity(t_case1, -1.0, [0.0], boundary_value=0.0)


class TestFormulaConstant:
    def test_large_lambda_expansion_against_ls_fields(self):
        """Pin the reconstruction constant against CGO fields of a known
        potential: q0 ~ 2 i sqrt(E) lambda d_z mu for large |lambda|,
        with the 1/|lambda| truncation error shrinking as lambda grows."""
        grid = PeriodicGrid(m=7, half_width=2.1)
        q0 = PotentialField.from_function(grid, case1_potential, radial=True)
        zz = grid.nodes()
        kx = 2 * np.pi * np.fft.fftfreq(grid.n, grid.spacing)
        KX, KY = np.meshgrid(kx, kx)
        sE = energy_sqrt(-1.0)
        errs = {}
        center = {}
        mid = grid.n // 2
        for lam in (6.0, 12.0):
            mu = solve_mu(q0, complex(lam), -1.0).values
            fhat = np.fft.fft2(mu)
            dzmu = np.fft.ifft2(0.5 * (1j * KX - 1j * 1j * KY) * fhat)
            recon = 2j * sE * lam * dzmu
            disk = np.abs(zz) <= 0.8
            errs[lam] = (np.max(np.abs(recon - q0.values)[disk])
                         / np.max(np.abs(q0.values)))
            center[lam] = recon[mid, mid]
        # a wrong constant (the published discrete formula carries a stray
        # factor i) would rotate the center value to ~3i; the true value
        # is approached at O(1/lambda)
        assert abs(center[12.0] - 3.0) < 0.15
        assert errs[12.0] < 0.65 * errs[6.0]


class TestCase1Potential:
    def test_reconstruction_reasonable(self, t_case1):
        zs = np.array([0.0, 0.45, 0.9], dtype=complex)
        res = reconstruct_potential(t_case1, -1.0, zs, dz=1e-3)
        assert np.all(res.ok)
        vals = res.values.real
        truth = case1_potential(np.abs(zs))
        assert abs(vals[0] - truth[0]) < 0.45 * truth[0]
        assert abs(np.imag(res.values[0])) < 1e-3 * abs(vals[0])
        assert vals[0] > vals[1] > vals[2]  # monotone decreasing profile

    def test_dz_robustness(self, t_case1):
        zs = np.array([0.0, 0.4], dtype=complex)
        a = reconstruct_potential(t_case1, -1.0, zs, dz=1e-3).values
        b = reconstruct_potential(t_case1, -1.0, zs, dz=5e-4).values
        assert np.max(np.abs(a - b)) < 0.05 * np.max(np.abs(a))

    def test_metadata_recorded(self, t_case1):
        res = reconstruct_potential(t_case1, -1.0, [0.0], dz=1e-3,
                                    metadata={"run": "unit"})
        for key in ("dz", "band_fraction", "band_nodes", "energy", "run"):
            assert key in res.metadata


def test_radial_l2_error():
    radii = np.linspace(0, 1, 50)
    truth = lambda r: np.ones_like(r)
    assert radial_l2_error(radii, np.ones(50), truth) == 0.0
    assert radial_l2_error(radii, 1.3 * np.ones(50), truth) == pytest.approx(0.3)
