import numpy as np
import pytest

from dbarkit.core import InvalidArgument, WellPosednessError
from dbarkit import forward
from dbarkit.forward import (
    DNMatrix,
    add_noise,
    assemble_dn,
    disk_mesh,
    dn_homogeneous,
    radial_dn_entry,
    read_dn_csv,
    write_dn_csv,
)
from dbarkit.potentials import case1_potential
from oracles import bessel_ratio_series


@pytest.fixture(scope="module")
def mesh6():
    return disk_mesh(6)


@pytest.fixture(scope="module")
def L_case1(mesh6):
    q = lambda z: case1_potential(np.abs(z)) + 1.0  # q = q0 - E at E = -1
    return assemble_dn(q, 16, mesh6)


class TestMesh:
    def test_counts_and_orientation(self, mesh6):
        assert mesh6.n_triangles == 4 * 4**6
        p = mesh6.vertices[mesh6.triangles]
        cross = ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
                 - (p[:, 1, 1] - p[:, 0, 1]) * (p[:, 2, 0] - p[:, 0, 0]))
        assert np.all(cross > 0)

    def test_boundary_nodes_on_circle_sorted(self, mesh6):
        v = mesh6.vertices[mesh6.boundary]
        r = np.hypot(v[:, 0], v[:, 1])
        assert np.allclose(r, 1.0, atol=1e-14)
        ang = mesh6.boundary_angles()
        assert np.all(np.diff(ang) > 0)
        # equi-angular by construction (chord midpoints project to arc mids)
        assert np.allclose(np.diff(ang), 2 * np.pi / len(ang), atol=1e-12)

    def test_interior_strictly_inside(self, mesh6):
        interior = np.setdiff1d(np.arange(len(mesh6.vertices)), mesh6.boundary)
        r = np.hypot(*mesh6.vertices[interior].T)
        assert r.max() < 1.0 - 1e-6


class TestHomogeneous:
    def test_n0_equals_bessel_ratio(self):
        L = dn_homogeneous(-1.0, 16)
        assert L.entry(0, 0) == pytest.approx(0.4463899659, abs=1e-9)

    def test_matches_series_oracle(self):
        L = dn_homogeneous(-1.0, 16)
        for n in (0, 1, 5, 16):
            assert L.entry(n, n) == pytest.approx(
                bessel_ratio_series(n, 1.0), rel=1e-12)

    def test_symmetric_in_n(self):
        L = dn_homogeneous(-2.5, 8)
        for n in range(1, 9):
            assert L.entry(n, n) == L.entry(-n, -n)

    def test_large_n_asymptotics(self):
        L = dn_homogeneous(-1.0, 16)
        diag = np.real(np.diag(L.entries))[16:]  # n = 0..16
        assert np.all(np.diff(diag) > 0)  # monotone in n
        assert abs(L.entry(16, 16) - 16.0) < 0.1  # ~ n + O(1/n)

    def test_invalid(self):
        with pytest.raises(InvalidArgument):
            dn_homogeneous(1.0, 16)
        with pytest.raises(InvalidArgument):
            dn_homogeneous(-1.0, 0)


class TestAssembly:
    def test_homogeneous_vs_bessel(self, mesh6):
        L = assemble_dn(lambda z: np.ones_like(z, complex), 16, mesh6)
        L0 = dn_homogeneous(-1.0, 16)
        rel = (np.linalg.norm(L.entries - L0.entries, 2)
               / np.linalg.norm(L0.entries, 2))
        assert rel < 5e-3  # the 1e-3 bound at ~2.6e5 triangles is acceptance

    def test_refinement_improves(self):
        L0 = dn_homogeneous(-1.0, 8)
        errs = []
        for k in (4, 5):
            L = assemble_dn(lambda z: np.ones_like(z, complex), 8, disk_mesh(k))
            errs.append(np.linalg.norm(L.entries - L0.entries, 2)
                        / np.linalg.norm(L0.entries, 2))
        assert errs[1] < 0.5 * errs[0]

    def test_radial_potential_diagonal(self, L_case1):
        diag = np.diag(L_case1.entries)
        off = L_case1.entries - np.diag(diag)
        assert np.linalg.norm(off) / np.linalg.norm(diag) < 1e-3

    def test_hermitian_for_real_potential(self, L_case1):
        defect = (np.linalg.norm(L_case1.entries - np.conj(L_case1.entries.T))
                  / np.linalg.norm(L_case1.entries))
        assert defect < 1e-12

    def test_radial_bvp_oracle(self, L_case1):
        for n in (0, 2, 5):
            bvp = radial_dn_entry(lambda r: case1_potential(r) + 1.0, n)
            assert abs(L_case1.entry(n, n) - bvp) / abs(bvp) < 5e-3

    def test_complex_potential_supported(self, mesh6):
        q = lambda z: np.ones_like(z, complex) * (1.23 + 0.041j)
        L = assemble_dn(q, 4, mesh6)
        assert np.all(np.isfinite(L.entries))
        assert abs(np.imag(L.entry(0, 0))) > 0

    def test_singular_system_reported(self, mesh6, monkeypatch):
        def boom(*a, **k):
            raise RuntimeError("Factor is exactly singular")

        monkeypatch.setattr(forward, "splu", boom)
        with pytest.raises(WellPosednessError):
            assemble_dn(lambda z: np.ones_like(z, complex), 2, mesh6)


class TestNoise:
    def test_zero_level_identity(self):
        L = dn_homogeneous(-1.0, 4)
        assert add_noise(L, 0.0, seed=1) is L

    def test_calibration_exact(self):
        L = dn_homogeneous(-1.0, 16)
        Ln = add_noise(L, 5e-5, seed=7)
        rel = (np.linalg.norm(Ln.entries - L.entries, 2)
               / np.linalg.norm(L.entries, 2))
        assert rel == pytest.approx(5e-5, rel=1e-6)

    def test_deterministic(self):
        L = dn_homogeneous(-1.0, 8)
        a = add_noise(L, 1e-3, seed=42)
        b = add_noise(L, 1e-3, seed=42)
        c = add_noise(L, 1e-3, seed=43)
        assert np.array_equal(a.entries, b.entries)
        assert not np.array_equal(a.entries, c.entries)

    def test_negative_rejected(self):
        with pytest.raises(InvalidArgument):
            add_noise(dn_homogeneous(-1.0, 2), -0.1, seed=0)


class TestSerialization:
    def test_round_trip(self, tmp_path, L_case1):
        p = tmp_path / "dn.csv"
        write_dn_csv(p, L_case1)
        back = read_dn_csv(p)
        assert back.n_modes == L_case1.n_modes
        assert np.array_equal(back.entries, L_case1.entries)

    def test_header_checked(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("WRONG,16\n")
        with pytest.raises(InvalidArgument):
            read_dn_csv(p)

    def test_truncated_rejected(self, tmp_path):
        p = tmp_path / "short.csv"
        p.write_text("N,1\nl,n,re,im\n0,0,1.0,0.0\n")
        with pytest.raises(InvalidArgument):
            read_dn_csv(p)

    def test_entry_shape_validated(self):
        with pytest.raises(InvalidArgument):
            DNMatrix(n_modes=2, entries=np.zeros((3, 3), complex))
