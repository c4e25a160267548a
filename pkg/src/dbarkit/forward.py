"""Forward simulation: DN matrices in the boundary Fourier basis.

The Dirichlet problem (-Lap + q) u = 0 on the unit disk is solved by P1
finite elements on a structured mesh (a 4-triangle fan uniformly refined
with boundary midpoints projected to the circle, so 8 refinements give
~2.6e5 triangles and 9 give the paper-scale 1048576).  Boundary fluxes
are extracted weakly: the residual of the unconstrained stiffness+mass
matrix at a boundary node is the flux integrated against that node's hat
function, which is one order more accurate than differencing normal
derivatives.

Matrix entries follow the convention: row index l, column index n, both
running -N..N over the orthonormal boundary harmonics
phi_n(theta) = exp(i n theta)/sqrt(2 pi); entry(l, n) is the flux of the
solution with Dirichlet datum phi_n paired against conj(phi_l).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu
from scipy.special import ive

from dbarkit.core import InvalidArgument, WellPosednessError, check_energy


@dataclass(frozen=True)
class DiskMesh:
    """P1 triangulation of the unit disk.

    vertices: (nv, 2) floats; triangles: (nt, 3) int, positively
    oriented; boundary: indices of circle vertices ordered by angle.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary: np.ndarray

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    def boundary_angles(self) -> np.ndarray:
        v = self.vertices[self.boundary]
        return np.arctan2(v[:, 1], v[:, 0])


def disk_mesh(refinements: int = 6) -> DiskMesh:
    """Uniformly refined fan mesh; 4 * 4**refinements triangles."""
    if refinements < 0:
        raise InvalidArgument("refinements must be >= 0")
    verts = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)]
    tris = [(0, 1, 2), (0, 2, 3), (0, 3, 4), (0, 4, 1)]
    on_circle = {1, 2, 3, 4}
    for _ in range(refinements):
        midpoint: dict[tuple[int, int], int] = {}

        def mid(a, b):
            key = (a, b) if a < b else (b, a)
            idx = midpoint.get(key)
            if idx is None:
                x = 0.5 * (verts[a][0] + verts[b][0])
                y = 0.5 * (verts[a][1] + verts[b][1])
                if a in on_circle and b in on_circle:
                    r = math.hypot(x, y)
                    x, y = x / r, y / r
                    on_circle.add(len(verts))
                verts.append((x, y))
                idx = len(verts) - 1
                midpoint[key] = idx
            return idx

        new_tris = []
        for a, b, c in tris:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            new_tris += [(a, ab, ca), (ab, b, bc), (ca, bc, c), (ab, bc, ca)]
        tris = new_tris
    vertices = np.asarray(verts, dtype=float)
    triangles = np.asarray(tris, dtype=np.int64)
    # enforce positive orientation
    p = vertices[triangles]
    cross = ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
             - (p[:, 1, 1] - p[:, 0, 1]) * (p[:, 2, 0] - p[:, 0, 0]))
    flip = cross < 0
    triangles[flip] = triangles[flip][:, [0, 2, 1]]
    bidx = np.asarray(sorted(on_circle), dtype=np.int64)
    ang = np.arctan2(vertices[bidx, 1], vertices[bidx, 0])
    boundary = bidx[np.argsort(ang)]
    return DiskMesh(vertices=vertices, triangles=triangles, boundary=boundary)


@dataclass(frozen=True)
class DNMatrix:
    """(2N+1) x (2N+1) DN matrix in the boundary Fourier basis."""

    n_modes: int
    entries: np.ndarray

    def __post_init__(self):
        d = 2 * self.n_modes + 1
        if self.entries.shape != (d, d):
            raise InvalidArgument("entries shape does not match n_modes")

    @property
    def modes(self) -> np.ndarray:
        return np.arange(-self.n_modes, self.n_modes + 1)

    def entry(self, l: int, n: int) -> complex:
        N = self.n_modes
        return complex(self.entries[l + N, n + N])


def _assemble_system(mesh: DiskMesh, q_fn) -> sp.csr_matrix:
    verts = mesh.vertices
    tris = mesh.triangles
    p = verts[tris]  # (nt, 3, 2)
    x, y = p[..., 0], p[..., 1]
    area2 = ((x[:, 1] - x[:, 0]) * (y[:, 2] - y[:, 0])
             - (y[:, 1] - y[:, 0]) * (x[:, 2] - x[:, 0]))
    area = 0.5 * area2
    if np.any(area <= 0):
        raise InvalidArgument("mesh contains non positively oriented triangles")
    # P1 gradient coefficients: grad phi_i = (b_i, c_i) / (2 area)
    b = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], 1)
    c = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], 1)
    stiff = (b[:, :, None] * b[:, None, :] + c[:, :, None] * c[:, None, :]) \
        / (4.0 * area)[:, None, None]
    centroid = p.mean(axis=1)
    qc = np.asarray(q_fn(centroid[:, 0] + 1j * centroid[:, 1]), dtype=complex)
    mass_pattern = (np.ones((3, 3)) + np.eye(3)) / 12.0
    local = stiff.astype(complex) + (qc * area)[:, None, None] * mass_pattern
    rows = np.repeat(tris, 3, axis=1).ravel()
    cols = np.tile(tris, (1, 3)).ravel()
    K = sp.coo_matrix((local.ravel(), (rows, cols)),
                      shape=(len(verts), len(verts))).tocsr()
    return K


def assemble_dn(q_fn, n_modes: int, mesh: DiskMesh) -> DNMatrix:
    """DN matrix of the potential q (a callable of complex z; may return
    complex values) by one FEM Dirichlet solve per basis function.

    The factorized interior block is shared across all 2N+1 right-hand
    sides.  Raises WellPosednessError if the interior system is singular
    (zero a Dirichlet eigenvalue of -Lap + q).
    """
    if n_modes < 1:
        raise InvalidArgument("n_modes must be >= 1")
    K = _assemble_system(mesh, q_fn)
    nv = K.shape[0]
    bnd = mesh.boundary
    interior = np.setdiff1d(np.arange(nv), bnd)
    theta = mesh.boundary_angles()
    modes = np.arange(-n_modes, n_modes + 1)
    # Dirichlet data for every mode at once: (n_boundary, 2N+1)
    bc = np.exp(1j * theta[:, None] * modes[None, :]) / math.sqrt(2 * math.pi)
    K_ii = K[interior][:, interior].tocsc()
    K_ib = K[interior][:, bnd]
    try:
        lu = splu(K_ii)
    except RuntimeError as exc:
        raise WellPosednessError(f"singular Dirichlet system: {exc}") from exc
    u = np.zeros((nv, modes.size), dtype=complex)
    u[bnd] = bc
    u[interior] = lu.solve(-(K_ib @ bc))
    if not np.all(np.isfinite(u)):
        raise WellPosednessError("Dirichlet solve produced non-finite values")
    flux = (K @ u)[bnd]  # weak flux paired with boundary hat functions
    entries = np.conj(bc).T @ flux
    return DNMatrix(n_modes=n_modes, entries=entries)


def dn_homogeneous(E: float, n_modes: int) -> DNMatrix:
    """Analytic DN matrix for q0 = 0, i.e. potential q = -E > 0.

    Diagonal with entries sqrt(-E) I_n'(sqrt(-E)) / I_n(sqrt(-E)),
    evaluated with exponentially scaled Bessel functions.
    """
    E = complex(check_energy(E)).real
    if n_modes < 1:
        raise InvalidArgument("n_modes must be >= 1")
    tau = math.sqrt(-E)
    n = np.abs(np.arange(-n_modes, n_modes + 1))
    ratio = tau * (ive(n - 1, tau) + ive(n + 1, tau)) / (2.0 * ive(n, tau))
    return DNMatrix(n_modes=n_modes, entries=np.diag(ratio.astype(complex)))


def radial_dn_entry(q_radial, n: int, *, r0: float = 1e-6,
                    n_points: int = 2000) -> complex:
    """Mode-n DN eigenvalue for a radial potential via the 1-D BVP.

    Solves f'' + f'/r - n^2 f / r^2 = q f with f(1) = 1 and the
    regularity condition at r0 (f ~ r^|n|), and returns f'(1).  This is a
    cross-check oracle for the FEM path, not the production route.
    """
    from scipy.integrate import solve_bvp

    n = abs(int(n))

    def ode(r, y):
        q = np.asarray(q_radial(r), dtype=complex)
        return np.vstack([y[1], q * y[0] - y[1] / r + n * n * y[0] / (r * r)])

    def bc(ya, yb):
        if n == 0:
            qa = complex(np.asarray(q_radial(np.array([r0])))[0])
            reg = ya[1] - 0.5 * r0 * qa * ya[0]
        else:
            reg = ya[1] - n * ya[0] / r0
        return np.array([reg, yb[0] - 1.0])

    r = np.linspace(r0, 1.0, n_points)
    y0 = np.vstack([r**n, n * r**np.maximum(n - 1, 0)]).astype(complex)
    sol = solve_bvp(ode, bc, r, y0, tol=1e-10, max_nodes=200000)
    if not sol.success:
        raise WellPosednessError(f"radial BVP failed: {sol.message}")
    return complex(sol.sol(1.0)[1])


def add_noise(L: DNMatrix, target_rel: float, seed: int) -> DNMatrix:
    """Additive Gaussian perturbation calibrated in spectral norm.

    The perturbation is c*G with G i.i.d. standard normal and c chosen so
    ||L_noisy - L|| / ||L|| equals target_rel exactly; deterministic for
    a fixed seed.
    """
    if target_rel < 0:
        raise InvalidArgument("noise level must be >= 0")
    if target_rel == 0.0:
        return L
    rng = np.random.default_rng(seed)
    G = rng.standard_normal(L.entries.shape)
    c = target_rel * np.linalg.norm(L.entries, 2) / np.linalg.norm(G, 2)
    return DNMatrix(n_modes=L.n_modes, entries=L.entries + c * G)


def write_dn_csv(path, L: DNMatrix) -> None:
    """Interchange format: a line ``N,<modes>``, a column header, then
    one ``l,n,re,im`` row per entry.  The inverse pipeline consumes this
    file and never sees the mesh."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["N", L.n_modes])
        w.writerow(["l", "n", "re", "im"])
        N = L.n_modes
        for l in range(-N, N + 1):
            for n in range(-N, N + 1):
                v = L.entries[l + N, n + N]
                w.writerow([l, n, repr(float(v.real)), repr(float(v.imag))])


def read_dn_csv(path) -> DNMatrix:
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        head = next(r)
        if head[0] != "N":
            raise InvalidArgument(f"{path}: expected 'N,<modes>' header")
        n_modes = int(head[1])
        next(r)  # column header
        d = 2 * n_modes + 1
        entries = np.zeros((d, d), dtype=complex)
        seen = 0
        for row in r:
            if not row:
                continue
            l, n = int(row[0]), int(row[1])
            entries[l + n_modes, n + n_modes] = float(row[2]) + 1j * float(row[3])
            seen += 1
        if seen != d * d:
            raise InvalidArgument(f"{path}: expected {d * d} entries, got {seen}")
    return DNMatrix(n_modes=n_modes, entries=entries)
