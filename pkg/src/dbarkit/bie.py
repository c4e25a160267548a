"""Boundary integral route from DN matrices to the scattering transform.

Pipeline per spectral parameter lambda:

1. assemble the single-layer matrix S of the kernel G over the boundary
   Fourier basis (trapezoid rule on Nb equi-angular points),
2. solve (I + S (L_q - L_0)) psi = e_lambda for the CGO boundary trace,
3. integrate the DN difference applied to psi against the conjugate
   exponential to get t(lambda).

Large |lambda| makes the system exponentially ill conditioned -- that is
expected and is the reason the scattering transform must be truncated
(ellipse + annulus rule, with the unit-circle symmetry fill) before the
D-bar solve consumes it.  Failed nodes become masked entries rather than
errors.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from dbarkit.core import (
    GUARD_DELTA_DEFAULT,
    GuardBandError,
    IllConditionedSystem,
    InvalidArgument,
    PeriodicGrid,
    check_energy,
    check_lambda,
    exp_scatter_weight,
    exp_zeta,
)
from dbarkit.faddeev import DEFAULT_QUAD, QuadratureSpec, green_G
from dbarkit.forward import DNMatrix

NB_DEFAULT = 256
R1_DEFAULT = 1.05
COND_LIMIT = 1e12


@dataclass(frozen=True)
class BoundaryTrace:
    """Function values at Nb equi-angular boundary points 2 pi j / Nb."""

    values: np.ndarray

    @property
    def n_points(self) -> int:
        return self.values.size

    def angles(self) -> np.ndarray:
        return 2.0 * math.pi * np.arange(self.n_points) / self.n_points


@dataclass(frozen=True)
class TruncationSpec:
    """Ellipse (semidiameters a, b, rotation phi) plus inner radius R1."""

    a: float
    b: float
    phi: float = 0.0
    r1: float = R1_DEFAULT

    def __post_init__(self):
        if self.r1 <= 1.0:
            raise InvalidArgument("R1 must exceed 1")
        if min(self.a, self.b) <= self.r1:
            raise InvalidArgument("ellipse semidiameters must exceed R1")

    def radius(self, theta) -> np.ndarray:
        """Ellipse radius r(theta) = sqrt(2) a b /
        sqrt((b^2 - a^2) cos(2 theta - 2 phi) + a^2 + b^2)."""
        theta = np.asarray(theta, dtype=float)
        a2, b2 = self.a**2, self.b**2
        return (math.sqrt(2.0) * self.a * self.b
                / np.sqrt((b2 - a2) * np.cos(2 * theta - 2 * self.phi)
                          + a2 + b2))


@dataclass(frozen=True)
class ScatteringGrid:
    """t(lambda) sampled on a square lambda grid with a validity mask.

    mask True marks nodes carrying usable data; masked-out nodes hold
    value 0 (breakdown nodes of the boundary solve, or nodes zeroed /
    outside the admissible region after truncation).
    """

    grid: PeriodicGrid
    values: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        shape = (self.grid.n, self.grid.n)
        if self.values.shape != shape or self.mask.shape != shape:
            raise InvalidArgument("values/mask shape does not match grid")

    def lambda_nodes(self) -> np.ndarray:
        return self.grid.nodes()


def _fourier_coefficients(samples: np.ndarray, n_modes: int) -> np.ndarray:
    """Project equi-angular samples onto the orthonormal harmonics."""
    nb = samples.size
    dft = np.fft.fft(samples)
    modes = np.arange(-n_modes, n_modes + 1)
    return math.sqrt(2.0 * math.pi) / nb * dft[modes % nb]


def _fourier_values(coeffs: np.ndarray, theta: np.ndarray) -> np.ndarray:
    n_modes = (coeffs.size - 1) // 2
    modes = np.arange(-n_modes, n_modes + 1)
    basis = np.exp(1j * theta[:, None] * modes[None, :]) / math.sqrt(2 * math.pi)
    return basis @ coeffs


def assemble_single_layer(lam: complex, E: float, nb: int = NB_DEFAULT,
                          n_modes: int = 16, *,
                          guard: float = GUARD_DELTA_DEFAULT,
                          quad: QuadratureSpec = DEFAULT_QUAD) -> np.ndarray:
    """Matrix of the single-layer operator in the Fourier basis.

    The kernel's log singularity is split off and integrated exactly:
    G(z - y) = [G(z - y) + log|z - y|/(2 pi)] - log(2 |sin((t - t')/2)|)/(2 pi)
    on the circle, where the bracket is continuous (trapezoid rule over
    nb points, diagonal by a small-argument limit) and the log kernel is
    diagonal over the harmonics with eigenvalues -pi/|n| (0 for n = 0).
    """
    E = complex(check_energy(E)).real
    lam = check_lambda(lam, guard=guard)
    if nb < 2 * (2 * n_modes + 1):
        raise InvalidArgument(
            f"nb = {nb} cannot resolve {2 * n_modes + 1} Fourier modes")
    theta = 2.0 * math.pi * np.arange(nb) / nb
    z = np.exp(1j * theta)
    diffs = z[:, None] - z[None, :]
    K = np.zeros(diffs.shape, dtype=complex)
    off = ~np.eye(nb, dtype=bool)
    vals = green_G(diffs[off], lam, E, guard=guard, quad=quad)
    K[off] = vals + np.log(np.abs(diffs[off])) / (2.0 * math.pi)
    # diagonal: the continuous limit of G + log/(2 pi), taken along the
    # two tangential directions and averaged
    eps = 0.02
    for sgn in (+1.0, -1.0):
        v = sgn * eps * 1j * z
        K[np.diag_indices(nb)] += 0.5 * (
            green_G(v, lam, E, guard=guard, quad=quad)
            + math.log(eps) / (2.0 * math.pi))
    modes = np.arange(-n_modes, n_modes + 1)
    F = np.exp(1j * theta[:, None] * modes[None, :])
    S = (2.0 * math.pi / nb**2) * (F.conj().T @ K @ F)
    log_eig = np.zeros(modes.size)
    nz = modes != 0
    log_eig[nz] = 1.0 / (2.0 * np.abs(modes[nz]))
    return S + np.diag(log_eig)


def _psi_coefficients(Lq: DNMatrix, L0: DNMatrix, lam: complex, E: float, *,
                      nb: int, guard: float, quad: QuadratureSpec,
                      cond_limit: float = COND_LIMIT):
    if Lq.n_modes != L0.n_modes:
        raise InvalidArgument("DN matrices have different mode counts")
    n_modes = Lq.n_modes
    delta = Lq.entries - L0.entries
    if not np.any(delta):
        # identical data: S (L_q - L_0) vanishes, psi is the plain exponential
        theta = 2.0 * math.pi * np.arange(nb) / nb
        rhs_samples = exp_zeta(np.exp(1j * theta),
                               check_lambda(lam, guard=guard), E)
        return _fourier_coefficients(rhs_samples, n_modes), delta, theta
    S = assemble_single_layer(lam, E, nb, n_modes, guard=guard, quad=quad)
    A = np.eye(2 * n_modes + 1, dtype=complex) + S @ delta
    cond = np.linalg.cond(A)
    if not np.isfinite(cond) or cond > cond_limit:
        raise IllConditionedSystem(
            f"boundary system condition {cond:.3e} at lambda={lam}; "
            "tighter truncation needed", lam=lam, cond=cond)
    theta = 2.0 * math.pi * np.arange(nb) / nb
    rhs_samples = exp_zeta(np.exp(1j * theta), lam, E)
    rhs = _fourier_coefficients(rhs_samples, n_modes)
    return np.linalg.solve(A, rhs), delta, theta


def solve_boundary_psi(Lq: DNMatrix, L0: DNMatrix, lam: complex, E: float, *,
                       nb: int = NB_DEFAULT,
                       guard: float = GUARD_DELTA_DEFAULT,
                       quad: QuadratureSpec = DEFAULT_QUAD,
                       cond_limit: float = COND_LIMIT) -> BoundaryTrace:
    """CGO boundary trace psi(., lambda) on the equi-angular point set."""
    coeffs, _, theta = _psi_coefficients(
        Lq, L0, lam, E, nb=nb, guard=guard, quad=quad, cond_limit=cond_limit)
    return BoundaryTrace(values=_fourier_values(coeffs, theta))


def scattering_single(Lq: DNMatrix, L0: DNMatrix, lam: complex, E: float, *,
                      nb: int = NB_DEFAULT,
                      guard: float = GUARD_DELTA_DEFAULT,
                      quad: QuadratureSpec = DEFAULT_QUAD,
                      cond_limit: float = COND_LIMIT) -> complex:
    """t(lambda) from DN data at one spectral parameter."""
    coeffs, delta, theta = _psi_coefficients(
        Lq, L0, lam, E, nb=nb, guard=guard, quad=quad, cond_limit=cond_limit)
    flux = _fourier_values(delta @ coeffs, theta)
    weight = exp_scatter_weight(np.exp(1j * theta), lam, E)
    return complex(2.0 * math.pi / theta.size * np.sum(weight * flux))


def scattering_radial(Lq: DNMatrix, L0: DNMatrix, radii, E: float, *,
                      nb: int = NB_DEFAULT,
                      guard: float = GUARD_DELTA_DEFAULT,
                      quad: QuadratureSpec = DEFAULT_QUAD,
                      cond_limit: float = COND_LIMIT):
    """t(|lambda|) along the positive real axis, for radial potentials.

    Returns (values, ok) arrays; breakdown radii carry value 0, ok False.
    """
    radii = np.asarray(radii, dtype=float)
    values = np.zeros(radii.shape, dtype=complex)
    ok = np.zeros(radii.shape, dtype=bool)
    for i, r in enumerate(radii):
        try:
            values[i] = scattering_single(Lq, L0, complex(r), E, nb=nb,
                                          guard=guard, quad=quad,
                                          cond_limit=cond_limit)
            ok[i] = np.isfinite(values[i])
        except (IllConditionedSystem, GuardBandError, InvalidArgument,
                np.linalg.LinAlgError):
            ok[i] = False
    values[~ok] = 0.0
    return values, ok


def scattering_from_dn(Lq: DNMatrix, L0: DNMatrix, grid: PeriodicGrid,
                       E: float, *, nb: int = NB_DEFAULT,
                       guard: float = GUARD_DELTA_DEFAULT,
                       quad: QuadratureSpec = DEFAULT_QUAD,
                       cond_limit: float = COND_LIMIT,
                       node_filter=None) -> ScatteringGrid:
    """t(lambda) over a full lambda grid; failures become masked nodes.

    ``node_filter(lam_array) -> bool array`` can skip nodes that a later
    truncation would zero anyway (a large saving on wide grids).
    """
    nodes = grid.nodes()
    flat = nodes.ravel()
    values = np.zeros(flat.shape, dtype=complex)
    mask = np.zeros(flat.shape, dtype=bool)
    todo = np.abs(np.abs(flat) - 1.0) >= guard
    todo &= np.abs(flat) > 0.0
    if node_filter is not None:
        todo &= np.asarray(node_filter(flat), dtype=bool)
    for i in np.nonzero(todo)[0]:
        try:
            t = scattering_single(Lq, L0, complex(flat[i]), E, nb=nb,
                                  guard=guard, quad=quad,
                                  cond_limit=cond_limit)
        except (IllConditionedSystem, GuardBandError, InvalidArgument,
                np.linalg.LinAlgError):
            continue
        if np.isfinite(t):
            values[i] = t
            mask[i] = True
    shape = (grid.n, grid.n)
    return ScatteringGrid(grid=grid, values=values.reshape(shape),
                          mask=mask.reshape(shape))


def radial_profile_to_grid(radii, values, ok, grid: PeriodicGrid
                           ) -> ScatteringGrid:
    """Fill a lambda grid from a radial profile t(|lambda|).

    Linear interpolation in |lambda|; nodes outside the sampled radius
    range (or bracketed by failed samples) are masked.
    """
    radii = np.asarray(radii, dtype=float)
    good = np.asarray(ok, dtype=bool)
    if not np.any(good):
        raise InvalidArgument("no valid radial samples")
    rg = radii[good]
    vg = np.asarray(values)[good]
    order = np.argsort(rg)
    rg, vg = rg[order], vg[order]
    nodes = grid.nodes()
    r = np.abs(nodes)
    inside = (r >= rg[0]) & (r <= rg[-1])
    vals = np.zeros(nodes.shape, dtype=complex)
    vals[inside] = (np.interp(r[inside], rg, vg.real)
                    + 1j * np.interp(r[inside], rg, vg.imag))
    return ScatteringGrid(grid=grid, values=vals, mask=inside)


def truncate_scattering(t: ScatteringGrid, spec: TruncationSpec
                        ) -> ScatteringGrid:
    """Apply the admissibility rule:

        0                      for |lambda| <= 1/r(theta)
        t(1/conj(lambda))      for 1/r(theta) <= |lambda| < 1/R1
        0                      for 1/R1 <= |lambda| <= R1
        t(lambda)              for R1 < |lambda| < r(theta)
        0                      for |lambda| >= r(theta),

    with the symmetry fill taken from the grid node nearest to
    1/conj(lambda).  Idempotent for a fixed spec.
    """
    nodes = t.grid.nodes()
    r = np.abs(nodes)
    rt = spec.radius(np.angle(nodes))
    keep = (r > spec.r1) & (r < rt)
    fill = (r >= 1.0 / rt) & (r < 1.0 / spec.r1) & (r > 0)
    values = np.zeros_like(t.values)
    mask = np.zeros_like(t.mask)
    values[keep] = np.where(t.mask[keep], t.values[keep], 0.0)
    mask[keep] = t.mask[keep]
    if np.any(fill):
        src = np.zeros(nodes.shape, dtype=complex)
        src_ok = np.zeros(nodes.shape, dtype=bool)
        targets = 1.0 / np.conj(nodes[fill])
        ax = t.grid.axis()
        ix = np.clip(np.searchsorted(ax + t.grid.spacing / 2, targets.real),
                     0, t.grid.n - 1)
        iy = np.clip(np.searchsorted(ax + t.grid.spacing / 2, targets.imag),
                     0, t.grid.n - 1)
        src_vals = t.values[iy, ix]
        src_keep = keep[iy, ix] & t.mask[iy, ix]
        src[fill] = np.where(src_keep, src_vals, 0.0)
        src_ok[fill] = src_keep
        values[fill] = src[fill]
        mask[fill] = src_ok[fill]
    return ScatteringGrid(grid=t.grid, values=values, mask=mask)


def write_scattering_csv(path, t: ScatteringGrid) -> None:
    """Row-major dump: re_lambda, im_lambda, re_t, im_t, mask."""
    nodes = t.grid.nodes()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["re_lambda", "im_lambda", "re_t", "im_t", "mask"])
        for lam, val, ok in zip(nodes.ravel(), t.values.ravel(),
                                t.mask.ravel()):
            w.writerow([repr(float(lam.real)), repr(float(lam.imag)),
                        repr(float(val.real)), repr(float(val.imag)),
                        int(ok)])


def read_scattering_csv(path) -> ScatteringGrid:
    rows = []
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        next(r)
        for row in r:
            if row:
                rows.append((float(row[0]), float(row[1]), float(row[2]),
                             float(row[3]), bool(int(row[4]))))
    n = int(round(math.sqrt(len(rows))))
    if n * n != len(rows) or n < 32:
        raise InvalidArgument(f"{path}: not a square grid dump")
    m = int(round(math.log2(n)))
    if 2**m != n:
        raise InvalidArgument(f"{path}: grid size {n} is not a power of two")
    half = -rows[0][0]
    grid = PeriodicGrid(m=m, half_width=half)
    data = np.asarray(rows, dtype=float)
    values = (data[:, 2] + 1j * data[:, 3]).reshape(n, n)
    mask = data[:, 4].astype(bool).reshape(n, n)
    expect = grid.nodes()
    got = (data[:, 0] + 1j * data[:, 1]).reshape(n, n)
    if not np.allclose(got, expect, atol=1e-12):
        raise InvalidArgument(f"{path}: node layout mismatch")
    return ScatteringGrid(grid=grid, values=values, mask=mask)
