"""End-to-end studies: solver validation, case reconstructions, the
exceptional-point scan, and the diffuse-optical-tomography pipeline.

Default sizes are desk scale (minutes on one core); ``paper_scale=True``
restores the published sizes (1048576-triangle meshes, 250 x 701 scan
cells, 2^8 solver grids) for long documented runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from dbarkit.bie import (
    ScatteringGrid,
    TruncationSpec,
    radial_profile_to_grid,
    scattering_from_dn,
    scattering_radial,
    truncate_scattering,
)
from dbarkit.core import (
    DbarError,
    ExceptionalPointSuspected,
    InvalidArgument,
    PeriodicGrid,
    exp_factor,
)
from dbarkit.dbar import solve_dbar
from dbarkit.forward import DNMatrix, add_noise, assemble_dn, disk_mesh, dn_homogeneous
from dbarkit.lippmann import CGOField, PotentialField, scattering_direct, solve_mu
from dbarkit.potentials import DotScene, ExceptionalFamily, RadialProfile
from dbarkit.reconstruct import (
    radial_l2_error,
    reconstruct_conductivity,
    reconstruct_potential,
)

FIVE_POINT_DLAM = 1e-4


def dbar_defect_curve(q0_profile, lambdas, E: float, m_exponents=(6, 7), *,
                      half_width: float = 2.1, dlam: float = FIVE_POINT_DLAM,
                      guard: float = 0.04):
    """L2-on-the-disk defect of the spectral equation for LS-computed CGO
    fields, as a function of |lambda| and grid exponent.

    For each lambda, mu is solved at lambda and at the eight five-point
    stencil shifts (+-dlam, +-2dlam along both axes), the stencil gives
    d-bar mu, and the defect

        || dbar mu - t(lambda)/(4 pi conj(lambda)) e_{-lambda}(z) conj(mu) ||

    is integrated over the unit disk.  Large values near |lambda| = 1 are
    the expected signature of the kernel's breakdown there.
    """
    lambdas = np.asarray(lambdas, dtype=float)
    out: dict[int, np.ndarray] = {}
    for m in m_exponents:
        grid = PeriodicGrid(m=m, half_width=half_width)
        q0 = PotentialField.from_function(grid, q0_profile, radial=True)
        zz = grid.nodes()
        disk = np.abs(zz) <= 1.0
        h = grid.spacing
        res = np.zeros(lambdas.shape)
        for i, lam in enumerate(lambdas):
            mu0 = solve_mu(q0, complex(lam), E, guard=guard).values
            shifts = [lam + dlam, lam + 2 * dlam, lam - dlam, lam - 2 * dlam,
                      lam + 1j * dlam, lam + 2j * dlam, lam - 1j * dlam,
                      lam - 2j * dlam]
            mus = [solve_mu(q0, s, E, guard=guard).values for s in shifts]
            d1 = (-mus[1] + 8 * mus[0] - 8 * mus[2] + mus[3]) / (12 * dlam)
            d2 = (-mus[5] + 8 * mus[4] - 8 * mus[6] + mus[7]) / (12 * dlam)
            dbar_mu = 0.5 * (d1 + 1j * d2)
            t = scattering_direct(
                q0, CGOField(grid=grid, lam=complex(lam), values=mu0), E)
            rhs = t / (4 * np.pi * np.conj(lam)) \
                * exp_factor(zz, complex(lam), E, -1) * np.conj(mu0)
            diff = dbar_mu - rhs
            res[i] = math.sqrt(float(np.sum(np.abs(diff[disk]) ** 2)) * h * h)
        out[m] = res
    return out


@dataclass
class ScanResult:
    """Exceptional-point scan output: t(alpha, |lambda|) plus flags.

    ``flagged`` marks GMRES non-convergence; ``blowup`` additionally
    marks cells whose |t| exceeds the blow-up threshold.  Exceptional
    circles show up as sign changes of t through huge values, so the
    blow-up field is the practical detector (the linear system is
    singular only exactly on a circle, and the solver usually still
    converges to the enormous nearby values).
    """

    alphas: np.ndarray
    lambda_abs: np.ndarray
    t_values: np.ndarray     # (n_alpha, n_lambda) real part of t
    flagged: np.ndarray      # True where the CGO solve did not converge
    blowup: np.ndarray       # flagged or |t| > threshold
    iterations: np.ndarray
    blowup_threshold: float


def scan_exceptional(family: ExceptionalFamily, alphas, lambda_abs, E: float,
                     *, m: int = 8, half_width: float = 2.1,
                     guard: float = 0.005, rtol: float = 1e-8,
                     maxiter: int = 400, blowup_threshold: float = 100.0,
                     on_cell=None, skip=None) -> ScanResult:
    """Scan t(alpha, |lambda|) for a radial potential family.

    Cells where GMRES fails to converge are flagged (the operational
    exceptional-point signal) and carry NaN.  The Green's kernel is
    cached per lambda, so the lambda loop is outermost.  ``on_cell`` is
    called after every cell (checkpointing hook); ``skip`` is a set of
    (i_alpha, i_lambda) pairs to leave untouched (resume support).
    """
    alphas = np.asarray(alphas, dtype=float)
    lambda_abs = np.asarray(lambda_abs, dtype=float)
    grid = PeriodicGrid(m=m, half_width=half_width)
    zz_abs = np.abs(grid.nodes())
    base = family.potential(0.0)(zz_abs)
    bump = family.phi(zz_abs)
    support = max(family.phi.support_radius,
                  family.sigma.support_radius if family.kind != "alpha_phi"
                  else 0.0)
    outside = zz_abs > support
    t_values = np.full((alphas.size, lambda_abs.size), np.nan)
    flagged = np.zeros((alphas.size, lambda_abs.size), dtype=bool)
    iters = np.zeros((alphas.size, lambda_abs.size), dtype=int)
    skip = skip or set()
    for j, lam in enumerate(lambda_abs):
        for i, alpha in enumerate(alphas):
            if (i, j) in skip:
                continue
            vals = (base + alpha * bump).astype(complex)
            vals[outside] = 0.0
            q0 = PotentialField(grid=grid, values=vals,
                                support_radius=support)
            try:
                mu = solve_mu(q0, complex(lam), E, guard=guard, rtol=rtol,
                              maxiter=maxiter)
                t = scattering_direct(q0, mu, E)
                t_values[i, j] = t.real
                iters[i, j] = mu.iterations
            except ExceptionalPointSuspected as exc:
                flagged[i, j] = True
                iters[i, j] = int(exc.context.get("iterations", maxiter))
            if on_cell is not None:
                on_cell(i, j, alpha, lam, t_values[i, j], flagged[i, j])
    blowup = flagged | (np.abs(np.nan_to_num(t_values)) > blowup_threshold)
    return ScanResult(alphas=alphas, lambda_abs=lambda_abs,
                      t_values=t_values, flagged=flagged, blowup=blowup,
                      iterations=iters, blowup_threshold=blowup_threshold)


@dataclass
class RadialStudy:
    """Clean/noisy DN-based radial reconstruction bundle."""

    radii_lambda: np.ndarray
    t_bie: np.ndarray
    t_bie_ok: np.ndarray
    t_ls: np.ndarray | None
    recon_radii: np.ndarray
    recon_values: np.ndarray
    recon_ok: np.ndarray
    l2_error: float | None
    params: dict


def simulate_radial_dn(q0_profile, E: float, *, n_modes: int = 16,
                       mesh_refine: int = 6, noise: float = 0.0,
                       seed: int = 0) -> tuple[DNMatrix, DNMatrix]:
    """(L_q, L_0) pair for a radial compactly supported q0 at real E < 0."""
    mesh = disk_mesh(mesh_refine)
    Lq = assemble_dn(lambda z: q0_profile(np.abs(z)) - E, n_modes, mesh)
    if noise > 0:
        Lq = add_noise(Lq, noise, seed)
    return Lq, dn_homogeneous(E, n_modes)


def radial_reconstruction(q0_profile, E: float, trunc: TruncationSpec, *,
                          mode: str = "potential",
                          sigma_truth: RadialProfile | None = None,
                          Lq: DNMatrix | None = None,
                          L0: DNMatrix | None = None,
                          use_ls_data: bool = False,
                          n_modes: int = 16, mesh_refine: int = 6,
                          noise: float = 0.0, seed: int = 0,
                          nb: int = 128, n_radial: int = 44,
                          lambda_m: int = 7, ls_m: int = 6,
                          recon_radii=None, dz: float = 1e-3,
                          r_star: float = 2.5, r_width: float = 0.15,
                          guard: float = 0.05) -> RadialStudy:
    """Full inverse pipeline for a radial case at real negative energy.

    Scattering data comes from the boundary-integral route on simulated
    DN matrices (or, with ``use_ls_data``, straight from the known
    potential); radial symmetry lets one profile t(|lambda|) fill the
    whole lambda grid.  ``mode`` selects the potential or conductivity
    reconstruction formula.
    """
    if mode not in ("potential", "conductivity"):
        raise InvalidArgument(f"unknown mode {mode!r}")
    r_lo = max(1.0 + guard + 0.02, trunc.r1 * 1.01)
    radii_lambda = np.linspace(r_lo, max(trunc.a, trunc.b) * 1.01, n_radial)
    ls_grid = PeriodicGrid(m=ls_m, half_width=2.1)
    q0_field = PotentialField.from_function(ls_grid, q0_profile, radial=True)
    t_ls = None
    if use_ls_data:
        t_bie = np.zeros(radii_lambda.shape, dtype=complex)
        ok = np.ones(radii_lambda.shape, dtype=bool)
        for i, r in enumerate(radii_lambda):
            try:
                mu = solve_mu(q0_field, complex(r), E, guard=guard)
                t_bie[i] = scattering_direct(q0_field, mu, E)
            except DbarError:
                ok[i] = False
    else:
        if Lq is None or L0 is None:
            Lq, L0 = simulate_radial_dn(q0_profile, E, n_modes=n_modes,
                                        mesh_refine=mesh_refine, noise=noise,
                                        seed=seed)
        t_bie, ok = scattering_radial(Lq, L0, radii_lambda, E, nb=nb,
                                      guard=guard)
        t_ls = np.zeros(radii_lambda.shape, dtype=complex)
        for i, r in enumerate(radii_lambda[::4]):
            mu = solve_mu(q0_field, complex(r), E, guard=guard)
            t_ls[4 * i] = scattering_direct(q0_field, mu, E)
    lam_grid = PeriodicGrid(m=lambda_m,
                            half_width=2.1 * max(trunc.a, trunc.b))
    t_grid = radial_profile_to_grid(radii_lambda, t_bie, ok, lam_grid)
    t_R = truncate_scattering(t_grid, trunc)
    if recon_radii is None:
        recon_radii = np.linspace(0.0, 0.92, 13)
    recon_radii = np.asarray(recon_radii, dtype=float)
    zs = recon_radii.astype(complex)
    params = dict(mode=mode, n_modes=n_modes, mesh_refine=mesh_refine,
                  noise=noise, seed=seed, nb=nb, n_radial=n_radial,
                  lambda_m=lambda_m, ls_m=ls_m, dz=dz, r_star=r_star,
                  r_width=r_width, guard=guard, use_ls_data=use_ls_data,
                  ellipse=(trunc.a, trunc.b, trunc.phi, trunc.r1))
    if mode == "potential":
        res = reconstruct_potential(t_R, E, zs, dz=dz, metadata=params)
        values = res.values.real
        truth = q0_profile
    else:
        res = reconstruct_conductivity(t_R, E, zs, 1.0, r_star=r_star,
                                       width=r_width, metadata=params)
        values = res.values
        truth = sigma_truth
    err = None
    if truth is not None and np.all(res.ok):
        err = radial_l2_error(recon_radii, values, truth)
    return RadialStudy(radii_lambda=radii_lambda, t_bie=t_bie, t_bie_ok=ok,
                       t_ls=t_ls, recon_radii=recon_radii,
                       recon_values=values, recon_ok=res.ok,
                       l2_error=err, params=params)


def sigma_from_potential_profile(radii, q_values, n_grid: int = 2000
                                 ) -> np.ndarray:
    """Conductivity implied by a radial potential profile.

    Solves f'' + f'/r = q f with f(1) = 1 and regularity at the origin
    (sqrt of the conductivity solves the potential's Schroedinger
    equation), then returns sigma = f^2 at the same radii.  This is the
    two-step "recover q, then solve for sigma" route that the direct
    conductivity formula is compared against.  A fixed-grid second-order
    finite-difference solve keeps the route robust against rough
    reconstructed profiles.
    """
    import scipy.sparse as sp
    from scipy.sparse.linalg import spsolve

    radii = np.asarray(radii, dtype=float)
    qv = np.asarray(q_values, dtype=float)
    h = 1.0 / n_grid
    r = h * np.arange(n_grid + 1)
    q = np.interp(r, radii, qv, left=qv[0], right=0.0)
    main = np.empty(n_grid + 1)
    lower = np.empty(n_grid)
    upper = np.empty(n_grid)
    rhs = np.zeros(n_grid + 1)
    # r = 0: symmetry gives 2 f''(0) = q f, f'' ~ 2(f1 - f0)/h^2
    main[0] = -4.0 / h**2 - q[0]
    upper[0] = 4.0 / h**2
    i = np.arange(1, n_grid)
    main[i] = -2.0 / h**2 - q[i]
    lower[i - 1] = 1.0 / h**2 - 1.0 / (2 * h * r[i])
    upper[i] = 1.0 / h**2 + 1.0 / (2 * h * r[i])
    main[n_grid] = 1.0
    lower[n_grid - 1] = 0.0
    rhs[n_grid] = 1.0
    A = sp.diags([lower, main, upper], offsets=(-1, 0, 1), format="csc")
    f = spsolve(A, rhs)
    if not np.all(np.isfinite(f)):
        raise InvalidArgument("conductivity ODE solve produced non-finite "
                              "values (potential too singular?)")
    return np.interp(np.clip(radii, 0.0, 1.0), r, f) ** 2


@dataclass
class DotResult:
    """DOT pipeline output: reconstructed diffusion plus an error report."""

    energy: complex
    z_nodes: np.ndarray
    d_recon: np.ndarray
    d_truth: np.ndarray
    ok: np.ndarray
    rel_l2_error: float
    scattering: ScatteringGrid
    truncated: ScatteringGrid
    params: dict


def dot_pipeline(scene: DotScene, trunc: TruncationSpec, noise: float = 0.0,
                 seed: int = 0, *, n_modes: int = 16, mesh_refine: int = 7,
                 nb: int = 96, lambda_m: int = 6, n_z: int = 13,
                 r_star: float = 2.5, r_width: float = 0.15,
                 guard: float = 0.05, paper_scale: bool = False) -> DotResult:
    """Diffusion-coefficient recovery through the negative-energy machinery.

    DN data is simulated from the scene's (possibly complex) potential;
    the inverse side runs at the real energy -m/d, treating the modulated
    part as model error.  D(z) = d * mean Re(mu)^2 near |lambda| = r*.
    """
    if paper_scale:
        mesh_refine, lambda_m, n_modes = 9, 8, 16
        nb = max(nb, 128)
        n_z = max(n_z, 41)
    E = scene.energy
    E_re = E.real
    mesh = disk_mesh(mesh_refine)
    Lq = assemble_dn(lambda z: scene.schrodinger_q(z), n_modes, mesh)
    if noise > 0:
        Lq = add_noise(Lq, noise, seed)
    L0 = dn_homogeneous(E_re, n_modes)
    lam_grid = PeriodicGrid(m=lambda_m,
                            half_width=2.1 * max(trunc.a, trunc.b))

    def node_filter(lams):
        r = np.abs(lams)
        rt = trunc.radius(np.angle(lams))
        return (r > trunc.r1 * 0.98) & (r < rt * 1.02)

    t_raw = scattering_from_dn(Lq, L0, lam_grid, E_re, nb=nb, guard=guard,
                               node_filter=node_filter)
    t_R = truncate_scattering(t_raw, trunc)
    ax = np.linspace(-0.9, 0.9, n_z)
    zz = (ax[None, :] + 1j * ax[:, None]).ravel()
    zz = zz[np.abs(zz) <= 0.9]
    d = scene.boundary_diffusion
    res = reconstruct_conductivity(t_R, E_re, zz, d, r_star=r_star,
                                   width=r_width)
    truth = scene.diffusion(zz)
    good = res.ok
    num = np.sqrt(np.mean((res.values[good] - truth[good]) ** 2))
    den = np.sqrt(np.mean(truth[good] ** 2))
    params = dict(n_modes=n_modes, mesh_refine=mesh_refine, nb=nb,
                  lambda_m=lambda_m, n_z=n_z, r_star=r_star, r_width=r_width,
                  noise=noise, seed=seed, guard=guard,
                  omega=scene.omega, energy=complex(E),
                  ellipse=(trunc.a, trunc.b, trunc.phi, trunc.r1))
    return DotResult(energy=E, z_nodes=zz, d_recon=res.values,
                     d_truth=truth, ok=good,
                     rel_l2_error=float(num / den), scattering=t_raw,
                     truncated=t_R, params=params)
