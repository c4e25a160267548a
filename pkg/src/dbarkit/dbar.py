"""Truncated D-bar equation solver in the spectral variable.

For a fixed evaluation point z, solves

    mu_R(lambda) = 1 - C T_R mu_R(lambda)

on a square lambda grid, where T_R multiplies by
sgn(|lambda|^2 - 1) t_R(lambda) / (4 pi conj(lambda)) e_{-lambda}(z) and
conjugates its argument, and C is the Cauchy transform (convolution with
-1/(pi lambda)), realized as an exact linear convolution by zero-padded
FFT.  Because T_R conjugates, the operator is only real-linear, so GMRES
runs on the real/imaginary split system of doubled dimension.

The sign factor's discontinuity on |lambda| = 1 is inert by construction:
truncated data vanishes on the annulus [1/R1, R1].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import LinearOperator, gmres

from dbarkit.core import (
    InvalidArgument,
    NumericalFailure,
    PeriodicGrid,
    check_energy,
    energy_sqrt,
)
from dbarkit.bie import ScatteringGrid

_CAUCHY_CACHE: dict[tuple, np.ndarray] = {}


def _cauchy_symbol(grid: PeriodicGrid) -> np.ndarray:
    """FFT of the sampled -1/(pi v) kernel on the zero-padded grid."""
    key = (grid.m, grid.half_width)
    hit = _CAUCHY_CACHE.get(key)
    if hit is not None:
        return hit
    vv = grid.wrapped_nodes(doubled=True)
    kern = np.zeros(vv.shape, dtype=complex)
    nz = vv != 0
    kern[nz] = -1.0 / (np.pi * vv[nz])
    sym = np.fft.fft2(kern) * grid.spacing**2
    sym.setflags(write=False)
    if len(_CAUCHY_CACHE) > 16:
        _CAUCHY_CACHE.pop(next(iter(_CAUCHY_CACHE)))
    _CAUCHY_CACHE[key] = sym
    return sym


def apply_cauchy(f: np.ndarray, grid: PeriodicGrid) -> np.ndarray:
    """Cauchy transform Cf(lambda) = (1/pi) int f(w)/(w - lambda) dw.

    Exact discrete linear convolution (no wrap-around) for f supported
    anywhere on the grid, via zero padding to twice the grid size.
    """
    n = grid.n
    if f.shape != (n, n):
        raise InvalidArgument("field shape does not match grid")
    pad = np.zeros((2 * n, 2 * n), dtype=complex)
    pad[:n, :n] = f
    out = np.fft.ifft2(np.fft.fft2(pad) * _cauchy_symbol(grid))
    return out[:n, :n]


def _t_multiplier(t: ScatteringGrid, z: complex, E: float) -> np.ndarray:
    """Pointwise factor of T_R: sgn(|l|^2-1) t(l)/(4 pi conj(l)) e_{-l}(z)."""
    nodes = t.grid.nodes()
    safe = np.where(nodes == 0, 1.0, nodes)
    sE = energy_sqrt(E)
    expo = np.exp(-0.5j * sE * (1.0 - 1.0 / (safe * np.conj(safe)))
                  * (-z * np.conj(safe) + np.conj(z) * safe))
    sign = np.sign(np.abs(nodes) ** 2 - 1.0)
    mult = sign * t.values / (4.0 * np.pi * np.conj(safe)) * expo
    return np.where(t.values == 0.0, 0.0, mult)


def apply_T(t: ScatteringGrid, f: np.ndarray, z: complex, E: float
            ) -> np.ndarray:
    """T_R f = sgn(|l|^2 - 1) t(l)/(4 pi conj(l)) e_{-l}(z) conj(f)."""
    if f.shape != t.values.shape:
        raise InvalidArgument("field shape does not match scattering grid")
    return _t_multiplier(t, z, E) * np.conj(f)


@dataclass(frozen=True)
class DbarSolution:
    """mu_R(z, .) over the lambda grid at one evaluation point z."""

    z: complex
    grid: PeriodicGrid
    mu: np.ndarray
    iterations: int
    residual: float

    def annulus_mean_re_sq(self, r_star: float, width: float) -> float:
        """Mean of Re(mu)^2 over grid nodes with | |lambda| - r* | <= width."""
        r = np.abs(self.grid.nodes())
        sel = np.abs(r - r_star) <= width
        if not np.any(sel):
            raise InvalidArgument(
                f"no lambda nodes within {width} of radius {r_star}")
        return float(np.mean(self.mu.real[sel] ** 2))


def write_mu_csv(path, sol: DbarSolution) -> None:
    """Debug dump of mu over the lambda grid (row-major)."""
    import csv

    nodes = sol.grid.nodes()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["re_lambda", "im_lambda", "re_mu", "im_mu"])
        for lam, mu in zip(nodes.ravel(), sol.mu.ravel()):
            w.writerow([repr(float(lam.real)), repr(float(lam.imag)),
                        repr(float(mu.real)), repr(float(mu.imag))])


def solve_dbar(t: ScatteringGrid, z: complex, E: float, *,
               rtol: float = 1e-6, maxiter: int = 200) -> DbarSolution:
    """Solve the truncated D-bar integral equation at evaluation point z.

    The real-linear operator I + C T_R is solved by restart-free GMRES on
    the split [Re mu; Im mu] system.  The reported residual is the true
    relative defect ||mu + C T_R mu - 1||_2 / ||1||_2, recomputed after
    the solve.
    """
    E = complex(check_energy(E)).real
    grid = t.grid
    n = grid.n
    mult = _t_multiplier(t, complex(z), E)
    if not np.any(mult):
        one = np.ones((n, n), dtype=complex)
        return DbarSolution(z=complex(z), grid=grid, mu=one, iterations=0,
                            residual=0.0)

    def op_complex(u):
        return u + apply_cauchy(mult * np.conj(u), grid)

    def matvec(v):
        u = v[:n * n].reshape(n, n) + 1j * v[n * n:].reshape(n, n)
        w = op_complex(u)
        return np.concatenate([w.real.ravel(), w.imag.ravel()])

    op = LinearOperator((2 * n * n, 2 * n * n), matvec=matvec, dtype=float)
    rhs = np.concatenate([np.ones(n * n), np.zeros(n * n)])
    history = []
    sol, info = gmres(op, rhs, x0=rhs.copy(), rtol=rtol, atol=0.0,
                      restart=maxiter, maxiter=1,
                      callback=lambda pr: history.append(float(pr)),
                      callback_type="pr_norm")
    mu = sol[:n * n].reshape(n, n) + 1j * sol[n * n:].reshape(n, n)
    defect = op_complex(mu) - 1.0
    residual = float(np.linalg.norm(defect) / np.sqrt(n * n))
    if info != 0:
        raise NumericalFailure(
            f"D-bar solve did not converge at z={z}",
            z=z, iterations=len(history), residual=residual,
            history=history)
    return DbarSolution(z=complex(z), grid=grid, mu=mu,
                        iterations=len(history), residual=residual)
