"""Spectral-parameter algebra shared by every solver.

The spectral parameter comes in two flavours: a complex 2-vector
``zeta = (zeta1, zeta2)`` constrained by ``zeta . zeta = E`` and the scalar
``lambda`` that parametrizes this variety,

    lambda = (zeta1 + i*zeta2) / sqrt(E),
    zeta1  = (lambda + 1/lambda) * sqrt(E) / 2,
    zeta2  = (1/lambda - lambda) * i * sqrt(E) / 2.

Branch convention: ``sqrt(E) = i*sqrt(|E|)`` for real E < 0, principal
square root otherwise.  With this branch the exponential factors
``e_{+lambda}``/``e_{-lambda}`` are unimodular for real negative energy.

Everything here is a pure function of its inputs; no global mutable state.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

GUARD_DELTA_DEFAULT = 0.05


class DbarError(Exception):
    """Base class for all package errors."""


class InvalidArgument(DbarError, ValueError):
    """An operation was called outside its domain of validity."""


class GuardBandError(InvalidArgument):
    """|lambda| falls inside the guard band around the unit circle."""


class NumericalFailure(DbarError, RuntimeError):
    """A numerical routine produced garbage (NaN, non-convergence...)."""

    def __init__(self, message, **context):
        super().__init__(message)
        self.context = dict(context)


class ExceptionalPointSuspected(NumericalFailure):
    """Iterative CGO solve failed to converge.

    Non-convergence of the Lippmann-Schwinger solve is the operational
    signal for a (near-)exceptional spectral parameter; the scanner
    catches this exception and records the cell as flagged.
    """


class WellPosednessError(NumericalFailure):
    """The Dirichlet problem appears singular (zero is an eigenvalue)."""


class IllConditionedSystem(NumericalFailure):
    """Boundary linear system too ill-conditioned; truncation needed."""


def energy_sqrt(E: complex) -> complex:
    """Square root of the energy with the fixed branch.

    Real E < 0 maps to ``i*sqrt(|E|)``; anything else uses the principal
    branch (relevant only for forward simulation with modulated input).
    """
    E = complex(E)
    if E.imag == 0.0:
        if E.real >= 0.0:
            raise InvalidArgument(f"energy must have negative real part, got {E}")
        return 1j * math.sqrt(-E.real)
    return cmath.sqrt(E)


def check_energy(E: complex, allow_complex: bool = False) -> complex:
    """Validate an energy value and return it as a complex number."""
    E = complex(E)
    if E.real >= 0.0:
        raise InvalidArgument(f"Re(E) must be negative, got {E}")
    if E.imag != 0.0 and not allow_complex:
        raise InvalidArgument(f"this operation requires real E < 0, got {E}")
    return E


def check_lambda(lam: complex, guard: float | None = None) -> complex:
    """Validate a spectral parameter; optionally enforce the guard band.

    ``guard`` is the half width delta of the refused band around
    |lambda| = 1 where the Green's function evaluation degenerates.
    """
    lam = complex(lam)
    if lam == 0:
        raise InvalidArgument("spectral parameter lambda must be nonzero")
    if guard is not None and abs(abs(lam) - 1.0) < guard:
        raise GuardBandError(
            f"|lambda| = {abs(lam):.6g} inside guard band (1 +- {guard})"
        )
    return lam


def lambda_to_zeta(lam: complex, E: complex) -> tuple[complex, complex]:
    """Map the scalar spectral parameter to the 2-vector form.

    Returns (zeta1, zeta2) with zeta1^2 + zeta2^2 = E and
    zeta1 + i*zeta2 = lambda * sqrt(E).
    """
    lam = check_lambda(lam)
    sE = energy_sqrt(E)
    zeta1 = (lam + 1.0 / lam) * sE / 2.0
    zeta2 = (1.0 / lam - lam) * 1j * sE / 2.0
    return zeta1, zeta2


@dataclass(frozen=True)
class ReducedZeta:
    """Reduced spectral parameters for the Green's-function quadratures.

    For real E < 0 and rho = |lambda| the reduced pair is

        k1 = sqrt(|E|) * (rho - 1/rho) / 2,
        k2 = sqrt(|E|) * (rho + 1/rho) / 2,

    so that k2 > |k1| >= 0 and k1^2 - k2^2 = E.  ``rotation`` is the angle
    by which z must be rotated (z -> exp(i*rotation)*z) before evaluating
    the reduced-form Green's function; the full value is the conjugate of
    the reduced evaluation at the rotated point (the orientation of
    (Re zeta, Im zeta) is opposite to the reduced frame's, which a proper
    rotation cannot fix, so a conjugation is picked up instead).
    """

    k1: float
    k2: float
    rotation: float

    @property
    def energy(self) -> float:
        return self.k1**2 - self.k2**2


def reduce_zeta(lam: complex, E: float, guard: float = 0.0) -> ReducedZeta:
    """Reduce lambda at real negative energy to (k1, k2, rotation).

    Raises InvalidArgument for |lambda| = 1 (then k1 = 0, which the
    quadrature formulas cannot handle) or inside a nonzero guard band.
    """
    E = check_energy(E)
    lam = check_lambda(lam, guard=guard if guard > 0 else None)
    rho = abs(lam)
    if rho == 1.0:
        raise InvalidArgument("|lambda| = 1 is degenerate (k1 = 0)")
    theta = cmath.phase(lam)
    root = math.sqrt(-E.real)
    k1 = root * (rho - 1.0 / rho) / 2.0
    k2 = root * (rho + 1.0 / rho) / 2.0
    rotation = math.remainder(math.pi / 2.0 - theta, 2.0 * math.pi)
    return ReducedZeta(k1=k1, k2=k2, rotation=rotation)


def exp_factor(z, lam: complex, E: complex, sign: int = +1):
    """Exponential factor e_{+lambda}(z) (sign=+1) or e_{-lambda}(z) (-1).

        e_{+lambda}(z) = exp( (i sqrt(E)/2) (1 - 1/(lam conj(lam)))
                              (-z conj(lam) + conj(z) lam) )

    For real E < 0 the exponent is purely imaginary, so |e_{+-lambda}| = 1,
    and e_{+lambda} * e_{-lambda} = 1 always.  Vectorized over z.
    """
    lam = check_lambda(lam)
    if sign not in (+1, -1):
        raise InvalidArgument("sign must be +1 or -1")
    z = np.asarray(z, dtype=complex)
    sE = energy_sqrt(E)
    coef = sign * 0.5j * sE * (1.0 - 1.0 / (lam * np.conj(lam)))
    out = np.exp(coef * (-z * np.conj(lam) + np.conj(z) * lam))
    return out if out.shape else complex(out)


def exp_zeta(z, lam: complex, E: complex):
    """Oscillatory factor exp(i zeta . z) = exp((i sqrt(E)/2)(lam conj(z) + z/lam)).

    This is the plane-wave part of the CGO solution and the prefactor
    turning the Faddeev kernel g into G.  Vectorized over z.
    """
    lam = check_lambda(lam)
    z = np.asarray(z, dtype=complex)
    sE = energy_sqrt(E)
    out = np.exp(0.5j * sE * (lam * np.conj(z) + z / lam))
    return out if out.shape else complex(out)


def exp_scatter_weight(z, lam: complex, E: complex):
    """Boundary weight exp((-i sqrt(E)/2)(conj(lam) z + conj(z)/conj(lam))).

    Used when integrating DN differences against boundary traces to form
    the scattering transform.  Vectorized over z.
    """
    lam = check_lambda(lam)
    z = np.asarray(z, dtype=complex)
    sE = energy_sqrt(E)
    cl = np.conj(lam)
    out = np.exp(-0.5j * sE * (cl * z + np.conj(z) / cl))
    return out if out.shape else complex(out)


@dataclass(frozen=True)
class PeriodicGrid:
    """Uniform 2^m x 2^m grid on the square [-s, s)^2.

    Nodes are z_jk = -s + h*(j + i*k) with h = 2s/2^m.  The same type
    serves z-space grids (s > 1 so the unit disk fits) and lambda-space
    grids (s sized to the truncation region).
    """

    m: int
    half_width: float

    def __post_init__(self):
        if self.m < 5:
            raise InvalidArgument(f"grid exponent m must be >= 5, got {self.m}")
        if self.half_width <= 0:
            raise InvalidArgument("grid half width must be positive")

    @property
    def n(self) -> int:
        return 1 << self.m

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_width / self.n

    def axis(self) -> np.ndarray:
        """1-D node coordinates along either axis."""
        return -self.half_width + self.spacing * np.arange(self.n)

    def nodes(self) -> np.ndarray:
        """Complex node array of shape (n, n); first axis is x2 (rows)."""
        x = self.axis()
        return x[None, :] + 1j * x[:, None]

    def wrapped_axis(self, doubled: bool = False) -> np.ndarray:
        """Signed displacement coordinates in FFT (wrapped) ordering.

        With ``doubled`` the axis covers the zero-padded 2n grid, which is
        what exact linear convolution by FFT needs.
        """
        n = 2 * self.n if doubled else self.n
        k = np.arange(n)
        return self.spacing * (((k + n // 2) % n) - n // 2)

    def wrapped_nodes(self, doubled: bool = False) -> np.ndarray:
        v = self.wrapped_axis(doubled)
        return v[None, :] + 1j * v[:, None]
