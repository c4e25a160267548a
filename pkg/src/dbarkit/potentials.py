"""Analytic test potentials, conductivities, and DOT scenes.

The published case studies only show profile plots, so the profiles here
are parametrized smooth stand-ins with the same qualitative features:
C^2 radial bumps compactly supported in the unit disk, conductivities
that equal 1 near the boundary, and optical-coefficient scenes with
constant background values near the boundary.  Because every field is
analytic, ground truth for error reporting is exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from dbarkit.core import InvalidArgument


@dataclass(frozen=True)
class RadialBump:
    """C^2 radial bump a*(1-u^2)^3 with u = (r - center)/width."""

    amplitude: float
    width: float
    center: float = 0.0

    def _u(self, r):
        return (np.asarray(r, dtype=float) - self.center) / self.width

    def __call__(self, r):
        u = self._u(r)
        inside = np.abs(u) < 1.0
        out = np.zeros_like(u)
        v = u[inside]
        out[inside] = self.amplitude * (1.0 - v * v) ** 3
        return out

    def d1(self, r):
        u = self._u(r)
        inside = np.abs(u) < 1.0
        out = np.zeros_like(u)
        v = u[inside]
        out[inside] = self.amplitude * (-6.0 * v) * (1.0 - v * v) ** 2
        return out / self.width

    def d2(self, r):
        u = self._u(r)
        inside = np.abs(u) < 1.0
        out = np.zeros_like(u)
        v = u[inside]
        out[inside] = self.amplitude * (
            -6.0 * (1.0 - v * v) ** 2 + 24.0 * v * v * (1.0 - v * v))
        return out / self.width**2


@dataclass(frozen=True)
class RadialProfile:
    """Offset plus a sum of radial bumps, with analytic derivatives."""

    bumps: tuple[RadialBump, ...]
    offset: float = 0.0

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        return self.offset + sum(b(r) for b in self.bumps)

    def d1(self, r):
        r = np.asarray(r, dtype=float)
        return sum(b.d1(r) for b in self.bumps)

    def d2(self, r):
        r = np.asarray(r, dtype=float)
        return sum(b.d2(r) for b in self.bumps)

    @property
    def support_radius(self) -> float:
        return max((b.center + b.width for b in self.bumps), default=0.0)


# Rotationally symmetric C^2 test function used by the exceptional-point
# scan families; unit amplitude, supported in |z| < 0.9.
phi_bump = RadialProfile(bumps=(RadialBump(amplitude=1.0, width=0.9),))

# Radial test potentials ("case 1": single central feature, "case 2":
# annular feature with a central dip).
case1_potential = RadialProfile(bumps=(RadialBump(amplitude=3.0, width=0.8),))
case2_potential = RadialProfile(bumps=(
    RadialBump(amplitude=2.5, width=0.25, center=0.45),
    RadialBump(amplitude=-1.0, width=0.3),
))

# Radial conductivities, equal to 1 near the boundary ("case 3": central
# inclusion, "case 4": annular inclusion with a mild central deficit).
case3_sigma = RadialProfile(
    offset=1.0, bumps=(RadialBump(amplitude=1.0, width=0.7),))
case4_sigma = RadialProfile(
    offset=1.0, bumps=(
        RadialBump(amplitude=0.8, width=0.25, center=0.45),
        RadialBump(amplitude=-0.4, width=0.25),
    ))


def conductivity_potential(sigma: RadialProfile):
    """q = Laplacian(sqrt(sigma)) / sqrt(sigma) for a radial sigma.

    Radial chain rule with the r -> 0 limit handled analytically:
        q = s''/(2 s) - (s')^2/(4 s^2) + s'/(2 s r),
    and s'/r -> s''(0) at the origin.  Returns a callable of r.
    """

    def q(r):
        r = np.asarray(r, dtype=float)
        s = sigma(r)
        if np.any(s <= 0.0):
            raise InvalidArgument("conductivity must be strictly positive")
        s1 = sigma.d1(r)
        s2 = sigma.d2(r)
        ratio = np.empty_like(s1)
        small = r < 1e-12
        ratio[~small] = s1[~small] / r[~small]
        ratio[small] = s2[small]  # s'(r)/r -> s''(0)
        return s2 / (2 * s) - s1**2 / (4 * s**2) + ratio / (2 * s)

    return q


@dataclass(frozen=True)
class ExceptionalFamily:
    """One-parameter potential family scanned for exceptional points.

    kind 'alpha_phi' is q = alpha * phi; kind 'conductivity_plus_alpha_phi'
    is q = Laplacian(sqrt(sigma))/sqrt(sigma) + alpha * phi.
    """

    kind: str
    phi: RadialProfile = phi_bump
    sigma: RadialProfile = case3_sigma

    def __post_init__(self):
        if self.kind not in ("alpha_phi", "conductivity_plus_alpha_phi"):
            raise InvalidArgument(f"unknown family kind {self.kind!r}")

    def potential(self, alpha: float):
        if self.kind == "alpha_phi":
            return lambda r: alpha * self.phi(r)
        qc = conductivity_potential(self.sigma)
        return lambda r: qc(r) + alpha * self.phi(r)


@dataclass(frozen=True)
class Bump2D:
    """C^2 bump a*(1-u^2)^3, u = |z - z0|/width, at an arbitrary center."""

    amplitude: float
    width: float
    center: complex = 0.0

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        u = np.abs(z - self.center) / self.width
        inside = u < 1.0
        out = np.zeros(z.shape, dtype=float)
        v = u[inside]
        out[inside] = self.amplitude * (1.0 - v * v) ** 3
        return out


@dataclass(frozen=True)
class DotScene:
    """Optical coefficients on the unit disk (units: 1/cm, cm/s, 1/s).

    mu_a and mu_s are background values plus compactly supported
    inclusions, constant near the boundary so the transformation to the
    Schroedinger problem has well defined boundary data.
    """

    mu_a_background: float = 0.1
    mu_s_background: float = 10.0
    mu_a_inclusions: tuple[Bump2D, ...] = (
        Bump2D(amplitude=0.4, width=0.55, center=-0.32 + 0.18j),
    )
    mu_s_inclusions: tuple[Bump2D, ...] = (
        Bump2D(amplitude=40.0, width=0.55, center=0.32 - 0.16j),
    )
    anisotropy: float = 0.6
    omega: float = 0.0
    light_speed: float = 3.0e10

    def mu_a(self, z):
        z = np.asarray(z, dtype=complex)
        return self.mu_a_background + sum(b(z) for b in self.mu_a_inclusions)

    def mu_s(self, z):
        z = np.asarray(z, dtype=complex)
        return self.mu_s_background + sum(b(z) for b in self.mu_s_inclusions)

    def diffusion(self, z):
        """D = 1 / (3 (mu_a + (1 - g) mu_s))."""
        return 1.0 / (3.0 * (self.mu_a(z) + (1.0 - self.anisotropy) * self.mu_s(z)))

    @property
    def boundary_diffusion(self) -> float:
        return 1.0 / (3.0 * (self.mu_a_background
                             + (1.0 - self.anisotropy) * self.mu_s_background))

    @property
    def boundary_absorption(self) -> float:
        return self.mu_a_background

    @property
    def energy(self) -> complex:
        """E = -(m/d + i omega/(d c)) with boundary values m, d."""
        d = self.boundary_diffusion
        m = self.boundary_absorption
        return -(m / d + 1j * self.omega / (d * self.light_speed))

    def schrodinger_q(self, z, spacing: float | None = None):
        """Physical potential q = D^{-1/2} Lap(D^{1/2}) + (mu_a + i w/c)/D.

        Lap(sqrt(D)) uses second-order central differences on an implicit
        fine grid (``spacing``, default 1/400); the scene is constant near
        the boundary so the stencil never reaches outside usable values.
        This equals q0 - E for the compactly supported q0 and the scene's
        complex energy.
        """
        z = np.asarray(z, dtype=complex)
        h = spacing if spacing is not None else 1.0 / 400.0
        sqD = lambda w: np.sqrt(self.diffusion(w))
        lap = (sqD(z + h) + sqD(z - h) + sqD(z + 1j * h) + sqD(z - 1j * h)
               - 4.0 * sqD(z)) / (h * h)
        absorb = self.mu_a(z) + 1j * self.omega / self.light_speed
        return lap / sqD(z) + absorb / self.diffusion(z)

    def q0(self, z, spacing: float | None = None):
        """Compactly supported part: q0 = q + E (zero near the boundary)."""
        return self.schrodinger_q(z, spacing) + self.energy
