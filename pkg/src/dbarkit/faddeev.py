"""Faddeev Green's function g and its exponentially modified sibling G.

At real negative energy, g is evaluated through three one-dimensional
integral representations selected by the position of the (rotated)
evaluation point:

  formula 1 (moderate angles, x1 > 0):
      g = (1/2pi) e^{-i x1 k1} Re int_0^inf e^{i x2 t}
              e^{-x1 sqrt((t + i k2)^2 - E)} / sqrt((t + i k2)^2 - E) dt
  formula 2 (x2 >= x1/2; formula 1 rotated onto the positive imaginary
  axis, which is legal because the branch points of the root sit on the
  negative imaginary axis):
      g = (1/2pi) e^{-i x1 k1} (1/x2) Re int_0^inf e^{-t}
              e^{-i x1 sqrt(t^2/x2^2 + 2 t k2/x2 + k1^2)}
              / sqrt(t^2/x2^2 + 2 t k2/x2 + k1^2) dt
  formula 3 (x2 < -x1):
      g = (1/2pi) e^{-i x1 k1} Re ( I1 - i e^{i x2} int_0^inf e^{x2 t}
              e^{-x1 sqrt((1 + (k2 - t) i)^2 - E)}
              / sqrt((1 + (k2 - t) i)^2 - E) dt ),
      I1 = int_0^1 e^{i t x2} e^{-x1 sqrt((t + i k2)^2 - E)}
              / sqrt((t + i k2)^2 - E) dt.

Each infinite integral is cut at a finite limit T_i chosen so the
remainder (bounded by an exponential-integral tail) stays below 1e-8,
then computed by composite Gauss-Legendre quadrature whose panel count
doubles until the leading digits stop moving.

Points with |z| < 1 are pushed outward with the exact scaling identity
g(z; lam, E) = g(a z; lam, E/a^2), points with x1 < 0 are reflected with
the switching identity g(-x1 + i x2) = e^{2 i k1 x1} g(x1 + i x2), and
arbitrary arg(lambda) is reduced to the (k1, k2) quadrature frame by a
rotation plus complex conjugation (see core.ReducedZeta).  Both
identities are derivable from the Fourier representation of g and are
exercised against an independent oracle in the test suite.

Known limitation: g is hard-zeroed for |z| < 0.01.  This keeps the
convolution kernels finite but is a genuine error source for very small
arguments (no layer-potential correction is attempted).
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from dbarkit.core import (
    GUARD_DELTA_DEFAULT,
    InvalidArgument,
    NumericalFailure,
    PeriodicGrid,
    ReducedZeta,
    check_energy,
    check_lambda,
    exp_zeta,
    reduce_zeta,
)

Z_CUTOFF = 0.01
_SCALE_RULES = ((0.5, 100.0), (1.0, 2.0))  # (|z| upper bound, outward factor)
_MAX_NODES = 1 << 18


@dataclass(frozen=True)
class QuadratureSpec:
    """Composite Gauss-Legendre controls for the g quadratures.

    ``panels`` is the initial number of splits of [0, T_i]; the engine
    doubles it until the first ``target_digits`` digits of the result
    stop changing.
    """

    nodes_per_panel: int = 16
    panels: int = 8
    target_digits: int = 8

    def __post_init__(self):
        if self.nodes_per_panel < 4:
            raise InvalidArgument("nodes_per_panel must be >= 4")
        if self.panels < 1:
            raise InvalidArgument("panels must be >= 1")
        if self.target_digits < 1:
            raise InvalidArgument("target_digits must be >= 1")

    @property
    def tol(self) -> float:
        return 0.5 * 10.0 ** (-self.target_digits)


DEFAULT_QUAD = QuadratureSpec()

_REGIONS = ("zero_cutoff", "scale100", "scale2", "switch_x1",
            "formula_gz1", "formula_gz2", "formula_gz3")


def region_tag(z: complex) -> str:
    """Deterministic dispatch tag for an evaluation point (pre-rotation
    tags refer to |z|; formula tags assume the reduced frame)."""
    az = abs(z)
    if az < Z_CUTOFF:
        return "zero_cutoff"
    if az < 0.5:
        return "scale100"
    if az < 1.0:
        return "scale2"
    x1, x2 = z.real, z.imag
    if x1 < 0:
        return "switch_x1"
    if x2 >= 0.5 * x1:
        return "formula_gz2"
    if x2 < -x1:
        return "formula_gz3"
    return "formula_gz1"


def _c1(k1: float, k2: float) -> float:
    return math.cos(cmath.phase(cmath.sqrt(
        k1 * k1 + 2.0 * math.sqrt(2.0) * abs(k1) * k2 * 1j)))


def _c2(k1: float, k2: float) -> float:
    return math.cos(cmath.phase(cmath.sqrt(1.0 - k1 * k1 + 2.0 * k2 * 1j)))


def truncation_limits(x1, x2, k1: float, k2: float):
    """Finite upper limits (T1, T2, T3) for the three g quadratures.

    T1 = max(14 sqrt2 / (x1 c1), sqrt2 |k1|), T2 = 14,
    T3 = 14 / (c2 x1 - x2); the constants c1, c2 come from the argument
    of the integrand square roots and guarantee |g - g^{T_i}| < 1e-8.

    Raises InvalidArgument when x1 <= 0 (T1 undefined) or when
    c2*x1 - x2 <= 0 (point outside formula 3's region, T3 undefined).
    """
    if not (k2 > abs(k1) > 0.0):
        raise InvalidArgument(f"need k2 > |k1| > 0, got k1={k1}, k2={k2}")
    x1 = float(x1)
    x2 = float(x2)
    if x1 <= 0.0:
        raise InvalidArgument("T1 requires x1 > 0")
    c1 = _c1(k1, k2)
    c2 = _c2(k1, k2)
    denom3 = c2 * x1 - x2
    if denom3 <= 0.0:
        raise InvalidArgument("T3 requires c2*x1 - x2 > 0 (wrong region)")
    s2 = math.sqrt(2.0)
    T1 = max(14.0 * s2 / (x1 * c1), s2 * abs(k1))
    T2 = 14.0
    T3 = 14.0 / denom3
    return T1, T2, T3


def _t1_limit(x1, k1, k2):
    c1 = _c1(k1, k2)
    s2 = math.sqrt(2.0)
    return np.maximum(14.0 * s2 / (x1 * c1), s2 * abs(k1))


def _t3_limit(x1, x2, k1, k2):
    return 14.0 / (_c2(k1, k2) * x1 - x2)


_GAUSS_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _composite_rule(panels: int, npp: int):
    """Nodes/weights of a composite Gauss-Legendre rule on [0, 1]."""
    if npp not in _GAUSS_CACHE:
        _GAUSS_CACHE[npp] = np.polynomial.legendre.leggauss(npp)
    x, w = _GAUSS_CACHE[npp]
    width = 1.0 / panels
    left = width * np.arange(panels)
    u = (left[:, None] + 0.5 * width * (x[None, :] + 1.0)).ravel()
    wu = np.broadcast_to(0.5 * width * w[None, :], (panels, npp)).ravel()
    return u, wu


def _integrate_batch(integrand, T, osc, quad: QuadratureSpec, sqrt_map: bool):
    """Adaptively integrate ``integrand`` over [0, T_p] for a batch of points.

    integrand(t) takes node matrices of shape (P_active, n_nodes) and must
    broadcast any per-point data it closed over via the ``rows`` index
    passed as second argument.  ``sqrt_map`` turns on the t = T u^2
    substitution that clusters nodes near t = 0 (needed where the
    integrand has an integrable 1/|k1|-scale peak there).
    """
    T = np.atleast_1d(np.asarray(T, dtype=float))
    P = T.size
    vals = np.zeros(P, dtype=complex)
    alive = np.arange(P)
    panels = max(quad.panels, int(np.ceil(np.max(osc))) + 4)
    prev = None
    while alive.size:
        if panels * quad.nodes_per_panel > _MAX_NODES:
            raise NumericalFailure(
                "quadrature failed to stabilize",
                panels=panels, points=int(alive.size))
        u, wu = _composite_rule(panels, quad.nodes_per_panel)
        Ta = T[alive][:, None]
        if sqrt_map:
            t = Ta * u[None, :] ** 2
            wt = Ta * (2.0 * u * wu)[None, :]
        else:
            t = Ta * u[None, :]
            wt = Ta * wu[None, :]
        cur = np.sum(integrand(t, alive) * wt, axis=1)
        if prev is not None:
            err = np.abs(cur - prev[alive])
            tol = quad.tol * np.maximum(1.0, np.abs(cur))
            done = err <= tol
            vals[alive[done]] = cur[done]
            keep = ~done
            nxt = np.zeros(P, dtype=complex)
            nxt[alive] = cur
            prev = nxt
            alive = alive[keep]
        else:
            prev = np.zeros(P, dtype=complex)
            prev[alive] = cur
        panels *= 2
    return vals


def _gz1_batch(x1, x2, k1, k2, quad, limit_scale=1.0):
    """Formula 1 on arrays of reduced-frame points (x1 > 0)."""
    T = _t1_limit(x1, k1, k2) * limit_scale
    osc = (T * np.abs(x2) + x1 * k2) / (2.0 * math.pi) + 1.0
    X1 = x1[:, None]
    X2 = x2[:, None]

    def f(t, rows):
        S = np.sqrt(t * t + (2j * k2) * t - k1 * k1)
        return np.exp(1j * X2[rows] * t - X1[rows] * S) / S

    I = _integrate_batch(f, T, osc, quad, sqrt_map=True)
    return np.exp(-1j * x1 * k1) * I.real / (2.0 * math.pi)


def _gz2_batch(x1, x2, k1, k2, quad, limit_scale=1.0):
    """Formula 2 on arrays of reduced-frame points (x2 > 0)."""
    T = np.full(x1.shape, 14.0) * limit_scale
    Rend = np.sqrt(T * T / (x2 * x2) + 2.0 * k2 * T / x2 + k1 * k1)
    osc = np.abs(x1) * (Rend - abs(k1)) / (2.0 * math.pi) + 1.0
    X1 = x1[:, None]
    X2 = x2[:, None]

    def f(t, rows):
        Q = np.sqrt(t * t / (X2[rows] ** 2) + (2.0 * k2 / X2[rows]) * t
                    + k1 * k1)
        return np.exp(-t - 1j * X1[rows] * Q) / Q

    I = _integrate_batch(f, T, osc, quad, sqrt_map=True)
    return np.exp(-1j * x1 * k1) * (I / x2).real / (2.0 * math.pi)


def _gz3_batch(x1, x2, k1, k2, quad, limit_scale=1.0):
    """Formula 3 on arrays of reduced-frame points (x2 < -x1 <= 0).

    The published cut 14/(c2 x1 - x2) credits the tail integrand with a
    decay it does not have (Re of the root saturates near 1 instead of
    growing), so the evaluator integrates to 14/(-x2), which restores the
    1e-8 remainder bound; 14/(-x2) >= 14/(c2 x1 - x2) always.
    """
    E = k1 * k1 - k2 * k2
    T = (14.0 / (-x2)) * limit_scale
    X1 = x1[:, None]
    X2 = x2[:, None]

    def f_head(t, rows):
        S = np.sqrt(t * t + (2j * k2) * t - k1 * k1)
        return np.exp(1j * X2[rows] * t - X1[rows] * S) / S

    osc1 = (np.abs(x2) + x1 * k2) / (2.0 * math.pi) + 1.0
    I1 = _integrate_batch(f_head, np.ones_like(T), osc1, quad, sqrt_map=True)

    def f_tail(t, rows):
        W = np.sqrt((1.0 + (k2 - t) * 1j) ** 2 - E)
        return np.exp(X2[rows] * t - X1[rows] * W) / W

    osc2 = (x1 * (T + k2) + np.abs(x2)) / (2.0 * math.pi) + 1.0
    J = _integrate_batch(f_tail, T, osc2, quad, sqrt_map=False)
    total = I1 - 1j * np.exp(1j * x2) * J
    return np.exp(-1j * x1 * k1) * total.real / (2.0 * math.pi)


def _select_formula(x1, x2):
    """Formula index (1, 2, 3) for reduced-frame points with x1 >= 0."""
    idx = np.ones(x1.shape, dtype=int)
    idx[x2 >= 0.5 * x1] = 2
    idx[x2 < -x1] = 3
    return idx


def green_reduced(x1: float, x2: float, rz: ReducedZeta,
                  quad: QuadratureSpec = DEFAULT_QUAD) -> complex:
    """Reduced-frame g at a single point, by whichever formula owns it.

    Requires x1 >= 0 and x1 + i x2 at distance >= 1 from the origin
    (smaller |z| is reached through the dispatcher's scaling step).
    """
    x1 = float(x1)
    x2 = float(x2)
    if x1 < 0.0:
        raise InvalidArgument("green_reduced needs x1 >= 0 (use the "
                              "switching relation first)")
    if math.hypot(x1, x2) < 1.0:
        raise InvalidArgument("green_reduced needs |z| >= 1 (use the "
                              "scaling relation first)")
    if not (rz.k2 > abs(rz.k1) > 0.0):
        raise InvalidArgument("need k2 > |k1| > 0")
    return complex(_green_reduced_batch(
        np.array([x1]), np.array([x2]), rz.k1, rz.k2, quad)[0])


def _green_reduced_batch(x1, x2, k1, k2, quad):
    out = np.zeros(x1.shape, dtype=complex)
    idx = _select_formula(x1, x2)
    for formula, fn in ((1, _gz1_batch), (2, _gz2_batch), (3, _gz3_batch)):
        sel = np.nonzero(idx == formula)[0]
        if sel.size == 0:
            continue
        vals = fn(x1[sel], x2[sel], k1, k2, quad)
        if np.any(np.isnan(vals)):
            raise NumericalFailure("NaN from quadrature",
                                   region=f"formula_gz{formula}")
        out[sel] = vals
    return out


def _green_scaled_group(z, lam, E, scale, quad):
    """g at points |scale * z| >= 1 via rotation (+conjugation) and switching."""
    E_s = E / (scale * scale)
    rz = reduce_zeta(lam, E_s)
    w = np.exp(1j * rz.rotation) * (scale * z)
    x1 = w.real.copy()
    x2 = w.imag.copy()
    neg = x1 < 0.0
    x1[neg] = -x1[neg]
    vals = _green_reduced_batch(x1, x2, rz.k1, rz.k2, quad)
    # switching relation picks up a phase for reflected points
    vals[neg] *= np.exp(2j * rz.k1 * x1[neg])
    return np.conj(vals)


def green_faddeev(z, lam: complex, E: float, *,
                  guard: float = GUARD_DELTA_DEFAULT,
                  quad: QuadratureSpec = DEFAULT_QUAD):
    """Faddeev Green's function g(z) at real energy E < 0.

    Vectorized over z.  Dispatch: hard zero below |z| = 0.01, outward
    scaling by 100 (resp. 2) for |z| < 0.5 (resp. < 1), then rotation to
    the reduced frame, the switching relation for x1 < 0, and one of the
    three quadrature formulas.
    """
    E = complex(check_energy(E)).real
    lam = check_lambda(lam, guard=guard)
    z_arr = np.asarray(z, dtype=complex)
    flat = z_arr.ravel()
    out = np.zeros(flat.shape, dtype=complex)
    az = np.abs(flat)
    lower = Z_CUTOFF
    for bound, factor in _SCALE_RULES:
        sel = np.nonzero((az >= lower) & (az < bound))[0]
        if sel.size:
            out[sel] = _green_scaled_group(flat[sel], lam, E, factor, quad)
        lower = bound
    sel = np.nonzero(az >= 1.0)[0]
    if sel.size:
        out[sel] = _green_scaled_group(flat[sel], lam, E, 1.0, quad)
    out = out.reshape(z_arr.shape)
    return out if out.shape else complex(out)


def green_G(z, lam: complex, E: float, *,
            guard: float = GUARD_DELTA_DEFAULT,
            quad: QuadratureSpec = DEFAULT_QUAD):
    """G(z) = exp(i sqrt(E)/2 (lam conj(z) + z/lam)) * g(z).

    The single-layer kernel of the boundary integral equation.
    """
    g = green_faddeev(z, lam, E, guard=guard, quad=quad)
    return exp_zeta(z, lam, E) * g


_KERNEL_CACHE: dict[tuple, np.ndarray] = {}
_KERNEL_CACHE_MAX = 24


def faddeev_kernel(grid: PeriodicGrid, lam: complex, E: float, *,
                   guard: float = GUARD_DELTA_DEFAULT,
                   cutoff_radius: float = 2.0,
                   quad: QuadratureSpec = DEFAULT_QUAD) -> np.ndarray:
    """g sampled in wrapped (FFT) ordering and truncated at |z| <= cutoff.

    This is the convolution kernel of the Lippmann-Schwinger solver; the
    truncation plus grid half width > cutoff makes the periodized FFT
    convolution exact for sources in the unit disk.  Results are memoized
    per (grid, lambda, E, cutoff, quadrature) since the kernel is reused
    across solver iterations and scan cells.
    """
    key = (grid.m, grid.half_width, complex(lam), float(E), float(guard),
           float(cutoff_radius), quad.nodes_per_panel, quad.panels,
           quad.target_digits)
    hit = _KERNEL_CACHE.get(key)
    if hit is not None:
        return hit
    zz = grid.wrapped_nodes()
    kern = np.zeros(zz.shape, dtype=complex)
    mask = np.abs(zz) <= cutoff_radius
    kern[mask] = green_faddeev(zz[mask], lam, E, guard=guard, quad=quad)
    kern.setflags(write=False)
    if len(_KERNEL_CACHE) >= _KERNEL_CACHE_MAX:
        _KERNEL_CACHE.pop(next(iter(_KERNEL_CACHE)))
    _KERNEL_CACHE[key] = kern
    return kern
