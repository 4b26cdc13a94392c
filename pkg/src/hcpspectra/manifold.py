"""Semiclassical initial state: allowed region, eikonal, amplitude, branch momenta.

The WKB form of the bound state attaches to every admissible position r0 a
bi-valued radial momentum field +/- p(r0, eps0), p = sqrt(2(eps0 + 1/r0)).
The two signs are the outgoing/incoming branches of the radial motion and
together they define the Lagrangian manifold all trajectories start from.

Validity guards: the WKB state is meaningless inside the core region and at
the outer turning point where p -> 0.  Evaluation is refused for
r0 < r_core(l0) and for p < P_FLOOR rather than returning silently wrong
numbers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .model import RydbergState

P_FLOOR = 1e-4  # atomic momentum; evaluation refused closer to the turning point


def r_core(l0: int) -> float:
    """Inner validity radius in bohr: 10 * max(1, l0^2)."""
    return 10.0 * max(1, l0 * l0)


class ManifoldDomainError(ValueError):
    """Raised when a point lies outside the validity region of the WKB state."""


def radial_momentum(r0, eps0):
    """p(r0, eps0) = sqrt(2(eps0 + 1/r0)); accepts scalars or arrays.

    Raises ManifoldDomainError beyond the turning point (eps0 + 1/r0 < 0).
    """
    r0 = np.asarray(r0, dtype=float)
    arg = 2.0 * (eps0 + 1.0 / r0)
    if np.any(r0 <= 0) or np.any(arg < 0):
        raise ManifoldDomainError(
            f"r0={r0} outside classically allowed region for eps0={eps0}"
        )
    out = np.sqrt(arg)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class ManifoldPoint:
    """A launch point on the initial manifold.

    r0, theta0, phi0 are spherical coordinates (theta0 from +z); branch is the
    sign sigma of the initial radial momentum.
    """

    r0: float
    theta0: float
    branch: int
    phi0: float = 0.0

    def __post_init__(self):
        if self.branch not in (-1, 1):
            raise ValueError(f"branch must be +1 or -1, got {self.branch}")
        if not 0.0 <= self.theta0 <= math.pi:
            raise ValueError(f"theta0 must lie in [0, pi], got {self.theta0}")

    def p_radial(self, state: RydbergState) -> float:
        return self.branch * radial_momentum(self.r0, state.eps0)


def check_point(point: ManifoldPoint, state: RydbergState, r_min: float | None = None) -> float:
    """Validate a point against the core/turning-point guards; return p(r0).

    r_min overrides the default core guard: the constant-energy launch loci
    always dive toward the nucleus near theta0 = pi/2 and the branch topology
    of the spectra needs those launches, so the trajectory pipeline passes a
    much smaller bound than the standalone default.
    """
    if r_min is None:
        r_min = r_core(state.l0)
    if point.r0 < r_min:
        raise ManifoldDomainError(
            f"r0={point.r0} inside guarded core region (r_min={r_min})"
        )
    p = radial_momentum(point.r0, state.eps0)
    if p < P_FLOOR:
        raise ManifoldDomainError(
            f"p={p} below floor {P_FLOOR}: too close to the turning point"
        )
    return p


def _eikonal_integral_closed(r, eps0):
    """Closed form of int_0^r sqrt(2(eps0 + 1/r')) dr' for eps0 < 0.

    With kappa = sqrt(-2 eps0):
        I(r) = r p(r) + (1/kappa) [ arcsin(kappa^2 r - 1) + pi/2 ],
    which vanishes at r = 0 and reaches pi/kappa at the turning point.
    """
    kappa = math.sqrt(-2.0 * eps0)
    r = np.asarray(r, dtype=float)
    p = np.sqrt(np.maximum(2.0 * (eps0 + 1.0 / r), 0.0))
    s = np.clip(kappa * kappa * r - 1.0, -1.0, 1.0)
    out = r * p + (np.arcsin(s) + 0.5 * math.pi) / kappa
    return float(out) if out.ndim == 0 else out


def _eikonal_integral_quad(r, eps0):
    """Quadrature fallback for the eikonal integral (correctness oracle)."""
    val, _ = integrate.quad(
        lambda x: math.sqrt(max(2.0 * (eps0 + 1.0 / x), 0.0)),
        0.0,
        r,
        limit=200,
        epsabs=1e-13,
        epsrel=1e-12,
    )
    return val


def eikonal(r0, state: RydbergState, method: str = "closed"):
    """Radial WKB phase S0(r0) = int_0^r0 p dr' - (l0 + 1/2) pi + pi*alpha.

    method="closed" uses the analytic antiderivative, method="quad" adaptive
    quadrature; both agree to 1e-9 and the latter exists purely as an oracle.
    """
    if state.eps0 >= 0:
        raise ValueError(f"bound state required, eps0={state.eps0}")
    r_arr = np.asarray(r0, dtype=float)
    if np.any(r_arr <= 0) or np.any(state.eps0 + 1.0 / r_arr < 0):
        raise ManifoldDomainError(f"r0={r0} outside classically allowed region")
    if method == "closed":
        integral = _eikonal_integral_closed(r0, state.eps0)
    elif method == "quad":
        if r_arr.ndim:
            integral = np.array([_eikonal_integral_quad(r, state.eps0) for r in r_arr])
        else:
            integral = _eikonal_integral_quad(float(r0), state.eps0)
    else:
        raise ValueError(f"unknown method {method!r}")
    return integral - (state.l0 + 0.5) * math.pi + math.pi * state.alpha


def spherical_harmonic_m0(l0: int, theta0) -> float:
    """Real Y_l^0(theta) = sqrt((2l+1)/4pi) P_l(cos theta)."""
    return math.sqrt((2 * l0 + 1) / (4.0 * math.pi)) * special.eval_legendre(
        l0, np.cos(theta0)
    )


def manifold_amplitude(point: ManifoldPoint, state: RydbergState, r_min: float | None = None) -> float:
    """WKB amplitude density Y_l0^m0(theta0, phi0) / [r0 nu^{3/2} sqrt(2 pi p)].

    Only m0 = 0 is exercised end to end; the m0 != 0 spherical harmonic is kept
    for forward compatibility.
    """
    p = check_point(point, state, r_min=r_min)
    if state.m0 == 0:
        y = spherical_harmonic_m0(state.l0, point.theta0)
    else:
        y = special.sph_harm_y(state.l0, state.m0, point.theta0, point.phi0).real
    return y / (point.r0 * state.nu**1.5 * math.sqrt(2.0 * math.pi * p))


def manifold_momentum(point: ManifoldPoint, state: RydbergState) -> np.ndarray:
    """Branch momentum sigma * p(r0) * rhat as a Cartesian 3-vector.

    S0 depends on r only, so grad S0 is purely radial.
    """
    p = point.branch * radial_momentum(point.r0, state.eps0)
    st, ct = math.sin(point.theta0), math.cos(point.theta0)
    sp, cp = math.sin(point.phi0), math.cos(point.phi0)
    return np.array([p * st * cp, p * st * sp, p * ct])


def manifold_phase_w(point: ManifoldPoint, state: RydbergState) -> float:
    """Initial-state phase W = sigma * S0(r0) - pi/4 for branch sigma.

    The eikonal flips sign between the outgoing and incoming branches; the
    Maslov -pi/4 offset does not.  (Flipping the offset with the branch, the
    other reading of the two-branch WKB state, misplaces every interference
    fringe fed by incoming trajectories; the exact partial-wave spectrum
    pins this convention, see the oracle-agreement tests.)
    """
    return point.branch * eikonal(point.r0, state) - 0.25 * math.pi
