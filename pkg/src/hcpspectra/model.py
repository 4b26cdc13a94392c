"""Shared domain types, atomic-unit conventions, and the classical scaling map.

Everything downstream works in Hartree atomic units (e = hbar = m_e = 1).
Laboratory units (meV, ps) appear only at the I/O boundary; the conversion
helpers live here so no other module hard-codes a constant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

HARTREE_MEV = 27211.386  # 1 hartree in meV
ATOMIC_TIME_PS = 2.4188843265857e-5  # 1 atomic time unit in ps


def energy_to_au(value_mev: float) -> float:
    """Convert an energy from meV to hartree."""
    return value_mev / HARTREE_MEV


def au_to_energy(value_au: float) -> float:
    """Convert an energy from hartree to meV (inverse of :func:`energy_to_au`)."""
    return value_au * HARTREE_MEV


@dataclass(frozen=True)
class RydbergState:
    """Initial bound state (n0, l0, m0) with quantum defect alpha.

    eps0 and t_cl are derived, not stored: eps0 = -1/[2(n0-alpha)^2] and
    t_cl = 2*pi*n0^3 (the classical orbit time).
    """

    n0: int
    l0: int = 0
    m0: int = 0
    alpha: float = 0.0

    def __post_init__(self):
        if self.n0 < 1:
            raise ValueError(f"n0 must be >= 1, got {self.n0}")
        if not 0 <= self.l0 < self.n0:
            raise ValueError(f"need 0 <= l0 < n0, got l0={self.l0}, n0={self.n0}")
        if abs(self.m0) > self.l0:
            raise ValueError(f"need |m0| <= l0, got m0={self.m0}, l0={self.l0}")
        if self.n0 - self.alpha <= 0:
            raise ValueError("effective quantum number n0 - alpha must be positive")

    @property
    def nu(self) -> float:
        """Effective principal quantum number n0 - alpha."""
        return self.n0 - self.alpha

    @property
    def eps0(self) -> float:
        """Initial energy in hartree (negative)."""
        return -1.0 / (2.0 * self.nu**2)

    @property
    def t_cl(self) -> float:
        """Classical Kepler period 2*pi*n0^3 in atomic time units."""
        return 2.0 * math.pi * self.n0**3

    @property
    def r_turn(self) -> float:
        """Outer classical turning point -1/eps0 of the zero-L radial motion."""
        return -1.0 / self.eps0


@dataclass(frozen=True)
class KickParams:
    """Impulse of magnitude dp > 0 along +z (atomic momentum units)."""

    dp: float

    def __post_init__(self):
        if not self.dp > 0:
            raise ValueError(f"dp must be > 0, got {self.dp}")


def scaled_strength(state: RydbergState, kick: KickParams) -> float:
    """Dimensionless kick strength chi = dp^2 / (-2 eps0).

    Spectra for parameter sets with equal chi are images of one another
    under the classical scaling map; chi = 6.25 reproduces the reference
    regime (n0=50, dp=0.05).
    """
    return kick.dp**2 / (-2.0 * state.eps0)


def critical_energy(state: RydbergState, kick: KickParams) -> float:
    """eps0 + dp^2/2, the energy separating the two shell topologies (hartree)."""
    return state.eps0 + 0.5 * kick.dp**2


@dataclass(frozen=True)
class ScalingTransform:
    """Classical scaling x -> x/gamma^2, p -> gamma*p, t -> t/gamma^3, eps -> gamma^2*eps."""

    gamma: float

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError(f"gamma must be > 0, got {self.gamma}")


def apply_scaling(
    transform: ScalingTransform,
    state: RydbergState,
    kick: KickParams,
    eps_f: float,
) -> tuple[RydbergState, KickParams, float]:
    """Map (state, kick, eps_f) to the scaled regime; chi is invariant.

    eps0 -> gamma^2 * eps0 means n0 - alpha -> (n0 - alpha)/gamma.  The scaled
    effective quantum number must land on an integer minus the same alpha,
    otherwise there is no valid RydbergState to represent it.
    """
    g = transform.gamma
    nu_scaled = state.nu / g
    n0_scaled = round(nu_scaled + state.alpha)
    if n0_scaled < 1 or abs(n0_scaled - state.alpha - nu_scaled) > 1e-9 * max(1.0, nu_scaled):
        raise ValueError(
            f"gamma={g} maps n0-alpha={state.nu} to {nu_scaled}, not an admissible state"
        )
    scaled_state = replace(state, n0=n0_scaled)
    scaled_kick = KickParams(dp=g * kick.dp)
    return scaled_state, scaled_kick, g**2 * eps_f
