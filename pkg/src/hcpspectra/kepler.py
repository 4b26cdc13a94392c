"""Analytic propagation of ionizing trajectories in the pure -1/r field.

Post-kick motion is planar: the launch position, the launch momentum and the
field axis z all lie in one meridional plane, so every trajectory is handled
in that plane with complex coordinates w = z + i*rho (real part along the
polarization axis).  The polar angle of any planar vector is then just
atan2(Im, Re), measured from +z like the emission angle.

Closed forms used throughout (a = 1/(2E), ecc = |A|, H = hyperbolic anomaly):
    r(H)        = a (ecc cosh H - 1)
    t(H) - t(H0)= a^{3/2} [(ecc sinh H - H) - (ecc sinh H0 - H0)]
    int dt / r  = sqrt(a) (H2 - H1)
The Coulomb action integral int dt/r diverges like (1/p_inf) ln T; the
regularized value subtracts exactly that, which shifts every trajectory of a
given final energy by the same unobservable constant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

R_FAR = 1.0e6  # bohr; "infinity" for sampled quantities (asymptotics are exact)
L_RADIAL_TOL = 1e-8  # |L| below which a trajectory is treated as radial


class BoundTrajectoryError(ValueError):
    """Final energy <= 0: the electron stays bound and never reaches the detector."""


@dataclass(frozen=True)
class CoulombOrbit:
    """Conserved quantities of one trajectory in the -1/r field (3D vectors)."""

    energy: float
    ang_mom: np.ndarray
    lrl: np.ndarray
    ecc: float


def conserved_quantities(position, momentum) -> CoulombOrbit:
    """E, L, Laplace-Runge-Lenz vector and eccentricity from a phase-space point."""
    x = np.asarray(position, dtype=float)
    p = np.asarray(momentum, dtype=float)
    r = float(np.linalg.norm(x))
    if r == 0.0:
        raise ValueError("position must be nonzero")
    energy = 0.5 * float(p @ p) - 1.0 / r
    ang_mom = np.cross(x, p)
    lrl = np.cross(p, ang_mom) - x / r
    return CoulombOrbit(energy=energy, ang_mom=ang_mom, lrl=lrl, ecc=float(np.linalg.norm(lrl)))


def asymptotic_momentum(orbit: CoulombOrbit, position, momentum) -> np.ndarray:
    """Outgoing asymptotic momentum p^(f) of an ionizing trajectory.

    The outgoing asymptote makes the angle arccos(1/ecc) with -A; in the
    perifocal frame (Ahat, qhat = Lhat x Ahat) the direction is
    (-Ahat + sqrt(ecc^2-1) qhat)/ecc, which degenerates smoothly to +rhat for
    radial escape (A -> -rhat, ecc -> 1).
    """
    if orbit.energy <= 0.0:
        raise BoundTrajectoryError(f"E={orbit.energy} <= 0")
    p_inf = math.sqrt(2.0 * orbit.energy)
    a_hat = orbit.lrl / orbit.ecc
    l_norm = float(np.linalg.norm(orbit.ang_mom))
    if l_norm < L_RADIAL_TOL:
        return -p_inf * a_hat
    q_hat = np.cross(orbit.ang_mom / l_norm, a_hat)
    return p_inf * (-a_hat + math.sqrt(max(orbit.ecc**2 - 1.0, 0.0)) * q_hat) / orbit.ecc


# ---------------------------------------------------------------------------
# Planar (complex) fast path.  All functions below accept numpy arrays.
# ---------------------------------------------------------------------------


def planar_elements(w0, v0):
    """Orbit elements from planar launch state (complex position/momentum).

    Returns (energy, a, l, A, ecc, H0) with l the signed planar angular
    momentum Im(conj(w) v), A the complex Laplace-Runge-Lenz vector
    -i l v - w/|w| and H0 the launch hyperbolic anomaly (sign of rdot).
    Only meaningful for energy > 0; callers filter bound points.
    """
    w0 = np.asarray(w0, dtype=complex)
    v0 = np.asarray(v0, dtype=complex)
    r0 = np.abs(w0)
    energy = 0.5 * np.abs(v0) ** 2 - 1.0 / r0
    l = (np.conj(w0) * v0).imag
    lrl = -1j * l * v0 - w0 / r0
    ecc = np.abs(lrl)
    a = 1.0 / (2.0 * energy)
    cosh_h0 = np.maximum((r0 / a + 1.0) / ecc, 1.0)
    h0 = np.sign((np.conj(w0) * v0).real) * np.arccosh(cosh_h0)
    return energy, a, l, lrl, ecc, h0


def planar_asymptotic_momentum(energy, l, lrl, ecc):
    """Closed-form outgoing momentum (complex) for planar elements."""
    sl = np.sign(l)
    u_dir = lrl * (-1.0 + 1j * sl * np.sqrt(np.maximum(ecc**2 - 1.0, 0.0))) / ecc**2
    return np.sqrt(2.0 * energy) * u_dir


def unwrapped_final_angle(v0, p_f):
    """Continuous planar emission angle: arg(v0) plus the momentum rotation.

    The Kepler hodograph is a circle that never encloses the origin, so the
    total rotation of the momentum direction is strictly below pi and the
    principal value of arg(p_f conj(v0)) is the exact unwrapped increment.
    Radial collisions (|l| = 0) reverse the momentum; they sit exactly on the
    branch cut and are resolved to +pi (flagged upstream).
    """
    v0 = np.asarray(v0, dtype=complex)
    p_f = np.asarray(p_f, dtype=complex)
    return np.angle(v0) + np.angle(p_f * np.conj(v0))


def fold_angle(theta_signed):
    """Map an unwrapped planar angle to the physical polar angle in [0, pi]."""
    x = np.mod(theta_signed, 2.0 * math.pi)
    out = np.where(x > math.pi, 2.0 * math.pi - x, x)
    return float(out) if np.ndim(theta_signed) == 0 else out


def solve_kepler_h(mean_anomaly, ecc):
    """Solve ecc*sinh(H) - H = M for H (vectorized, safeguarded Newton).

    M is monotone in H so bisection brackets always exist; Newton from a
    log-based seed converges in a handful of iterations except near the
    collision limit ecc -> 1, H -> 0, where bisection steps take over.
    """
    m = np.asarray(mean_anomaly, dtype=float)
    ecc = np.broadcast_to(np.asarray(ecc, dtype=float), m.shape).copy()
    # seed: exact inversion of the large-|M| asymptote, linearized near 0
    with np.errstate(divide="ignore", invalid="ignore"):
        seed = np.where(
            np.abs(m) > 1.0,
            np.sign(m) * np.log(2.0 * np.abs(m) / ecc + 1.8),
            m / np.maximum(ecc - 1.0 + np.cbrt(np.abs(m) ** 2) + 1e-12, 1e-12),
        )
    h = np.clip(seed, -60.0, 60.0)
    lo = np.full_like(h, -60.0)
    hi = np.full_like(h, 60.0)
    # expand brackets if needed (|M| can exceed sinh(60) only for absurd times)
    for _ in range(100):
        f = ecc * np.sinh(h) - h - m
        df = ecc * np.cosh(h) - 1.0
        hi = np.where(f > 0, np.minimum(hi, h), hi)
        lo = np.where(f < 0, np.maximum(lo, h), lo)
        step = f / np.maximum(df, 1e-300)
        h_new = h - step
        bad = (h_new <= lo) | (h_new >= hi) | ~np.isfinite(h_new)
        h_new = np.where(bad, 0.5 * (lo + hi), h_new)
        if np.all(np.abs(h_new - h) < 1e-14 * (1.0 + np.abs(h))):
            h = h_new
            break
        h = h_new
    return h


def planar_state_at_anomaly(a, l, lrl, ecc, h):
    """Planar position and velocity at hyperbolic anomaly h (closed form)."""
    sl = np.sign(l)
    a_hat = lrl / ecc
    q_hat = sl * 1j * a_hat
    root = np.sqrt(np.maximum(ecc**2 - 1.0, 0.0))
    w = a * (ecc - np.cosh(h)) * a_hat + a * root * np.sinh(h) * q_hat
    denom = ecc * np.cosh(h) - 1.0
    v = (-np.sinh(h) * a_hat + root * np.cosh(h) * q_hat) / (np.sqrt(a) * denom)
    return w, v


def time_from_anomaly(a, ecc, h, h0):
    """Flight time from anomaly h0 to h."""
    return a**1.5 * ((ecc * np.sinh(h) - h) - (ecc * np.sinh(h0) - h0))


def anomaly_at_time(a, ecc, h0, t):
    """Anomaly reached a time t after launch (t may be an array)."""
    m = (ecc * np.sinh(h0) - h0) + np.asarray(t, dtype=float) / a**1.5
    return solve_kepler_h(m, ecc)


def axis_crossing_count(l, lrl, ecc, h0):
    """Number of zeros of the transverse momentum p_rho along the orbit (exact).

    p_rho(H) is proportional to B sinh(H) + A cosh(H) with
    A = sqrt(ecc^2-1) Im(qhat), B = -Im(Ahat); such a combination has at most
    one zero, at tanh(H*) = -A/B, so the count is 0 or 1 depending on whether
    H* lies ahead of the launch anomaly.
    """
    sl = np.sign(l)
    a_hat = lrl / ecc
    q_hat = sl * 1j * a_hat
    coef_a = np.sqrt(np.maximum(ecc**2 - 1.0, 0.0)) * q_hat.imag
    coef_b = -a_hat.imag
    ratio = np.where(np.abs(coef_b) > 0, -coef_a / np.where(coef_b == 0, 1.0, coef_b), np.inf)
    has_zero = np.abs(ratio) < 1.0
    h_star = np.arctanh(np.clip(ratio, -1 + 1e-15, 1 - 1e-15))
    count = np.where(has_zero & (h_star > h0), 1, 0)
    return count if np.ndim(l) else int(count)


def regularized_time_integral(a, ecc, h0):
    """lim_{T->inf} [int_0^T dt/r - ln(T)/p_inf] along the orbit from anomaly h0.

    From r = a(ecc cosh H - 1): int dt/r = sqrt(a) (H - H0) and
    H(T) - ln T -> -ln(ecc a^{3/2} / 2), giving the closed form below.  Any
    constant offset of the launch time falls out of the limit.
    """
    return np.sqrt(a) * (-h0 - np.log(ecc / 2.0) - 1.5 * np.log(a))


def time_to_radius(a, ecc, h0, r_cut):
    """Flight time from launch until the orbit first has r = r_cut outbound."""
    cosh_hc = np.maximum((r_cut / a + 1.0) / ecc, 1.0)
    hc = np.arccosh(cosh_hc)
    return time_from_anomaly(a, ecc, hc, h0)


def truncated_time_integral(a, ecc, h0, t_cut):
    """int_0^T dt/r minus ln(T)/p_inf at a finite time cutoff T = t_cut.

    Branches of one final energy share p_inf, so evaluating them at a common
    T and differencing removes the ln divergence entirely; the residual
    cutoff dependence of differences decays like ln(T)/T.  (A common *radius*
    would not do: each branch reaches it at its own time, leaving an O(a/R)
    mismatch in the subtraction.)
    """
    hc = anomaly_at_time(a, ecc, h0, t_cut)
    return np.sqrt(a) * (hc - h0) - np.sqrt(a) * np.log(t_cut)


def impulse_action(w0, v0_post, dp, a, ecc, h0):
    """Regularized classical action of a kicked trajectory.

    S = reg int dt/r - x0.p0 + dp*z0 with p0 the post-kick momentum; the last
    two terms together equal -x0 . p0(manifold), the impulse-limit form.
    """
    boundary = (np.conj(w0) * v0_post).real
    return regularized_time_integral(a, ecc, h0) - boundary + dp * np.real(w0)
