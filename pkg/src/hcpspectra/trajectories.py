"""Impulse-mode trajectory results: asymptotics, action, Jacobian, Morse index.

The 3D Jacobian Det d(p_f)/d(x0) of the launch-to-momentum map factorizes for
an axially symmetric field into

    D3(t) = p_rho(t) * D2(t) / (r0^2 sin(theta0)),

with p_rho the (signed) momentum component perpendicular to the z axis in the
trajectory plane and D2 = det d(p_rho, p_z)/d(r0, theta0) the planar 2x2
determinant taken along the Lagrangian manifold (the branch momentum field is
re-evaluated at displaced launch points).  Zeros of p_rho are axial crossings
of the momentum direction, zeros of D2 are fold points; both flip the sign of
D3 and are what the Morse index counts.

All derivatives are central finite differences with Richardson step control;
the map is analytic so this is both simple and accurate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kepler as kp
from .manifold import ManifoldPoint, check_point, manifold_amplitude, manifold_phase_w, radial_momentum
from .model import KickParams, RydbergState

THETA_POLE_CLAMP = 1e-6  # rad; evaluation angle used for exactly-on-axis requests
FD_REL_TOL = 1e-5  # Richardson agreement target for the step halving
N_DET_SAMPLES = 80  # time samples carried for Morse counting (>= 64 per contract)

# How zeros of the planar determinant enter the Morse index.
# "parity": interior crossings that are born and die together cancel (signed
# intersection count), leaving mu_fold = [det2(inf) < 0]; this keeps branch
# phases continuous along a family, which the raw unsigned tally ("count")
# violates whenever a trajectory grazes a caustic at intermediate times.
# "parity_inv" flips which det2(inf) sign carries the fold unit; the two
# differ by a pi flip between opposite-sign branch families and only one
# reproduces the universal Airy structure at a fold.  The quantum-oracle
# comparison fixes the choice a posteriori.
MORSE_CONVENTION = "parity_inv"


@dataclass(frozen=True)
class TrajectoryResult:
    """One classical branch contributing at (eps_f, theta_f)."""

    r0: float
    theta0: float
    branch: int
    eps_f: float
    theta_f: float
    theta_f_signed: float
    p_final: np.ndarray
    action: float
    phase_w: float
    morse: int
    jac3d: float
    weight: float
    det_samples: np.ndarray = field(repr=False, default=None)
    flags: tuple = ()
    curve_pos: tuple = None  # (segment index, s parameter) set by the search

    @property
    def phase(self) -> float:
        """Total branch phase S_j + W_j - pi*mu_j/2."""
        return self.action + self.phase_w - 0.5 * math.pi * self.morse


def launch_state(state: RydbergState, kick: KickParams, r0, theta0, sigma):
    """Planar post-kick launch (w0, v0) for arrays of launch coordinates."""
    r0 = np.asarray(r0, dtype=float)
    theta0 = np.asarray(theta0, dtype=float)
    p = np.sqrt(2.0 * (state.eps0 + 1.0 / r0))
    w0 = r0 * np.exp(1j * theta0)
    v0 = sigma * p * np.exp(1j * theta0) + kick.dp
    return w0, v0


def impulse_map(state: RydbergState, kick: KickParams, r0, theta0, sigma):
    """Vectorized closed-form launch -> (eps_f, theta_f_signed) map.

    Returns a dict of arrays; bound points (eps_f <= 0) carry NaN angles.
    """
    w0, v0 = launch_state(state, kick, r0, theta0, sigma)
    with np.errstate(invalid="ignore", divide="ignore"):
        energy, a, l, lrl, ecc, h0 = kp.planar_elements(w0, v0)
        ionized = energy > 0.0
        e_safe = np.where(ionized, energy, 1.0)
        a_safe = np.where(ionized, a, 1.0)
        h0_safe = np.where(np.isfinite(h0), h0, 0.0)
        p_f = kp.planar_asymptotic_momentum(e_safe, l, lrl, ecc)
        theta_signed = np.where(ionized, kp.unwrapped_final_angle(v0, p_f), np.nan)
        action = np.where(
            ionized, kp.impulse_action(w0, v0, kick.dp, a_safe, ecc, h0_safe), np.nan
        )
    return {
        "eps_f": energy,
        "ionized": ionized,
        "w0": w0,
        "v0": v0,
        "a": a,
        "l": l,
        "lrl": lrl,
        "ecc": ecc,
        "h0": h0,
        "p_f": np.where(ionized, p_f, np.nan),
        "theta_f_signed": theta_signed,
        "action": action,
    }


def _planar_momentum_at_times(state, kick, r0, theta0, sigma, times):
    """Planar momentum of the kicked trajectory at given absolute times."""
    w0, v0 = launch_state(state, kick, r0, theta0, sigma)
    energy, a, l, lrl, ecc, h0 = kp.planar_elements(w0, v0)
    h = kp.anomaly_at_time(a, ecc, h0, times)
    _, v = kp.planar_state_at_anomaly(a, l, lrl, ecc, h)
    return v


def _planar_final_momentum(state, kick, r0, theta0, sigma):
    w0, v0 = launch_state(state, kick, r0, theta0, sigma)
    energy, a, l, lrl, ecc, h0 = kp.planar_elements(w0, v0)
    return kp.planar_asymptotic_momentum(energy, l, lrl, ecc)


def _fd_det2(f, r0, theta0, hr, hth):
    """Central-difference det d(p_rho,p_z)/d(r0,theta0) of a planar-momentum map.

    f(r, th) must return complex momentum (arrays allowed along time).
    """
    dp_dr = (f(r0 + hr, theta0) - f(r0 - hr, theta0)) / (2.0 * hr)
    dp_dth = (f(r0, theta0 + hth) - f(r0, theta0 - hth)) / (2.0 * hth)
    # rows (p_rho, p_z) = (Im, Re); det of [[dIm/dr, dIm/dth], [dRe/dr, dRe/dth]]
    return dp_dr.imag * dp_dth.real - dp_dth.imag * dp_dr.real


def _richardson_series(f, r0, theta0, h0_scale=1e-3, max_halvings=14):
    """Halve the FD steps until the whole determinant series is step-stable.

    f(r, th) returns planar momenta sampled along the trajectory (the last
    entry being the asymptote), so the convergence criterion covers every
    Morse sample, not just the final Jacobian: near-turning-point launches
    need far smaller radial steps at intermediate times than at t -> infinity.
    Near-zero samples get an absolute slack tied to the series scale (their
    sign is genuinely undetermined right at a crossing).  Launches deep in
    the Coulomb well vary violently with theta0 (the stencil can cross into
    bound motion, yielding NaN), so non-finite values just trigger halving.
    """
    hr = h0_scale * r0
    hth = h0_scale * min(1.0, r0)
    with np.errstate(invalid="ignore", divide="ignore"):
        prev = _fd_det2(f, r0, theta0, hr, hth)
        for _ in range(max_halvings):
            hr *= 0.5
            hth *= 0.5
            cur = _fd_det2(f, r0, theta0, hr, hth)
            if np.all(np.isfinite(cur)) and np.all(np.isfinite(prev)):
                scale = float(np.max(np.abs(cur)))
                tol = FD_REL_TOL * (np.abs(cur) + 1e-6 * scale)
                if np.all(np.abs(cur - prev) <= tol):
                    return hr, hth, cur
            prev = cur
    if not np.all(np.isfinite(prev)):
        raise TrajectoryFailure(
            f"finite-difference Jacobian did not converge at r0={r0}, theta0={theta0}"
        )
    return hr, hth, prev


def morse_index(det_samples, refine=None, max_depth=6) -> int:
    """Count sign changes of a sampled determinant, refining suspicious dips.

    det_samples is an (n, 2) array of (t, value) ordered in t.  A refine
    callback (t -> value) lets intervals whose endpoints agree in sign but dip
    toward zero be subdivided so that paired crossings are not missed.
    """
    samples = np.asarray(det_samples, dtype=float)
    if samples.ndim != 2 or samples.shape[1] != 2:
        raise ValueError("det_samples must be an (n, 2) array of (t, value)")
    t = list(samples[:, 0])
    v = list(samples[:, 1])

    if refine is not None:
        # subdivide intervals where |v| dips well below both neighbours
        for _ in range(max_depth):
            new_t, new_v = [t[0]], [v[0]]
            added = False
            for k in range(1, len(t)):
                mid_needed = False
                if v[k - 1] * v[k] > 0 and 0 < k < len(t) - 1:
                    lo = min(abs(v[k - 1]), abs(v[k]))
                    hi = max(abs(v[k - 1]), abs(v[k]))
                    if lo < 0.05 * hi and np.isfinite(t[k]) and np.isfinite(t[k - 1]):
                        mid_needed = True
                if mid_needed:
                    tm = 0.5 * (t[k - 1] + t[k])
                    new_t.append(tm)
                    new_v.append(refine(tm))
                    added = True
                new_t.append(t[k])
                new_v.append(v[k])
            t, v = new_t, new_v
            if not added:
                break

    signs = [s for s in np.sign(v) if np.isfinite(s) and s != 0.0]
    changes = sum(1 for a, b in zip(signs, signs[1:]) if a != b)
    return changes


class TrajectoryFailure(RuntimeError):
    """Propagation or differentiation failed for one launch point."""


def impulse_trajectory(
    state: RydbergState,
    kick: KickParams,
    point: ManifoldPoint,
    with_morse: bool = True,
    r_min: float | None = None,
) -> TrajectoryResult:
    """Full TrajectoryResult for one manifold point under an instantaneous kick."""
    check_point(point, state, r_min=r_min)
    sigma = point.branch
    theta0 = point.theta0
    flags = []
    sin_th = math.sin(theta0)
    if sin_th < THETA_POLE_CLAMP:
        # l'Hopital limit at the axis, taken symmetrically at a clamped angle
        theta0 = THETA_POLE_CLAMP if theta0 < 0.5 * math.pi else math.pi - THETA_POLE_CLAMP
        sin_th = math.sin(theta0)
        flags.append("on_axis_clamped")

    m = impulse_map(state, kick, point.r0, theta0, sigma)
    eps_f = float(m["eps_f"])
    if eps_f <= 0.0:
        raise kp.BoundTrajectoryError(f"eps_f={eps_f} <= 0 for {point}")
    if abs(float(m["l"])) < kp.L_RADIAL_TOL:
        flags.append("radial_limit")

    theta_signed = float(m["theta_f_signed"])
    p_f = complex(m["p_f"])
    action = float(m["action"])
    a, l, lrl, ecc, h0 = (
        float(m["a"]),
        float(m["l"]),
        complex(m["lrl"]),
        float(m["ecc"]),
        float(m["h0"]),
    )

    geom = point.r0**2 * sin_th
    cosh_far = max((kp.R_FAR / a + 1.0) / ecc, 1.0)
    h_far = math.acosh(cosh_far)
    n_t = N_DET_SAMPLES if with_morse else 2
    h_grid = np.linspace(h0, h_far, n_t + 1)[1:]
    times = kp.time_from_anomaly(a, ecc, h_grid, h0)

    def momentum_series(r, th):
        r = np.asarray(r, float)
        th = np.asarray(th, float)
        along = _planar_momentum_at_times(state, kick, r, th, sigma, times)
        final = _planar_final_momentum(state, kick, r, th, sigma)
        return np.concatenate([np.atleast_1d(along), np.atleast_1d(final)])

    hr, hth, det2_series = _richardson_series(momentum_series, point.r0, theta0)
    det2_inf = float(det2_series[-1])

    p_rho_f = p_f.imag
    jac3d = p_rho_f * det2_inf / geom

    morse = 0
    det_samples = None
    if with_morse:
        # mu = exact momentum-axis crossings + fold crossings of the 2x2 det
        n_axis = kp.axis_crossing_count(l, lrl, ecc, h0)

        def det2_at(t):
            ts = np.atleast_1d(np.asarray(t, dtype=float))
            out = _fd_det2(
                lambda r, th: _planar_momentum_at_times(state, kick, r, th, sigma, ts),
                point.r0,
                theta0,
                hr,
                hth,
            )
            return out if np.ndim(t) else float(out[0])

        # analytic t=0+ value of the planar det along the manifold is 1/r0^2
        det2_t = np.concatenate([[1.0 / point.r0**2], det2_series[:-1], [det2_inf]])
        t_grid = np.concatenate([[0.0], times, [np.inf]])
        if MORSE_CONVENTION == "parity":
            n_fold = morse_index(np.array([[0.0, det2_t[0]], [np.inf, det2_inf]]))
        elif MORSE_CONVENTION == "parity_inv":
            n_fold = 1 - morse_index(np.array([[0.0, det2_t[0]], [np.inf, det2_inf]]))
        else:
            n_fold = morse_index(np.column_stack([t_grid, det2_t]), refine=det2_at)
        morse = n_axis + n_fold

        v_c = _planar_momentum_at_times(state, kick, point.r0, theta0, sigma, times)
        p0 = radial_momentum(point.r0, state.eps0)
        p_rho_t = np.concatenate([[sigma * p0 * sin_th], v_c.imag, [p_rho_f]])
        det_samples = np.column_stack([t_grid, p_rho_t * det2_t / geom])

    amp = manifold_amplitude(
        ManifoldPoint(r0=point.r0, theta0=theta0, branch=sigma, phi0=point.phi0),
        state,
        r_min=r_min,
    )
    weight = amp / math.sqrt(abs(jac3d))

    p_final = np.array([p_f.imag * math.cos(point.phi0), p_f.imag * math.sin(point.phi0), p_f.real])
    return TrajectoryResult(
        r0=point.r0,
        theta0=point.theta0,
        branch=sigma,
        eps_f=eps_f,
        theta_f=kp.fold_angle(theta_signed),
        theta_f_signed=theta_signed,
        p_final=p_final,
        action=action,
        phase_w=manifold_phase_w(point, state),
        morse=morse,
        jac3d=jac3d,
        weight=weight,
        det_samples=det_samples,
        flags=tuple(flags),
    )
