"""Branch enumeration on constant-final-energy curves: deflection functions,
root finding, and rainbow/glory detection.

In the impulse limit the launch locus for a final energy eps_f is analytic:
with nu = eps_f - eps0 - dp^2/2 the energy balance fixes

    cos(theta0) = nu / (sigma p(r0) dp),

one segment per branch sign sigma.  Each segment is parametrized by theta0
(uniform sampling there resolves both the near-nucleus dive at theta0 -> pi/2
and the on-axis endpoint).  The emission angle is tracked as the *unwrapped*
planar angle theta_f_signed, which is continuous along the segment; folding it
back to [0, pi] happens only at the interfaces.  Rainbows are interior extrema
of the unwrapped angle, glories are its transversal crossings of multiples of
pi away from the axis endpoints.

Pulse-mode curves implement the same sampled-segment interface; they are
built elsewhere (pulse module) from a launch grid and a contour extraction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import optimize

from . import trajectories as tj
from .kepler import BoundTrajectoryError as kp_bound_error
from .manifold import ManifoldPoint, P_FLOOR
from .model import KickParams, RydbergState

R_MIN_SEARCH = 1e-6  # bohr; inner end of the launch locus used by the search
THETA_ROOT_TOL = 1e-8  # rad; refinement target for |theta_f - target|
ENDPOINT_AXIS_TOL = 1e-3  # sin(theta0) below which a pi-crossing is the axis endpoint
CLOSURE_SNAP_TOL = 0.01  # rad; a segment end this close to k*pi/2 is the r->0 frontier


@dataclass(frozen=True)
class Rainbow:
    """Fold caustic: interior extremum of the deflection function."""

    theta_m: float  # folded extremal angle, radians
    theta_signed: float  # unwrapped extremal angle
    s_star: float
    segment: int
    kind: str  # "max" or "min" of the unwrapped angle


@dataclass(frozen=True)
class Glory:
    """Axial caustic: off-axis branch family reaching theta_f = 0 or pi."""

    angle: float  # 0.0 or pi
    theta_signed: float  # the crossed multiple of pi (unwrapped)
    s_star: float
    segment: int


@dataclass(frozen=True)
class CatastropheReport:
    rainbows: tuple
    glories: tuple

    @property
    def glory_at_zero(self) -> bool:
        return any(g.angle == 0.0 for g in self.glories)

    @property
    def glory_at_pi(self) -> bool:
        return any(g.angle == math.pi for g in self.glories)


class ShellSegment:
    """One sigma-branch of an impulse-mode launch locus.

    The parameter s in [0, 1] maps linearly to theta0; r0 follows from the
    energy balance.  theta_at() re-evaluates the closed-form map, so root
    refinement is exact rather than interpolated.
    """

    def __init__(self, state, kick, eps_f, sigma, theta_a, theta_b, n_samples=1500):
        self.state = state
        self.kick = kick
        self.eps_f = eps_f
        self.sigma = sigma
        self.theta_a = theta_a
        self.theta_b = theta_b
        self._nu = eps_f - state.eps0 - 0.5 * kick.dp**2
        self.s = np.linspace(0.0, 1.0, n_samples)
        self.r0, self.theta0 = self.launch_at(self.s)
        self.theta_f_signed = self._theta_signed(self.r0, self.theta0)
        self._refine_sampling()

    def launch_at(self, s):
        theta0 = self.theta_a + (self.theta_b - self.theta_a) * np.asarray(s, dtype=float)
        if self._nu == 0.0:
            # degenerate shell: theta0 == pi/2, r runs over the allowed range
            r0 = np.exp(
                math.log(R_MIN_SEARCH)
                + (math.log(self._r_floor_cap()) - math.log(R_MIN_SEARCH)) * np.asarray(s, float)
            )
            theta0 = np.full_like(r0, 0.5 * math.pi)
            return r0, theta0
        p_req = self._nu / (self.sigma * self.kick.dp * np.cos(theta0))
        r0 = 1.0 / (0.5 * p_req**2 - self.state.eps0)
        return r0, theta0

    def _r_floor_cap(self):
        return 1.0 / (0.5 * P_FLOOR**2 - self.state.eps0)

    def _theta_signed(self, r0, theta0):
        m = tj.impulse_map(self.state, self.kick, r0, theta0, self.sigma)
        return m["theta_f_signed"]

    def theta_at(self, s):
        r0, theta0 = self.launch_at(s)
        return self._theta_signed(r0, theta0)

    def _refine_sampling(self, max_passes=4, max_jump=math.radians(0.25)):
        """Subdivide intervals with large deflection jumps (vectorized passes)."""
        for _ in range(max_passes):
            jumps = np.abs(np.diff(self.theta_f_signed))
            bad = np.flatnonzero(jumps > max_jump)
            if bad.size == 0:
                break
            s_new = 0.5 * (self.s[bad] + self.s[bad + 1])
            th_new = self.theta_at(s_new)
            order = np.argsort(np.concatenate([self.s, s_new]))
            self.s = np.concatenate([self.s, s_new])[order]
            self.theta_f_signed = np.concatenate([self.theta_f_signed, th_new])[order]
            r_new, t_new = self.launch_at(self.s)
            self.r0, self.theta0 = r_new, t_new

    def result_at(self, s, with_morse=True) -> tj.TrajectoryResult:
        r0, theta0 = self.launch_at(float(s))
        point = ManifoldPoint(r0=float(r0), theta0=float(np.clip(theta0, 0.0, math.pi)), branch=self.sigma)
        return tj.impulse_trajectory(
            self.state, self.kick, point, with_morse=with_morse, r_min=R_MIN_SEARCH * 0.5
        )

    @property
    def closure_theta(self):
        """Exact r -> 0 limit of the unwrapped deflection at the inner segment end.

        The locus always dives to the nucleus at its s = 0 end, where the
        launch momentum becomes perpendicular to the kick and the emission
        angle converges (like sqrt(r0)) to an exact multiple of pi/2.  Returns
        None when the inner end is not such a frontier.
        """
        th0 = float(self.theta_f_signed[0])
        snapped = 0.5 * math.pi * round(th0 / (0.5 * math.pi))
        if abs(th0 - snapped) < CLOSURE_SNAP_TOL:
            return snapped
        return None


@dataclass
class EnergyShellCurve:
    """All launch-locus segments for one final energy."""

    eps_f: float
    state: RydbergState
    kick: KickParams
    segments: list = field(default_factory=list)
    mode: str = "impulse"

    @property
    def is_empty(self) -> bool:
        return not self.segments


def energy_shell(
    state: RydbergState,
    kick: KickParams,
    eps_f: float,
    n_samples: int = 1500,
    r_min: float = R_MIN_SEARCH,
) -> EnergyShellCurve:
    """Impulse-mode launch locus for final energy eps_f (> 0)."""
    if eps_f <= 0.0:
        raise ValueError(f"eps_f must be positive, got {eps_f}")
    nu = eps_f - state.eps0 - 0.5 * kick.dp**2
    curve = EnergyShellCurve(eps_f=eps_f, state=state, kick=kick)
    p_inner = math.sqrt(2.0 * (state.eps0 + 1.0 / r_min))
    for sigma in (+1, -1):
        if nu == 0.0:
            curve.segments.append(
                ShellSegment(state, kick, eps_f, sigma, 0.5 * math.pi, 0.5 * math.pi, n_samples)
            )
            continue
        s_c = math.copysign(1.0, nu) * sigma
        c_lo = abs(nu) / (p_inner * kick.dp)
        c_hi = min(1.0, abs(nu) / (P_FLOOR * kick.dp))
        if c_lo >= c_hi:
            continue  # no admissible launch radius: classically forbidden shell
        theta_a = math.acos(s_c * c_lo)
        theta_b = math.acos(s_c * c_hi)
        curve.segments.append(
            ShellSegment(state, kick, eps_f, sigma, theta_a, theta_b, n_samples)
        )
    return curve


def _accurate_bracket(seg, target, k, max_expand=8):
    """Refine a scout-sampled sign-change interval with accurate evaluations.

    Contour nodes sit slightly off the shell, so the accurate deflection at
    the scout bracket ends can land on one side of the target; the bracket
    expands alternately in both directions until the sign change reappears.
    """
    lo_k, hi_k = k, k + 1
    g_lo = float(seg.theta_at(seg.s[lo_k])) - target
    g_hi = float(seg.theta_at(seg.s[hi_k])) - target
    for attempt in range(max_expand):
        if g_lo == 0.0:
            return seg.s[lo_k], seg.s[lo_k]
        if g_hi == 0.0:
            return seg.s[hi_k], seg.s[hi_k]
        if g_lo * g_hi < 0:
            return seg.s[lo_k], seg.s[hi_k]
        grow_lo = attempt % 2 == 0
        if grow_lo and lo_k > 0:
            lo_k -= 1
            g_lo = float(seg.theta_at(seg.s[lo_k])) - target
        elif hi_k < len(seg.s) - 1:
            hi_k += 1
            g_hi = float(seg.theta_at(seg.s[hi_k])) - target
        elif lo_k > 0:
            lo_k -= 1
            g_lo = float(seg.theta_at(seg.s[lo_k])) - target
        else:
            break
    if g_lo * g_hi < 0:
        return seg.s[lo_k], seg.s[hi_k]
    return None


def _targets_in_range(theta_target, lo, hi):
    """All unwrapped representatives of a folded angle inside [lo, hi]."""
    out = []
    k_lo = math.floor((lo - theta_target) / (2.0 * math.pi)) - 1
    k_hi = math.ceil((hi + theta_target) / (2.0 * math.pi)) + 1
    for k in range(k_lo, k_hi + 1):
        for val in (theta_target + 2.0 * math.pi * k, -theta_target + 2.0 * math.pi * k):
            if lo - 1e-12 <= val <= hi + 1e-12:
                out.append(val)
    return sorted(set(out))


def find_branches(
    curve: EnergyShellCurve,
    theta_target: float,
    with_morse: bool = True,
) -> list:
    """All trajectory branches with folded emission angle theta_target.

    Roots of the unwrapped deflection against every admissible representative
    target are bracketed on the sample grid and refined by re-propagation.
    Deterministic ordering: (sigma descending, r0 ascending).
    """
    if not 0.0 < theta_target < math.pi:
        raise ValueError("theta_target must lie strictly inside (0, pi)")
    results = []
    frontier_taken = False
    for i_seg, seg in enumerate(curve.segments):
        th = seg.theta_f_signed
        finite = np.isfinite(th)
        if not finite.any():
            continue
        lo, hi = float(np.min(th[finite])), float(np.max(th[finite]))
        is_pulse = hasattr(seg, "polish_root")
        for target in _targets_in_range(theta_target, lo, hi):
            g = th - target
            sign_change = np.flatnonzero(np.sign(g[:-1]) * np.sign(g[1:]) < 0)
            hits = list(np.flatnonzero(g == 0.0))
            s_roots = []
            for k in sign_change:
                a, b = seg.s[k], seg.s[k + 1]
                if is_pulse:
                    # scout samples bracket the root only approximately;
                    # re-evaluate the ends accurately and widen if needed.
                    # Evaluations at the ionization boundary can come back
                    # bound: such roots sit where the branch dies and are
                    # skipped rather than fatal.
                    try:
                        bracket = _accurate_bracket(seg, target, k)
                    except kp_bound_error:
                        continue
                    if bracket is None:
                        continue
                    a, b = bracket
                    if a == b:
                        s_roots.append(a)
                        continue
                try:
                    s_root = optimize.brentq(
                        lambda s: float(seg.theta_at(s)) - target,
                        a,
                        b,
                        xtol=1e-14 if not is_pulse else 1e-10,
                        rtol=8.9e-16,
                    )
                except kp_bound_error:
                    if not is_pulse:
                        raise
                    continue
                s_roots.append(s_root)
            s_roots.extend(seg.s[k] for k in hits)
            for s_root in s_roots:
                if is_pulse:
                    try:
                        res = seg.polish_root(s_root, target, with_morse=with_morse)
                    except kp_bound_error:
                        continue
                    if abs(res.theta_f - theta_target) > 100 * THETA_ROOT_TOL:
                        raise tj.TrajectoryFailure(
                            f"pulse root polish missed target by {abs(res.theta_f - theta_target)}"
                        )
                else:
                    res = seg.result_at(s_root, with_morse=with_morse)
                    if abs(res.theta_f - theta_target) > THETA_ROOT_TOL:
                        raise tj.TrajectoryFailure(
                            f"root refinement missed target by {abs(res.theta_f - theta_target)}"
                        )
                results.append(replace(res, curve_pos=(i_seg, float(s_root))))
        # frontier branch: target inside the unreachable band between the exact
        # r -> 0 limit angle and the innermost sample (weight vanishes there in
        # the limit; evaluated at the innermost sample and flagged)
        closure = seg.closure_theta
        if closure is not None and not frontier_taken:
            th_end = float(th[0])
            band_lo, band_hi = min(closure, th_end), max(closure, th_end)
            for target in _targets_in_range(theta_target, band_lo, band_hi):
                if band_lo < target < band_hi or target == closure:
                    res = seg.result_at(0.0, with_morse=with_morse)
                    res = replace(
                        res, flags=res.flags + ("frontier",), curve_pos=(i_seg, 0.0)
                    )
                    results.append(res)
                    frontier_taken = True
                    break
    # overlapping contour pieces can yield the same physical branch twice
    results.sort(key=lambda r: (-r.branch, r.r0))
    deduped = []
    for res in results:
        dup = any(
            res.branch == prev.branch
            and abs(res.r0 - prev.r0) <= 1e-5 * max(res.r0, prev.r0)
            and abs(res.theta0 - prev.theta0) <= 1e-6
            for prev in deduped
        )
        if not dup:
            deduped.append(res)
    return deduped


class PulseSegment:
    """One contour piece of a pulse-mode launch locus.

    Built from a scout-grid contour of the final-energy map.  theta_at()
    re-propagates the *interpolated* contour launch with the accurate
    adaptive integrator (the contour sits on the shell to grid accuracy);
    accepted roots are then polished onto the exact (eps_f, theta_f) point by
    a damped 2D Newton iteration in the launch plane, so returned branches
    satisfy both constraints to root tolerance.  Winding jumps of 2 pi across
    the collision set split the contour into pieces upstream, so
    theta_f_signed is continuous within one segment.
    """

    def __init__(self, state, pulse, eps_f, sigma, nodes_r, nodes_th, theta_signed):
        from . import pulse as pulse_mod

        self._pulse_mod = pulse_mod
        self.state = state
        self.pulse = pulse
        self.eps_f = eps_f
        self.sigma = sigma
        self.nodes_r = np.asarray(nodes_r, dtype=float)
        self.nodes_th = np.asarray(nodes_th, dtype=float)
        seg_len = np.hypot(np.diff(np.log(self.nodes_r)), np.diff(self.nodes_th))
        s = np.concatenate([[0.0], np.cumsum(seg_len)])
        self.s = s / s[-1] if s[-1] > 0 else s
        self.theta_f_signed = np.asarray(theta_signed, dtype=float)

    @property
    def closure_theta(self):
        return None  # pulse loci are sampled from a bounded grid, no r->0 frontier

    def launch_at(self, s):
        s = np.clip(np.asarray(s, dtype=float), 0.0, 1.0)
        log_r = np.interp(s, self.s, np.log(self.nodes_r))
        th = np.interp(s, self.s, self.nodes_th)
        return np.exp(log_r), th

    def _map_raw(self, r0, theta0):
        """(eps_f, theta_signed) of one launch, accurate integrator."""
        point = ManifoldPoint(
            r0=float(r0),
            theta0=float(np.clip(theta0, 1e-9, math.pi - 1e-9)),
            branch=self.sigma,
        )
        eps, th_signed, _, _, _ = self._pulse_mod.pulse_final_map(point, self.pulse, self.state)
        return eps, th_signed

    def theta_at(self, s):
        r0, th0 = self.launch_at(float(s))
        return self._map_raw(r0, th0)[1]

    def polish_root(self, s, theta_target, with_morse=True, tol_theta=1e-8):
        """Newton-polish the launch onto (eps_f, theta_target) and build the result."""
        r0, th0 = self.launch_at(float(s))
        x = np.array([math.log(r0), th0])
        target = np.array([self.eps_f, theta_target])
        scale = np.array([max(self.eps_f, 1e-8), 1.0])
        for _ in range(12):
            f0 = np.array(self._map_raw(math.exp(x[0]), x[1]))
            resid = (f0 - target) / scale
            if abs(resid[0]) < 1e-9 and abs(f0[1] - theta_target) < 0.1 * tol_theta:
                break
            hr, ht = 1e-6, 1e-6
            f_r = np.array(self._map_raw(math.exp(x[0] + hr), x[1]))
            f_t = np.array(self._map_raw(math.exp(x[0]), x[1] + ht))
            jac = np.column_stack([(f_r - f0) / hr, (f_t - f0) / ht]) / scale[:, None]
            try:
                step = np.linalg.solve(jac, resid)
            except np.linalg.LinAlgError:
                break
            step = np.clip(step, -0.2, 0.2)
            x = x - step
        r_fin, th_fin = math.exp(x[0]), x[1]
        point = ManifoldPoint(
            r0=float(r_fin),
            theta0=float(np.clip(th_fin, 1e-9, math.pi - 1e-9)),
            branch=self.sigma,
        )
        return self._pulse_mod.pulse_trajectory(self.state, self.pulse, point, with_morse=with_morse)

    def result_at(self, s, with_morse=True) -> tj.TrajectoryResult:
        r0, th0 = self.launch_at(float(s))
        point = ManifoldPoint(
            r0=float(r0),
            theta0=float(np.clip(th0, 1e-9, math.pi - 1e-9)),
            branch=self.sigma,
        )
        return self._pulse_mod.pulse_trajectory(self.state, self.pulse, point, with_morse=with_morse)


def _split_on_winding_jumps(nodes_r, nodes_th, theta_signed, jump=4.0):
    """Split contour node arrays wherever theta_signed jumps by ~2 pi."""
    breaks = np.flatnonzero(np.abs(np.diff(theta_signed)) > jump)
    pieces = []
    start = 0
    for b in breaks:
        if b + 1 - start >= 4:
            pieces.append(slice(start, b + 1))
        start = b + 1
    if len(theta_signed) - start >= 4:
        pieces.append(slice(start, len(theta_signed)))
    return [(nodes_r[p], nodes_th[p], theta_signed[p]) for p in pieces]


def pulse_energy_shell(
    state: RydbergState,
    pulse,
    eps_f: float,
    grid_n: int = 400,
    r_min: float = 1.0,
    ds: float | None = None,
) -> EnergyShellCurve:
    """Pulse-mode launch locus: scout grid + contour extraction per branch.

    The scout grid integrates every launch through the window with the
    vectorized fixed-step integrator; the eps_f level set of the resulting
    final-energy map is extracted by marching squares and each contour node
    carries the scouted winding angle.  Exact shell membership is restored
    point by point during root refinement.
    """
    from skimage import measure

    from . import pulse as pulse_mod

    if eps_f <= 0.0:
        raise ValueError(f"eps_f must be positive, got {eps_f}")
    curve = EnergyShellCurve(eps_f=eps_f, state=state, kick=None, mode="pulse")
    r_hi = state.r_turn * (1.0 - 1e-6)
    log_r = np.linspace(math.log(r_min), math.log(r_hi), grid_n)
    th = np.linspace(1e-3, math.pi - 1e-3, grid_n)
    rr, tt = np.meshgrid(np.exp(log_r), th, indexing="ij")
    for sigma in (+1, -1):
        out = pulse_mod.batch_pulse_map(
            state, pulse, rr.ravel(), tt.ravel(), sigma, ds=ds
        )
        eps_map = out["eps_f"].reshape(rr.shape)
        wind_map = out["theta_signed"].reshape(rr.shape)
        bound_mask = ~np.isfinite(eps_map)
        eps_filled = np.where(bound_mask, -1.0, eps_map)
        contours = measure.find_contours(eps_filled, eps_f)
        for cont in contours:
            if cont.shape[0] < 6:
                continue
            # index coordinates -> (r0, theta0), via the grid axes
            ri = cont[:, 0]
            ti = cont[:, 1]
            r_nodes = np.exp(np.interp(ri, np.arange(grid_n), log_r))
            t_nodes = np.interp(ti, np.arange(grid_n), th)
            # winding along the contour from the scout map (nearest node)
            i_near = np.clip(np.round(ri).astype(int), 0, grid_n - 1)
            j_near = np.clip(np.round(ti).astype(int), 0, grid_n - 1)
            wind = wind_map[i_near, j_near]
            # nodes interpolated against the bound-region sentinel are not on
            # the real level set; drop them (the contour splits there)
            i_lo = np.clip(np.floor(ri).astype(int), 0, grid_n - 1)
            i_hi = np.clip(i_lo + 1, 0, grid_n - 1)
            j_lo = np.clip(np.floor(ti).astype(int), 0, grid_n - 1)
            j_hi = np.clip(j_lo + 1, 0, grid_n - 1)
            near_bound = (
                bound_mask[i_lo, j_lo]
                | bound_mask[i_hi, j_lo]
                | bound_mask[i_lo, j_hi]
                | bound_mask[i_hi, j_hi]
            )
            ok = np.isfinite(wind) & ~near_bound
            if ok.sum() < 6:
                continue
            for nr, nt, ws in _split_on_winding_jumps(r_nodes[ok], t_nodes[ok], wind[ok]):
                curve.segments.append(
                    PulseSegment(state, pulse, eps_f, sigma, nr, nt, ws)
                )
    return curve


def detect_catastrophes(
    curve: EnergyShellCurve, prominence: float = 5e-3
) -> CatastropheReport:
    """Rainbows (deflection extrema) and glories (off-axis axial crossings).

    Extrema must be prominent by at least `prominence` radians against both
    neighbouring samples; sampled pulse-mode contours carry scout-level noise
    and tiny fragments that would otherwise fake folds.
    """
    rainbows = []
    glories = []
    for i_seg, seg in enumerate(curve.segments):
        th = seg.theta_f_signed
        s = seg.s
        if len(s) < 8:
            continue
        d = np.diff(th)
        # interior extrema: derivative sign change
        flips = np.flatnonzero(np.sign(d[:-1]) * np.sign(d[1:]) < 0)
        for k in flips:
            is_max = d[k] > 0
            lo = max(k - 2, 0)
            hi = min(k + 4, len(th) - 1)
            if is_max:
                prom = th[k + 1] - max(th[lo], th[hi])
            else:
                prom = min(th[lo], th[hi]) - th[k + 1]
            if curve.mode == "pulse" and prom < prominence:
                continue
            obj = (lambda x: -float(seg.theta_at(x))) if is_max else (
                lambda x: float(seg.theta_at(x))
            )
            res = optimize.minimize_scalar(
                obj, bounds=(s[k], s[k + 2]), method="bounded",
                options={"xatol": 1e-12},
            )
            s_star = float(res.x)
            th_star = float(seg.theta_at(s_star))
            rainbows.append(
                Rainbow(
                    theta_m=tj.kp.fold_angle(th_star),
                    theta_signed=th_star,
                    s_star=s_star,
                    segment=i_seg,
                    kind="max" if is_max else "min",
                )
            )
        # axial crossings of multiples of pi, excluding the axis endpoints
        k_vals = range(
            math.floor(np.nanmin(th) / math.pi) - 1, math.ceil(np.nanmax(th) / math.pi) + 2
        )
        for k in k_vals:
            target = k * math.pi
            g = th - target
            crossings = np.flatnonzero(np.sign(g[:-1]) * np.sign(g[1:]) < 0)
            for j in crossings:
                s_star = optimize.brentq(
                    lambda x: float(seg.theta_at(x)) - target,
                    s[j],
                    s[j + 1],
                    xtol=1e-14,
                )
                _, theta0_star = seg.launch_at(s_star)
                if math.sin(float(theta0_star)) < ENDPOINT_AXIS_TOL:
                    continue  # axis endpoint, not a glory family
                glories.append(
                    Glory(
                        angle=0.0 if k % 2 == 0 else math.pi,
                        theta_signed=target,
                        s_star=float(s_star),
                        segment=i_seg,
                    )
                )
    # overlapping contour pieces can duplicate a fold; keep one per angle
    unique_rainbows = []
    for rb in sorted(rainbows, key=lambda r: r.theta_m):
        if not unique_rainbows or abs(rb.theta_m - unique_rainbows[-1].theta_m) > 5e-3:
            unique_rainbows.append(rb)
    return CatastropheReport(rainbows=tuple(unique_rainbows), glories=tuple(glories))
