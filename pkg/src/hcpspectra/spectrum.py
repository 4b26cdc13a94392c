"""Spectra from trajectory branches: classical, primitive, and uniform sums.

The primitive density at (eps_f, theta_f) coherently sums the branch
amplitudes w_j exp{i[S_j + W_j - pi mu_j / 2]} and multiplies by sqrt(2 eps_f)
to convert |amplitude|^2 into a probability per unit energy and solid angle;
the classical density drops the cross terms.

The primitive sum diverges where two branches coalesce.  Near a fold
(rainbow) the merging pair is replaced by the standard two-term Airy form,
near an axial caustic (glory) by the Bessel J0/J1 form.  Both kernels share
one structure: with the Maslov-stripped phases psi_j = S_j + W_j, the pair

    w1 e^{i phi1} + w2 e^{i phi2}
      -> e^{i phibar} [ (w1+w2) C0(u) + i (w2-w1) C1(u) ],   u = |psi1 - psi2|

where (C0, C1) are normalized so their large-u asymptotics reproduce the
primitive pair exactly; this pins every constant.  The matching requires the
branch with the larger Morse index to carry the larger psi, which holds for a
genuine coalescing pair on the lit side.  Beyond u = 6 rad the asymptotics
are sub-percent, so the patch cross-fades into the primitive sum over a
window around it rather than switching abruptly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .search import CatastropheReport, EnergyShellCurve, detect_catastrophes, find_branches
from .trajectories import TrajectoryResult

PATCH_PHASE_WINDOW = 6.0  # rad; |psi1 - psi2| below which a pair is "near" a caustic
PATCH_BLEND_HALFWIDTH = 0.5  # rad; cross-fade half-width around the window edge
THETA_EVAL_CLAMP = 1e-5  # rad; evaluation clamp for grid points at exactly 0 or pi


@dataclass(frozen=True)
class SpectrumPoint:
    """One (eps_f, theta_f) output sample; densities in atomic units."""

    eps_f: float
    theta_f: float
    classical: float
    primitive: float
    uniform: float
    branch_count: int
    flags: tuple = ()

    @property
    def log_uniform(self) -> float:
        return math.log(self.uniform) if self.uniform > 0 else -math.inf


def _branch_order(results):
    return sorted(results, key=lambda r: (-r.branch, r.r0))


def primitive_point(branches) -> tuple[float, float]:
    """(primitive, classical) densities from a branch list (may be empty)."""
    if not branches:
        return 0.0, 0.0
    interior = [b for b in branches if "frontier" not in b.flags]
    ref = interior[0] if interior else branches[0]
    for b in interior:
        if (
            abs(b.eps_f - ref.eps_f) > 1e-8 * max(1.0, abs(ref.eps_f))
            or abs(b.theta_f - ref.theta_f) > 1e-8
        ):
            raise ValueError("branches do not share (eps_f, theta_f)")
    eps_ref = ref.eps_f
    flux = math.sqrt(2.0 * eps_ref)
    amp = 0.0 + 0.0j
    incoherent = 0.0
    for b in _branch_order(branches):
        amp += b.weight * np.exp(1j * b.phase)
        incoherent += b.weight**2
    return flux * float(abs(amp) ** 2), flux * incoherent


def _pair_uniform(b1: TrajectoryResult, b2: TrajectoryResult, kind: str) -> complex:
    """Uniform replacement amplitude for a coalescing branch pair.

    kind="fold" uses Ai/Ai', kind="axial" uses J0/J1.  Ordering puts the
    lower Morse index first; the asymptotic matching then requires
    psi(higher mu) >= psi(lower mu), which is checked and, if violated (a
    non-generic pairing), the primitive sum is returned unchanged.
    """
    if b2.morse < b1.morse:
        b1, b2 = b2, b1
    psi1 = b1.action + b1.phase_w
    psi2 = b2.action + b2.phase_w
    w1, w2 = b1.weight, b2.weight
    primitive_sum = w1 * np.exp(1j * b1.phase) + w2 * np.exp(1j * b2.phase)
    if b2.morse != b1.morse + 1 or psi2 < psi1:
        return complex(primitive_sum)
    u = psi2 - psi1
    phibar = 0.5 * (b1.phase + b2.phase)
    if kind == "fold":
        zeta = (0.75 * u) ** (2.0 / 3.0)
        ai, aip, _, _ = special.airy(-zeta)
        c0 = math.sqrt(math.pi) * zeta**0.25 * ai
        c1 = math.sqrt(math.pi) * (zeta**-0.25 if zeta > 0 else 0.0) * aip
    elif kind == "axial":
        z = 0.5 * u
        c0 = math.sqrt(0.5 * math.pi * z) * special.j0(z)
        c1 = math.sqrt(0.5 * math.pi * z) * special.j1(z)
    else:
        raise ValueError(f"unknown caustic kind {kind!r}")
    uniform = np.exp(1j * phibar) * ((w1 + w2) * c0 + 1j * (w2 - w1) * c1)
    # cross-fade to the primitive pair near the patch boundary
    lo = PATCH_PHASE_WINDOW - PATCH_BLEND_HALFWIDTH
    hi = PATCH_PHASE_WINDOW + PATCH_BLEND_HALFWIDTH
    if u <= lo:
        return complex(uniform)
    if u >= hi:
        return complex(primitive_sum)
    x = (u - lo) / (hi - lo)
    blend = x * x * (3.0 - 2.0 * x)
    return complex((1.0 - blend) * uniform + blend * primitive_sum)


def _select_pair(branches, seg_index, s_star):
    """The two branches straddling curve position s_star on segment seg_index."""
    on_seg = [
        b
        for b in branches
        if b.curve_pos is not None and b.curve_pos[0] == seg_index and "frontier" not in b.flags
    ]
    below = [b for b in on_seg if b.curve_pos[1] <= s_star]
    above = [b for b in on_seg if b.curve_pos[1] > s_star]
    if not below or not above:
        return None
    b_lo = max(below, key=lambda b: b.curve_pos[1])
    b_hi = min(above, key=lambda b: b.curve_pos[1])
    return b_lo, b_hi


def uniform_point(branches, report: CatastropheReport) -> tuple[float, tuple]:
    """Uniform density: caustic pairs patched, all other branches primitive.

    Returns (uniform, flags).  Rainbow patches are applied before glory
    patches; a branch can participate in one patch only (overlap flagged).
    """
    if not branches:
        return 0.0, ()
    flux = math.sqrt(2.0 * branches[0].eps_f)
    flags = []
    patched: dict[int, complex] = {}  # id-index into ordered list -> None marker
    ordered = _branch_order(branches)
    consumed = set()
    amp = 0.0 + 0.0j

    def try_patch(caustics, kind, flag):
        nonlocal amp
        for c in caustics:
            pair = _select_pair(ordered, c.segment, c.s_star)
            if pair is None:
                continue
            i1, i2 = (ordered.index(pair[0]), ordered.index(pair[1]))
            if i1 in consumed or i2 in consumed:
                flags.append("patch_overlap")
                continue
            psi1 = pair[0].action + pair[0].phase_w
            psi2 = pair[1].action + pair[1].phase_w
            if abs(psi1 - psi2) >= PATCH_PHASE_WINDOW + PATCH_BLEND_HALFWIDTH:
                continue
            amp += _pair_uniform(pair[0], pair[1], kind)
            consumed.update((i1, i2))
            flags.append(flag)

    try_patch(report.rainbows, "fold", "near_rainbow")
    try_patch(report.glories, "axial", "near_glory")

    for i, b in enumerate(ordered):
        if i not in consumed:
            amp += b.weight * np.exp(1j * b.phase)
    return flux * float(abs(amp) ** 2), tuple(flags)


def assemble_spectrum(
    curve: EnergyShellCurve,
    theta_grid,
    report: CatastropheReport | None = None,
    with_quantum=None,
) -> list[SpectrumPoint]:
    """Spectrum points over a strictly increasing theta grid in (0, pi).

    Grid values at exactly 0 or pi are evaluated at a clamped interior angle
    (the uniform density has a finite limit there; the primitive one does
    not).  Per-point branch-search failures are recorded as flags rather than
    aborting the grid.
    """
    theta_grid = np.asarray(theta_grid, dtype=float)
    if theta_grid.ndim != 1 or np.any(np.diff(theta_grid) <= 0):
        raise ValueError("theta_grid must be strictly increasing")
    if theta_grid[0] < 0.0 or theta_grid[-1] > math.pi:
        raise ValueError("theta_grid must lie within [0, pi]")
    if report is None and not curve.is_empty:
        report = detect_catastrophes(curve)
    points = []
    for theta in theta_grid:
        th_eval = min(max(float(theta), THETA_EVAL_CLAMP), math.pi - THETA_EVAL_CLAMP)
        flags: tuple = ("clamped",) if th_eval != float(theta) else ()
        if curve.is_empty:
            points.append(
                SpectrumPoint(curve.eps_f, float(theta), 0.0, 0.0, 0.0, 0, flags)
            )
            continue
        try:
            branches = find_branches(curve, th_eval)
        except Exception:
            points.append(
                SpectrumPoint(
                    curve.eps_f, float(theta), math.nan, math.nan, math.nan, 0, flags + ("failed",)
                )
            )
            continue
        primitive, classical = primitive_point(branches)
        uniform, uflags = uniform_point(branches, report)
        if curve.mode == "pulse":
            flags = flags + ("pulse_mode",)
        points.append(
            SpectrumPoint(
                eps_f=curve.eps_f,
                theta_f=float(theta),
                classical=classical,
                primitive=primitive,
                uniform=uniform,
                branch_count=len(branches),
                flags=flags + uflags,
            )
        )
    return points
