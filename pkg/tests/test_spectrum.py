import math
from dataclasses import replace

import numpy as np
import pytest
from scipy import special

from hcpspectra import spectrum as sp
from hcpspectra.search import detect_catastrophes, find_branches
from hcpspectra.trajectories import TrajectoryResult


def _mk_branch(weight, action, phase_w=0.0, morse=0, branch=1, r0=100.0, eps_f=1.47e-3,
               theta_f=1.0, curve_pos=None, flags=()):
    return TrajectoryResult(
        r0=r0,
        theta0=1.0,
        branch=branch,
        eps_f=eps_f,
        theta_f=theta_f,
        theta_f_signed=theta_f,
        p_final=np.zeros(3),
        action=action,
        phase_w=phase_w,
        morse=morse,
        jac3d=1.0,
        weight=weight,
        flags=flags,
        curve_pos=curve_pos,
    )


def test_single_branch_primitive_equals_classical():
    b = _mk_branch(0.7, 12.3)
    prim, cl = sp.primitive_point([b])
    assert prim == pytest.approx(cl, rel=1e-14)
    assert cl == pytest.approx(math.sqrt(2 * b.eps_f) * 0.49, rel=1e-12)


def test_two_branch_destructive_interference():
    b1 = _mk_branch(0.5, 0.0)
    b2 = _mk_branch(0.5, math.pi, r0=200.0)
    prim, cl = sp.primitive_point([b1, b2])
    assert prim == pytest.approx(0.0, abs=1e-15)
    assert cl == pytest.approx(2 * math.sqrt(2 * b1.eps_f) * 0.25, rel=1e-12)


def test_empty_branch_list():
    assert sp.primitive_point([]) == (0.0, 0.0)


def test_permutation_invariance_bitwise():
    branches = [
        _mk_branch(0.3, 1.0, r0=50.0),
        _mk_branch(0.4, 2.0, r0=150.0, branch=-1),
        _mk_branch(0.5, 3.0, r0=250.0),
    ]
    a = sp.primitive_point(branches)
    b = sp.primitive_point(branches[::-1])
    c = sp.primitive_point([branches[1], branches[2], branches[0]])
    assert a == b == c  # bitwise: identical summation order internally


def test_random_phase_average_equals_classical(rng):
    """Uniform random phase offsets average the primitive to the classical."""
    weights = [0.3, 0.45, 0.6]
    cls_expected = math.sqrt(2 * 1.47e-3) * sum(w * w for w in weights)
    vals = []
    for _ in range(1000):
        branches = [
            _mk_branch(w, float(rng.uniform(0, 2 * math.pi)), r0=10.0 * (i + 1))
            for i, w in enumerate(weights)
        ]
        prim, cl = sp.primitive_point(branches)
        vals.append(prim)
    mean = float(np.mean(vals))
    sem = float(np.std(vals) / math.sqrt(len(vals)))
    assert abs(mean - cls_expected) < 3 * sem + 1e-12


def test_branch_consistency_validation():
    b1 = _mk_branch(0.5, 0.0)
    b2 = _mk_branch(0.5, 1.0, r0=300.0)
    b2 = replace(b2, eps_f=b2.eps_f * 1.5)
    with pytest.raises(ValueError):
        sp.primitive_point([b1, b2])


def _airy_fold_oracle(u_values):
    """Exact canonical fold integral against the two-term uniform formula.

    I(y) = int exp(i(t^3/3 + y t)) dt = 2 pi Ai(y); on the lit side y = -zeta
    the stationary points carry phases -/+ chi (chi = 2/3 zeta^{3/2}) and
    Morse offsets; feed the pair into the patch and compare with 2 pi Ai(-zeta).
    """
    out = []
    for u in u_values:
        zeta = (0.75 * u) ** (2 / 3)
        w = math.sqrt(math.pi) * zeta**-0.25  # stationary-phase modulus of each branch
        # psi are the geometric phases; mu differ by one
        b1 = _mk_branch(w, -0.5 * u, morse=0, r0=10.0)
        b2 = _mk_branch(w, +0.5 * u, morse=1, r0=20.0)
        # the common quarter-pi from the Fresnel prefactor: exp(i pi/4) overall
        amp = sp._pair_uniform(b1, b2, "fold") * np.exp(1j * math.pi / 4)
        exact = 2 * math.pi * special.airy(-zeta)[0]
        out.append((complex(amp), exact))
    return out


def test_fold_patch_matches_airy_integral():
    for amp, exact in _airy_fold_oracle([0.5, 1.0, 2.0, 4.0]):
        assert amp.real == pytest.approx(exact, rel=2e-2, abs=1e-3)
        assert abs(amp.imag) < 0.03 * abs(exact) + 1e-3


def test_fold_patch_asymptotics_reproduce_primitive_pair():
    """Beyond the blend window the patch returns the primitive sum exactly."""
    u = 8.0
    b1 = _mk_branch(0.4, -0.5 * u, morse=0, r0=10.0)
    b2 = _mk_branch(0.3, +0.5 * u, morse=1, r0=20.0)
    prim = b1.weight * np.exp(1j * b1.phase) + b2.weight * np.exp(1j * b2.phase)
    assert sp._pair_uniform(b1, b2, "fold") == pytest.approx(prim, rel=1e-10)
    # just inside the window the Airy asymptotics agree to ~1 percent
    u = 5.4
    b1 = _mk_branch(0.4, -0.5 * u, morse=0, r0=10.0)
    b2 = _mk_branch(0.3, +0.5 * u, morse=1, r0=20.0)
    prim = b1.weight * np.exp(1j * b1.phase) + b2.weight * np.exp(1j * b2.phase)
    uni = sp._pair_uniform(b1, b2, "fold")
    assert abs(uni - prim) < 0.05 * abs(prim) + 0.02 * (b1.weight + b2.weight)


def test_axial_patch_asymptotics():
    u = 5.4
    b1 = _mk_branch(0.5, -0.5 * u, morse=0, r0=10.0)
    b2 = _mk_branch(0.5, +0.5 * u, morse=1, r0=20.0)
    prim = b1.weight * np.exp(1j * b1.phase) + b2.weight * np.exp(1j * b2.phase)
    uni = sp._pair_uniform(b1, b2, "axial")
    # Bessel large-argument asymptotics carry O(1/u) corrections at the window
    assert abs(uni - prim) < 0.08 * (b1.weight + b2.weight)


def test_axial_patch_finite_at_caustic():
    # weights diverge like u^-1/2 toward the axial caustic; J0 tames them:
    # |A| -> sqrt(pi z / 2) * (w1 + w2) -> sqrt(pi) for w = u^-1/2
    for u in (1e-2, 1e-4):
        w = 1.0 / math.sqrt(u)
        b1 = _mk_branch(w, -0.5 * u, morse=0, r0=10.0)
        b2 = _mk_branch(w, +0.5 * u, morse=1, r0=20.0)
        uni = sp._pair_uniform(b1, b2, "axial")
        assert np.isfinite(uni)
        assert abs(uni) == pytest.approx(math.sqrt(math.pi), rel=1e-2)


def test_uniform_finite_at_glory(shell_10mev):
    report = detect_catastrophes(shell_10mev)
    theta = math.radians(179.9)
    branches = find_branches(shell_10mev, theta)
    prim, cl = sp.primitive_point(branches)
    uni, flags = sp.uniform_point(branches, report)
    assert "near_glory" in flags
    assert np.isfinite(uni)
    assert uni < prim  # primitive diverges toward 180, uniform stays finite


def test_uniform_equals_primitive_far_from_caustics(shell_10mev):
    report = detect_catastrophes(shell_10mev)
    theta = math.radians(60.0)
    branches = find_branches(shell_10mev, theta)
    prim, _ = sp.primitive_point(branches)
    uni, flags = sp.uniform_point(branches, report)
    assert flags == ()
    assert uni == pytest.approx(prim, rel=1e-10)


def test_assemble_spectrum_grid_and_flags(shell_10mev):
    grid = np.radians(np.linspace(1.0, 179.0, 30))
    pts = sp.assemble_spectrum(shell_10mev, grid)
    assert len(pts) == 30
    assert all(p.branch_count == 3 for p in pts)
    assert all(p.classical >= 0 and p.primitive >= 0 and p.uniform >= 0 for p in pts)
    # away from caustics uniform tracks primitive within 5 percent of classical
    for p in pts:
        if not p.flags:
            assert abs(p.uniform - p.primitive) <= 0.05 * max(p.classical, 1e-300)


def test_assemble_spectrum_rejects_bad_grid(shell_10mev):
    with pytest.raises(ValueError):
        sp.assemble_spectrum(shell_10mev, np.array([0.5, 0.4]))


def test_glory_exponent_on_10mev_shell(shell_10mev):
    """The glory family's classical density follows sin(Theta)^-1 toward 0.

    The full density adds a theta-flat third branch (~40 percent of the total
    at 10 degrees), so the clean statement is about the diverging family; the
    small-angle local slope of its incoherent density is -1.
    """
    flux = None
    vals = {}
    for deg in (1.0, 2.0, 4.0):
        branches = find_branches(shell_10mev, math.radians(deg), with_morse=False)
        flux = math.sqrt(2 * branches[0].eps_f)
        pair = [b for b in branches if b.branch == 1 and "frontier" not in b.flags]
        assert len(pair) == 2
        vals[deg] = flux * sum(b.weight**2 for b in pair)
    slope12 = math.log(vals[2.0] / vals[1.0]) / math.log(
        math.sin(math.radians(2.0)) / math.sin(math.radians(1.0))
    )
    slope24 = math.log(vals[4.0] / vals[2.0]) / math.log(
        math.sin(math.radians(4.0)) / math.sin(math.radians(2.0))
    )
    assert slope12 == pytest.approx(-1.0, abs=0.05)
    assert slope24 == pytest.approx(-1.0, abs=0.1)


def test_rainbow_fringe_spacing_matches_airy(paper_state, paper_kick, shell_40mev):
    """First fringe beyond Theta_m sits where the local cubic fit predicts."""
    report = detect_catastrophes(shell_40mev)
    theta_m = report.rainbows[0].theta_m
    # uniform intensity of the merging pair alone, scanned beyond the rainbow
    degs = np.degrees(theta_m) + np.linspace(0.05, 10.0, 260)
    pair_vals = []
    for d in degs:
        branches = find_branches(shell_40mev, math.radians(d))
        pair = sp._select_pair(sp._branch_order(branches), report.rainbows[0].segment,
                               report.rainbows[0].s_star)
        if pair is None:
            pair_vals.append(np.nan)
            continue
        amp = sp._pair_uniform(pair[0], pair[1], "fold")
        pair_vals.append(abs(amp) ** 2)
    pair_vals = np.array(pair_vals)
    # first interference minimum of Ai^2(-zeta): zeta = 2.338 (first Airy zero)
    # -> phase difference u = 4/3 zeta^{3/2} = 4.767
    i_min = None
    for i in range(1, len(degs) - 1):
        if np.isfinite(pair_vals[i - 1 : i + 2]).all() and pair_vals[i] < pair_vals[i - 1] and pair_vals[i] < pair_vals[i + 1]:
            i_min = i
            break
    assert i_min is not None
    branches = find_branches(shell_40mev, math.radians(degs[i_min]))
    pair = sp._select_pair(sp._branch_order(branches), report.rainbows[0].segment,
                           report.rainbows[0].s_star)
    psi = [b.action + b.phase_w for b in pair]
    u_at_min = abs(psi[0] - psi[1])
    assert u_at_min == pytest.approx(4.0 / 3.0 * 2.33810741 ** 1.5, rel=0.10)
