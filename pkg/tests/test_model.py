import math

import numpy as np
import pytest

from hcpspectra.model import (
    KickParams,
    RydbergState,
    ScalingTransform,
    apply_scaling,
    au_to_energy,
    critical_energy,
    energy_to_au,
    scaled_strength,
)


def test_energy_conversion_anchor_values():
    assert energy_to_au(0.0) == 0.0
    # 28.6 meV is the critical energy of the reference case; cross-check
    # eps0 + dp^2/2 = -2.0e-4 + 1.25e-3 = 1.05e-3 hartree
    assert energy_to_au(28.6) == pytest.approx(1.051e-3, rel=2e-3)
    assert energy_to_au(10.0) == pytest.approx(3.675e-4, rel=1e-4)


def test_energy_round_trip():
    for v in (1e-8, 3.675e-4, 1.0, 27.3):
        assert au_to_energy(energy_to_au(au_to_energy(v))) == pytest.approx(
            au_to_energy(v), rel=1e-12
        )
        assert energy_to_au(au_to_energy(v)) == pytest.approx(v, rel=1e-12)


def test_state_invariants():
    st = RydbergState(n0=50)
    assert st.eps0 == pytest.approx(-2.0e-4)
    assert st.t_cl == pytest.approx(2 * math.pi * 50**3)
    assert st.r_turn == pytest.approx(5000.0)
    with pytest.raises(ValueError):
        RydbergState(n0=3, l0=3)
    with pytest.raises(ValueError):
        RydbergState(n0=3, l0=1, m0=2)
    with pytest.raises(ValueError):
        RydbergState(n0=0)


def test_kick_validation():
    with pytest.raises(ValueError):
        KickParams(dp=0.0)
    with pytest.raises(ValueError):
        KickParams(dp=-0.1)


def test_scaled_strength_reference_case():
    st = RydbergState(n0=50)
    assert scaled_strength(st, KickParams(dp=0.05)) == pytest.approx(6.25, rel=1e-12)
    # gamma = 5 image
    assert scaled_strength(RydbergState(n0=10), KickParams(dp=0.25)) == pytest.approx(
        6.25, rel=1e-12
    )


def test_critical_energy_reference_case():
    st = RydbergState(n0=50)
    assert au_to_energy(critical_energy(st, KickParams(dp=0.05))) == pytest.approx(
        28.6, abs=0.1
    )


def test_apply_scaling_identity():
    st = RydbergState(n0=50)
    kick = KickParams(dp=0.05)
    s2, k2, e2 = apply_scaling(ScalingTransform(1.0), st, kick, 1.25e-3)
    assert (s2.n0, k2.dp, e2) == (50, 0.05, 1.25e-3)


def test_apply_scaling_gamma5():
    st = RydbergState(n0=50)
    kick = KickParams(dp=0.05)
    eps_f = energy_to_au(10.0)
    s2, k2, e2 = apply_scaling(ScalingTransform(5.0), st, kick, eps_f)
    assert s2.n0 == 10
    assert k2.dp == pytest.approx(0.25)
    assert au_to_energy(e2) == pytest.approx(250.0)
    # chi invariance, exact to round-off
    assert scaled_strength(s2, k2) == pytest.approx(scaled_strength(st, kick), rel=1e-14)


def test_apply_scaling_chi_invariance_random():
    st = RydbergState(n0=40)
    kick = KickParams(dp=0.0625)
    chi0 = scaled_strength(st, kick)
    for gamma in (0.5, 2.0, 4.0, 8.0):
        s2, k2, _ = apply_scaling(ScalingTransform(gamma), st, kick, 1e-4)
        assert scaled_strength(s2, k2) == pytest.approx(chi0, rel=1e-14)


def test_apply_scaling_rejects_bad_gamma():
    st = RydbergState(n0=50)
    kick = KickParams(dp=0.05)
    with pytest.raises(ValueError):
        ScalingTransform(0.0)
    with pytest.raises(ValueError):
        ScalingTransform(-2.0)
    # gamma that does not land on an integer n0
    with pytest.raises(ValueError):
        apply_scaling(ScalingTransform(3.0), st, kick, 1e-4)


def test_deflection_scale_invariance(paper_state, paper_kick):
    """Theta_f(s) computed on scaled parameters matches pointwise (impulse)."""
    from hcpspectra import trajectories as tj
    from hcpspectra.model import apply_scaling

    eps_f = energy_to_au(10.0)
    s2, k2, e2 = apply_scaling(ScalingTransform(5.0), paper_state, paper_kick, eps_f)
    r0 = np.linspace(0.05, 0.6, 25) * paper_state.r_turn
    theta0 = np.linspace(1.8, 2.8, 25)
    m1 = tj.impulse_map(paper_state, paper_kick, r0, theta0, 1)
    m2 = tj.impulse_map(s2, k2, r0 / 25.0, theta0, 1)
    ok = m1["ionized"] & m2["ionized"]
    assert ok.sum() >= 20
    assert np.allclose(
        m1["theta_f_signed"][ok], m2["theta_f_signed"][ok], rtol=0, atol=1e-9
    )
