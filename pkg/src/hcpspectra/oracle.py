"""Exact quantum spectrum in the impulse approximation via partial waves.

For an initial (n0, l0=0) hydrogenic state kicked by exp(i dp z), the angular
amplitude onto incoming-wave continuum states reduces (l0 = 0 collapses the
multipole sum to L = l) to

    a(eps, Theta) = sum_l e^{i sigma_l} sqrt(2l+1) M_l(eps) Y_l0(Theta),
    M_l = int u_{eps,l}(r) j_l(dp r) u_{n0,0}(r) dr,

with energy-normalized continuum radials u_{eps,l} (delta-function in energy),
so |a|^2 carries the same measure as the semiclassical density and the two are
directly comparable.  The kick operator is unitary: the bound-bound sum plus
the energy-integrated density must add to one, which is the oracle's own
acceptance handle.

Continuum radials: u = sqrt(2/(pi k)) F_l(eta, k r), eta = -1/k.  F is started
from its power series around the origin, at a radius chosen so the value is
representable (ln C_l can reach -300 at high l), then carried outward by a
high-order ODE integrator; for launch radii pushed outward by representability
the skipped inner region contributes < 1e-240 and is dropped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .model import KickParams, RydbergState

R_CUT_FLOOR = 1e-18  # bound-state amplitude below which the radial grid stops
DR_GRID = 0.05  # bohr; radial quadrature spacing
# l-truncation: last 3 shells must contribute less than this to the total
# probability; 1e-9 keeps the *pointwise* angular density stable to < 1e-4
# (tail amplitudes enter the coherent sum as the square root of the weight)
TAIL_REL = 1e-9
LN_TINY = -240.0  # ln of the smallest launch value for the continuum series


def bound_radial(n: int, l: int, r):
    """Normalized hydrogenic R_nl(r); stable up to n ~ 30 via log-space norm."""
    if not 0 <= l < n:
        raise ValueError(f"need 0 <= l < n, got l={l}, n={n}")
    r = np.asarray(r, dtype=float)
    x = 2.0 * r / n
    ln_norm = 0.5 * (special.gammaln(n - l) - special.gammaln(n + l + 1))
    pref = (2.0 / n**2) * math.exp(ln_norm)
    with np.errstate(invalid="ignore"):
        xl = np.where(r > 0, x**l, 1.0 if l == 0 else 0.0)
    lag = special.eval_genlaguerre(n - l - 1, 2 * l + 1, x)
    out = pref * np.exp(-r / n) * xl * lag
    return float(out) if out.ndim == 0 else out


def bound_radial_u(n: int, l: int, r):
    """u_nl = r R_nl, normalized to int u^2 dr = 1."""
    return np.asarray(r, dtype=float) * bound_radial(n, l, r)


def coulomb_phase(eps: float, l: int) -> float:
    """Coulomb phase shift sigma_l = arg Gamma(l+1+i eta), eta = -1/sqrt(2 eps)."""
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    eta = -1.0 / math.sqrt(2.0 * eps)
    return float(special.loggamma(complex(l + 1, eta)).imag)


def _ln_coulomb_norm(l: int, eta: float) -> float:
    """ln C_l(eta) of the regular Coulomb function F = C_l rho^{l+1} (1 + ...)."""
    return (
        l * math.log(2.0)
        - 0.5 * math.pi * eta
        + special.loggamma(complex(l + 1, eta)).real
        - special.gammaln(2 * l + 2)
    )


def _series_f(l: int, eta: float, rho: float, n_terms: int = 400):
    """(F, dF/drho) from the origin power series, without the C_l prefactor."""
    # A_{l+1} = 1; (k+l)(k-l-1) A_k = 2 eta A_{k-1} - A_{k-2}
    a_km1 = 1.0
    a_km2 = 0.0
    f = a_km1 * rho ** (l + 1)
    df = (l + 1) * a_km1 * rho**l
    scale = abs(f)
    for k in range(l + 2, l + 2 + n_terms):
        a_k = (2.0 * eta * a_km1 - a_km2) / ((k + l) * (k - l - 1))
        term = a_k * rho**k
        f += term
        df += k * a_k * rho ** (k - 1)
        scale = max(scale, abs(term))
        if abs(term) < 1e-18 * scale and k > l + 5:
            break
        a_km2, a_km1 = a_km1, a_k
    return f, df


def coulomb_continuum(eps: float, l: int, r, return_phase: bool = True):
    """Energy-normalized regular Coulomb radial u_{eps,l}(r) and sigma_l.

    r may be a scalar or an increasing array; values at radii the launch
    radius excludes (where u < 1e-240) come back as zero.
    """
    r_arr = np.atleast_1d(np.asarray(r, dtype=float))
    u = _continuum_on_grid(eps, l, r_arr)
    u = float(u[0]) if np.ndim(r) == 0 else u
    if return_phase:
        return u, coulomb_phase(eps, l)
    return u


def _continuum_on_grid(eps: float, l: int, r_grid: np.ndarray) -> np.ndarray:
    """u_{eps,l} sampled on an increasing radial grid (zeros where negligible)."""
    k = math.sqrt(2.0 * eps)
    eta = -1.0 / k
    ln_c = _ln_coulomb_norm(l, eta)
    # launch radius: representable value, inside the convergence comfort zone
    rho_turn = eta + math.sqrt(eta**2 + l * (l + 1))
    rho_cap = 1.0 if rho_turn <= 0 else min(1.0, 0.5 * rho_turn) if l > 0 else 1.0
    if ln_c > LN_TINY:
        rho_start = min(max(math.exp((LN_TINY - ln_c) / (l + 1)), 1e-4), rho_cap)
    else:
        rho_start = rho_cap
    # estimate of ln u at launch; if even the cap cannot reach representable
    # values the wave is negligible on this grid
    if ln_c + (l + 1) * math.log(rho_start) < LN_TINY - 60.0:
        return np.zeros_like(r_grid)
    f0, df0 = _series_f(l, eta, rho_start)
    amp = math.sqrt(2.0 / (math.pi * k)) * math.exp(ln_c)
    r_start = rho_start / k
    u0 = amp * f0
    du0 = amp * k * df0

    def rhs(r, y):
        return [y[1], (l * (l + 1) / (r * r) - 2.0 / r - 2.0 * eps) * y[0]]

    out = np.zeros_like(r_grid)
    mask = r_grid > r_start
    if not mask.any():
        return out
    sol = integrate.solve_ivp(
        rhs,
        [r_start, float(r_grid[mask][-1])],
        [u0, du0],
        t_eval=r_grid[mask],
        rtol=1e-11,
        atol=0.0,
        method="DOP853",
    )
    if not sol.success:
        raise RuntimeError(f"continuum integration failed: eps={eps}, l={l}: {sol.message}")
    out[mask] = sol.y[0]
    return out


def _series_poly(l: int, eta: float, rho: float, n_terms: int = 400):
    """(poly, dpoly/drho) with F = C_l rho^{l+1} poly(rho); poly(0) = 1."""
    a_km1 = 1.0
    a_km2 = 0.0
    poly = 1.0
    dpoly = 0.0
    rho_pow = 1.0
    scale = 1.0
    for j in range(1, n_terms):
        k = l + 1 + j
        a_k = (2.0 * eta * a_km1 - a_km2) / ((k + l) * (k - l - 1))
        rho_pow *= rho
        term = a_k * rho_pow
        poly += term
        dpoly += j * a_k * rho_pow / rho
        scale = max(scale, abs(term))
        if abs(term) < 1e-18 * scale and j > 4:
            break
        a_km2, a_km1 = a_km1, a_k
    return poly, dpoly


def _batched_kick_integrals(eps_arr, l_arr, r_grid, g_table, l_index):
    """M = int u_{eps,l}(r) g_l(r) dr for many (eps, l) pairs at once.

    Numerov-marches all pairs over the shared radial grid (vectorized across
    pairs), injecting each pair at its own representability-limited launch
    radius, and accumulates the Simpson-weighted dot products on the fly.
    g_table has one row per distinct l; l_index maps pairs to rows.
    """
    eps_arr = np.asarray(eps_arr, dtype=float)
    l_arr = np.asarray(l_arr, dtype=int)
    n_pairs = eps_arr.size
    n = r_grid.size
    h = r_grid[1] - r_grid[0]
    k_wave = np.sqrt(2.0 * eps_arr)
    eta = -1.0 / k_wave

    # per-pair launch index and the two seed values
    i0 = np.zeros(n_pairs, dtype=int)
    seed0 = np.zeros(n_pairs)
    seed1 = np.zeros(n_pairs)
    alive = np.ones(n_pairs, dtype=bool)
    for j in range(n_pairs):
        l = int(l_arr[j])
        ln_c = _ln_coulomb_norm(l, float(eta[j]))
        if ln_c < LN_TINY - 60.0:
            alive[j] = False
            continue
        # representability of the seed value, and the Numerov stability bound
        # h^2 |c| / 12 << 1 (the centrifugal term explodes at small r)
        rho_start = max(math.exp((LN_TINY - ln_c) / (l + 1)), 1e-4) if ln_c > LN_TINY else 1e-4
        r_numerov = h * math.sqrt(l * (l + 1) / 0.06) if l > 0 else 0.0
        r_start = max(rho_start / k_wave[j], r_numerov)
        idx = max(int(math.ceil((r_start - r_grid[0]) / h)), 0)
        if idx + 1 >= n:
            alive[j] = False
            continue
        i0[j] = idx
        amp_ln = ln_c + 0.5 * math.log(2.0 / (math.pi * k_wave[j]))
        rho0 = k_wave[j] * r_grid[idx]
        if abs(eta[j]) * rho0 > 30.0:
            # series cancellation would destroy the seeds; wave negligible here
            alive[j] = False
            continue
        seeds_ok = True
        vals = []
        for out_idx in (idx, idx + 1):
            rho = k_wave[j] * r_grid[out_idx]
            poly, _ = _series_poly(l, float(eta[j]), rho)
            ln_val = amp_ln + (l + 1) * math.log(rho)
            if ln_val < LN_TINY - 60.0 or not math.isfinite(poly):
                seeds_ok = False
                break
            vals.append(math.exp(ln_val) * poly)
        if not seeds_ok:
            alive[j] = False
            continue
        seed0[j], seed1[j] = vals

    # Numerov march: u'' = c(r) u with c = l(l+1)/r^2 - 2/r - 2 eps
    ll1 = (l_arr * (l_arr + 1)).astype(float)
    m_acc = np.zeros(n_pairs)
    u_prev = np.zeros(n_pairs)
    u_cur = np.zeros(n_pairs)
    h2_12 = h * h / 12.0

    def c_at(k_idx):
        r = r_grid[k_idx]
        return ll1 / (r * r) - 2.0 / r - 2.0 * eps_arr

    # Simpson weights on a uniform grid (n assumed odd upstream)
    w_simp = np.full(n, 2.0 * h / 3.0)
    w_simp[1::2] = 4.0 * h / 3.0
    w_simp[0] = w_simp[-1] = h / 3.0

    c_km1 = c_at(0)
    c_k = c_at(1)
    started0 = alive & (i0 == 0)
    u_prev[started0] = seed0[started0]
    u_cur[started0] = seed1[started0]
    g0 = g_table[l_index, 0]
    g1 = g_table[l_index, 1]
    m_acc += np.where(started0, w_simp[0] * u_prev * g0 + w_simp[1] * u_cur * g1, 0.0)
    for k_idx in range(1, n - 1):
        c_kp1 = c_at(k_idx + 1)
        u_next = (
            2.0 * (1.0 + 5.0 * h2_12 * c_k) * u_cur
            - (1.0 - h2_12 * c_km1) * u_prev
        ) / (1.0 - h2_12 * c_kp1)
        # inject pairs whose launch sits at this step
        inj0 = alive & (i0 == k_idx)
        u_cur = np.where(inj0, seed0, u_cur)
        u_next = np.where(inj0, seed1, u_next)
        m_acc += np.where(inj0, w_simp[k_idx] * u_cur * g_table[l_index, k_idx], 0.0)
        live = alive & (i0 <= k_idx)
        m_acc += np.where(live, w_simp[k_idx + 1] * u_next * g_table[l_index, k_idx + 1], 0.0)
        u_prev, u_cur = u_cur, u_next
        c_km1, c_k = c_k, c_kp1
    return m_acc


@dataclass(frozen=True)
class PartialWaveTable:
    """Radial kick integrals M_l and Coulomb phases for one final energy."""

    eps_f: float
    l_values: np.ndarray
    radial_integrals: np.ndarray
    phases: np.ndarray

    @property
    def l_max(self) -> int:
        return int(self.l_values[-1])

    def total_shell_weight(self) -> float:
        return float(np.sum((2 * self.l_values + 1) * self.radial_integrals**2))


def _radial_grid(state: RydbergState) -> np.ndarray:
    """Grid covering the initial bound state out to amplitude ~ 1e-18."""
    r_probe = np.arange(DR_GRID, 40.0 * state.n0**2, 0.5)
    u = np.abs(bound_radial_u(state.n0, state.l0, r_probe))
    above = np.flatnonzero(u > R_CUT_FLOOR)
    r_cut = r_probe[above[-1]] + 5.0 if above.size else 10.0
    n = int(r_cut / DR_GRID) | 1  # Simpson needs an odd count
    return np.linspace(DR_GRID, r_cut, n)


def _g_rows(kick: KickParams, r: np.ndarray, u_bound: np.ndarray, l_values) -> np.ndarray:
    return np.stack(
        [special.spherical_jn(int(l), kick.dp * r) * u_bound for l in l_values]
    )


def kick_matrix_elements(
    state: RydbergState,
    kick: KickParams,
    eps_f: float,
    l_cap: int = 400,
    grid: np.ndarray | None = None,
    u_bound: np.ndarray | None = None,
) -> PartialWaveTable:
    """M_l table at eps_f, truncated once the 3-shell tail drops below 1e-6."""
    if state.l0 != 0 or state.m0 != 0:
        raise ValueError("oracle covers l0 = m0 = 0 initial states only")
    if eps_f <= 0:
        raise ValueError("eps_f must be positive")
    r = _radial_grid(state) if grid is None else grid
    ub = bound_radial_u(state.n0, 0, r) if u_bound is None else u_bound
    l_vals: list[int] = []
    m_vals: list[float] = []
    chunk = 12
    total = 0.0
    while len(l_vals) <= l_cap:
        ls = list(range(len(l_vals), len(l_vals) + chunk))
        g = _g_rows(kick, r, ub, ls)
        m_chunk = _batched_kick_integrals(
            np.full(len(ls), eps_f), np.array(ls), r, g, np.arange(len(ls))
        )
        l_vals.extend(ls)
        m_vals.extend(m_chunk.tolist())
        total = float(np.sum((2 * np.array(l_vals) + 1) * np.array(m_vals) ** 2))
        if len(l_vals) >= 9 and total > 0:
            tail = sum(
                (2 * lv + 1) * mv**2 for lv, mv in zip(l_vals[-3:], m_vals[-3:])
            )
            if tail < TAIL_REL * total:
                break
    else:
        raise RuntimeError(f"l_max overflow before tail criterion met (l_cap={l_cap})")
    return PartialWaveTable(
        eps_f=eps_f,
        l_values=np.array(l_vals),
        radial_integrals=np.array(m_vals),
        phases=np.array([coulomb_phase(eps_f, l) for l in l_vals]),
    )


def oracle_spectrum(
    state: RydbergState,
    kick: KickParams,
    eps_f: float,
    theta_grid,
    table: PartialWaveTable | None = None,
) -> np.ndarray:
    """Quantum d^3P/(d eps dOmega) on a theta grid (radians), impulse kick."""
    if table is None:
        table = kick_matrix_elements(state, kick, eps_f)
    theta_grid = np.asarray(theta_grid, dtype=float)
    x = np.cos(theta_grid)
    amp = np.zeros_like(theta_grid, dtype=complex)
    for l, m_l, sig in zip(table.l_values, table.radial_integrals, table.phases):
        y_l0 = math.sqrt((2 * l + 1) / (4.0 * math.pi)) * special.eval_legendre(int(l), x)
        amp += np.exp(1j * sig) * math.sqrt(2 * l + 1) * m_l * y_l0
    return np.abs(amp) ** 2


def bound_bound_probability(
    state: RydbergState,
    kick: KickParams,
    n_max: int | None = None,
    complete_tail: bool = True,
) -> float:
    """Sum over final bound states of |<n l 0|exp(i dp z)|n0 0 0>|^2.

    The explicit sum stops at n_max (default 3 n0); the remaining Rydberg
    series follows the n^-3 law (the per-n probability joins smoothly onto
    the threshold continuum density), so the tail is completed analytically
    from the last explicit shells unless complete_tail is False.
    """
    if n_max is None:
        n_max = 3 * state.n0
    r = _radial_grid(state)
    ub = bound_radial_u(state.n0, 0, r)
    jl_cache: dict[int, np.ndarray] = {}
    total = 0.0
    per_n = []
    for n in range(1, n_max + 1):
        p_n = 0.0
        for l in range(0, n):
            if l not in jl_cache:
                jl_cache[l] = special.spherical_jn(l, kick.dp * r)
            b = float(integrate.simpson(bound_radial_u(n, l, r) * jl_cache[l] * ub, x=r))
            p_n += (2 * l + 1) * b * b
        per_n.append(p_n)
        total += p_n
    if complete_tail and n_max >= 3:
        c_fit = np.mean([per_n[i] * (i + 1) ** 3 for i in range(n_max - 3, n_max)])
        total += float(c_fit * special.zeta(3, n_max + 1))
    return total


def ionization_probability(
    state: RydbergState,
    kick: KickParams,
    eps_hi: float | None = None,
    n_nodes: int = 64,
    l_cap: int = 400,
) -> float:
    """Energy-integrated ionization probability via Gauss-Legendre over eps.

    The density peaks near eps0 + dp^2/2 with width ~ dp/n0, so the energy
    domain is split there and each side gets its own Gauss-Legendre rule.
    All (eps, l) radial integrals march in one vectorized batch; l extends in
    chunks until the 3-shell tail of the summed spectrum is below threshold.
    """
    if eps_hi is None:
        eps_hi = -state.eps0 + 4.0 * kick.dp**2
    eps_mid = min(max(state.eps0 + kick.dp**2, 0.25 * eps_hi), 0.75 * eps_hi)
    nodes, weights = np.polynomial.legendre.leggauss(n_nodes)
    eps_vals = np.concatenate(
        [0.5 * eps_mid * (nodes + 1.0), eps_mid + 0.5 * (eps_hi - eps_mid) * (nodes + 1.0)]
    )
    w_vals = np.concatenate(
        [0.5 * eps_mid * weights, 0.5 * (eps_hi - eps_mid) * weights]
    )
    n_nodes = eps_vals.size
    grid = _radial_grid(state)
    ub = bound_radial_u(state.n0, 0, grid)
    shell = np.zeros((0, n_nodes))  # rows: l, cols: eps nodes
    l_done = 0
    chunk = 12
    while l_done <= l_cap:
        ls = np.arange(l_done, l_done + chunk)
        g = _g_rows(kick, grid, ub, ls)
        eps_pairs = np.repeat(eps_vals, ls.size)
        l_pairs = np.tile(ls, n_nodes)
        l_index = np.tile(np.arange(ls.size), n_nodes)
        m = _batched_kick_integrals(eps_pairs, l_pairs, grid, g, l_index)
        m = m.reshape(n_nodes, ls.size).T
        shell = np.vstack([shell, (2 * ls[:, None] + 1) * m**2])
        l_done += chunk
        total = float(shell.sum())
        tail = float(shell[-3:].sum())
        if l_done >= 9 and total > 0 and tail < TAIL_REL * total:
            break
    density = shell.sum(axis=0)  # d P / d eps at the nodes
    return float(np.dot(w_vals, density))


def unitarity_report(state: RydbergState, kick: KickParams) -> dict:
    """Bound + ionized probability; the deficit measures oracle consistency."""
    p_bound = bound_bound_probability(state, kick)
    p_ion = ionization_probability(state, kick)
    return {
        "bound": p_bound,
        "ionized": p_ion,
        "total": p_bound + p_ion,
        "deficit": abs(1.0 - p_bound - p_ion),
    }
