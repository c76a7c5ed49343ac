"""Scalar diagnostics and the kinetic energy spectrum.

The conserved quantities are all evaluated from quadrature-point values so
they pair exactly with the assembled operators.  PV-based diagnostics go
through the same diagnosis (and, for the downwinded scheme, the same shifted
trial basis) as the flux term, because pairing a shifted-basis solution
against the plain basis books an O(tau) phantom drift.
"""

from dataclasses import dataclass

import numpy as np

from .pv import simpson_enstrophy
from .upwinding import downwind_shifts, tau_at_quad

__all__ = [
    "DiagnosticsRecord",
    "energy",
    "mass_total",
    "snapshot_pv",
    "total_vorticity",
    "snapshot_enstrophy",
    "enstrophy",
    "ke_spectrum",
    "fit_loglog_slope",
    "stabilisation_enstrophy_rate",
    "enstrophy_budget_term",
]


@dataclass(frozen=True)
class DiagnosticsRecord:
    """One row of the per-step conservation and solver diagnostics."""

    step: int
    t: float
    energy: float
    enstrophy: float
    mass: float
    vorticity: float
    newton_iters: int
    residual_u: float
    residual_h: float
    scheme: str = "none"


def energy(ops, u, h, g):
    """Total energy: 1/2 integral (h |u|^2 + g h^2)."""
    ux, uy = ops.v1_at_quad(u)
    h_vals = ops.v2_at_quad(h)
    return 0.5 * ops.integrate(h_vals * (ux**2 + uy**2) + g * h_vals**2)


def mass_total(ops, h):
    """Total fluid volume integral h."""
    return ops.integrate(ops.v2_at_quad(h))


def snapshot_pv(ops, diagnosis, u, h, upwind=None, dt=None):
    """State-consistent PV: coefficients, plain values, shifted values.

    For the downwinded scheme the diagnosis uses trial displacements built
    from the state's own velocity; otherwise plain and shifted values agree.
    Returns (q_coeffs, plain_vals, trial_vals).
    """
    shifts = None
    if upwind is not None and upwind.scheme == "downwind":
        ux, uy = ops.v1_at_quad(u)
        tau = tau_at_quad(upwind, ops.mesh, dt, ux, uy)
        shifts = downwind_shifts(upwind, ops.mesh, tau, ux, uy)
        if not (np.any(shifts[0]) or np.any(shifts[1])):
            shifts = None
    q = diagnosis.diagnose_state(u, h, trial_shifts=shifts)
    plain_vals = ops.v0_at_quad(q)
    trial_vals = plain_vals if shifts is None else ops.v0_values_shifted(q, shifts)
    return q, plain_vals, trial_vals


def total_vorticity(ops, diagnosis, u, h, upwind=None, dt=None):
    """Integral of h q, paired through the scheme's own reconstruction."""
    _, _, trial_vals = snapshot_pv(ops, diagnosis, u, h, upwind, dt)
    return ops.integrate(ops.v2_at_quad(h) * trial_vals)


def snapshot_enstrophy(ops, diagnosis, u, h, upwind=None, dt=None):
    """Potential enstrophy 1/2 integral h q q~ (q~ = trial reconstruction).

    The mixed pairing is the quadratic form the shifted-trial diagnosis
    actually controls; with a plain basis it reduces to 1/2 integral h q^2.
    """
    _, plain_vals, trial_vals = snapshot_pv(ops, diagnosis, u, h, upwind, dt)
    return 0.5 * ops.integrate(ops.v2_at_quad(h) * plain_vals * trial_vals)


def enstrophy(ops, diagnosis, u, h, u_prev=None, h_prev=None):
    """Potential enstrophy of one state, or of a step pair by mode.

    With a single state this is the snapshot functional 1/2 integral h q^2.
    Given the previous state as well, the pair functional follows the
    diagnosis mode: the time-mean PV squared against the mid-step depth for
    the instantaneous and midpoint modes, the Simpson form for the
    linear-in-time mode, and the quarter-weighted end-sum for the
    constant-in-time mode.
    """
    if u_prev is None:
        return snapshot_enstrophy(ops, diagnosis, u, h)
    res = diagnosis.diagnose_pair(u_prev, h_prev, u, h)
    hn_vals = ops.v2_at_quad(h_prev)
    hk_vals = ops.v2_at_quad(h)
    if diagnosis.mode == "exact_linear":
        qn_vals = ops.v0_at_quad(res.q_n)
        qk_vals = ops.v0_at_quad(res.q_k)
        return simpson_enstrophy(ops, hn_vals, hk_vals, qn_vals, qk_vals)
    # mid-depth against the squared flux PV; the quarter-weighted end sum
    # is the same thing because the depth interpolates linearly
    q_vals = ops.v0_at_quad(res.q_flux)
    return 0.25 * ops.integrate((hn_vals + hk_vals) * q_vals**2)


# ------------------------------------------------------------------ spectrum


def _sample_matrix(mesh, axis, kind, n):
    """Dense (n, N) matrix evaluating the 1D global basis on a uniform grid."""
    if axis == "x":
        length, n_el, n_lines = mesh.Lx, mesh.nx, mesh.Nx
    else:
        length, n_el, n_lines = mesh.Ly, mesh.ny, mesh.Ny
    d = length / n_el
    xs = np.arange(n) * (length / n)
    e_idx = np.minimum((xs / d).astype(int), n_el - 1)
    xi = 2.0 * (xs - e_idx * d) / d - 1.0
    ref = mesh.ref
    mat = np.zeros((n, n_lines))
    rows = np.arange(n)
    if kind == "node":
        vals = ref.nodal_at(xi)  # (p+1, n)
        for i in range(mesh.p + 1):
            cols = (e_idx * mesh.p + i) % n_lines
            np.add.at(mat, (rows, cols), vals[i])
    else:
        vals = ref.edge_at(xi)  # (p, n)
        for j in range(mesh.p):
            cols = e_idx * mesh.p + j
            np.add.at(mat, (rows, cols), vals[j])
    return mat


def sample_velocity_grid(ops, u, n):
    """Both velocity components on a uniform n x n grid (row = y index)."""
    m = ops.mesh
    half = m.dim_v1 // 2
    cx = u[:half].reshape(m.Ny, m.Nx)
    cy = u[half:].reshape(m.Ny, m.Nx)
    sxn = _sample_matrix(m, "x", "node", n)
    sxe = _sample_matrix(m, "x", "edge", n)
    syn = _sample_matrix(m, "y", "node", n)
    sye = _sample_matrix(m, "y", "edge", n)
    ux = (2.0 / m.dy) * (sye @ cx @ sxn.T)
    uy = (2.0 / m.dx) * (syn @ cy @ sxe.T)
    return ux, uy


def ke_spectrum(ops, u, n=128):
    """Isotropic kinetic energy spectrum by integer-ring binning.

    Samples the velocity on a uniform n x n grid, takes the 2D DFT, and sums
    (Lx Ly / n^4) (|U|^2 + |V|^2) / 2 over rings of rounded integer radius.
    The bin sum equals the grid kinetic energy (discrete Parseval).
    n must be a power of two no smaller than twice the polynomial line count
    in each direction, so the sampling resolves the field.
    """
    m = ops.mesh
    if n < 1 or (n & (n - 1)) != 0:
        raise ValueError(f"sample count {n} is not a power of two")
    need = 2 * max(m.nx, m.ny) * m.p
    if n < need:
        raise ValueError(
            f"sample count {n} undersamples the mesh; need at least {need}"
        )
    ux, uy = sample_velocity_grid(ops, u, n)
    fu = np.fft.fft2(ux)
    fv = np.fft.fft2(uy)
    power = 0.5 * (np.abs(fu) ** 2 + np.abs(fv) ** 2) * (m.Lx * m.Ly) / float(n) ** 4
    freq = np.fft.fftfreq(n, d=1.0 / n)
    k_mag = np.hypot(freq[:, None], freq[None, :])
    k_int = np.rint(k_mag).astype(int)
    e_k = np.bincount(k_int.ravel(), weights=power.ravel())
    return np.arange(e_k.size), e_k


def fit_loglog_slope(k, e_k, k_lo, k_hi):
    """Least-squares slope of log E against log k over [k_lo, k_hi]."""
    k = np.asarray(k, dtype=float)
    e_k = np.asarray(e_k, dtype=float)
    mask = (k >= k_lo) & (k <= k_hi) & (e_k > 0.0) & (k > 0.0)
    if mask.sum() < 2:
        raise ValueError("fewer than two usable spectrum points in the fit range")
    return float(np.polyfit(np.log(k[mask]), np.log(e_k[mask]), 1)[0])


# ------------------------------------------------------------------- budgets


def stabilisation_enstrophy_rate(ops, q_flux_coeffs, q_star_vals, fbar):
    """Enstrophy source of the PV stabilisation, per unit time.

    The weak PV transport implied by the discretisation books
    dt * integral (grad qbar . Fbar)(q* - qbar) of extra enstrophy; with the
    gradient-form correction q* - qbar = -tau (u . grad qbar) and a mass flux
    aligned with the advecting velocity this is non-positive (dissipative),
    while the SUPG time-rate part can take either sign.
    """
    gx, gy = ops.v0_grad_at_quad(q_flux_coeffs)
    fx, fy = ops.v1_at_quad(fbar)
    qbar_vals = ops.v0_at_quad(q_flux_coeffs)
    return ops.integrate((gx * fx + gy * fy) * (q_star_vals - qbar_vals))


def enstrophy_budget_term(ops, scheme, tau_vals, h_vals, ux_vals, uy_vals,
                          q_coeffs, q_rate_coeffs=None, prime_vals=None,
                          prime_rate_vals=None):
    """Semi-discrete enstrophy correction integral of one upwinding scheme.

    The gradient-form correction contributes integral tau h (u.grad q)^2,
    always a sink; adding the time-derivative residual makes it
    integral tau h (dq/dt + u.grad q)(u.grad q), a term of either sign; the
    shifted-trial correction q' = q~ - q contributes
    integral h q (dq'/dt + u.grad q'). For the last form the correction
    lives on quadrature values, so its gradient is taken through a V0
    projection to stay quadrature-consistent.
    """
    if scheme == "none":
        return 0.0
    gx, gy = ops.v0_grad_at_quad(q_coeffs)
    adv = ux_vals * gx + uy_vals * gy
    if scheme == "apvm":
        return ops.integrate(tau_vals * h_vals * adv * adv)
    if scheme == "supg":
        rate = ops.v0_at_quad(q_rate_coeffs) + adv
        return ops.integrate(tau_vals * h_vals * rate * adv)
    if scheme == "downwind":
        p_coeffs = ops.solve("m0", ops.v0_pairing(prime_vals))
        pgx, pgy = ops.v0_grad_at_quad(p_coeffs)
        rate = prime_rate_vals + ux_vals * pgx + uy_vals * pgy
        return ops.integrate(h_vals * ops.v0_at_quad(q_coeffs) * rate)
    raise ValueError(f"unknown upwinding scheme {scheme!r}")
