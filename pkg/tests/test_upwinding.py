"""Upwinding tests.

The Taylor relationship between downwinded evaluation and the gradient-based
correction is checked at fixed coefficients (where it is a pure remainder
bound), the SUPG material residual is cancelled on a manufactured steady
balance, and the clamp geometry is exercised directly.
"""

import numpy as np
import pytest

from swepv.mesh import Mesh2D
from swepv.operators import Operators
from swepv.pv import PVDiagnosis
from swepv.upwinding import (
    UpwindConfig,
    downwind_shifts,
    flux_pv_values,
    tau_at_quad,
)

F0 = 1.0e-4
DEPTH = 8000.0
DT = 360.0


@pytest.fixture(scope="module")
def ops():
    return Operators(Mesh2D(6, 6, 5.0e6, 5.0e6, p=3))


def _coriolis(ops):
    return F0 * np.ones(ops.mesh.dim_v0)


def _state(ops, seed):
    rng = np.random.default_rng(seed)
    u = 20.0 * rng.standard_normal(ops.mesh.dim_v1)
    h = ops.constant_v2(DEPTH)
    h = h * (1.0 + 0.02 * rng.uniform(-1.0, 1.0, size=h.shape))
    return u, h


# ------------------------------------------------------------- configuration


def test_config_validation():
    with pytest.raises(ValueError):
        UpwindConfig(scheme="upstream")
    with pytest.raises(ValueError):
        UpwindConfig(tau_policy="adaptive")
    with pytest.raises(ValueError):
        UpwindConfig(tau=-1.0)
    with pytest.raises(ValueError):
        UpwindConfig(clamp_limit=0.0)


def test_tau_constant_defaults_to_half_step(ops):
    cfg = UpwindConfig(scheme="apvm")
    assert tau_at_quad(cfg, ops.mesh, DT, None, None) == 0.5 * DT
    cfg = UpwindConfig(scheme="apvm", tau=17.0)
    assert tau_at_quad(cfg, ops.mesh, DT, None, None) == 17.0


def test_tau_velocity_scaled_formula(ops):
    cfg = UpwindConfig(scheme="apvm", tau_policy="velocity_scaled")
    ux = np.array([[0.0, 30.0]])
    uy = np.array([[0.0, 40.0]])
    tau = tau_at_quad(cfg, ops.mesh, DT, ux, uy)
    assert abs(tau[0, 0] - 0.5 * DT) < 1e-12 * DT
    want = 1.0 / (2.0 / DT + 50.0 / (2.0 * np.sqrt(ops.mesh.det_j)))
    assert abs(tau[0, 1] - want) < 1e-12 * want
    assert tau[0, 1] < tau[0, 0]


# -------------------------------------------------------------------- clamps


def test_downwind_shift_clamped_to_element(ops):
    m = ops.mesh
    cfg = UpwindConfig(scheme="downwind")
    shape = (m.n_elements, m.n_q**2)
    big = np.full(shape, 5.0 * m.dx / 2.0)  # raw reference shift of 5
    d_xi, d_eta = downwind_shifts(cfg, m, 1.0, big, np.zeros(shape))
    xi = m.ref.xq[m.qa]
    want = np.minimum(1.0, xi + 1.0)
    assert np.max(np.abs(d_xi - want[None, :])) < 1e-14
    assert np.max(np.abs(d_eta)) == 0.0
    # displaced points stay inside the element
    assert np.all(xi[None, :] - d_xi >= -1.0 - 1e-14)

    d_xi, _ = downwind_shifts(cfg, m, 1.0, -big, np.zeros(shape))
    want = np.maximum(-1.0, xi - 1.0)
    assert np.max(np.abs(d_xi - want[None, :])) < 1e-14


def test_downwind_shift_respects_limit(ops):
    m = ops.mesh
    cfg = UpwindConfig(scheme="downwind", clamp_limit=0.25)
    shape = (m.n_elements, m.n_q**2)
    big = np.full(shape, 5.0 * m.dx / 2.0)
    d_xi, d_eta = downwind_shifts(cfg, m, 1.0, big, big * (m.dy / m.dx))
    assert np.max(np.abs(d_xi)) <= 0.25 + 1e-15
    assert np.max(np.abs(d_eta)) <= 0.25 + 1e-15


# -------------------------------------------------------------- scheme wiring


def test_apvm_subtracts_gradient_correction(ops):
    u_n, h_n = _state(ops, seed=50)
    u_k, h_k = _state(ops, seed=51)
    diag = PVDiagnosis(ops, _coriolis(ops))
    tau = 120.0
    plain = flux_pv_values(
        ops, diag, UpwindConfig(scheme="none"), u_n, h_n, u_k, h_k, DT
    )
    up = flux_pv_values(
        ops, diag, UpwindConfig(scheme="apvm", tau=tau), u_n, h_n, u_k, h_k, DT
    )
    ux, uy = ops.v1_at_quad(0.5 * (u_n + u_k))
    gx, gy = ops.v0_grad_at_quad(plain.pv.q_flux)
    want = plain.q_vals - tau * (ux * gx + uy * gy)
    scale = np.max(np.abs(plain.q_vals))
    assert np.max(np.abs(up.q_vals - want)) < 1e-12 * scale


def test_supg_adds_time_rate(ops):
    u_n, h_n = _state(ops, seed=52)
    u_k, h_k = _state(ops, seed=53)
    diag = PVDiagnosis(ops, _coriolis(ops), mode="midpoint")
    tau = 120.0
    apvm = flux_pv_values(
        ops, diag, UpwindConfig(scheme="apvm", tau=tau), u_n, h_n, u_k, h_k, DT
    )
    supg = flux_pv_values(
        ops, diag, UpwindConfig(scheme="supg", tau=tau), u_n, h_n, u_k, h_k, DT
    )
    rate = ops.v0_at_quad((apvm.pv.q_k - apvm.pv.q_n) / DT)
    scale = np.max(np.abs(apvm.q_vals))
    assert np.max(np.abs(supg.q_vals - (apvm.q_vals - tau * rate))) < 1e-12 * scale


def test_supg_steady_balance_cancels(ops):
    # manufactured fixed point: with h = const and the Coriolis coefficients
    # chosen as H*psi + M0^{-1} R^T u, the diagnosed PV equals psi exactly;
    # taking u as the strong perp-gradient of psi makes u.grad(q) vanish
    # pointwise, and the steady pair kills the time rate
    m = ops.mesh
    rng = np.random.default_rng(54)
    psi = 1e-4 * (1.0 + 0.5 * rng.standard_normal(m.dim_v0))
    u = m.perp @ psi
    h = ops.constant_v2(DEPTH)
    f_c = DEPTH * psi + ops.solve("m0", ops.r.T @ u)
    diag = PVDiagnosis(ops, f_c, mode="midpoint")
    tau = 0.5 * DT
    res = flux_pv_values(
        ops, diag, UpwindConfig(scheme="supg", tau=tau), u, h, u, h, DT
    )
    plain_vals = ops.v0_at_quad(res.pv.q_flux)
    ux, uy = ops.v1_at_quad(u)
    gx, gy = ops.v0_grad_at_quad(psi)
    grad_scale = tau * np.max(np.hypot(ux, uy)) * np.max(np.hypot(gx, gy))
    assert np.max(np.abs(res.q_vals - plain_vals)) < 1e-9 * grad_scale
    # and the diagnosis actually hit the manufactured field
    assert np.max(np.abs(res.pv.q_flux - psi)) < 1e-10 * np.max(np.abs(psi))


def test_downwind_taylor_matches_gradient_form(ops):
    # shifted evaluation of fixed coefficients equals the gradient correction
    # to O(tau^2): halving tau shrinks the difference about fourfold
    m = ops.mesh
    rng = np.random.default_rng(55)
    psi = rng.standard_normal(m.dim_v0)
    u = 20.0 * rng.standard_normal(m.dim_v1)
    ux, uy = ops.v1_at_quad(u)
    psi_vals = ops.v0_at_quad(psi)
    gx, gy = ops.v0_grad_at_quad(psi)
    cfg = UpwindConfig(scheme="downwind")

    def gap(tau, mask):
        shifts = downwind_shifts(cfg, m, tau, ux, uy)
        down = ops.v0_values_shifted(psi, shifts)
        apvm_form = psi_vals - tau * (ux * gx + uy * gy)
        return np.max(np.abs(down - apvm_form)[mask])

    # boundary quadrature points clamp any outward shift to zero, which is an
    # O(tau) deviation by construction; the Taylor statement concerns the
    # unclamped points, and a point unclamped at tau stays so at tau/2
    tau = 2000.0
    raw = (tau * ux * 2.0 / m.dx, tau * uy * 2.0 / m.dy)
    clamped = downwind_shifts(cfg, m, tau, ux, uy)
    mask = (raw[0] == clamped[0]) & (raw[1] == clamped[1])
    assert 0.2 * mask.size < mask.sum() < mask.size
    e1, e2 = gap(tau, mask), gap(0.5 * tau, mask)
    assert e1 / e2 >= 3.9


def test_downwind_diagnosis_carries_shifts(ops):
    u_n, h_n = _state(ops, seed=56)
    u_k, h_k = _state(ops, seed=57)
    diag = PVDiagnosis(ops, _coriolis(ops))
    res = flux_pv_values(
        ops, diag, UpwindConfig(scheme="downwind", tau=120.0),
        u_n, h_n, u_k, h_k, DT,
    )
    assert res.trial_shifts is not None
    assert res.pv.trial_shifts is res.trial_shifts
    # reconstruction used the shifted basis
    want = ops.v0_values_shifted(res.pv.q_flux, res.trial_shifts)
    assert np.array_equal(res.q_vals, want)


def test_zero_tau_reduces_to_plain(ops):
    u_n, h_n = _state(ops, seed=58)
    u_k, h_k = _state(ops, seed=59)
    diag = PVDiagnosis(ops, _coriolis(ops))
    plain = flux_pv_values(
        ops, diag, UpwindConfig(scheme="none"), u_n, h_n, u_k, h_k, DT
    )
    for scheme in ("apvm", "supg", "downwind"):
        up = flux_pv_values(
            ops, diag, UpwindConfig(scheme=scheme, tau=0.0),
            u_n, h_n, u_k, h_k, DT,
        )
        assert np.array_equal(up.q_vals, plain.q_vals)
        if scheme == "downwind":
            assert up.trial_shifts is None
