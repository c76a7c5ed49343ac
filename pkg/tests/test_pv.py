"""Potential vorticity diagnosis tests.

Assembly-path results are cross-checked against independent quadrature
evaluations (values sampled at quadrature points, integrated directly), a
closed-form elimination oracle for the equal-depth coupled system, and the
quadratic-form identities that the exact-in-time modes must satisfy.
"""

import numpy as np
import pytest

from swepv.mesh import Mesh2D
from swepv.operators import Operators
from swepv.pv import (
    DepthPositivityError,
    PVDiagnosis,
    PVSolver,
    PV_MODES,
    simpson_enstrophy,
)

F0 = 1.0e-4
DEPTH = 8000.0


@pytest.fixture(scope="module")
def ops():
    return Operators(Mesh2D(6, 6, 5.0e6, 5.0e6, p=3))


def _coriolis(ops):
    return F0 * np.ones(ops.mesh.dim_v0)


def _random_state(ops, seed, u_scale=20.0, h_rel=0.02):
    rng = np.random.default_rng(seed)
    u = u_scale * rng.standard_normal(ops.mesh.dim_v1)
    h = ops.constant_v2(DEPTH)
    h = h * (1.0 + h_rel * rng.uniform(-1.0, 1.0, size=h.shape))
    assert ops.v2_at_quad(h).min() > 0.0
    return u, h


def _relation_lhs(ops, w, h_vals, q_vals):
    return ops.integrate(ops.v0_at_quad(w) * h_vals * q_vals)


def _relation_rhs(ops, w, u, f_coeffs):
    gx, gy = ops.v0_grad_at_quad(w)
    ux, uy = ops.v1_at_quad(u)
    curl_part = ops.integrate(-(-gy) * ux - gx * uy)
    f_part = ops.integrate(ops.v0_at_quad(w) * ops.v0_at_quad(f_coeffs))
    return curl_part + f_part


# ----------------------------------------------------------- exact rest state


@pytest.mark.parametrize("mode", PV_MODES)
def test_rest_state_gives_planetary_pv(ops, mode):
    diag = PVDiagnosis(ops, _coriolis(ops), mode=mode)
    u = np.zeros(ops.mesh.dim_v1)
    h = ops.constant_v2(DEPTH)
    res = diag.diagnose_pair(u, h, u, h)
    expect = F0 / DEPTH
    assert np.max(np.abs(res.q_flux - expect)) < 1e-13 * expect
    if res.q_n is not None:
        assert np.max(np.abs(res.q_n - expect)) < 1e-13 * expect
        assert np.max(np.abs(res.q_k - expect)) < 1e-13 * expect


# ------------------------------------------------- defining relation satisfied


def test_single_state_relation_against_quadrature(ops):
    diag = PVDiagnosis(ops, _coriolis(ops))
    u, h = _random_state(ops, seed=21)
    q = diag.diagnose_state(u, h)
    h_vals = ops.v2_at_quad(h)
    q_vals = ops.v0_at_quad(q)
    rng = np.random.default_rng(22)
    for _ in range(4):
        w = rng.standard_normal(ops.mesh.dim_v0)
        lhs = _relation_lhs(ops, w, h_vals, q_vals)
        rhs = _relation_rhs(ops, w, u, diag.f_coeffs)
        assert abs(lhs - rhs) < 1e-12 * (abs(lhs) + abs(rhs) + 1e-30)


def test_exact_constant_relation_integrated_over_step(ops):
    diag = PVDiagnosis(ops, _coriolis(ops), mode="exact_constant")
    u_n, h_n = _random_state(ops, seed=23)
    u_k, h_k = _random_state(ops, seed=24)
    res = diag.diagnose_pair(u_n, h_n, u_k, h_k)
    hn_vals = ops.v2_at_quad(h_n)
    hk_vals = ops.v2_at_quad(h_k)
    q_vals = ops.v0_at_quad(res.q_flux)
    rng = np.random.default_rng(25)
    for _ in range(4):
        w = rng.standard_normal(ops.mesh.dim_v0)
        lhs = _relation_lhs(ops, w, hn_vals + hk_vals, q_vals)
        rhs = _relation_rhs(ops, w, u_n, diag.f_coeffs) + _relation_rhs(
            ops, w, u_k, diag.f_coeffs
        )
        assert abs(lhs - rhs) < 1e-12 * (abs(lhs) + abs(rhs) + 1e-30)


def test_exact_linear_block_rows_against_quadrature(ops):
    diag = PVDiagnosis(ops, _coriolis(ops), mode="exact_linear")
    u_n, h_n = _random_state(ops, seed=26)
    u_k, h_k = _random_state(ops, seed=27)
    res = diag.diagnose_pair(u_n, h_n, u_k, h_k)
    hn_vals = ops.v2_at_quad(h_n)
    hk_vals = ops.v2_at_quad(h_k)
    qn_vals = ops.v0_at_quad(res.q_n)
    qk_vals = ops.v0_at_quad(res.q_k)
    rng = np.random.default_rng(28)
    for _ in range(3):
        w = rng.standard_normal(ops.mesh.dim_v0)
        # first row: tests against 2(1-s)
        lhs = (
            _relation_lhs(ops, w, 3.0 * hn_vals + hk_vals, qn_vals)
            + _relation_lhs(ops, w, hn_vals + hk_vals, qk_vals)
        ) / 6.0
        rhs = (
            2.0 * _relation_rhs(ops, w, u_n, diag.f_coeffs)
            + _relation_rhs(ops, w, u_k, diag.f_coeffs)
        ) / 3.0
        assert abs(lhs - rhs) < 1e-12 * (abs(lhs) + abs(rhs) + 1e-30)
        # second row: tests against 2s
        lhs = (
            _relation_lhs(ops, w, hn_vals + hk_vals, qn_vals)
            + _relation_lhs(ops, w, hn_vals + 3.0 * hk_vals, qk_vals)
        ) / 6.0
        rhs = (
            _relation_rhs(ops, w, u_n, diag.f_coeffs)
            + 2.0 * _relation_rhs(ops, w, u_k, diag.f_coeffs)
        ) / 3.0
        assert abs(lhs - rhs) < 1e-12 * (abs(lhs) + abs(rhs) + 1e-30)


# ------------------------------------------------------------ mode consistency


def test_all_modes_agree_on_constant_step(ops):
    u, h = _random_state(ops, seed=29)
    results = {}
    for mode in PV_MODES:
        diag = PVDiagnosis(ops, _coriolis(ops), mode=mode)
        results[mode] = diag.diagnose_pair(u, h, u, h).q_flux
    ref = results["instantaneous"]
    scale = np.max(np.abs(ref))
    for mode in PV_MODES:
        assert np.max(np.abs(results[mode] - ref)) < 1e-12 * scale
    # and the pair collapses onto the flux field
    diag = PVDiagnosis(ops, _coriolis(ops), mode="exact_linear")
    res = diag.diagnose_pair(u, h, u, h)
    assert np.max(np.abs(res.q_n - res.q_k)) < 1e-12 * scale


def test_exact_linear_equal_depth_elimination_oracle(ops):
    # with h_n = h_k every block is a multiple of one weighted mass, and the
    # 2x2 time coupling [[2/3,1/3],[1/3,2/3]] inverts to [[2,-1],[-1,2]]
    diag = PVDiagnosis(ops, _coriolis(ops), mode="exact_linear")
    rng = np.random.default_rng(30)
    u_n = 20.0 * rng.standard_normal(ops.mesh.dim_v1)
    u_k = 20.0 * rng.standard_normal(ops.mesh.dim_v1)
    _, h = _random_state(ops, seed=31)
    res = diag.diagnose_pair(u_n, h, u_k, h)

    h_vals = ops.v2_at_quad(h)
    h0 = ops.assemble_weighted_v0_mass(h_vals)
    solver = PVSolver(ops)
    m0f = ops.m0 @ diag.f_coeffs
    r1 = -(ops.r.T @ (2.0 * u_n + u_k)) / 3.0 + m0f
    r2 = -(ops.r.T @ (u_n + 2.0 * u_k)) / 3.0 + m0f
    q_n = solver.solve_single(h0, 2.0 * r1 - r2, symmetric=True)
    q_k = solver.solve_single(h0, -r1 + 2.0 * r2, symmetric=True)
    scale = np.max(np.abs(q_n))
    assert np.max(np.abs(res.q_n - q_n)) < 1e-11 * scale
    assert np.max(np.abs(res.q_k - q_k)) < 1e-11 * scale


# ------------------------------------------------------ quadratic-form checks


def test_exact_linear_euler_identity_gives_simpson_enstrophy(ops):
    # contracting the coupled system with its own solution yields four times
    # the Simpson-rule step enstrophy
    diag = PVDiagnosis(ops, _coriolis(ops), mode="exact_linear")
    u_n, h_n = _random_state(ops, seed=32)
    u_k, h_k = _random_state(ops, seed=33)
    res = diag.diagnose_pair(u_n, h_n, u_k, h_k)
    m0f = ops.m0 @ diag.f_coeffs
    r1 = -(ops.r.T @ (2.0 * u_n + u_k)) / 3.0 + m0f
    r2 = -(ops.r.T @ (u_n + 2.0 * u_k)) / 3.0 + m0f
    contraction = res.q_n @ r1 + res.q_k @ r2
    z = simpson_enstrophy(
        ops,
        ops.v2_at_quad(h_n),
        ops.v2_at_quad(h_k),
        ops.v0_at_quad(res.q_n),
        ops.v0_at_quad(res.q_k),
    )
    assert abs(contraction - 4.0 * z) < 1e-11 * abs(contraction)


def test_exact_constant_euler_identity(ops):
    diag = PVDiagnosis(ops, _coriolis(ops), mode="exact_constant")
    u_n, h_n = _random_state(ops, seed=34)
    u_k, h_k = _random_state(ops, seed=35)
    res = diag.diagnose_pair(u_n, h_n, u_k, h_k)
    m0f = ops.m0 @ diag.f_coeffs
    rhs = -(ops.r.T @ (u_n + u_k)) + 2.0 * m0f
    q_vals = ops.v0_at_quad(res.q_flux)
    both = ops.v2_at_quad(h_n) + ops.v2_at_quad(h_k)
    quad_form = ops.integrate(both * q_vals**2)
    assert abs(res.q_flux @ rhs - quad_form) < 1e-11 * abs(quad_form)


def test_simpson_enstrophy_collapses_on_constant_step(ops):
    rng = np.random.default_rng(36)
    ne, nq2 = ops.mesh.n_elements, ops.mesh.n_q**2
    h = rng.uniform(0.5, 1.5, size=(ne, nq2))
    q = rng.standard_normal((ne, nq2))
    z = simpson_enstrophy(ops, h, h, q, q)
    want = 0.5 * ops.integrate(h * q**2)
    assert abs(z - want) < 1e-13 * abs(want)


# --------------------------------------------------------- vorticity pairings


@pytest.mark.parametrize("mode", PV_MODES)
def test_total_vorticity_pairing_matches_coriolis_integral(ops, mode):
    # the constant test function reduces the diagnosis to
    # integral h q = integral f, whatever the state
    diag = PVDiagnosis(ops, _coriolis(ops), mode=mode)
    u_n, h_n = _random_state(ops, seed=37)
    u_k, h_k = _random_state(ops, seed=38)
    res = diag.diagnose_pair(u_n, h_n, u_k, h_k)
    area = ops.mesh.Lx * ops.mesh.Ly
    want = F0 * area
    hn_vals = ops.v2_at_quad(h_n)
    hk_vals = ops.v2_at_quad(h_k)
    if mode == "instantaneous":
        got = ops.integrate(
            0.5 * (hn_vals + hk_vals) * ops.v0_at_quad(res.q_flux)
        )
    elif mode == "midpoint":
        got = 0.5 * (
            ops.integrate(hn_vals * ops.v0_at_quad(res.q_n))
            + ops.integrate(hk_vals * ops.v0_at_quad(res.q_k))
        )
    elif mode == "exact_constant":
        got = 0.5 * ops.integrate(
            (hn_vals + hk_vals) * ops.v0_at_quad(res.q_flux)
        )
    else:
        qn_vals = ops.v0_at_quad(res.q_n)
        qk_vals = ops.v0_at_quad(res.q_k)
        got = ops.integrate(
            ((4.0 * hn_vals + 2.0 * hk_vals) * qn_vals
             + (2.0 * hn_vals + 4.0 * hk_vals) * qk_vals) / 12.0
        )
    assert abs(got - want) < 1e-11 * abs(want)


def test_varying_coriolis_total_vorticity(ops):
    m = ops.mesh
    rng = np.random.default_rng(39)
    f_coeffs = F0 * (1.0 + 0.3 * rng.standard_normal(m.dim_v0))
    diag = PVDiagnosis(ops, f_coeffs, mode="instantaneous")
    u, h = _random_state(ops, seed=40)
    res = diag.diagnose_pair(u, h, u, h)
    got = ops.integrate(ops.v2_at_quad(h) * ops.v0_at_quad(res.q_flux))
    want = ops.integrate(ops.v0_at_quad(f_coeffs))
    assert abs(got - want) < 1e-11 * abs(want)


# ------------------------------------------------------------ shifted trials


def test_shifted_trial_relation_against_quadrature(ops):
    m = ops.mesh
    rng = np.random.default_rng(41)
    shifts = (
        0.05 * rng.uniform(-1.0, 1.0, size=(m.n_elements, m.n_q**2)),
        0.05 * rng.uniform(-1.0, 1.0, size=(m.n_elements, m.n_q**2)),
    )
    diag = PVDiagnosis(ops, _coriolis(ops), mode="instantaneous")
    u, h = _random_state(ops, seed=42)
    q = diag.diagnose_state(u, h, trial_shifts=shifts)
    h_vals = ops.v2_at_quad(h)
    q_vals = diag.values_at_quad(q, trial_shifts=shifts)
    for seed in (43, 44, 45):
        w = np.random.default_rng(seed).standard_normal(m.dim_v0)
        lhs = _relation_lhs(ops, w, h_vals, q_vals)
        rhs = _relation_rhs(ops, w, u, diag.f_coeffs)
        assert abs(lhs - rhs) < 1e-12 * (abs(lhs) + abs(rhs) + 1e-30)
    # constant test function: the pairing still books the full Coriolis area
    area = m.Lx * m.Ly
    got = ops.integrate(h_vals * q_vals)
    assert abs(got - F0 * area) < 1e-11 * F0 * area


def test_shifted_block_diagnosis_solves(ops):
    m = ops.mesh
    rng = np.random.default_rng(46)
    shifts = (
        0.03 * rng.uniform(-1.0, 1.0, size=(m.n_elements, m.n_q**2)),
        np.zeros((m.n_elements, m.n_q**2)),
    )
    diag = PVDiagnosis(ops, _coriolis(ops), mode="exact_linear")
    u_n, h_n = _random_state(ops, seed=47)
    u_k, h_k = _random_state(ops, seed=48)
    res = diag.diagnose_pair(u_n, h_n, u_k, h_k, trial_shifts=shifts)
    assert res.q_n is not None and np.all(np.isfinite(res.q_n))
    # Euler identity still holds for the unsymmetric system
    m0f = ops.m0 @ diag.f_coeffs
    r1 = -(ops.r.T @ (2.0 * u_n + u_k)) / 3.0 + m0f
    r2 = -(ops.r.T @ (u_n + 2.0 * u_k)) / 3.0 + m0f
    contraction = res.q_n @ r1 + res.q_k @ r2
    # the conserved quantity mixes the plain test reconstruction with the
    # shifted trial reconstruction of the same coefficients
    z = simpson_enstrophy(
        ops,
        ops.v2_at_quad(h_n),
        ops.v2_at_quad(h_k),
        ops.v0_at_quad(res.q_n),
        ops.v0_at_quad(res.q_k),
        diag.values_at_quad(res.q_n, shifts),
        diag.values_at_quad(res.q_k, shifts),
    )
    assert abs(contraction - 4.0 * z) < 1e-11 * abs(contraction)


# ------------------------------------------------------------ solver and guards


def test_pcg_matches_direct(ops):
    u, h = _random_state(ops, seed=49)
    fast = PVDiagnosis(ops, _coriolis(ops), solver=PVSolver(ops, method="auto"))
    slow = PVDiagnosis(ops, _coriolis(ops), solver=PVSolver(ops, method="direct"))
    q_fast = fast.diagnose_state(u, h)
    q_slow = slow.diagnose_state(u, h)
    scale = np.max(np.abs(q_slow))
    assert np.max(np.abs(q_fast - q_slow)) < 1e-11 * scale
    assert fast.solver.cg_iterations and fast.solver.cg_iterations[0] <= 40
    assert slow.solver.direct_solves == 1


@pytest.mark.parametrize("mode", PV_MODES)
def test_nonpositive_depth_raises(ops, mode):
    diag = PVDiagnosis(ops, _coriolis(ops), mode=mode)
    u = np.zeros(ops.mesh.dim_v1)
    h = ops.constant_v2(DEPTH)
    h_bad = h.copy()
    h_bad[: h.size // 2] *= -1.0
    with pytest.raises(DepthPositivityError):
        diag.diagnose_pair(u, h_bad, u, h, trial_shifts=None)
    with pytest.raises(DepthPositivityError):
        diag.diagnose_pair(u, h, u, h_bad, trial_shifts=None)


def test_unknown_mode_rejected(ops):
    with pytest.raises(ValueError):
        PVDiagnosis(ops, _coriolis(ops), mode="upstream")
