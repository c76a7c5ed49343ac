"""Potential vorticity diagnosis.

PV lives in the continuous space V0 and is defined weakly through the
depth-weighted mass matrix:

    <psi, h q> = <psi, curl u> + <psi, f>   for all psi in V0,

where the curl pairing integrates by parts onto the perp-gradient operator.
Four step-pair diagnosis modes are provided:

* ``instantaneous``  one diagnosis at the arithmetic mid-state,
* ``midpoint``       average of the two endpoint diagnoses,
* ``exact_linear``   a coupled system for the endpoint pair that enforces
                     the diagnostic relation weakly in time against linear
                     test functions,
* ``exact_constant`` a single field enforcing the relation integrated over
                     the step.

All modes accept optional trial-point displacements so that a downwinded
trial basis can be threaded through every depth-weighted block.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

__all__ = [
    "DepthPositivityError",
    "PVSolver",
    "PVDiagnosis",
    "PV_MODES",
    "simpson_enstrophy",
]

PV_MODES = ("instantaneous", "midpoint", "exact_linear", "exact_constant")


class DepthPositivityError(RuntimeError):
    """Raised when the layer depth is non-positive at a quadrature point."""


def _check_depth(h_vals):
    low = float(h_vals.min())
    if not np.isfinite(low) or low <= 0.0:
        raise DepthPositivityError(
            f"layer depth reached {low:.6g}; PV diagnosis requires h > 0"
        )


def simpson_enstrophy(ops, hn_vals, hk_vals, qn_vals, qk_vals,
                      bn_vals=None, bk_vals=None):
    """Potential enstrophy 1/2 integral h q^2 averaged over a step.

    h and q vary linearly in time, making the integrand cubic; Simpson's
    rule integrates it exactly.  Collapses to 1/2 integral h q^2 when both
    endpoint fields agree.

    With bn_vals/bk_vals the second q factor is replaced, giving the mixed
    pairing 1/2 integral h q b that a shifted trial basis conserves (q from
    the plain reconstruction, b from the shifted one).
    """
    if bn_vals is None:
        bn_vals = qn_vals
    if bk_vals is None:
        bk_vals = qk_vals
    integrand = (
        1.5 * hn_vals * qn_vals * bn_vals
        + 0.5 * hn_vals * qk_vals * bk_vals
        + 0.5 * (hn_vals + hk_vals) * (qn_vals * bk_vals + qk_vals * bn_vals)
        + 0.5 * hk_vals * qn_vals * bn_vals
        + 1.5 * hk_vals * qk_vals * bk_vals
    ) / 12.0
    return ops.integrate(integrand)


class PVSolver:
    """Linear solves against depth-weighted V0 mass systems.

    Symmetric systems run preconditioned CG with the unweighted V0 mass
    as preconditioner (the weighted operator is a mild perturbation of
    mean_depth * M0, so a handful of iterations suffice); unsymmetric
    systems and CG failures fall back to a direct factorisation.
    """

    def __init__(self, ops, method="auto", rtol=1e-14, maxiter=400):
        if method not in ("auto", "direct"):
            raise ValueError(f"unknown solver method {method!r}")
        self.ops = ops
        self.method = method
        self.rtol = rtol
        self.maxiter = maxiter
        self.cg_iterations = []
        self.direct_solves = 0

    def _precondition_single(self):
        n = self.ops.mesh.dim_v0
        return spla.LinearOperator((n, n), matvec=lambda r: self.ops.solve("m0", r))

    def _precondition_block(self):
        n = self.ops.mesh.dim_v0

        def apply(r):
            r1, r2 = r[:n], r[n:]
            # inverse of the P1 time-coupling matrix [[2/3,1/3],[1/3,2/3]]
            z1 = self.ops.solve("m0", 2.0 * r1 - r2)
            z2 = self.ops.solve("m0", -r1 + 2.0 * r2)
            return np.concatenate([z1, z2])

        return spla.LinearOperator((2 * n, 2 * n), matvec=apply)

    def _cg(self, op, rhs, precond):
        count = [0]

        def cb(_):
            count[0] += 1

        x, info = spla.cg(
            op, rhs, rtol=self.rtol, atol=0.0, M=precond,
            maxiter=self.maxiter, callback=cb,
        )
        if info == 0:
            self.cg_iterations.append(count[0])
            return x
        return None

    def solve_single(self, h0, rhs, symmetric):
        if self.method != "direct" and symmetric:
            x = self._cg(h0, rhs, self._precondition_single())
            if x is not None:
                return x
        self.direct_solves += 1
        return spla.splu(h0.tocsc()).solve(rhs)

    def solve_block(self, a, b, c, rhs, symmetric):
        if self.method != "direct" and symmetric:
            n = a.shape[0]

            def matvec(x):
                x1, x2 = x[:n], x[n:]
                return np.concatenate([a @ x1 + b @ x2, b @ x1 + c @ x2])

            op = spla.LinearOperator((2 * n, 2 * n), matvec=matvec)
            x = self._cg(op, rhs, self._precondition_block())
            if x is not None:
                return x[:n], x[n:]
        self.direct_solves += 1
        full = sp.bmat([[a, b], [b, c]], format="csc")
        x = spla.splu(full).solve(rhs)
        n = a.shape[0]
        return x[:n], x[n:]

    def solve_block_unsym(self, blocks, rhs):
        self.direct_solves += 1
        full = sp.bmat(blocks, format="csc")
        x = spla.splu(full).solve(rhs)
        n = blocks[0][0].shape[0]
        return x[:n], x[n:]


@dataclass
class PVResult:
    """Outcome of a step-pair diagnosis.

    q_flux holds the V0 coefficients entering the rotation term (for the
    pair-producing modes this is the arithmetic mean); q_n/q_k hold the
    endpoint pair when the mode defines one, else None.
    """

    q_flux: np.ndarray
    q_n: np.ndarray | None
    q_k: np.ndarray | None
    trial_shifts: tuple | None


class PVDiagnosis:
    """Mode dispatcher bound to one operator set and Coriolis field."""

    def __init__(self, ops, coriolis, mode="midpoint", solver=None):
        if mode not in PV_MODES:
            raise ValueError(f"unknown pv mode {mode!r}; pick one of {PV_MODES}")
        self.ops = ops
        self.mode = mode
        self.solver = solver if solver is not None else PVSolver(ops)
        self.f_coeffs = np.asarray(coriolis, dtype=float)
        self._m0f = ops.m0 @ self.f_coeffs

    # -- single-state diagnosis ------------------------------------------

    def diagnose_state(self, u, h, trial_shifts=None):
        """PV coefficients at one state: <psi, h q> = <psi, curl u + f>."""
        ops = self.ops
        h_vals = ops.v2_at_quad(h)
        _check_depth(h_vals)
        h0 = ops.assemble_weighted_v0_mass(h_vals, trial_shifts)
        rhs = -(ops.r.T @ u) + self._m0f
        return self.solver.solve_single(h0, rhs, symmetric=trial_shifts is None)

    # -- step-pair diagnosis ---------------------------------------------

    def diagnose_pair(self, u_n, h_n, u_k, h_k, trial_shifts=None):
        ops = self.ops
        if self.mode == "instantaneous":
            q = self.diagnose_state(
                0.5 * (u_n + u_k), 0.5 * (h_n + h_k), trial_shifts
            )
            return PVResult(q, None, None, trial_shifts)

        if self.mode == "midpoint":
            q_n = self.diagnose_state(u_n, h_n, trial_shifts)
            q_k = self.diagnose_state(u_k, h_k, trial_shifts)
            return PVResult(0.5 * (q_n + q_k), q_n, q_k, trial_shifts)

        if self.mode == "exact_constant":
            hn_vals = ops.v2_at_quad(h_n)
            hk_vals = ops.v2_at_quad(h_k)
            _check_depth(hn_vals)
            _check_depth(hk_vals)
            h0 = ops.assemble_weighted_v0_mass(hn_vals + hk_vals, trial_shifts)
            rhs = -(ops.r.T @ (u_n + u_k)) + 2.0 * self._m0f
            q = self.solver.solve_single(h0, rhs, symmetric=trial_shifts is None)
            return PVResult(q, None, None, trial_shifts)

        # exact_linear: diagnostic relation tested against 2(1-s) and 2s
        hn_vals = ops.v2_at_quad(h_n)
        hk_vals = ops.v2_at_quad(h_k)
        _check_depth(hn_vals)
        _check_depth(hk_vals)
        sixth = 1.0 / 6.0
        a = ops.assemble_weighted_v0_mass(
            sixth * (3.0 * hn_vals + hk_vals), trial_shifts
        )
        b = ops.assemble_weighted_v0_mass(
            sixth * (hn_vals + hk_vals), trial_shifts
        )
        c = ops.assemble_weighted_v0_mass(
            sixth * (hn_vals + 3.0 * hk_vals), trial_shifts
        )
        third = 1.0 / 3.0
        rhs = np.concatenate([
            -third * (ops.r.T @ (2.0 * u_n + u_k)) + self._m0f,
            -third * (ops.r.T @ (u_n + 2.0 * u_k)) + self._m0f,
        ])
        if trial_shifts is None:
            q_n, q_k = self.solver.solve_block(a, b, c, rhs, symmetric=True)
        else:
            q_n, q_k = self.solver.solve_block_unsym([[a, b], [b, c]], rhs)
        return PVResult(0.5 * (q_n + q_k), q_n, q_k, trial_shifts)

    # -- reconstruction ----------------------------------------------------

    def values_at_quad(self, q_coeffs, trial_shifts=None):
        """Physical PV values, honouring a shifted trial basis if given."""
        if trial_shifts is None:
            return self.ops.v0_at_quad(q_coeffs)
        return self.ops.v0_values_shifted(q_coeffs, trial_shifts)
