"""Galerkin operators for the compatible shallow water discretisation.

Everything is assembled with GLL quadrature on congruent elements, so the
unweighted operators (masses, weak divergence, weak perp-gradient) share one
local matrix scattered over the mesh.  Field-weighted operators (the rotation
pairing and the weighted V0 mass) are reassembled per call from values at the
quadrature points.

Metric conventions for the affine map onto [-1,1]^2 with diagonal Jacobian
J = diag(dx/2, dy/2), det J = dx*dy/4:

* V0 transforms by composition,
* V1 by the contravariant Piola map u = J u_hat / det J,
* V2 as a density, h = h_hat / det J,

which makes the strong derivative maps pure coefficient differences.
"""

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

__all__ = ["Operators"]


def _tensor_table(bx, by):
    """Tensor 1D tables (n_bx, n_q) x (n_by, n_q) -> (n_bx*n_by, n_q*n_q).

    Local basis index l = ix + n_bx*iy, quadrature index q = a + n_q*b.
    """
    t = np.einsum("ia,jb->jiba", bx, by)
    nb = bx.shape[0] * by.shape[0]
    nq = bx.shape[1] * by.shape[1]
    return np.ascontiguousarray(t.reshape(nb, nq))


class Operators:
    """Assembled de Rham operators and evaluation tables for one mesh."""

    def __init__(self, mesh):
        self.mesh = mesh
        ref = mesh.ref
        self.v0_val = _tensor_table(ref.L, ref.L)
        self.v0_dxi = _tensor_table(ref.dL, ref.L)
        self.v0_deta = _tensor_table(ref.L, ref.dL)
        self.ux_val = _tensor_table(ref.L, ref.E)
        self.uy_val = _tensor_table(ref.E, ref.L)
        self.ux_dxi = _tensor_table(ref.dL, ref.E)
        self.uy_deta = _tensor_table(ref.E, ref.dL)
        self.v2_val = _tensor_table(ref.E, ref.E)

        self._assemble_constant_operators()
        self._lu = {}

    # ----------------------------------------------------------- assembly core

    def _scatter(self, rows_map, cols_map, data, shape):
        ne = self.mesh.n_elements
        nl_r = rows_map.shape[1]
        nl_c = cols_map.shape[1]
        rows = np.broadcast_to(rows_map[:, :, None], (ne, nl_r, nl_c)).ravel()
        cols = np.broadcast_to(cols_map[:, None, :], (ne, nl_r, nl_c)).ravel()
        if data.ndim == 2:
            data = np.broadcast_to(data[None, :, :], (ne, nl_r, nl_c))
        mat = sp.coo_matrix((data.ravel(), (rows, cols)), shape=shape)
        return mat.tocsr()

    def _assemble_constant_operators(self):
        m = self.mesh
        w = m.wq2
        w_dj = m.wq2_detj
        rx = m.dx / m.dy  # (2/dy)^2 * det J
        ry = m.dy / m.dx

        m0_loc = np.einsum("q,lq,mq->lm", w_dj, self.v0_val, self.v0_val)
        self.m0 = self._scatter(m.v0_map, m.v0_map, m0_loc, (m.dim_v0, m.dim_v0))

        m1x_loc = rx * np.einsum("q,lq,mq->lm", w, self.ux_val, self.ux_val)
        m1y_loc = ry * np.einsum("q,lq,mq->lm", w, self.uy_val, self.uy_val)
        self.m1 = self._scatter(
            m.v1x_map, m.v1x_map, m1x_loc, (m.dim_v1, m.dim_v1)
        ) + self._scatter(m.v1y_map, m.v1y_map, m1y_loc, (m.dim_v1, m.dim_v1))

        m2_loc = np.einsum("q,lq,mq->lm", w / m.det_j, self.v2_val, self.v2_val)
        self.m2 = self._scatter(m.v2_map, m.v2_map, m2_loc, (m.dim_v2, m.dim_v2))

        # weak divergence: D[phi, v] = integral phi div v
        dx_loc = np.einsum("q,lq,mq->lm", w / m.det_j, self.v2_val, self.ux_dxi)
        dy_loc = np.einsum("q,lq,mq->lm", w / m.det_j, self.v2_val, self.uy_deta)
        self.d = self._scatter(
            m.v2_map, m.v1x_map, dx_loc, (m.dim_v2, m.dim_v1)
        ) + self._scatter(m.v2_map, m.v1y_map, dy_loc, (m.dim_v2, m.dim_v1))

        # weak perp-gradient: R[v, psi] = integral v . perp(grad psi),
        # perp(grad psi) = (-d(psi)/dy, d(psi)/dx)
        rx_loc = -rx * np.einsum("q,lq,mq->lm", w, self.ux_val, self.v0_deta)
        ry_loc = ry * np.einsum("q,lq,mq->lm", w, self.uy_val, self.v0_dxi)
        self.r = self._scatter(
            m.v1x_map, m.v0_map, rx_loc, (m.dim_v1, m.dim_v0)
        ) + self._scatter(m.v1y_map, m.v0_map, ry_loc, (m.dim_v1, m.dim_v0))

        self.perp = m.perp
        self.div = m.div

    # ------------------------------------------------------------- evaluation

    def v0_at_quad(self, c):
        return np.einsum("el,lq->eq", c[self.mesh.v0_map], self.v0_val)

    def v0_grad_at_quad(self, c):
        m = self.mesh
        g = c[m.v0_map]
        gx = (2.0 / m.dx) * np.einsum("el,lq->eq", g, self.v0_dxi)
        gy = (2.0 / m.dy) * np.einsum("el,lq->eq", g, self.v0_deta)
        return gx, gy

    def v1_at_quad(self, c):
        m = self.mesh
        ux = (2.0 / m.dy) * np.einsum("el,lq->eq", c[m.v1x_map], self.ux_val)
        uy = (2.0 / m.dx) * np.einsum("el,lq->eq", c[m.v1y_map], self.uy_val)
        return ux, uy

    def v2_at_quad(self, c):
        return np.einsum("el,lq->eq", c[self.mesh.v2_map], self.v2_val) / self.mesh.det_j

    def integrate(self, vals):
        """Domain integral of values sampled at the quadrature points."""
        return float(np.einsum("eq,q->", vals, self.mesh.wq2_detj))

    # -------------------------------------------------------- dual-vector rhs

    def v0_pairing(self, vals):
        """<psi, vals> for every V0 test function; returns a V0' vector."""
        m = self.mesh
        data = np.einsum("eq,lq->el", vals * m.wq2_detj[None, :], self.v0_val)
        out = np.zeros(m.dim_v0)
        np.add.at(out, m.v0_map, data)
        return out

    def v1_pairing(self, vals_x, vals_y):
        """<v, (vals_x, vals_y)> for every V1 test function (physical values)."""
        m = self.mesh
        wx = vals_x * m.wq2[None, :] * (0.5 * m.dx)
        wy = vals_y * m.wq2[None, :] * (0.5 * m.dy)
        data_x = np.einsum("eq,lq->el", wx, self.ux_val)
        data_y = np.einsum("eq,lq->el", wy, self.uy_val)
        out = np.zeros(m.dim_v1)
        np.add.at(out, m.v1x_map, data_x)
        np.add.at(out, m.v1y_map, data_y)
        return out

    def v2_pairing(self, vals):
        """<phi, vals> for every V2 test function."""
        m = self.mesh
        data = np.einsum("eq,lq->el", vals * m.wq2[None, :], self.v2_val)
        out = np.zeros(m.dim_v2)
        np.add.at(out, m.v2_map, data)
        return out

    def rotation_pairing(self, q_vals, f_coeffs):
        """<v, q x F> with q from quadrature-point values and F in V1.

        q x F rotates F by +90 degrees and scales: q x F = q*(-F_y, F_x).
        Equals assemble_rotation(q_vals) @ f_coeffs up to roundoff, without
        building the matrix.
        """
        fx, fy = self.v1_at_quad(f_coeffs)
        return self.v1_pairing(-q_vals * fy, q_vals * fx)

    def pv_squared_pairing(self, q_vals):
        """<phi, q^2> against V2 test functions, q given at quadrature points."""
        return self.v2_pairing(q_vals**2)

    # ------------------------------------------------------ weighted operators

    def assemble_rotation(self, q_vals):
        """Antisymmetric rotation matrix C[v, w] = integral v . (q x w).

        q_vals: (n_elements, n_q^2) potential vorticity at quadrature points.
        The metric factors cancel exactly: (2/dy)(2/dx) det J = 1.
        """
        m = self.mesh
        wq = q_vals * m.wq2[None, :]
        blk = np.einsum("eq,lq,mq->elm", wq, self.ux_val, self.uy_val, optimize=True)
        c_xy = self._scatter(m.v1x_map, m.v1y_map, -blk, (m.dim_v1, m.dim_v1))
        c_yx = self._scatter(
            m.v1y_map, m.v1x_map, np.ascontiguousarray(blk.swapaxes(1, 2)), (m.dim_v1, m.dim_v1)
        )
        return c_xy + c_yx

    def assemble_weighted_v0_mass(self, weight_vals, trial_shifts=None):
        """H0(., w): V0 mass weighted by a scalar field at quadrature points.

        With `trial_shifts` (a pair of (ne, n_q^2) arrays giving reference
        displacements), the trial basis is evaluated at the displaced points,
        producing the unsymmetric downwinded operator; the test side always
        stays at the quadrature points.
        """
        m = self.mesh
        w = weight_vals * m.wq2_detj[None, :]
        if trial_shifts is None:
            blk = np.einsum("eq,lq,mq->elm", w, self.v0_val, self.v0_val, optimize=True)
        else:
            trial = self.shifted_v0_table(trial_shifts)
            blk = np.einsum("eq,lq,emq->elm", w, self.v0_val, trial, optimize=True)
        return self._scatter(m.v0_map, m.v0_map, blk, (m.dim_v0, m.dim_v0))

    def shifted_v0_table(self, shifts):
        """Per-element V0 trial values at displaced quadrature points.

        shifts = (delta_xi, delta_eta), each (ne, n_q^2); evaluation points
        are (xi_q - delta_xi, eta_q - delta_eta).  Returns (ne, nloc, n_q^2).
        """
        m = self.mesh
        ref = m.ref
        d_xi, d_eta = shifts
        xi = ref.xq[m.qa][None, :] - d_xi  # (ne, nq2)
        eta = ref.xq[m.qb][None, :] - d_eta
        sx = ref.nodal_at(xi)  # (p+1, ne, nq2)
        sy = ref.nodal_at(eta)
        tab = np.einsum("ieq,jeq->ejiq", sx, sy)
        return np.ascontiguousarray(tab.reshape(m.n_elements, -1, xi.shape[-1]))

    def v0_values_shifted(self, c, shifts):
        """Evaluate a V0 field at displaced quadrature points."""
        tab = self.shifted_v0_table(shifts)
        return np.einsum("el,elq->eq", c[self.mesh.v0_map], tab)

    # ------------------------------------------------------------ projections

    def project_v0(self, fn):
        m = self.mesh
        rhs = self.v0_pairing(fn(m.xq_phys, m.yq_phys))
        return self.solve("m0", rhs)

    def project_v1(self, fn):
        m = self.mesh
        fx, fy = fn(m.xq_phys, m.yq_phys)
        rhs = self.v1_pairing(fx, fy)
        return self.solve("m1", rhs)

    def project_v2(self, fn):
        m = self.mesh
        rhs = self.v2_pairing(fn(m.xq_phys, m.yq_phys))
        return self.solve("m2", rhs)

    def constant_v2(self, value):
        """Coefficients of the exact V2 representation of a constant."""
        m = self.mesh
        wid = m.ref.node_widths
        loc = value * m.det_j * np.einsum("a,b->ba", wid, wid).ravel()
        out = np.zeros(m.dim_v2)
        out[m.v2_map] = loc[None, :]
        return out

    def constant_v1(self, vx, vy):
        """Coefficients of the exact V1 representation of a constant vector.

        The edge basis reproduces constants with width-weighted coefficients
        (sum_j width_j e_j = 1); the Piola scaling supplies the rest.
        """
        m = self.mesh
        p = m.p
        wid = m.ref.node_widths
        out = np.zeros(m.dim_v1)
        # x-component: local l = i + (p+1)*b, value width_b * (dy/2) * vx
        out[m.v1x_map] = (0.5 * m.dy * vx) * np.repeat(wid, p + 1)[None, :]
        # y-component: local l = a + p*j, value width_a * (dx/2) * vy
        out[m.v1y_map] = (0.5 * m.dx * vy) * np.tile(wid, p + 1)[None, :]
        return out

    # ----------------------------------------------------------------- solves

    def solve(self, which, rhs):
        """Solve against a cached factorisation of m0, m1 or m2."""
        if which not in self._lu:
            mat = {"m0": self.m0, "m1": self.m1, "m2": self.m2}[which]
            self._lu[which] = spla.splu(mat.tocsc())
        return self._lu[which].solve(rhs)
