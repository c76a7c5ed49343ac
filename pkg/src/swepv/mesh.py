"""Doubly periodic quadrilateral mesh and the discrete de Rham complex layout.

Three tensor-product spaces on an nx-by-ny grid of congruent rectangles:

* V0 (continuous, nodal x nodal): stream-function / potential vorticity
* V1 (normal-continuous): velocity; x-component nodal in x and edge-type in
  y, y-component mirrored
* V2 (fully discontinuous, edge x edge): depth / pressure

Degrees of freedom live on global periodic index grids of size
(nx*p) x (ny*p); the strong differential operators PERP (V0 -> V1) and
DIV (V1 -> V2) are pure incidence matrices (entries +-1) built from the 1D
periodic forward-difference matrix, so DIV @ PERP vanishes identically.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .refelem import ReferenceElement

__all__ = ["Mesh2D", "FieldVec", "periodic_difference_matrix"]


def periodic_difference_matrix(n):
    """Forward difference with wraparound: (Ec)_g = c_{g+1 mod n} - c_g."""
    rows = np.arange(n)
    data = np.ones(n)
    e = sp.coo_matrix((data, (rows, (rows + 1) % n)), shape=(n, n))
    e = e + sp.coo_matrix((-data, (rows, rows)), shape=(n, n))
    return e.tocsr()


@dataclass(frozen=True)
class FieldVec:
    """A coefficient vector tagged with the space it lives in."""

    space: str  # "V0" | "V1" | "V2"
    data: np.ndarray

    def __post_init__(self):
        if self.space not in ("V0", "V1", "V2"):
            raise ValueError(f"unknown space tag {self.space!r}")


class Mesh2D:
    """Uniform doubly periodic rectangle mesh with tensor GLL spaces.

    Parameters
    ----------
    nx, ny : int
        Elements per direction (>= 1).
    Lx, Ly : float
        Domain extents; the domain is [0, Lx) x [0, Ly), periodic.
    p : int
        Polynomial degree (nodal basis degree; edge basis has degree p-1).
    n_q : int, optional
        Quadrature points per direction per element; defaults to p + 4,
        enough for the cubic-weighted forms assembled here.
    """

    def __init__(self, nx, ny, Lx, Ly, p, n_q=None):
        if nx < 1 or ny < 1:
            raise ValueError(f"need at least one element per direction, got {nx}x{ny}")
        if Lx <= 0 or Ly <= 0:
            raise ValueError(f"domain extents must be positive, got {Lx}x{Ly}")
        if n_q is None:
            n_q = p + 4
        self.nx, self.ny = nx, ny
        self.Lx, self.Ly = float(Lx), float(Ly)
        self.p = p
        self.ref = ReferenceElement(p, n_q)
        self.n_q = n_q

        self.dx = self.Lx / nx
        self.dy = self.Ly / ny
        self.det_j = 0.25 * self.dx * self.dy

        self.Nx = nx * p  # global node lines == edge slots per direction
        self.Ny = ny * p
        self.n_elements = nx * ny
        self.dim_v0 = self.Nx * self.Ny
        self.dim_v1 = 2 * self.Nx * self.Ny
        self.dim_v2 = self.Nx * self.Ny

        self._build_dof_maps()
        self._build_incidence()
        self._build_quadrature_geometry()

    # ------------------------------------------------------------------ dofs

    def _flat(self, gx, gy):
        return gx + self.Nx * gy

    @staticmethod
    def _tensor_map(gx, gy, stride):
        """Combine per-element 1D index arrays into local-to-global maps.

        gx: (ne, n1), gy: (ne, n2); local index l = ix + n1*iy (x fastest),
        global flat index gx + stride*gy.
        """
        t = gx[:, :, None] + stride * gy[:, None, :]  # (ne, n1, n2)
        ne = t.shape[0]
        return np.ascontiguousarray(t.transpose(0, 2, 1).reshape(ne, -1))

    def _build_dof_maps(self):
        p, nx, ny = self.p, self.nx, self.ny
        Nx, Ny = self.Nx, self.Ny
        # element e = ex + nx*ey
        EX = np.tile(np.arange(nx), ny)
        EY = np.repeat(np.arange(ny), nx)

        i_node = np.arange(p + 1)
        i_edge = np.arange(p)

        gx = (EX[:, None] * p + i_node[None, :]) % Nx  # (ne, p+1) node lines
        gy = (EY[:, None] * p + i_node[None, :]) % Ny
        gx_e = EX[:, None] * p + i_edge[None, :]  # edge slots, no wrap: a < p
        gy_e = EY[:, None] * p + i_edge[None, :]

        # V0 local (i, j) -> i + (p+1)*j; V1x local (i, b) -> i + (p+1)*b
        # V1y local (a, j) -> a + p*j;    V2 local (a, b) -> a + p*b
        self.v0_map = self._tensor_map(gx, gy, Nx)
        self.v1x_map = self._tensor_map(gx, gy_e, Nx)
        self.v1y_map = self._tensor_map(gx_e, gy, Nx) + Nx * Ny
        self.v2_map = self._tensor_map(gx_e, gy_e, Nx)
        self._ex = EX
        self._ey = EY

    # ------------------------------------------------------- strong operators

    def _build_incidence(self):
        Ex = periodic_difference_matrix(self.Nx)
        Ey = periodic_difference_matrix(self.Ny)
        Ix = sp.identity(self.Nx, format="csr")
        Iy = sp.identity(self.Ny, format="csr")
        # coefficient grids are flattened x-fastest, so kron(A_y, B_x)
        d_dxi = sp.kron(Iy, Ex, format="csr")
        d_deta = sp.kron(Ey, Ix, format="csr")
        # PERP: u_x = -d(psi)/d(eta), u_y = +d(psi)/d(xi)
        self.perp = sp.vstack([-d_deta, d_dxi], format="csr")
        # DIV: h = d(u_x)/d(xi) + d(u_y)/d(eta)
        self.div = sp.hstack([d_dxi, d_deta], format="csr")

    # --------------------------------------------------------------- geometry

    def _build_quadrature_geometry(self):
        xq = self.ref.xq
        n_q = self.n_q
        # physical quadrature abscissae per element column/row
        x0 = self._ex * self.dx
        y0 = self._ey * self.dy
        xq_x = x0[:, None] + 0.5 * self.dx * (xq[None, :] + 1.0)  # (ne, n_q)
        xq_y = y0[:, None] + 0.5 * self.dy * (xq[None, :] + 1.0)
        # 2D quadrature index q = a + n_q*b (x index a fastest)
        qa = np.tile(np.arange(n_q), n_q)
        qb = np.repeat(np.arange(n_q), n_q)
        self.qa, self.qb = qa, qb
        self.xq_phys = np.ascontiguousarray(xq_x[:, qa])
        self.yq_phys = np.ascontiguousarray(xq_y[:, qb])
        self.wq2 = self.ref.wq[qa] * self.ref.wq[qb]
        self.wq2_detj = self.wq2 * self.det_j

    # ------------------------------------------------------------------ piola

    def piola_to_physical(self, u_hat):
        """Map reference vector components to physical: u = J u_hat / det J.

        For the diagonal affine map this is (2/dy * u_hat_x, 2/dx * u_hat_y).
        """
        ux_hat, uy_hat = u_hat
        return (2.0 / self.dy) * np.asarray(ux_hat), (2.0 / self.dx) * np.asarray(uy_hat)

    def piola_to_reference(self, u_phys):
        """Inverse contravariant Piola: u_hat = det J * J^{-1} u."""
        ux, uy = u_phys
        return 0.5 * self.dy * np.asarray(ux), 0.5 * self.dx * np.asarray(uy)

    def v2_scalar_to_physical(self, h_hat):
        """V2 quantities transform with 1/det J."""
        return np.asarray(h_hat) / self.det_j

    # ------------------------------------------------------------- space tags

    def dim(self, space):
        return {"V0": self.dim_v0, "V1": self.dim_v1, "V2": self.dim_v2}[space]

    def zeros(self, space):
        return FieldVec(space, np.zeros(self.dim(space)))
