"""Gauss-Lobatto-Legendre quadrature and the 1D nodal/edge bases.

The nodal (Lagrange) basis on the GLL points spans degree-p polynomials and
is continuous across elements; the edge (histopolation) basis spans degree
p-1 and carries the integrals between consecutive nodes, so that nodal
derivatives expand exactly as differences of edge coefficients.
"""

import numpy as np

__all__ = [
    "gll_rule",
    "lagrange_values",
    "lagrange_derivative_values",
    "edge_values",
    "lagrange_values_shifted",
    "ReferenceElement",
]


def gll_rule(n):
    """Return the n-point Gauss-Lobatto-Legendre rule on [-1, 1].

    Nodes are the roots of (1-x^2)*P'_{n-1}(x), refined by Newton iteration
    from Chebyshev-Gauss-Lobatto initial guesses; weights are
    2/(n*(n-1)*P_{n-1}(x)^2).  Exact for polynomials of degree <= 2n-3.

    Parameters
    ----------
    n : int
        Number of points, n >= 2.

    Returns
    -------
    nodes, weights : ndarray
        Arrays of length n, nodes ascending in [-1, 1].
    """
    if n < 2:
        raise ValueError(f"GLL rule needs at least 2 points, got n={n}")
    m = n - 1
    # Chebyshev-Gauss-Lobatto points, ascending
    x = -np.cos(np.pi * np.arange(n) / m)
    P = np.zeros((n, n))
    x_old = 2.0 * np.ones_like(x)
    for _ in range(100):
        if np.max(np.abs(x - x_old)) <= 1e-15:
            break
        x_old = x.copy()
        # Legendre recurrence up to degree m evaluated at the current nodes
        P[:, 0] = 1.0
        P[:, 1] = x
        for k in range(2, n):
            P[:, k] = ((2 * k - 1) * x * P[:, k - 1] - (k - 1) * P[:, k - 2]) / k
        x = x_old - (x * P[:, m] - P[:, m - 1]) / (n * P[:, m])
    P[:, 0] = 1.0
    P[:, 1] = x
    for k in range(2, n):
        P[:, k] = ((2 * k - 1) * x * P[:, k - 1] - (k - 1) * P[:, k - 2]) / k
    w = 2.0 / (m * n * P[:, m] ** 2)
    # pin the endpoints exactly
    x[0] = -1.0
    x[-1] = 1.0
    return x, w


def lagrange_values(nodes, x):
    """Evaluate every Lagrange basis polynomial on `nodes` at points `x`.

    Returns an array of shape (len(nodes),) + x.shape with
    out[j] = l_j(x) by the product formula.
    """
    x = np.asarray(x, dtype=float)
    nn = len(nodes)
    out = np.ones((nn,) + x.shape)
    for j in range(nn):
        for i in range(nn):
            if i == j:
                continue
            out[j] *= (x - nodes[i]) / (nodes[j] - nodes[i])
    return out


def lagrange_derivative_values(nodes, x):
    """Evaluate l_j'(x) for every basis polynomial; same shape as lagrange_values."""
    x = np.asarray(x, dtype=float)
    nn = len(nodes)
    out = np.zeros((nn,) + x.shape)
    for j in range(nn):
        for i in range(nn):
            if i == j:
                continue
            term = np.ones_like(x) / (nodes[j] - nodes[i])
            for k in range(nn):
                if k == i or k == j:
                    continue
                term *= (x - nodes[k]) / (nodes[j] - nodes[k])
            out[j] += term
    return out


def edge_values(nodes, x):
    """Evaluate the edge (histopolation) basis at points `x`.

    With p+1 nodes there are p edge functions; the 0-based j-th one is
    e_j = -sum_{k<=j} l_k', which integrates to one over [nodes[j],
    nodes[j+1]] and to zero over every other inter-node interval.
    Returns shape (p,) + x.shape.
    """
    dl = lagrange_derivative_values(nodes, x)
    return -np.cumsum(dl, axis=0)[:-1]


def lagrange_values_shifted(nodes, x, delta):
    """Evaluate l_j at the shifted points x - delta (elementwise).

    `delta` broadcasts against `x`; the polynomials are simply evaluated at
    the displaced coordinates, so shifted points outside [-1, 1] extrapolate.
    """
    x = np.asarray(x, dtype=float)
    delta = np.asarray(delta, dtype=float)
    return lagrange_values(nodes, x - delta)


class ReferenceElement:
    """Tabulated 1D bases of degree p at an n_q-point GLL quadrature rule.

    Attributes
    ----------
    nodes, node_widths : ndarray
        The p+1 GLL nodes and the p inter-node widths (the histopolation
        coefficients of the constant function 1).
    xq, wq : ndarray
        Quadrature points and weights (n_q of each).
    L, dL : ndarray, shape (p+1, n_q)
        Nodal basis values and derivatives at the quadrature points.
    E : ndarray, shape (p, n_q)
        Edge basis values at the quadrature points.
    """

    def __init__(self, p, n_q):
        if p < 1:
            raise ValueError(f"polynomial degree must satisfy p >= 1, got p={p}")
        if n_q < p + 1:
            raise ValueError(f"need n_q >= p+1 quadrature points, got n_q={n_q} for p={p}")
        self.p = p
        self.n_q = n_q
        self.nodes, _ = gll_rule(p + 1)
        self.node_widths = np.diff(self.nodes)
        self.xq, self.wq = gll_rule(n_q)
        self.L = lagrange_values(self.nodes, self.xq)
        self.dL = lagrange_derivative_values(self.nodes, self.xq)
        self.E = edge_values(self.nodes, self.xq)

    def nodal_at(self, x):
        return lagrange_values(self.nodes, x)

    def nodal_derivative_at(self, x):
        return lagrange_derivative_values(self.nodes, x)

    def edge_at(self, x):
        return edge_values(self.nodes, x)

    def nodal_shifted_at(self, x, delta):
        return lagrange_values_shifted(self.nodes, x, delta)
