"""Initial states.

The jet profile is a zonal sech^2 shear layer with its lateral mean removed,
which makes both the velocity and the geostrophic depth exactly periodic in
y (the raw tanh depth profile would otherwise jump across the seam by
2 f0 U L / g).  Subtracting the mean flow only shifts the frame, so the
dynamics are unchanged.  The depth carries the exact linear-in-y balance
term for the mean-flow removal, plus an optional monochromatic bump that
seeds instability.
"""

import numpy as np

__all__ = ["jet_state", "rest_state"]


def jet_state(ops, g, f0, depth, u_max, width, y_center=None,
              bump_amplitude=0.0, bump_mode=2):
    """Geostrophically balanced zonal jet, optionally perturbed.

    u_x(y) = u_max (sech^2((y - y0)/width) - m), with m the lateral mean of
    the sech^2 profile, so that integral u_x dy = 0 and the profile closes
    periodically; h balances f0 u_x through -g dh/dy = -f0 u_x exactly.
    """
    mesh = ops.mesh
    y0 = 0.5 * mesh.Ly if y_center is None else y_center
    mean = (2.0 * width / mesh.Ly) * np.tanh(mesh.Ly / (2.0 * width))

    def velocity(x, y):
        s = (y - y0) / width
        ux = u_max * (1.0 / np.cosh(s) ** 2 - mean)
        return ux, np.zeros_like(x)

    def height(x, y):
        s = (y - y0) / width
        balance = (f0 * u_max / g) * (
            width * np.tanh(s) - mean * (y - y0)
        )
        bump = bump_amplitude * np.cos(
            2.0 * np.pi * bump_mode * x / mesh.Lx
        ) * np.exp(-(s**2))
        return depth - balance + bump

    u = ops.project_v1(velocity)
    h = ops.project_v2(height)
    return u, h


def rest_state(ops, depth):
    """Fluid at rest over a flat bottom."""
    return np.zeros(ops.mesh.dim_v1), ops.constant_v2(depth)
