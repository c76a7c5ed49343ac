"""Quick-look figures rendered next to the delimited output."""

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from . import io

__all__ = ["render_conservation", "render_spectrum", "render_report"]

_FLOOR = 1e-18  # keeps exact zeros visible on the log axes


def render_conservation(diagnostics_path, out_path):
    """Two panels: relative drift of the invariants, solver residuals."""
    cols = io.read_diagnostics(diagnostics_path)
    t_hours = cols["t"] / 3600.0
    fig, (left, right) = plt.subplots(1, 2, figsize=(10.0, 4.0))

    for name in ("energy", "enstrophy", "mass"):
        series = cols[name]
        drift = np.abs(series - series[0]) / abs(series[0])
        left.semilogy(t_hours, np.maximum(drift, _FLOOR), label=name)
    left.set_xlabel("t (hours)")
    left.set_ylabel("|relative drift|")
    left.set_title("invariants")
    left.legend()

    right.semilogy(t_hours, np.maximum(np.abs(cols["residual_u"]), _FLOOR),
                   label="residual_u")
    right.semilogy(t_hours, np.maximum(np.abs(cols["residual_h"]), _FLOOR),
                   label="residual_h")
    right.semilogy(t_hours, np.maximum(np.abs(cols["vorticity"]), _FLOOR),
                   label="|vorticity drift|")
    right.set_xlabel("t (hours)")
    right.set_title("solver residuals")
    right.legend()

    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    return out_path


def render_spectrum(spectrum_path, out_path):
    """Log-log kinetic energy spectrum with a k^-3 guide line."""
    k, e_k = io.read_spectrum(spectrum_path)
    mask = (k > 0) & (e_k > 0.0)
    fig, ax = plt.subplots(figsize=(5.5, 4.0))
    if mask.any():
        ax.loglog(k[mask], e_k[mask], marker=".", label="E(k)")
        anchor = int(np.argmax(e_k * mask))
        kk = k[mask].astype(float)
        guide = e_k[anchor] * (kk / k[anchor]) ** -3.0
        ax.loglog(kk, guide, linestyle="--", label=r"$k^{-3}$")
    ax.set_xlabel("k")
    ax.set_ylabel("E(k)")
    ax.set_title("kinetic energy spectrum")
    if mask.any():
        ax.legend()
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    return out_path


def render_report(out_dir):
    """Render both figures from the standard file names in `out_dir`."""
    written = [
        render_conservation(os.path.join(out_dir, "diagnostics.csv"),
                            os.path.join(out_dir, "conservation.png")),
        render_spectrum(os.path.join(out_dir, "spectrum.csv"),
                        os.path.join(out_dir, "spectrum.png")),
    ]
    return written
