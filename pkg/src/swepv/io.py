"""Delimited file formats: diagnostics, spectra, state snapshots.

Floats are written with 17 significant digits, so rerunning the same
configuration produces byte-identical files and reading a file back
reproduces the in-memory values exactly.  Snapshots are a directory holding
a key,value manifest (mesh parameters, step, time, config hash) next to one
index,value coefficient file per space.
"""

import os

import numpy as np

__all__ = [
    "DIAG_HEADER",
    "SPECTRUM_HEADER",
    "write_diagnostics",
    "read_diagnostics",
    "write_spectrum",
    "read_spectrum",
    "write_snapshot",
    "read_snapshot",
]

DIAG_HEADER = ("step,t,energy,enstrophy,mass,vorticity,"
               "newton_iters,residual_u,residual_h")
SPECTRUM_HEADER = "k,energy"

_INT_COLUMNS = ("step", "newton_iters")


def _f(x):
    return format(float(x), ".17g")


def _write_lines(path, lines):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def _read_rows(path, header):
    with open(path, encoding="utf-8") as fh:
        first = fh.readline().rstrip("\n")
        if first != header:
            raise ValueError(f"{path}: expected header {header!r}, "
                             f"got {first!r}")
        return [line.rstrip("\n").split(",") for line in fh if line.strip()]


def write_diagnostics(path, records):
    lines = [DIAG_HEADER]
    for r in records:
        lines.append(",".join((
            str(r.step), _f(r.t), _f(r.energy), _f(r.enstrophy), _f(r.mass),
            _f(r.vorticity), str(r.newton_iters), _f(r.residual_u),
            _f(r.residual_h),
        )))
    _write_lines(path, lines)


def read_diagnostics(path):
    """Columns of a diagnostics file as arrays keyed by header name."""
    rows = _read_rows(path, DIAG_HEADER)
    names = DIAG_HEADER.split(",")
    out = {}
    for j, name in enumerate(names):
        vals = [row[j] for row in rows]
        if name in _INT_COLUMNS:
            out[name] = np.array([int(v) for v in vals], dtype=int)
        else:
            out[name] = np.array([float(v) for v in vals])
    return out


def write_spectrum(path, k, e_k):
    lines = [SPECTRUM_HEADER]
    for ki, ei in zip(k, e_k):
        lines.append(f"{int(ki)},{_f(ei)}")
    _write_lines(path, lines)


def read_spectrum(path):
    rows = _read_rows(path, SPECTRUM_HEADER)
    k = np.array([int(r[0]) for r in rows], dtype=int)
    e_k = np.array([float(r[1]) for r in rows])
    return k, e_k


# ----------------------------------------------------------------- snapshots

_MANIFEST_INTS = ("nx", "ny", "p", "n_q", "step", "spectrum_n")
_MANIFEST_FLOATS = ("Lx", "Ly", "t")


def _write_vector(path, vec):
    lines = ["index,value"]
    lines.extend(f"{i},{_f(v)}" for i, v in enumerate(vec))
    _write_lines(path, lines)


def _read_vector(path):
    rows = _read_rows(path, "index,value")
    idx = [int(r[0]) for r in rows]
    if idx != list(range(len(idx))):
        raise ValueError(f"{path}: coefficient indices are not contiguous")
    return np.array([float(r[1]) for r in rows])


def write_snapshot(directory, mesh, step, t, config_digest, u, h,
                   spectrum_n):
    """Write manifest.csv, u.csv, h.csv under `directory` (created)."""
    os.makedirs(directory, exist_ok=True)
    pairs = (
        ("nx", str(mesh.nx)),
        ("ny", str(mesh.ny)),
        ("Lx", _f(mesh.Lx)),
        ("Ly", _f(mesh.Ly)),
        ("p", str(mesh.p)),
        ("n_q", str(mesh.n_q)),
        ("step", str(step)),
        ("t", _f(t)),
        ("config_sha256", config_digest),
        ("spectrum_n", str(spectrum_n)),
    )
    _write_lines(os.path.join(directory, "manifest.csv"),
                 ["key,value"] + [f"{k},{v}" for k, v in pairs])
    _write_vector(os.path.join(directory, "u.csv"), u)
    _write_vector(os.path.join(directory, "h.csv"), h)


def read_snapshot(path):
    """Load a snapshot given its directory or its manifest.csv path.

    Returns (meta, u, h) with manifest values typed (counts as int,
    coordinates and time as float, the config hash as str).
    """
    directory = path if os.path.isdir(path) else (os.path.dirname(path) or ".")
    rows = _read_rows(os.path.join(directory, "manifest.csv"), "key,value")
    meta = {}
    for key, value in rows:
        if key in _MANIFEST_INTS:
            meta[key] = int(value)
        elif key in _MANIFEST_FLOATS:
            meta[key] = float(value)
        else:
            meta[key] = value
    u = _read_vector(os.path.join(directory, "u.csv"))
    h = _read_vector(os.path.join(directory, "h.csv"))
    return meta, u, h
