"""Run configuration: dotted key=value text, validation, canonical form.

A config file is UTF-8 ``key=value`` lines with ``#`` comments.  Every key
has a documented default, so the empty file is a valid run.  Parsing is
strict: unknown keys, duplicate keys, unparsable values, and constraint
violations all raise ConfigError naming the key and the line.  The
canonical serialisation (17 significant digit floats, fixed key order)
round-trips exactly and is what the config hash digests.
"""

import hashlib
import math
from dataclasses import dataclass

from .pv import PV_MODES
from .timestepper import NEWTON_MODES
from .upwinding import TAU_POLICIES, UPWIND_SCHEMES

__all__ = ["ConfigError", "RunConfig", "parse_config", "serialise_config",
           "config_hash"]


class ConfigError(ValueError):
    """A configuration line failed to parse or violated a constraint."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


@dataclass(frozen=True)
class RunConfig:
    """Fully validated run description, one flat field per config key."""

    nx: int = 16
    ny: int = 16
    Lx: float = 5.0e6
    Ly: float = 5.0e6
    p: int = 3
    n_q: int = None  # resolved to p + 4 when left unset
    g: float = 9.80616
    f0: float = 1.0e-4
    depth: float = 8000.0
    dt: float = 360.0
    n_steps: int = 500
    newton_mode: str = "converge"
    tol: float = 1.0e-14
    k_max: int = 2
    pv_mode: str = "midpoint"
    scheme: str = "none"
    tau_policy: str = "constant"
    tau: float = None  # None: the policy default (dt/2 for constant)
    clamp_limit: float = 1.0
    jet_speed: float = 80.0
    jet_width: float = 3.2e5
    jet_center: float = None  # None: the domain mid-line Ly/2
    amplitude: float = 120.0
    kx: int = 2
    seed: int = 0
    directory: str = "out"
    cadence: int = 1
    spectrum_n: int = 128

    def __post_init__(self):
        if self.n_q is None:
            object.__setattr__(self, "n_q", self.p + 4)
        self._validate()

    def _validate(self):
        def bad(key, message):
            raise ConfigError(f"{key}: {message}", key=key)

        for key, attr in _FLOAT_KEYS:
            v = getattr(self, attr)
            if v is not None and not math.isfinite(v):
                bad(key, f"value {v!r} is not finite")
        if self.nx < 1:
            bad("mesh.nx", f"need at least one element, got {self.nx}")
        if self.ny < 1:
            bad("mesh.ny", f"need at least one element, got {self.ny}")
        if self.Lx <= 0.0:
            bad("mesh.Lx", f"domain extent must be positive, got {self.Lx}")
        if self.Ly <= 0.0:
            bad("mesh.Ly", f"domain extent must be positive, got {self.Ly}")
        if self.p < 1:
            bad("mesh.p", f"value {self.p} violates p >= 1")
        if self.n_q < self.p + 1:
            bad("mesh.n_q", f"need at least p + 1 = {self.p + 1} quadrature "
                            f"points, got {self.n_q}")
        if self.g <= 0.0:
            bad("physics.g", f"gravity must be positive, got {self.g}")
        if self.depth <= 0.0:
            bad("physics.H", f"mean depth must be positive, got {self.depth}")
        if self.dt <= 0.0:
            bad("time.dt", f"time step must be positive, got {self.dt}")
        if self.n_steps < 0:
            bad("time.n_steps", f"must be non-negative, got {self.n_steps}")
        if self.newton_mode not in NEWTON_MODES:
            bad("solver.mode", f"unknown mode {self.newton_mode!r}; pick one "
                               f"of {NEWTON_MODES}")
        if self.tol <= 0.0:
            bad("solver.tol", f"tolerance must be positive, got {self.tol}")
        if self.k_max < 1:
            bad("solver.k_max", f"must be at least 1, got {self.k_max}")
        if self.pv_mode not in PV_MODES:
            bad("pv_mode", f"unknown mode {self.pv_mode!r}; pick one of "
                           f"{PV_MODES}")
        if self.scheme not in UPWIND_SCHEMES:
            bad("upwind.scheme", f"unknown scheme {self.scheme!r}; pick one "
                                 f"of {UPWIND_SCHEMES}")
        if self.tau_policy not in TAU_POLICIES:
            bad("upwind.tau_policy", f"unknown policy {self.tau_policy!r}; "
                                     f"pick one of {TAU_POLICIES}")
        if self.tau is not None and self.tau < 0.0:
            bad("upwind.tau", f"must be non-negative, got {self.tau}")
        if self.clamp_limit <= 0.0:
            bad("upwind.clamp_limit",
                f"must be positive, got {self.clamp_limit}")
        if self.jet_width <= 0.0:
            bad("ic.L", f"jet width must be positive, got {self.jet_width}")
        if self.jet_center is not None and not (
                0.0 <= self.jet_center <= self.Ly):
            bad("ic.y0", f"jet centre {self.jet_center} lies outside "
                         f"[0, {self.Ly}]")
        margin = self.depth - abs(self.f0 * self.jet_speed * self.jet_width
                                  / self.g)
        if margin <= 0.0:
            bad("physics.H", "balanced depth loses positivity: "
                             f"H - |f0 U L / g| = {margin}")
        if self.kx < 0:
            bad("ic.kx", f"wavenumber must be non-negative, got {self.kx}")
        if self.seed < 0:
            bad("ic.seed", f"must be non-negative, got {self.seed}")
        if not self.directory:
            bad("output.directory", "must be a non-empty path")
        if self.cadence < 1:
            bad("output.cadence", f"must be at least 1, got {self.cadence}")
        n = self.spectrum_n
        if n < 1 or (n & (n - 1)) != 0:
            bad("output.spectrum_n", f"sample count {n} is not a power of two")
        need = 2 * max(self.nx, self.ny) * self.p
        if n < need:
            bad("output.spectrum_n", f"sample count {n} undersamples the "
                                     f"mesh; need at least {need}")


# key -> (attribute, converter); iteration order is the canonical file order
_REGISTRY = {
    "mesh.nx": ("nx", int),
    "mesh.ny": ("ny", int),
    "mesh.Lx": ("Lx", float),
    "mesh.Ly": ("Ly", float),
    "mesh.p": ("p", int),
    "mesh.n_q": ("n_q", int),
    "physics.g": ("g", float),
    "physics.f0": ("f0", float),
    "physics.H": ("depth", float),
    "time.dt": ("dt", float),
    "time.n_steps": ("n_steps", int),
    "solver.mode": ("newton_mode", str),
    "solver.tol": ("tol", float),
    "solver.k_max": ("k_max", int),
    "pv_mode": ("pv_mode", str),
    "upwind.scheme": ("scheme", str),
    "upwind.tau_policy": ("tau_policy", str),
    "upwind.tau": ("tau", float),
    "upwind.clamp_limit": ("clamp_limit", float),
    "ic.U": ("jet_speed", float),
    "ic.L": ("jet_width", float),
    "ic.y0": ("jet_center", float),
    "ic.amplitude": ("amplitude", float),
    "ic.kx": ("kx", int),
    "ic.seed": ("seed", int),
    "output.directory": ("directory", str),
    "output.cadence": ("cadence", int),
    "output.spectrum_n": ("spectrum_n", int),
}

_FLOAT_KEYS = tuple((key, attr) for key, (attr, conv) in _REGISTRY.items()
                    if conv is float)


def parse_config(text):
    """Parse key=value text into a validated RunConfig."""
    values = {}
    line_of_key = {}
    for idx, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not sep:
            raise ConfigError(f"line {idx}: expected key=value, got "
                              f"{line!r}")
        if key not in _REGISTRY:
            raise ConfigError(f"unknown key {key!r} (line {idx})", key=key)
        if key in line_of_key:
            raise ConfigError(f"duplicate key {key!r} (line {idx}; first "
                              f"set on line {line_of_key[key]})", key=key)
        if not value:
            raise ConfigError(f"{key}: empty value (line {idx})", key=key)
        attr, convert = _REGISTRY[key]
        try:
            values[attr] = convert(value)
        except ValueError:
            raise ConfigError(
                f"{key}: cannot parse {value!r} as {convert.__name__} "
                f"(line {idx})", key=key
            ) from None
        line_of_key[key] = idx
    try:
        return RunConfig(**values)
    except ConfigError as err:
        if err.key in line_of_key:
            raise ConfigError(f"{err} (line {line_of_key[err.key]})",
                              key=err.key) from None
        raise


def _format_value(value):
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def serialise_config(cfg):
    """Canonical text form; parsing it back yields an equal RunConfig."""
    lines = []
    for key, (attr, _) in _REGISTRY.items():
        value = getattr(cfg, attr)
        if value is None:
            continue
        lines.append(f"{key}={_format_value(value)}")
    return "\n".join(lines) + "\n"


def config_hash(cfg):
    """sha256 hex digest of the canonical serialisation."""
    return hashlib.sha256(serialise_config(cfg).encode("utf-8")).hexdigest()
