"""Plain-text run configuration.

One ``key = value`` per line; ``#`` starts a comment. Parameters are given
either physically (``eta_i``, ``rho_i``, ...) or as derived coefficients
(``alpha_i``, ``gamma_o``, ...). Initial data is a preset string:

* ``zero``
* ``mode:n:amplitude`` for ``amplitude · cos(nθ)``
* ``random:amplitude[:band]`` drawn with ``seed``
* ``(n, re, im); (n, re, im); ...`` listing ``ρ̂_n`` (conjugates implied)
"""

from __future__ import annotations

import csv
import re
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import spectral
from .dispersion import DEFAULT_N_MAX, compute_q_n
from .elliptic import DEFAULT_M
from .geometry import COLLAR, InterfaceShape, random_profile
from .params import (
    DERIVED_KEYS,
    PHYSICAL_KEYS,
    DerivedCoeffs,
    PhysicalParams,
    ValidationError,
    coerce_coeffs,
    params_from_mapping,
)


class ConfigError(ValueError):
    """Bad configuration; ``line`` points into the file when known."""

    def __init__(self, message: str, line: int | None = None, key: str | None = None):
        self.line = line
        self.key = key
        self.message = message
        super().__init__(f"line {line}: {message}" if line is not None else message)


_FLOAT_KEYS = {"dt", "t_end", "stop_amplitude"}
_INT_KEYS = {"N", "M", "snapshot_every", "seed", "n_max"}
_STR_KEYS = {"initial", "output_dir", "shape", "boundary", "boundary_data", "problem"}
KNOWN_KEYS = set(PHYSICAL_KEYS) | set(DERIVED_KEYS) | _FLOAT_KEYS | _INT_KEYS | _STR_KEYS


@dataclass
class RunConfig:
    params: PhysicalParams | DerivedCoeffs
    N: int = 32
    M: int = DEFAULT_M
    initial: str = "zero"
    dt: float | None = None
    t_end: float = 1.0
    snapshot_every: int = 10
    output_dir: str = "out"
    seed: int = 0
    n_max: int = DEFAULT_N_MAX
    stop_amplitude: float | None = None
    shape: str = "zero"
    boundary: str = "mode:1:1"
    boundary_data: str | None = None
    problem: str = "outer"
    base_dir: Path = field(default=Path("."), repr=False)

    @property
    def coeffs(self) -> DerivedCoeffs:
        return coerce_coeffs(self.params)

    def check(self) -> RunConfig:
        try:
            spectral.check_size(self.N)
        except spectral.GridError as exc:
            raise ConfigError(str(exc), key="N") from exc
        rules = [
            ("M", self.M >= 4, "M must be at least 4"),
            ("dt", self.dt is None or self.dt > 0, "dt must be positive"),
            ("t_end", self.t_end >= 0, "t_end must be non-negative"),
            ("snapshot_every", self.snapshot_every >= 1, "snapshot_every must be at least 1"),
            ("n_max", self.n_max >= 1, "n_max must be at least 1"),
            ("problem", self.problem in ("inner", "outer"), "problem must be 'inner' or 'outer'"),
            ("stop_amplitude", self.stop_amplitude is None or self.stop_amplitude > 0, "stop_amplitude must be positive"),
        ]
        for key, ok, message in rules:
            if not ok:
                raise ConfigError(message, key=key)
        # parse the presets now so a bad string fails before any work
        for key, parse in (("initial", parse_shape), ("shape", parse_shape), ("boundary", parse_function)):
            try:
                parse(getattr(self, key), self.N, self.seed)
            except ConfigError as exc:
                raise ConfigError(exc.message, key=key) from exc
        return self

    def step_size(self) -> float:
        return default_dt(self.coeffs, self.N) if self.dt is None else self.dt

    def initial_shape(self) -> InterfaceShape:
        return parse_shape(self.initial, self.N, self.seed)

    def elliptic_shape(self) -> InterfaceShape:
        return parse_shape(self.shape, self.N, self.seed)

    def echo(self) -> dict:
        out = {k: v for k, v in asdict(self).items() if k not in ("params", "base_dir")}
        out["params"] = {"kind": type(self.params).__name__, **asdict(self.params)}
        return out


def default_dt(c: DerivedCoeffs, N: int) -> float:
    """min(0.1, 1/(2 max|q_n|)) over the modes that survive dealiasing."""
    n = np.arange(1, N // 3 + 1)
    top = float(np.max(np.abs(compute_q_n(c, n)))) if n.size else 0.0
    return 0.1 if top <= 5.0 else 0.5 / top


_PAIR = re.compile(r"\(\s*([-+]?\d+)\s*,\s*([^,()]+?)\s*,\s*([^,()]+?)\s*\)")


def parse_spectrum(text: str, N: int) -> np.ndarray:
    """``(n, re, im); ...`` into an FFT-ordered Hermitian spectrum."""
    c = np.zeros(N, dtype=complex)
    entries = [e for e in re.split(r"\s*;\s*", text.strip()) if e]
    for entry in entries:
        m = _PAIR.fullmatch(entry)
        if not m:
            raise ConfigError(f"cannot read spectrum entry {entry!r}")
        n, re_, im_ = int(m.group(1)), float(m.group(2)), float(m.group(3))
        if abs(n) > N // 2 or (abs(n) == N // 2 and im_ != 0):
            raise ConfigError(f"mode {n} does not fit an N={N} grid")
        if n == 0 or abs(n) == N // 2:
            c[abs(n)] += re_
        else:
            z = complex(re_, im_) if n > 0 else complex(re_, -im_)
            c[abs(n)] += z
            c[-abs(n)] += np.conj(z)
    c[N // 2] = c[N // 2].real
    return c


def parse_function(text: str, N: int, seed: int = 0) -> np.ndarray:
    """Grid values of a preset string (see the module docstring)."""
    text = text.strip()
    try:
        if text == "zero":
            return np.zeros(N)
        if text.startswith("mode:"):
            _, n, amp = text.split(":")
            return float(amp) * np.cos(int(n) * spectral.nodes(N))
        if text.startswith("random:"):
            parts = text.split(":")
            band = int(parts[2]) if len(parts) > 2 else 6
            return random_profile(N, float(parts[1]), band, rng=seed)
        if text.startswith("("):
            return spectral.from_spectral(parse_spectrum(text, N))
    except ConfigError:
        raise
    except (ValueError, IndexError) as exc:
        raise ConfigError(f"bad preset {text!r}: {exc}") from exc
    raise ConfigError(f"unknown preset {text!r}")


def parse_shape(text: str, N: int, seed: int = 0) -> InterfaceShape:
    values = parse_function(text, N, seed)
    try:
        return InterfaceShape(values, a=COLLAR)
    except ValueError as exc:
        raise ConfigError(f"bad shape {text!r}: {exc}") from exc


def _convert(key: str, raw: str, line: int):
    try:
        if key in _INT_KEYS:
            return int(raw)
        if key in _STR_KEYS:
            return raw
        return float(raw)
    except ValueError:
        raise ConfigError(f"{key}: cannot read {raw!r} as a number", line) from None


def parse_config(text: str, base_dir: Path | str = ".") -> RunConfig:
    values: dict[str, object] = {}
    lines: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in KNOWN_KEYS:
            raise ConfigError(f"unknown key {key!r}", lineno)
        if key in values:
            raise ConfigError(f"duplicate key {key!r} (first on line {lines[key]})", lineno)
        if not value:
            raise ConfigError(f"empty value for {key!r}", lineno)
        values[key] = _convert(key, value, lineno)
        lines[key] = lineno

    param_values = {k: v for k, v in values.items() if k in PHYSICAL_KEYS or k in DERIVED_KEYS}
    try:
        params = params_from_mapping(param_values)
    except ValidationError as exc:
        raise ConfigError(str(exc), lines.get(exc.field)) from exc
    rest = {k: v for k, v in values.items() if k not in param_values}
    cfg = RunConfig(params=params, base_dir=Path(base_dir), **rest)
    try:
        return cfg.check()
    except ConfigError as exc:
        raise ConfigError(exc.message, lines.get(exc.key), exc.key) from exc


def load_config(path) -> RunConfig:
    path = Path(path)
    return parse_config(path.read_text(), base_dir=path.parent)


def read_boundary_csv(path, N: int) -> np.ndarray:
    """Boundary values from a CSV with a ``value`` column, one row per node."""
    with Path(path).open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    if len(rows) != N or not rows or "value" not in rows[0]:
        raise ConfigError(f"{path}: expected {N} rows with a 'value' column")
    return np.array([float(r["value"]) for r in rows])
