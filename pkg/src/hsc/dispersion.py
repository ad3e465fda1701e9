"""Linear theory about the circle: the coupling symbol l_n and the spectrum q_n.

Every closed form is evaluated through ``x = R^{-2|n|}`` so that both signs
of ``n`` stay finite up to the range guard.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from . import spectral
from .params import DerivedCoeffs, PhysicalParams, coerce_coeffs

N_GUARD = 512
DEFAULT_N_MAX = 128


class RangeError(ValueError):
    pass


class ConsistencyError(RuntimeError):
    """Density rule and computed spectrum disagree."""


class Verdict(str, Enum):
    STABLE = "Stable"
    UNSTABLE = "Unstable"
    NEUTRAL = "Neutral"


def _modes(n, allow_zero: bool) -> np.ndarray:
    arr = np.asarray(n)
    if arr.dtype.kind not in "iu":
        if not np.all(np.equal(np.mod(arr, 1), 0)):
            raise RangeError(f"mode numbers must be integers, got {n!r}")
        arr = arr.astype(int)
    if np.any(np.abs(arr) > N_GUARD):
        raise RangeError(f"|n| must not exceed {N_GUARD}")
    if not allow_zero and np.any(arr == 0):
        raise RangeError("n must be nonzero")
    return arr


def _x(c: DerivedCoeffs, n: np.ndarray) -> np.ndarray:
    return c.R ** (-2.0 * np.abs(n).astype(float))


def _with_R(c: DerivedCoeffs, R: float | None) -> DerivedCoeffs:
    return c if R is None or R == c.R else c.replace(R=R)


def compute_l_n(c: DerivedCoeffs, n, R: float | None = None):
    """Symbol of the coupling operator at the circle for nonzero ``n``.

    Accepts a scalar or an integer array and returns the matching shape.
    """
    c = _with_R(c, R)
    n = _modes(n, allow_zero=False)
    x = _x(c, n)
    ai, bi = c.alpha_i, c.beta_i
    th, thb = c.theta_o, np.conj(c.theta_o)
    t2 = abs(c.theta_i) ** 2
    pos = (x - 1.0) * t2 / ((ai - 1j * bi) * (x * th + thb))
    neg = (1.0 - x) * t2 / ((-ai - 1j * bi) * (th + x * thb))
    out = np.where(n > 0, pos, neg)
    return complex(out) if out.ndim == 0 else out


def A_n(c: DerivedCoeffs, n, R: float | None = None):
    c = _with_R(c, R)
    n = _modes(n, allow_zero=False)
    x = _x(c, n)
    out = (1.0 + x) / (1.0 - x) * c.alpha_o + c.alpha_i
    return float(out) if out.ndim == 0 else out


def mu(c: DerivedCoeffs, n, sigma: float | None = None):
    sigma = c.sigma if sigma is None else sigma
    n = np.abs(_modes(n, allow_zero=True)).astype(float)
    out = n * (sigma - 2.0 * c.dgamma - sigma * n * n)
    return float(out) if out.ndim == 0 else out


def compute_q_n(c: DerivedCoeffs, n, sigma: float | None = None, R: float | None = None):
    """Growth rate of mode ``n`` about the circle; ``q_0 = 0``."""
    c = _with_R(c, R)
    if sigma is not None and sigma != c.sigma:
        c = c.replace(sigma=sigma)
    n = _modes(n, allow_zero=True)
    safe = np.where(n == 0, 1, n)
    A = np.asarray(A_n(c, safe))
    B = c.B
    q = (A + 1j * np.sign(safe) * B) / (A * A + B * B) * np.asarray(mu(c, safe))
    q = np.where(n == 0, 0.0, q)
    return complex(q) if q.ndim == 0 else q


def spectral_bound(c: DerivedCoeffs) -> float:
    """λ* = 1 + 2|γ_o - γ_i|/(α_o + α_i), the classical bound on Re q_n.

    It dominates the whole spectrum whenever γ_o ≥ γ_i, but for a denser
    inner fluid with small σ some 2 ≤ |n| < sqrt(1 + 2|Δγ|/σ) can exceed it
    (α_i = α_o = 1, σ = 1, γ_i = 10, γ_o = 0 gives Re q_2 ≈ 15.94 > 11).
    See :func:`safe_spectral_bound` for a bound valid for every draw.
    """
    return 1.0 + 2.0 * abs(c.dgamma) / (c.alpha_o + c.alpha_i)


def safe_spectral_bound(c: DerivedCoeffs) -> float:
    """A bound on Re q_n that holds for all admissible coefficients.

    Re q_n ≤ μ(n)/A_n when μ(n) > 0, A_n ≥ α_o + α_i, and a positive μ(n)
    needs n² < 1 + 2|Δγ|/σ, so μ(n) < 2|Δγ| sqrt(1 + 2|Δγ|/σ).
    """
    g = 2.0 * abs(c.dgamma)
    return 1.0 + g / (c.alpha_o + c.alpha_i) * np.sqrt(1.0 + g / c.sigma)


def grid_multipliers(c: DerivedCoeffs, N: int) -> np.ndarray:
    """q_n in FFT order for an N-point grid, with a real Nyquist entry.

    The Nyquist slot stands for both ±N/2, so only the real part keeps
    real data real.
    """
    q = compute_q_n(c, spectral.wavenumbers(N))
    q[N // 2] = q[N // 2].real
    return q


def grid_l_multipliers(c: DerivedCoeffs, N: int) -> np.ndarray:
    """l_n in FFT order with l_0 = 0 and a real Nyquist entry."""
    n = spectral.wavenumbers(N)
    out = np.zeros(N, dtype=complex)
    out[n != 0] = compute_l_n(c, n[n != 0])
    out[N // 2] = out[N // 2].real
    return out


# ---------------------------------------------------------------- table


@dataclass(frozen=True)
class DispersionTable:
    """Per-mode records for ``n = -n_max..n_max``, ``n ≠ 0``, ascending."""

    coeffs: DerivedCoeffs
    n_max: int
    n: np.ndarray
    l: np.ndarray
    A: np.ndarray
    mu: np.ndarray
    q: np.ndarray

    @property
    def B(self) -> float:
        return self.coeffs.B

    @property
    def lambda_star(self) -> float:
        return spectral_bound(self.coeffs)

    def index(self, n: int) -> int:
        if n == 0 or abs(n) > self.n_max:
            raise RangeError(f"mode {n} outside the table")
        return int(n + self.n_max if n < 0 else n + self.n_max - 1)

    def q_of(self, n: int) -> complex:
        return 0j if n == 0 else complex(self.q[self.index(n)])

    def positive(self) -> slice:
        return slice(self.n_max, None)

    def write_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["n", "re_l", "im_l", "A_n", "mu_n", "re_q", "im_q"])
            for row in zip(self.n, self.l, self.A, self.mu, self.q):
                n, l, A, m, q = row
                w.writerow([int(n)] + [f"{v:.17g}" for v in (l.real, l.imag, A, m, q.real, q.imag)])

    def header(self, verdict: Verdict | None = None) -> dict:
        out = {
            "n_max": self.n_max,
            "B": self.B,
            "lambda_star": self.lambda_star,
            "max_re_q": float(np.max(self.q.real)),
        }
        if verdict is not None:
            out["verdict"] = verdict.value
        return out


def dispersion_table(c: DerivedCoeffs | PhysicalParams, n_max: int = DEFAULT_N_MAX) -> DispersionTable:
    c = coerce_coeffs(c)
    n_max = int(n_max)
    if n_max < 1:
        raise RangeError("n_max must be at least 1")
    if n_max > N_GUARD:
        raise RangeError(f"n_max must not exceed {N_GUARD}")
    n = np.concatenate([np.arange(-n_max, 0), np.arange(1, n_max + 1)])
    return DispersionTable(
        coeffs=c,
        n_max=n_max,
        n=n,
        l=compute_l_n(c, n),
        A=A_n(c, n),
        mu=mu(c, n),
        q=compute_q_n(c, n),
    )


def _density_verdict(p: DerivedCoeffs | PhysicalParams) -> Verdict:
    if isinstance(p, PhysicalParams):
        inner, outer = p.rho_i, p.rho_o
    else:
        inner, outer = p.gamma_i, p.gamma_o
    if outer > inner:
        return Verdict.STABLE
    if inner > outer:
        return Verdict.UNSTABLE
    return Verdict.NEUTRAL


def classify_stability(p: DerivedCoeffs | PhysicalParams, n_max: int = DEFAULT_N_MAX) -> Verdict:
    """Density rule, cross-checked against the signs of Re q_n for 1 ≤ n ≤ n_max."""
    verdict = _density_verdict(p)
    table = dispersion_table(p, n_max)
    re = table.q[table.positive()].real
    if verdict is Verdict.STABLE:
        ok = bool(np.all(re < 0))
    elif verdict is Verdict.UNSTABLE:
        ok = bool(np.any(re > 0))
    else:
        ok = table.q_of(1) == 0 and table.q_of(-1) == 0 and bool(np.all(re[1:] < 0))
    if not ok:
        raise ConsistencyError(f"density rule says {verdict.value} but the spectrum disagrees")
    return verdict


def linear_propagator(table: DispersionTable, rho0, t: float) -> np.ndarray:
    """Advance a spectrum (FFT order) by exp(q_n t); the mean mode is frozen."""
    if t < 0:
        raise ValueError("t must be non-negative")
    c = np.asarray(rho0, dtype=complex)
    N = c.shape[-1]
    n = spectral.wavenumbers(N)
    active = np.abs(c) > 0
    if np.any(np.abs(n[active]) > table.n_max):
        raise RangeError("initial spectrum has modes beyond the table")
    q = np.zeros(N, dtype=complex)
    inside = (n != 0) & (np.abs(n) <= table.n_max)
    q[inside] = [table.q_of(int(m)) for m in n[inside]]
    q[N // 2] = q[N // 2].real
    return c * np.exp(q * t)


def fastest_growing_mode(table: DispersionTable) -> tuple[int, float]:
    re = table.q[table.positive()].real
    k = int(np.argmax(re))  # first maximum, so ties go to the smaller n
    return k + 1, float(re[k])


def write_dispersion(out_dir, table: DispersionTable, verdict: Verdict | None) -> tuple[Path, Path]:
    out_dir = Path(out_dir)
    csv_path = out_dir / "dispersion.csv"
    json_path = out_dir / "dispersion.json"
    table.write_csv(csv_path)
    json_path.write_text(json.dumps(table.header(verdict), indent=2) + "\n")
    return csv_path, json_path
