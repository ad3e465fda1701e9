"""Interfaces parametrized over the unit circle and the Hanzawa map.

The moving interface is ``Γ_ρ = {(1 + ρ(θ)) e^{iθ}}``. The Hanzawa map
``x ↦ (|x| + ψ(|x|-1) ρ(x/|x|)) x/|x|`` flattens it onto the unit circle;
``ψ`` is a C² quintic bump equal to 1 on ``|t| ≤ a`` and 0 on ``|t| ≥ 3a``.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy.optimize import brentq

from . import spectral
from .params import DerivedCoeffs

COLLAR = 1.0 / 8.0  # the cutoff half-width a; ‖ρ‖∞ must stay below it


class RegimeError(ValueError):
    """The interface left the near-circular regime ‖ρ‖∞ < a."""


class SingularGeometryError(ArithmeticError):
    pass


class InversionError(RuntimeError):
    pass


class InterfaceShape:
    """Perturbation ``ρ`` of the unit circle sampled at the collocation nodes."""

    def __init__(self, rho, a: float = COLLAR):
        rho = np.array(rho, dtype=float)
        if rho.ndim != 1:
            raise ValueError("rho must be one-dimensional")
        spectral.check_size(rho.size)
        if not np.all(np.isfinite(rho)):
            raise RegimeError("rho has non-finite entries")
        sup = float(np.max(np.abs(rho)))
        if sup >= a:
            raise RegimeError(f"‖ρ‖∞ = {sup:.4g} is not below the collar width a = {a}")
        rho.setflags(write=False)
        self.rho = rho
        self.a = a

    @classmethod
    def circle(cls, N: int = spectral.DEFAULT_N) -> InterfaceShape:
        return cls(np.zeros(N))

    @classmethod
    def from_spectrum(cls, c, a: float = COLLAR) -> InterfaceShape:
        return cls(spectral.from_spectral(c), a=a)

    @classmethod
    def from_modes(cls, N: int, modes: dict[int, complex], a: float = COLLAR) -> InterfaceShape:
        """Shape with spectrum ``ĥ_n = modes[n]`` and its conjugate at ``-n``."""
        c = np.zeros(N, dtype=complex)
        for n, amp in modes.items():
            c[n % N] += amp
            if n % N:
                c[-n % N] += np.conj(amp)
        return cls.from_spectrum(c, a=a)

    @property
    def N(self) -> int:
        return self.rho.size

    @cached_property
    def spectrum(self) -> np.ndarray:
        return spectral.to_spectral(self.rho)

    @cached_property
    def rho_dot(self) -> np.ndarray:
        return spectral.differentiate(self.rho, 1)

    @cached_property
    def rho_ddot(self) -> np.ndarray:
        return spectral.differentiate(self.rho, 2)

    @cached_property
    def theta(self) -> np.ndarray:
        return spectral.nodes(self.N)

    @property
    def radius(self) -> np.ndarray:
        return 1.0 + self.rho

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.rho)))

    def points(self) -> np.ndarray:
        r = self.radius
        return np.column_stack([r * np.cos(self.theta), r * np.sin(self.theta)])

    def rho_at(self, theta) -> np.ndarray:
        return spectral.evaluate(self.spectrum, theta)

    def rotated(self, shift: int) -> InterfaceShape:
        return InterfaceShape(np.roll(self.rho, shift), a=self.a)

    def arc_length(self) -> float:
        return float(2 * np.pi * np.mean(np.sqrt(self.rho_dot**2 + self.radius**2)))

    def __repr__(self) -> str:
        return f"InterfaceShape(N={self.N}, sup={self.sup_norm():.3g})"


def mode_shape(N: int, n: int, amplitude: float, phase: float = 0.0) -> InterfaceShape:
    """``ρ(θ) = amplitude · cos(nθ + phase)``."""
    theta = spectral.nodes(N)
    return InterfaceShape(amplitude * np.cos(n * theta + phase))


def random_profile(N: int, amplitude: float, band: int = 6, rng=None) -> np.ndarray:
    """Band-limited random grid function with sup norm ``amplitude``.

    Mode ``n`` gets a complex normal coefficient scaled by ``n⁻²``; the mean
    mode is left at zero.
    """
    rng = np.random.default_rng(rng)
    band = min(int(band), N // 3)
    c = np.zeros(N, dtype=complex)
    for n in range(1, band + 1):
        z = complex(rng.normal(), rng.normal()) / n**2
        c[n], c[-n] = z, np.conj(z)
    f = spectral.from_spectral(c)
    return f * (amplitude / np.max(np.abs(f)))


def random_shape(N: int, amplitude: float, band: int = 6, rng=None, a: float = COLLAR) -> InterfaceShape:
    """:func:`random_profile` as an interface; ``amplitude`` must stay below ``a``."""
    return InterfaceShape(random_profile(N, amplitude, band, rng), a=a)


# ---------------------------------------------------------------- cutoff


def cutoff(t, a: float = COLLAR, derivative: int = 0) -> np.ndarray:
    """C² bump ψ(t) (or its first/second derivative) with support |t| < 3a."""
    t = np.asarray(t, dtype=float)
    u = np.clip((np.abs(t) - a) / (2 * a), 0.0, 1.0)
    inside = (np.abs(t) > a) & (np.abs(t) < 3 * a)
    if derivative == 0:
        s = u**3 * (10 - 15 * u + 6 * u**2)
        return 1.0 - s
    if derivative == 1:
        ds = 30 * u**2 * (1 - u) ** 2
        return np.where(inside, -np.sign(t) * ds / (2 * a), 0.0)
    if derivative == 2:
        d2s = 60 * u * (1 - u) * (1 - 2 * u)
        return np.where(inside, -d2s / (4 * a * a), 0.0)
    raise ValueError("derivative must be 0, 1 or 2")


# ---------------------------------------------------------------- Hanzawa map


@dataclass(frozen=True)
class HanzawaMap:
    shape: InterfaceShape

    @property
    def a(self) -> float:
        return self.shape.a

    def radial(self, r, theta) -> np.ndarray:
        """Physical radius of the image of the polar point (r, θ)."""
        r = np.asarray(r, dtype=float)
        return r + cutoff(r - 1.0, self.a) * self.shape.rho_at(theta)

    def forward(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        r = np.hypot(x[..., 0], x[..., 1])
        theta = np.arctan2(x[..., 1], x[..., 0])
        s = self.radial(r, theta)
        scale = np.divide(s, r, out=np.ones_like(r), where=r > 0)
        return x * scale[..., None]

    def inverse(self, y, maxiter: int = 100, xtol: float = 1e-15) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        flat = y.reshape(-1, 2)
        out = flat.copy()
        a = self.a
        for i, (y1, y2) in enumerate(flat):
            s = np.hypot(y1, y2)
            if s <= 1 - 3 * a or s >= 1 + 3 * a:
                continue  # the collar maps onto itself; identity outside
            theta = np.arctan2(y2, y1)
            rho = float(self.shape.rho_at(theta))

            def g(r):
                return r + float(cutoff(r - 1.0, a)) * rho - s

            lo, hi = max(s - a, 0.0), s + a
            try:
                r = brentq(g, lo, hi, xtol=xtol, rtol=4 * np.finfo(float).eps, maxiter=maxiter)
            except (RuntimeError, ValueError) as exc:
                raise InversionError(f"Hanzawa inversion failed at y=({y1}, {y2}): {exc}") from exc
            out[i] = (r / s) * flat[i]
        return out.reshape(y.shape)


def hanzawa_forward(m: HanzawaMap, x) -> np.ndarray:
    return m.forward(x)


def hanzawa_inverse(m: HanzawaMap, y) -> np.ndarray:
    return m.inverse(y)


# ---------------------------------------------------------------- normals


@dataclass(frozen=True)
class NormalData:
    nu: np.ndarray  # (N, 2) outward unit normal on Γ_ρ
    tau: np.ndarray  # (N, 2) tangent, τ = -(z × ν)
    grad_norm: np.ndarray  # |∇N_ρ| pulled back to the circle


def grad_norm(s: InterfaceShape) -> np.ndarray:
    """|∇N_ρ| = sqrt(ρ̇² + (1+ρ)²)/(1+ρ) on the unit circle."""
    return np.sqrt(s.rho_dot**2 + s.radius**2) / s.radius


def normal_data(s: InterfaceShape) -> NormalData:
    th = s.theta
    e_r = np.column_stack([np.cos(th), np.sin(th)])
    e_t = np.column_stack([-np.sin(th), np.cos(th)])
    grad = e_r - (s.rho_dot / s.radius)[:, None] * e_t
    g = np.linalg.norm(grad, axis=1)
    nu = grad / g[:, None]
    tau = np.column_stack([nu[:, 1], -nu[:, 0]])
    return NormalData(nu=nu, tau=tau, grad_norm=grad_norm(s))


# ---------------------------------------------------------------- curvature


def curvature_functional(s: InterfaceShape, c: DerivedCoeffs, sigma: float | None = None) -> np.ndarray:
    """Transformed stress jump σκ(Γ_ρ) + (γ_o-γ_i)(1+ρ)² on the unit circle."""
    sigma = c.sigma if sigma is None else sigma
    r, rd, rdd = s.radius, s.rho_dot, s.rho_ddot
    denom = (r * r + rd * rd) ** 1.5
    if np.min(denom) < 1e-14:
        raise SingularGeometryError("curvature denominator vanished")
    kappa = (r * r + 2 * rd * rd - r * rdd) / denom
    return spectral.dealias_values(sigma * kappa + c.dgamma * r * r)


def linearized_curvature(h, c: DerivedCoeffs, sigma: float | None = None) -> np.ndarray:
    """Derivative of the stress jump at the circle: σ(-h-ḧ) + 2(γ_o-γ_i)h."""
    sigma = c.sigma if sigma is None else sigma
    h = np.asarray(h, dtype=float)
    n = spectral.wavenumbers(h.size).astype(float)
    mult = sigma * (n * n - 1.0) + 2.0 * c.dgamma
    return spectral.from_spectral(spectral.to_spectral(h) * mult)


def enclosed_area(s: InterfaceShape) -> float:
    return float(np.pi * np.mean(s.radius**2))


# ---------------------------------------------------------------- export


def write_outline_csv(path, s: InterfaceShape) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["theta", "radius"])
        for th, r in zip(s.theta, s.radius):
            w.writerow([f"{th:.17g}", f"{r:.17g}"])


def outline_json(s: InterfaceShape) -> str:
    return json.dumps({"theta": s.theta.tolist(), "radius": s.radius.tolist()})
