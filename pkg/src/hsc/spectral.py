"""Fourier calculus for real 2π-periodic samples on the unit circle.

A circle function is a real array of ``N`` samples at ``θ_k = 2πk/N``; its
spectrum is the complex array ``ĥ = fft(f)/N`` in numpy FFT order, so that
``f(θ) = Σ ĥ_n e^{inθ}``. Index ``N//2`` holds the (real) Nyquist mode.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

DEFAULT_N = 128
SYMMETRY_TOL = 1e-10


class GridError(ValueError):
    pass


class SymmetryError(ValueError):
    """Spectrum is not the transform of a real function."""


def check_size(N: int) -> int:
    N = int(N)
    if N < 16 or N & (N - 1):
        raise GridError(f"N must be a power of two ≥ 16, got {N}")
    return N


def nodes(N: int) -> np.ndarray:
    return 2.0 * np.pi * np.arange(N) / N


def wavenumbers(N: int) -> np.ndarray:
    """Integer mode numbers in FFT order, with the Nyquist slot as +N/2."""
    n = np.fft.fftfreq(N, d=1.0 / N).round().astype(int)
    n[N // 2] = N // 2
    return n


def to_spectral(f) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    check_size(f.shape[-1])
    return np.fft.fft(f, axis=-1) / f.shape[-1]


def hermitian_defect(c) -> float:
    c = np.asarray(c)
    mirrored = np.conj(np.roll(c[..., ::-1], 1, axis=-1))
    return float(np.max(np.abs(c - mirrored), initial=0.0))


def from_spectral(c, tol: float = SYMMETRY_TOL) -> np.ndarray:
    c = np.asarray(c, dtype=complex)
    check_size(c.shape[-1])
    defect = hermitian_defect(c)
    if defect > tol:
        raise SymmetryError(f"spectrum violates ĥ(-n) = conj ĥ(n) by {defect:.3e}")
    return np.fft.ifft(c * c.shape[-1], axis=-1).real


def differentiate(f, order: int = 1) -> np.ndarray:
    """Spectral derivative; the Nyquist mode is dropped for odd orders."""
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    f = np.asarray(f, dtype=float)
    N = f.shape[-1]
    n = wavenumbers(N)
    mult = (1j * n) ** order
    if order % 2:
        mult[N // 2] = 0.0
    return np.fft.ifft(np.fft.fft(f, axis=-1) * mult, axis=-1).real


def apply_multiplier(c, M) -> np.ndarray:
    return np.asarray(c, dtype=complex) * np.asarray(M)


def mean(f) -> float:
    return float(np.mean(np.asarray(f, dtype=float), axis=-1))


def dealias(c) -> np.ndarray:
    """Two-thirds rule: zero every mode with |n| > N/3."""
    c = np.array(c, dtype=complex)
    N = c.shape[-1]
    c[..., np.abs(wavenumbers(N)) > N / 3] = 0.0
    return c


def dealias_values(f) -> np.ndarray:
    return from_spectral(dealias(to_spectral(f)))


def evaluate(c, theta) -> np.ndarray:
    """Evaluate the band-limited interpolant at arbitrary angles.

    The Nyquist coefficient is split symmetrically (a cosine), which keeps
    the interpolant real.
    """
    c = np.asarray(c, dtype=complex)
    N = c.shape[-1]
    theta = np.asarray(theta, dtype=float)
    n = wavenumbers(N)
    weights = np.ones(N)
    weights[N // 2] = 0.5
    phase = np.exp(1j * np.multiply.outer(theta, n))
    out = phase @ (c * weights)
    # matching -N/2 half of the Nyquist term
    out = out + 0.5 * c[N // 2] * np.exp(-1j * (N // 2) * theta)
    return out.real


def multiplier_matrix(N: int, symbol) -> np.ndarray:
    """Dense nodal matrix of the Fourier multiplier ``symbol(n)``."""
    eye = np.eye(N)
    mult = np.asarray(symbol(wavenumbers(N)))
    return np.fft.ifft(mult[:, None] * np.fft.fft(eye, axis=0), axis=0).real


def derivative_matrices(N: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodal first and second angular derivative matrices (consistent with
    :func:`differentiate`)."""
    half = N // 2

    def first(n):
        m = 1j * n.astype(complex)
        m[half] = 0.0
        return m

    return multiplier_matrix(N, first), multiplier_matrix(N, lambda n: -(n.astype(float) ** 2))


def write_spectrum_csv(path, c) -> None:
    """Rows ``n, Re ĥ_n, Im ĥ_n`` for -N/2 < n ≤ N/2, ascending in n."""
    c = np.asarray(c, dtype=complex)
    n = wavenumbers(c.shape[-1])
    order = np.argsort(n)
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n", "re", "im"])
        for idx in order:
            w.writerow([int(n[idx]), f"{c[idx].real:.17g}", f"{c[idx].imag:.17g}"])


def read_spectrum_csv(path, N: int) -> np.ndarray:
    c = np.zeros(N, dtype=complex)
    with Path(path).open(newline="") as fh:
        for row in csv.DictReader(fh):
            c[int(row["n"]) % N] = complex(float(row["re"]), float(row["im"]))
    return c
