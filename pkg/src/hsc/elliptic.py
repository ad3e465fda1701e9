"""Pressure solves on the fixed disk and annulus.

Both transformed problems are discretized by Fourier collocation in θ and
Chebyshev spectral elements in r. Element breaks sit at the edges of the
Hanzawa collar (1 ± a, 1 ± 3a), so every pulled-back coefficient is a
polynomial in r on each element and spectral accuracy survives the C²
cutoff. On ``r < 1 - 3a`` the map is the identity and the disk solution is
an exact harmonic series; it enters the discrete system through a
Dirichlet-to-Neumann closure ``∂_r Q̂_n = |n|/r₀ · Q̂_n`` at ``r₀ = 1 - 3a``.

Unknowns are ordered angle-major: index ``k*J + j`` for angle ``θ_k`` and
radial node ``r_j``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from . import spectral
from .geometry import COLLAR, InterfaceShape, cutoff
from .params import DerivedCoeffs

SOLVER_TOL = 1e-10
DEFAULT_M = 48


class SolverError(RuntimeError):
    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


# ---------------------------------------------------------------- radial mesh


def cheb(p: int) -> tuple[np.ndarray, np.ndarray]:
    """Chebyshev–Lobatto nodes on [-1, 1] (ascending) and the derivative matrix."""
    x = np.cos(np.pi * np.arange(p + 1) / p)
    c = np.ones(p + 1)
    c[0] = c[-1] = 2.0
    c *= (-1.0) ** np.arange(p + 1)
    dx = x[:, None] - x[None, :]
    D = np.outer(c, 1.0 / c) / (dx + np.eye(p + 1))
    D -= np.diag(D.sum(axis=1))
    return x[::-1].copy(), D[::-1, ::-1].copy()


@dataclass(frozen=True)
class RadialMesh:
    """Chebyshev spectral elements glued at shared nodes.

    ``D1`` uses the left element at each interface node, ``D1_right`` the
    right one; their difference expresses continuity of ∂_r.
    """

    breaks: tuple[float, ...]
    degrees: tuple[int, ...]
    r: np.ndarray
    D1: np.ndarray
    D1_right: np.ndarray
    D2: np.ndarray
    interfaces: tuple[int, ...]

    @property
    def J(self) -> int:
        return self.r.size


def radial_mesh(breaks, M, weights=None, p_max: int = 12, p_min: int = 8) -> RadialMesh:
    """Mesh on ``breaks`` with about ``M`` radial intervals.

    Intervals are shared out in proportion to ``length * weight`` per piece,
    and pieces are subdivided so no element exceeds degree ``p_max``; high
    degrees buy nothing here but round-off in the boundary derivatives.
    ``M`` may also be a sequence giving the degree of every piece, in which
    case no subdivision happens.
    """
    breaks = tuple(float(b) for b in breaks)
    lengths = np.diff(breaks)
    if np.ndim(M):
        degrees = tuple(int(p) for p in M)
        if len(degrees) != lengths.size:
            raise ValueError("one degree per element expected")
    else:
        w = lengths * (np.ones_like(lengths) if weights is None else np.asarray(weights, dtype=float))
        fine, degrees = [breaks[0]], []
        for lo, hi, wi in zip(breaks[:-1], breaks[1:], w):
            target = max(p_min, M * wi / w.sum())
            k = int(np.ceil(target / p_max))
            p = max(p_min, int(np.ceil(target / k)))
            fine.extend(np.linspace(lo, hi, k + 1)[1:])
            degrees.extend([p] * k)
        breaks, degrees = tuple(fine), tuple(degrees)
    J = sum(degrees) + 1
    r = np.empty(J)
    D1 = np.zeros((J, J))
    D1r = np.zeros((J, J))
    D2 = np.zeros((J, J))
    interfaces = []
    start = 0
    for e, p in enumerate(degrees):
        x, D = cheb(p)
        h = breaks[e + 1] - breaks[e]
        De = D * (2.0 / h)
        De2 = De @ De
        sl = slice(start, start + p + 1)
        r[sl] = breaks[e] + 0.5 * h * (x + 1.0)
        # interior rows and the far end belong to this element
        rows = range(1 if e else 0, p + 1)
        for i in rows:
            D1[start + i, sl] = De[i]
            D2[start + i, sl] = De2[i]
        if e:
            D1r[start, sl] = De[0]
            interfaces.append(start)
        start += p
    r[0], r[-1] = breaks[0], breaks[-1]
    return RadialMesh(breaks, degrees, r, D1, D1r, D2, tuple(interfaces))


# Node density per annulus piece relative to the plain exterior. The
# coefficients vary on the scale a inside the collar, fastest where the
# cutoff switches off on [1 + a, 1 + 3a].
_ANNULUS_WEIGHTS = (3.0, 6.0, 2.0)
_ANNULUS_P_MIN = 10


def disk_mesh(M: int = DEFAULT_M, a: float = COLLAR) -> RadialMesh:
    return radial_mesh((1 - 3 * a, 1 - a, 1.0), M)


def annulus_mesh(R: float, M: int = DEFAULT_M, a: float = COLLAR) -> RadialMesh:
    return radial_mesh((1.0, 1 + a, 1 + 3 * a, R), M, _ANNULUS_WEIGHTS, p_min=_ANNULUS_P_MIN)


# ---------------------------------------------------------------- fields


@dataclass
class _Field:
    mesh: RadialMesh
    shape: InterfaceShape
    values: np.ndarray  # (J, N): radial index first

    @property
    def r(self) -> np.ndarray:
        return self.mesh.r

    @property
    def theta(self) -> np.ndarray:
        return self.shape.theta

    @property
    def N(self) -> int:
        return self.values.shape[1]

    def physical_radius(self) -> np.ndarray:
        """|φ_ρ(r, θ)| at every node."""
        t = self.r[:, None] - 1.0
        return self.r[:, None] + cutoff(t, self.shape.a) * self.shape.rho[None, :]


@dataclass
class DiskField(_Field):
    """Transformed inner pressure on ``r₀ ≤ r ≤ 1``; harmonic series below r₀."""

    def trace(self) -> np.ndarray:
        return self.values[-1].copy()

    def at_radius(self, r: float) -> np.ndarray:
        r0 = self.mesh.r[0]
        if r >= r0:
            return np.array([np.interp(r, self.r, col) for col in self.values.T])
        n = np.abs(spectral.wavenumbers(self.N))
        return spectral.from_spectral(spectral.to_spectral(self.values[0]) * (r / r0) ** n)


@dataclass
class AnnulusField(_Field):
    """Transformed outer pressure on ``1 ≤ r ≤ R``."""

    def trace(self) -> np.ndarray:
        return self.values[0].copy()

    def outer_trace(self) -> np.ndarray:
        return self.values[-1].copy()


# ---------------------------------------------------------------- geometry of the pull-back


@dataclass(frozen=True)
class _Metric:
    """Coefficients of ``S² A(ρ)`` and of the interface flux at the nodes.

    With ``S(r, θ) = r + ψ(r-1) ρ(θ)`` the physical radius,
    ``S² ΔP = a_rr Q_rr + a_rt Q_rθ + Q_θθ + a_r Q_r``.
    """

    a_rr: np.ndarray
    a_rt: np.ndarray
    a_r: np.ndarray
    S: np.ndarray
    S_r: np.ndarray
    c: np.ndarray


def _metric(mesh: RadialMesh, shape: InterfaceShape) -> _Metric:
    t = mesh.r[None, :] - 1.0
    a = shape.a
    psi, dpsi, d2psi = (cutoff(t, a, k) for k in range(3))
    rho, rd, rdd = (v[:, None] for v in (shape.rho, shape.rho_dot, shape.rho_ddot))
    S = mesh.r[None, :] + psi * rho
    S_r = 1.0 + dpsi * rho
    S_rr = d2psi * rho
    S_t = psi * rd
    S_rt = dpsi * rd
    S_tt = psi * rdd
    c = S_t / S_r
    c_r = (S_rt * S_r - S_t * S_rr) / S_r**2
    c_t = (S_tt * S_r - S_t * S_rt) / S_r**2
    a_rr = S**2 / S_r**2 + c**2
    a_rt = -2.0 * c
    a_r = -(S**2) * S_rr / S_r**3 + S / S_r + c * c_r - c_t
    return _Metric(a_rr, a_rt, a_r, S, S_r, c)


def flux_coefficients(shape: InterfaceShape, alpha: float, beta: float) -> tuple[np.ndarray, np.ndarray]:
    """Interface flux ``B_j(ρ)Q = b_r Q_r + b_θ Q_θ`` at r = 1.

    This is ``-|Θ|⁻² [α∇P + β z×∇P]·∇N_ρ`` written in the flattened
    coordinates, where the Hanzawa map is a pure radial shift by ρ(θ). The
    β contributions to the radial coefficient cancel.
    """
    s = shape.radius
    rd = shape.rho_dot
    theta2 = alpha**2 + beta**2
    b_r = -alpha * (1.0 + rd * rd / s**2) / theta2
    b_t = (alpha * rd / s**2 + beta / s) / theta2
    return b_r, b_t


def _angular(N: int):
    Dt, Dtt = spectral.derivative_matrices(N)
    return Dt, Dtt


def _interior_operator(mesh: RadialMesh, shape: InterfaceShape) -> np.ndarray:
    """Dense (N, J, N, J) array of the collocated ``S² A(ρ)``."""
    N, J = shape.N, mesh.J
    m = _metric(mesh, shape)
    Dt, Dtt = _angular(N)
    L = np.zeros((N, J, N, J))
    k = np.arange(N)
    L[k, :, k, :] = m.a_rr[:, :, None] * mesh.D2[None] + m.a_r[:, :, None] * mesh.D1[None]
    j = np.arange(J)
    L[:, j, :, j] += Dtt[None, :, :]
    rows = np.flatnonzero(np.any(m.a_rt != 0.0, axis=0))
    if rows.size:
        L[:, rows, :, :] += (
            m.a_rt[:, rows, None, None] * Dt[:, None, :, None] * mesh.D1[None, rows, None, :]
        )
    for i in mesh.interfaces:
        L[:, i, :, :] = 0.0
        L[k, i, k, :] = mesh.D1[i] - mesh.D1_right[i]
    return L


def _equilibrate(A: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Scale rows to unit max-norm; Dirichlet and collocation rows differ by ~1e6."""
    d = 1.0 / np.max(np.abs(A), axis=1)
    return d[:, None] * A, d


def _backward_error(A, x, b, norm: float | None = None) -> float:
    res = A @ x - b
    norm = np.linalg.norm(A, np.inf) if norm is None else norm
    scale = norm * np.max(np.abs(x), axis=0) + np.max(np.abs(b), axis=0)
    scale = np.where(scale > 0, scale, 1.0)
    return float(np.max(np.max(np.abs(res), axis=0) / scale))


# ---------------------------------------------------------------- inner problem


class InnerSolver:
    """Factorized solution operator ``h ↦ S(ρ, h)`` on the unit disk.

    The Neumann-type system has the constants as kernel; a bordered row
    pins the mean of the trace and a multiplier column absorbs the
    (discretization-sized) compatibility defect of the boundary data.
    """

    def __init__(self, c: DerivedCoeffs, shape: InterfaceShape, M: int = DEFAULT_M, tol: float = SOLVER_TOL):
        self.coeffs = c
        self.shape = shape
        self.mesh = disk_mesh(M, shape.a)
        self.tol = tol
        N, J = shape.N, self.mesh.J
        L = _interior_operator(self.mesh, shape)
        k = np.arange(N)
        r0 = self.mesh.r[0]
        dtn = spectral.multiplier_matrix(N, lambda n: np.abs(n).astype(float))
        L[:, 0, :, :] = 0.0
        L[k, 0, k, :] = self.mesh.D1[0]
        L[:, 0, :, 0] -= dtn / r0
        Dt, _ = _angular(N)
        self.b_r, self.b_t = flux_coefficients(shape, c.alpha_i, c.beta_i)
        L[:, -1, :, :] = 0.0
        L[k, -1, k, :] = self.b_r[:, None] * self.mesh.D1[-1][None, :]
        L[:, -1, :, -1] += self.b_t[:, None] * Dt
        n = N * J
        A = np.zeros((n + 1, n + 1))
        A[:n, :n] = L.reshape(n, n)
        boundary_rows = k * J + (J - 1)
        A[boundary_rows, n] = 1.0
        A[n, boundary_rows] = 1.0 / N
        self.A, self._scale = _equilibrate(A)
        self._lu = sla.lu_factor(self.A, check_finite=False)
        self._norm = np.linalg.norm(self.A, np.inf)
        self._boundary_rows = boundary_rows

    def boundary_data(self, h) -> np.ndarray:
        """Right-hand side of the flux condition, ``h - P(ρ)h``."""
        return np.asarray(h, dtype=float) - projection(self.shape, h)

    def solve_values(self, h) -> tuple[np.ndarray, float]:
        h = np.asarray(h, dtype=float)
        N, J = self.shape.N, self.mesh.J
        rhs = np.zeros(N * J + 1)
        rhs[self._boundary_rows] = self.boundary_data(h)
        rhs *= self._scale
        x = sla.lu_solve(self._lu, rhs, check_finite=False)
        err = _backward_error(self.A, x, rhs, self._norm)
        if not np.all(np.isfinite(x)) or err > self.tol:
            raise SolverError("inner solve failed", err)
        values = x[:-1].reshape(N, J).T + spectral.mean(h)
        return values, float(x[-1])

    def solve(self, h) -> DiskField:
        values, _ = self.solve_values(h)
        return DiskField(self.mesh, self.shape, values)

    def flux(self, field: DiskField) -> np.ndarray:
        return boundary_flux_inner(self.coeffs, self.shape, field)


# ---------------------------------------------------------------- outer problem


class OuterSolver:
    """Factorized solution operator ``g ↦ T(ρ, g)`` on the annulus 1 < r < R."""

    def __init__(self, c: DerivedCoeffs, shape: InterfaceShape, M: int = DEFAULT_M, tol: float = SOLVER_TOL):
        self.coeffs = c
        self.shape = shape
        self.mesh = annulus_mesh(c.R, M, shape.a)
        self.tol = tol
        N, J = shape.N, self.mesh.J
        L = _interior_operator(self.mesh, shape)
        k = np.arange(N)
        L[:, 0, :, :] = 0.0
        L[k, 0, k, 0] = 1.0
        Dt, _ = _angular(N)
        L[:, -1, :, :] = 0.0
        L[k, -1, k, :] = c.alpha_o * self.mesh.D1[-1]
        L[:, -1, :, -1] -= (c.beta_o / c.R) * Dt
        self.A, self._scale = _equilibrate(L.reshape(N * J, N * J))
        self._lu = sla.lu_factor(self.A, check_finite=False)
        self._norm = np.linalg.norm(self.A, np.inf)

    def solve(self, g) -> AnnulusField:
        g = np.asarray(g, dtype=float)
        N, J = self.shape.N, self.mesh.J
        g0 = spectral.mean(g)
        rhs = np.zeros(N * J)
        rhs[np.arange(N) * J] = g - g0  # constants solve the problem exactly
        rhs *= self._scale
        x = sla.lu_solve(self._lu, rhs, check_finite=False)
        err = _backward_error(self.A, x, rhs, self._norm)
        if not np.all(np.isfinite(x)) or err > self.tol:
            raise SolverError("outer solve failed", err)
        return AnnulusField(self.mesh, self.shape, x.reshape(N, J).T + g0)

    def flux(self, field: AnnulusField) -> np.ndarray:
        return boundary_flux_outer(self.coeffs, self.shape, field)


# ---------------------------------------------------------------- fluxes


def boundary_flux_inner(c: DerivedCoeffs, s: InterfaceShape, field: DiskField) -> np.ndarray:
    """``B_i(ρ)Q_i`` on the unit circle, one-sided in r."""
    b_r, b_t = flux_coefficients(s, c.alpha_i, c.beta_i)
    q = field.values - np.mean(field.values[-1])  # constants carry exactly zero flux
    return b_r * (q.T @ field.mesh.D1[-1]) + b_t * spectral.differentiate(q[-1])


def boundary_flux_outer(c: DerivedCoeffs, s: InterfaceShape, field: AnnulusField) -> np.ndarray:
    """``B_o(ρ)Q_o`` on the unit circle (the interface side of the annulus)."""
    b_r, b_t = flux_coefficients(s, c.alpha_o, c.beta_o)
    q = field.values - np.mean(field.values[0])
    return b_r * (q.T @ field.mesh.D1[0]) + b_t * spectral.differentiate(q[0])


def outer_rim_residual(c: DerivedCoeffs, field: AnnulusField) -> np.ndarray:
    """``α_o ∂_r Q - (β_o/R) ∂_θ Q`` at r = R; zero for a solution."""
    q_r = field.values.T @ field.mesh.D1[-1]
    q_t = spectral.differentiate(field.values[-1])
    return c.alpha_o * q_r - (c.beta_o / c.R) * q_t


def projection(s: InterfaceShape, h) -> np.ndarray:
    """``P(ρ)h``: the |∇N_ρ|-shaped field carrying the (1+ρ)-weighted mean of h."""
    h = np.asarray(h, dtype=float)
    w = np.sqrt(s.rho_dot**2 + s.radius**2)
    weighted = 2 * np.pi * np.mean(h * s.radius)
    return w / (s.radius * 2 * np.pi * np.mean(w)) * weighted


def weighted_mean(s: InterfaceShape, f) -> float:
    """∫ (1+ρ) f dθ by the trapezoidal rule."""
    return float(2 * np.pi * np.mean(s.radius * np.asarray(f, dtype=float)))


def solve_inner_general(c: DerivedCoeffs, s: InterfaceShape, h, M: int = DEFAULT_M):
    solver = InnerSolver(c, s, M)
    field = solver.solve(h)
    return field, solver.flux(field)


def solve_outer_general(c: DerivedCoeffs, s: InterfaceShape, g, R: float | None = None, M: int = DEFAULT_M):
    if R is not None and R != c.R:
        c = c.replace(R=R)
    solver = OuterSolver(c, s, M)
    field = solver.solve(g)
    return field, solver.flux(field)


# ---------------------------------------------------------------- exact mode solutions at ρ = 0


def inner_mode_factor(c: DerivedCoeffs, n) -> np.ndarray:
    """Coefficient of r^|n| e^{inθ} in S(0, e^{inθ}); 1 for n = 0."""
    n = np.asarray(n)
    with np.errstate(divide="ignore", invalid="ignore"):
        f = abs(c.theta_i) ** 2 / (-np.abs(n) * c.alpha_i + 1j * n * c.beta_i)
    return np.where(n == 0, 1.0 + 0j, f)


def outer_mode_factors(c: DerivedCoeffs, n: int) -> tuple[complex, complex]:
    """(a_n, b_n) with T(0, e^{inθ}) = (a_n r^n + b_n r^{-n}) e^{inθ}, a_n + b_n = 1.

    Both forms are scaled by x = R^{-2|n|} so nothing overflows.
    """
    if n == 0:
        return 1.0 + 0j, 0j
    th, thb = c.theta_o, np.conj(c.theta_o)
    x = c.R ** (-2.0 * abs(n))
    if n > 0:
        return th * x / (th * x + thb), thb / (thb + x * th)
    return th / (th + x * thb), thb * x / (thb * x + th)


def outer_mode_profile(c: DerivedCoeffs, n: int, r) -> tuple[np.ndarray, np.ndarray]:
    """Radial profile of T(0, e^{inθ}) and its r-derivative at radii r."""
    r = np.asarray(r, dtype=float)
    if n == 0:
        return np.ones_like(r) + 0j, np.zeros_like(r) + 0j
    a, b = outer_mode_factors(c, n)
    lr = np.log(r)
    up = np.exp(n * lr)
    dn = np.exp(-n * lr)
    return a * up + b * dn, n * (a * up - b * dn) / r


def outer_mode_flux(c: DerivedCoeffs, n: int) -> complex:
    """B_o(0) T(0, e^{inθ}) at r = 1 as a multiple of e^{inθ}."""
    _, dq = outer_mode_profile(c, n, 1.0)
    return complex(-(c.alpha_o * dq - c.beta_o * 1j * n) / abs(c.theta_o) ** 2)


def _hermitian(mult: np.ndarray) -> np.ndarray:
    mult = np.array(mult, dtype=complex)
    N = mult.shape[-1]
    mult[..., N // 2] = mult[..., N // 2].real
    return mult


def solve_inner_exact(c: DerivedCoeffs, h, M: int = DEFAULT_M, shape: InterfaceShape | None = None) -> DiskField:
    """Series solution of the inner problem at ρ = 0, sampled on the disk mesh."""
    h = np.asarray(h, dtype=complex)
    N = h.shape[-1]
    shape = shape or InterfaceShape.circle(N)
    mesh = disk_mesh(M, shape.a)
    n = spectral.wavenumbers(N)
    factor = inner_mode_factor(c, n)
    values = np.empty((mesh.J, N))
    for j, r in enumerate(mesh.r):
        mult = _hermitian(factor * r ** np.abs(n))
        values[j] = spectral.from_spectral(h * mult)
    return DiskField(mesh, shape, values)


def solve_outer_exact(c: DerivedCoeffs, g, R: float | None = None, M: int = DEFAULT_M,
                      shape: InterfaceShape | None = None) -> AnnulusField:
    """Series solution of the outer problem at ρ = 0, sampled on the annulus mesh."""
    if R is not None and R != c.R:
        c = c.replace(R=R)
    g = np.asarray(g, dtype=complex)
    N = g.shape[-1]
    shape = shape or InterfaceShape.circle(N)
    mesh = annulus_mesh(c.R, M, shape.a)
    n = spectral.wavenumbers(N)
    prof = np.array([outer_mode_profile(c, int(m), mesh.r)[0] for m in n]).T  # (J, N)
    values = np.empty((mesh.J, N))
    for j in range(mesh.J):
        values[j] = spectral.from_spectral(g * _hermitian(prof[j]))
    return AnnulusField(mesh, shape, values)


# ---------------------------------------------------------------- physical quantities


def physical_gradient(field: _Field) -> np.ndarray:
    """Cartesian ∇P at the image of every node, shape (J, N, 2)."""
    m = _metric(field.mesh, field.shape)
    q = field.values
    q_r = field.mesh.D1 @ q
    q_t = spectral.differentiate(q)
    S, S_r, c = m.S.T, m.S_r.T, m.c.T
    u_s = q_r / S_r
    u_t = q_t - c * q_r
    th = field.theta[None, :]
    e_s = np.stack([np.cos(th), np.sin(th)], axis=-1)
    e_t = np.stack([-np.sin(th), np.cos(th)], axis=-1)
    return u_s[..., None] * e_s + (u_t / S)[..., None] * e_t


def recover_velocity(c: DerivedCoeffs, pressure_gradient, which: str = "i") -> np.ndarray:
    """Darcy velocity ``|Θ|⁻²(-α∇P - β z×∇P)`` from a gradient field (..., 2)."""
    alpha, beta = (c.alpha_i, c.beta_i) if which == "i" else (c.alpha_o, c.beta_o)
    g = np.asarray(pressure_gradient, dtype=float)
    zx = np.stack([-g[..., 1], g[..., 0]], axis=-1)
    return (-alpha * g - beta * zx) / (alpha**2 + beta**2)


def to_hydrostatic_pressure(c: DerivedCoeffs, field: _Field, which: str = "i") -> _Field:
    """``p_j = P_j + γ_j |x|²`` at the physical image of every node."""
    gamma = c.gamma_i if which == "i" else c.gamma_o
    S = field.physical_radius()
    return type(field)(field.mesh, field.shape, field.values + gamma * S**2)
