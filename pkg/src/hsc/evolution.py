"""Nonlinear interface flow ``∂_t ρ = F(ρ)`` and its time integration.

``F(ρ)`` is the solution ``w`` of ``(1 - R(ρ)) w = B_o(ρ) T(ρ, -K(ρ))`` with
``R(ρ)z = B_o(ρ) T(ρ, S(ρ, z)|_{r=1})``. The stiff linear part about the
circle is the diagonal multiplier ``q_n`` and is stepped implicitly.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.sparse.linalg import LinearOperator, gmres

from . import spectral
from .dispersion import grid_l_multipliers, grid_multipliers
from .elliptic import DEFAULT_M, InnerSolver, OuterSolver, weighted_mean
from .geometry import COLLAR, InterfaceShape, curvature_functional, enclosed_area, write_outline_csv
from .params import DerivedCoeffs

log = logging.getLogger(__name__)

INVERSION_TOL = 1e-10
MAX_APPLICATIONS = 200


class OperatorInversionError(RuntimeError):
    """(1 - R(ρ)) could not be inverted to tolerance: ρ left the theory's neighborhood."""


class FitError(ValueError):
    pass


class SimulationError(RuntimeError):
    """A run stopped early; ``run`` holds everything computed up to the failure."""

    def __init__(self, message: str, run: SimulationRun):
        super().__init__(message)
        self.run = run


# ---------------------------------------------------------------- the velocity functional


class FlowOperator:
    """Both factorized solvers for one interface shape."""

    def __init__(self, c: DerivedCoeffs, shape: InterfaceShape, M: int = DEFAULT_M):
        self.coeffs = c
        self.shape = shape
        self.inner = InnerSolver(c, shape, M)
        self.outer = OuterSolver(c, shape, M)
        self._precond = 1.0 / (1.0 - grid_l_multipliers(c, shape.N))
        self.applications = 0

    def apply_R(self, z) -> np.ndarray:
        self.applications += 1
        trace = self.inner.solve(z).trace()
        return self.outer.flux(self.outer.solve(trace))

    def forcing(self) -> np.ndarray:
        """``B_o(ρ) T(ρ, -K(ρ))``."""
        K = curvature_functional(self.shape, self.coeffs)
        return self.outer.flux(self.outer.solve(-K))

    def _precondition(self, v) -> np.ndarray:
        return spectral.from_spectral(spectral.to_spectral(np.asarray(v, dtype=float)) * self._precond)

    def invert_one_minus_R(self, rhs, tol: float = INVERSION_TOL, max_applications: int = MAX_APPLICATIONS) -> np.ndarray:
        """Solve ``(1 - R(ρ)) w = rhs`` by preconditioned GMRES.

        The ρ = 0 symbol ``(1 - l_n)^{-1}`` is the preconditioner, so at the
        circle a single iteration is exact.
        """
        rhs = np.asarray(rhs, dtype=float)
        scale = float(np.max(np.abs(rhs)))
        if scale == 0.0:
            return np.zeros_like(rhs)
        N = rhs.size
        start = self.applications

        def matvec(v):
            if self.applications - start >= max_applications:
                raise OperatorInversionError(f"no convergence within {max_applications} applications of R")
            v = np.ravel(v)
            return v - self.apply_R(v)

        op = LinearOperator((N, N), matvec=matvec, dtype=float)
        pre = LinearOperator((N, N), matvec=lambda v: self._precondition(np.ravel(v)), dtype=float)
        x0 = self._precondition(rhs)
        w, _ = gmres(op, rhs, x0=x0, rtol=1e-3 * tol, atol=0.0, restart=min(N, 60), maxiter=max_applications, M=pre)
        residual = float(np.max(np.abs(w - self.apply_R(w) - rhs))) / scale
        if not np.all(np.isfinite(w)) or residual > tol:
            raise OperatorInversionError(f"(1 - R) inversion residual {residual:.3e} exceeds {tol:.1e}")
        return w

    def velocity(self) -> np.ndarray:
        return self.invert_one_minus_R(self.forcing())


def apply_R(c: DerivedCoeffs, s: InterfaceShape, z, M: int = DEFAULT_M) -> np.ndarray:
    return FlowOperator(c, s, M).apply_R(z)


def invert_one_minus_R(c: DerivedCoeffs, s: InterfaceShape, rhs, M: int = DEFAULT_M) -> np.ndarray:
    return FlowOperator(c, s, M).invert_one_minus_R(rhs)


def velocity_functional(c: DerivedCoeffs, s: InterfaceShape, M: int = DEFAULT_M) -> np.ndarray:
    """F(ρ) sampled at the collocation nodes."""
    return FlowOperator(c, s, M).velocity()


def linear_velocity(c: DerivedCoeffs, h) -> np.ndarray:
    """``∂F(0) h``: the multiplier q_n applied to h."""
    h = np.asarray(h, dtype=float)
    return spectral.from_spectral(spectral.to_spectral(h) * grid_multipliers(c, h.size))


# ---------------------------------------------------------------- time stepping


@dataclass
class Monitors:
    max_sup: float = 0.0
    max_area_drift: float = 0.0
    max_inversion_applications: int = 0
    max_hermitian_defect: float = 0.0
    steps: int = 0

    def as_dict(self) -> dict:
        return {
            "max_sup": self.max_sup,
            "max_area_drift": self.max_area_drift,
            "max_inversion_applications": self.max_inversion_applications,
            "max_hermitian_defect": self.max_hermitian_defect,
            "steps": self.steps,
        }


@dataclass
class SimulationState:
    t: float
    shape: InterfaceShape
    area0: float
    monitors: Monitors = field(default_factory=Monitors)

    @classmethod
    def initial(cls, shape: InterfaceShape) -> SimulationState:
        st = cls(0.0, shape, enclosed_area(shape))
        st.monitors.max_sup = shape.sup_norm()
        return st

    @property
    def area_drift(self) -> float:
        return abs(enclosed_area(self.shape) - self.area0) / self.area0


@dataclass(frozen=True)
class StepContext:
    """Everything a step needs besides the state; built once per run."""

    coeffs: DerivedCoeffs
    M: int
    q: np.ndarray  # q_n on the grid (FFT order)


def step_context(c: DerivedCoeffs, N: int, M: int = DEFAULT_M) -> StepContext:
    return StepContext(c, M, grid_multipliers(c, N))


def step_imex(state: SimulationState, dt: float, ctx: StepContext) -> SimulationState:
    """First-order IMEX step: q_n implicit, ``F(ρ) - ∂F(0)ρ`` explicit."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    shape = state.shape
    rho_hat = shape.spectrum
    if np.any(rho_hat != 0):
        flow = FlowOperator(ctx.coeffs, shape, ctx.M)
        F = flow.velocity()
        apps = flow.applications
        nonlinear = spectral.dealias(spectral.to_spectral(F) - ctx.q * rho_hat)
    else:  # the circle is an exact equilibrium
        apps = 0
        nonlinear = np.zeros_like(rho_hat)
    new_hat = (rho_hat + dt * nonlinear) / (1.0 - dt * ctx.q)
    defect = spectral.hermitian_defect(new_hat)
    rho = spectral.from_spectral(new_hat)  # raises if symmetry is lost
    new_shape = InterfaceShape(rho, a=shape.a)  # RegimeError once ‖ρ‖∞ ≥ a
    m = replace(state.monitors)
    m.steps += 1
    m.max_sup = max(m.max_sup, new_shape.sup_norm())
    m.max_inversion_applications = max(m.max_inversion_applications, apps)
    m.max_hermitian_defect = max(m.max_hermitian_defect, defect)
    out = SimulationState(state.t + dt, new_shape, state.area0, m)
    m.max_area_drift = max(m.max_area_drift, out.area_drift)
    return out


# ---------------------------------------------------------------- runs


@dataclass
class SimulationRun:
    times: list[float]
    spectra: list[np.ndarray]
    sup_norms: list[float]
    area_drifts: list[float]
    final: SimulationState
    status: str = "completed"

    @property
    def N(self) -> int:
        return self.final.shape.N

    def mode_series(self, n: int) -> np.ndarray:
        return np.array([c[n % self.N] for c in self.spectra])

    def manifest(self, config: dict | None = None) -> dict:
        return {
            "config": config or {},
            "status": self.status,
            "monitors": self.final.monitors.as_dict(),
            "snapshots": [
                {
                    "t": t,
                    "sup_norm": s,
                    "area_drift": d,
                    "spectrum": [[int(n), float(v.real), float(v.imag)] for n, v in zip(spectral.wavenumbers(c.size), c)],
                }
                for t, c, s, d in zip(self.times, self.spectra, self.sup_norms, self.area_drifts)
            ],
        }


def simulate(
    c: DerivedCoeffs,
    shape: InterfaceShape,
    dt: float,
    t_end: float,
    M: int = DEFAULT_M,
    snapshot_every: int = 1,
    stop_amplitude: float | None = None,
) -> SimulationRun:
    """Integrate from ``shape`` to ``t_end``.

    The run ends early (status ``"stopped"``) once ‖ρ‖∞ exceeds
    ``stop_amplitude``; the first snapshot beyond it is kept. Failures raise
    :class:`SimulationError` carrying the partial run.
    """
    if not dt > 0 or not t_end >= 0:
        raise ValueError("need dt > 0 and t_end ≥ 0")
    snapshot_every = max(1, int(snapshot_every))
    ctx = step_context(c, shape.N, M)
    state = SimulationState.initial(shape)
    run = SimulationRun([0.0], [shape.spectrum.copy()], [shape.sup_norm()], [0.0], state)
    n_steps = int(math.ceil(t_end / dt - 1e-9))
    for k in range(1, n_steps + 1):
        try:
            state = step_imex(state, dt, ctx)
        except Exception as exc:
            run.status = f"failed: {exc}"
            raise SimulationError(f"step {k} failed at t={state.t:.6g}: {exc}", run) from exc
        run.final = state
        stop = stop_amplitude is not None and state.shape.sup_norm() > stop_amplitude
        if k % snapshot_every == 0 or k == n_steps or stop:
            run.times.append(state.t)
            run.spectra.append(state.shape.spectrum.copy())
            run.sup_norms.append(state.shape.sup_norm())
            run.area_drifts.append(state.area_drift)
        if stop:
            run.status = "stopped"
            log.info("stopped at t=%.4g with ‖ρ‖∞=%.3g", state.t, state.shape.sup_norm())
            break
    return run


def write_run(out_dir, run: SimulationRun, config: dict | None = None) -> None:
    """Manifest JSON, a spectra CSV (one row per snapshot and mode) and outlines."""
    out = Path(out_dir)
    (out / "manifest.json").write_text(json.dumps(run.manifest(config), indent=1) + "\n")
    n = spectral.wavenumbers(run.N)
    order = np.argsort(n)
    with (out / "spectra.csv").open("w") as fh:
        fh.write("t,n,re,im\n")
        for t, c in zip(run.times, run.spectra):
            for i in order:
                fh.write(f"{t:.17g},{n[i]},{c[i].real:.17g},{c[i].imag:.17g}\n")
    outlines = out / "outlines"
    outlines.mkdir(exist_ok=True)
    for k, c in enumerate(run.spectra):
        write_outline_csv(outlines / f"outline_{k:05d}.csv", InterfaceShape(spectral.from_spectral(c), a=COLLAR))


# ---------------------------------------------------------------- rate fitting


@dataclass(frozen=True)
class RateFit:
    n: int
    rate: float
    frequency: float
    residual: float
    samples: int


def fit_rate(run_or_times, n: int, spectra=None, max_sup: float | None = None, floor: float = 1e-14) -> RateFit:
    """Least-squares exponential fit of mode ``n``.

    The slope of ``log|ρ̂_n|`` is the rate, the slope of the unwrapped phase
    the angular frequency. With ``max_sup``, only snapshots with ‖ρ‖∞ at or
    below it are used.
    """
    if spectra is None:
        run = run_or_times
        times = np.asarray(run.times)
        coeffs = run.mode_series(n)
        sups = np.asarray(run.sup_norms)
    else:
        times = np.asarray(run_or_times, dtype=float)
        coeffs = np.asarray(spectra, dtype=complex)
        sups = None
    keep = np.abs(coeffs) > floor
    if max_sup is not None and sups is not None:
        keep &= sups <= max_sup
    if keep.sum() < 10:
        raise FitError(f"need at least 10 usable samples of mode {n}, have {int(keep.sum())}")
    t = times[keep]
    z = coeffs[keep]
    log_amp = np.log(np.abs(z))
    phase = np.unwrap(np.angle(z))
    (rate, b0), res, *_ = np.polyfit(t, log_amp, 1, full=True)
    freq, _ = np.polyfit(t, phase, 1)
    rms = math.sqrt(float(res[0]) / t.size) if len(res) else 0.0
    return RateFit(n=n, rate=float(rate), frequency=float(freq), residual=rms, samples=int(t.size))


def conservation_defect(c: DerivedCoeffs, s: InterfaceShape, M: int = DEFAULT_M) -> tuple[float, float]:
    """(|∫(1+ρ)F dθ|, ‖F‖∞) for one shape."""
    F = velocity_functional(c, s, M)
    return abs(weighted_mean(s, F)), float(np.max(np.abs(F)))
