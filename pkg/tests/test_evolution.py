import json
import math

import numpy as np
import pytest

from hsc import evolution, spectral
from hsc.dispersion import compute_l_n, compute_q_n, grid_multipliers
from hsc.evolution import (
    FitError,
    FlowOperator,
    SimulationError,
    SimulationState,
    apply_R,
    fit_rate,
    invert_one_minus_R,
    linear_velocity,
    simulate,
    step_context,
    step_imex,
    velocity_functional,
    write_run,
)
from hsc.geometry import InterfaceShape, mode_shape, random_shape

N, M = 16, 16


def mode_action(mult, n, N=N):
    """Grid values of the multiplier ``mult`` (at +n) applied to cos nθ."""
    th = spectral.nodes(N)
    return (mult * np.exp(1j * n * th)).real


def test_equilibrium(p0_coriolis):
    F = velocity_functional(p0_coriolis, InterfaceShape.circle(N), M)
    assert np.max(np.abs(F)) <= 1e-12


@pytest.mark.parametrize("n", [1, 2, 5])
def test_R_at_circle_is_l_n(p0_coriolis, n):
    z = np.cos(n * spectral.nodes(N))
    out = apply_R(p0_coriolis, InterfaceShape.circle(N), z, M)
    assert np.max(np.abs(out - mode_action(compute_l_n(p0_coriolis, n), n))) < 1e-8


def test_R_of_cosine_under_reference_set(p0):
    th = spectral.nodes(N)
    out = apply_R(p0, InterfaceShape.circle(N), np.cos(th), M)
    assert np.allclose(out, -0.3 * np.cos(th), atol=1e-8)
    assert np.all(apply_R(p0, InterfaceShape.circle(N), np.zeros(N), M) == 0)


def test_inversion_at_circle(p0_coriolis):
    s = InterfaceShape.circle(N)
    for n in (1, 3):
        w = invert_one_minus_R(p0_coriolis, s, np.cos(n * s.theta), M)
        assert np.max(np.abs(w - mode_action(1 / (1 - compute_l_n(p0_coriolis, n)), n))) < 1e-8
    assert np.all(invert_one_minus_R(p0_coriolis, s, np.zeros(N), M) == 0)


def test_inversion_residual_off_circle(p0_coriolis):
    s = random_shape(N, 0.05, rng=4)
    op = FlowOperator(p0_coriolis, s, M)
    rhs = np.sin(s.theta) + 0.2 * np.cos(3 * s.theta)
    w = op.invert_one_minus_R(rhs)
    assert np.max(np.abs(w - op.apply_R(w) - rhs)) <= 1e-10 * np.max(np.abs(rhs))
    assert op.applications < evolution.MAX_APPLICATIONS


def test_inversion_gives_up(p0_coriolis):
    s = random_shape(N, 0.05, rng=4)
    op = FlowOperator(p0_coriolis, s, M)
    with pytest.raises(evolution.OperatorInversionError):
        op.invert_one_minus_R(np.sin(s.theta), max_applications=1)


@pytest.mark.parametrize("n", [2, 3])
def test_small_amplitude_velocity_is_linear(p0_coriolis, n):
    eps = 1e-5
    F = velocity_functional(p0_coriolis, mode_shape(N, n, eps), M) / eps
    lin = mode_action(compute_q_n(p0_coriolis, n), n)
    assert np.max(np.abs(F - lin)) <= 1e-3 * np.max(np.abs(lin))
    assert np.allclose(linear_velocity(p0_coriolis, np.cos(n * spectral.nodes(N))), lin, atol=1e-12)


def test_conservation_identity(p0):
    s = random_shape(32, 0.05, rng=11)
    defect, norm = evolution.conservation_defect(p0, s, 48)
    assert defect <= 1e-9 * norm


# ---------------------------------------------------------------- stepping


def test_zero_stays_zero(p0_coriolis):
    run = simulate(p0_coriolis, InterfaceShape.circle(N), dt=0.1, t_end=0.5, M=M)
    assert all(np.all(c == 0) for c in run.spectra)
    assert run.final.monitors.max_sup == 0 and run.status == "completed"


def test_single_linear_step(p0_coriolis):
    eps = 1e-8
    ctx = step_context(p0_coriolis, N, M)
    state = SimulationState.initial(mode_shape(N, 2, eps))
    dt = 0.05
    out = step_imex(state, dt, ctx)
    gain = out.shape.spectrum[2] / state.shape.spectrum[2]
    assert gain == pytest.approx(1 / (1 - dt * compute_q_n(p0_coriolis, 2)), rel=1e-6)
    assert out.t == dt and out.monitors.steps == 1


def test_first_order_in_time(p0):
    s = mode_shape(N, 2, 0.02)
    final = {dt: simulate(p0, s, dt=dt, t_end=0.1, M=M).final.shape.rho for dt in (0.02, 0.01, 0.0025)}
    e1 = np.max(np.abs(final[0.02] - final[0.0025]))
    e2 = np.max(np.abs(final[0.01] - final[0.0025]))
    # error against a dt/4 reference: (1 - 1/8)/(1/2 - 1/8) = 7/3 for a first-order method
    assert e1 / e2 == pytest.approx(7 / 3, rel=0.2)


def test_stable_run_decays_monotonically(p0_coriolis):
    run = simulate(p0_coriolis, mode_shape(N, 2, 1e-4), dt=0.01, t_end=0.3, M=M, snapshot_every=3)
    amp = np.abs(run.mode_series(2))
    assert np.all(np.diff(amp) < 0)
    assert run.final.monitors.max_hermitian_defect < 1e-20
    assert run.final.monitors.max_area_drift < 1e-6


def test_regime_guard_aborts(p0):
    unstable = p0.replace(gamma_i=6.0, gamma_o=0.0)
    with pytest.raises(SimulationError) as exc:
        simulate(unstable, mode_shape(N, 1, 0.1), dt=0.05, t_end=5.0, M=M)
    run = exc.value.run
    assert run.status.startswith("failed") and len(run.times) >= 1


def test_stop_amplitude(p0):
    unstable = p0.replace(gamma_i=1.0, gamma_o=0.0)
    run = simulate(unstable, mode_shape(N, 1, 1e-3), dt=0.1, t_end=50.0, M=M, stop_amplitude=2e-3)
    assert run.status == "stopped"
    assert run.sup_norms[-1] > 2e-3 >= run.sup_norms[-2]


def test_rejects_bad_step(p0):
    with pytest.raises(ValueError):
        simulate(p0, InterfaceShape.circle(N), dt=0.0, t_end=1.0, M=M)


def test_runs_are_deterministic(p0_coriolis):
    s = random_shape(N, 0.01, rng=2)
    a = simulate(p0_coriolis, s, dt=0.02, t_end=0.1, M=M)
    b = simulate(p0_coriolis, s, dt=0.02, t_end=0.1, M=M)
    assert all(np.array_equal(x, y) for x, y in zip(a.spectra, b.spectra))


# ---------------------------------------------------------------- fitting and export


def test_fit_recovers_exact_exponential(p0_coriolis):
    q = compute_q_n(p0_coriolis, 3)
    t = np.linspace(0, 1, 21)
    fit = fit_rate(t, 3, spectra=1e-4 * np.exp(q * t))
    assert fit.rate == pytest.approx(q.real, rel=1e-10)
    assert fit.frequency == pytest.approx(q.imag, rel=1e-10)
    with pytest.raises(FitError):
        fit_rate(t[:5], 3, spectra=np.exp(q * t[:5]))


def test_linear_velocity_uses_grid_multipliers(p0_coriolis):
    h = random_shape(N, 0.05, rng=0).rho
    expected = spectral.from_spectral(spectral.to_spectral(h) * grid_multipliers(p0_coriolis, N))
    assert np.allclose(linear_velocity(p0_coriolis, h), expected)


def test_write_run(tmp_path, p0):
    run = simulate(p0, mode_shape(N, 2, 1e-3), dt=0.01, t_end=0.05, M=M, snapshot_every=2)
    write_run(tmp_path, run, {"note": "test"})
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["config"] == {"note": "test"} and manifest["status"] == "completed"
    assert len(manifest["snapshots"]) == len(run.times) == 4
    rows = (tmp_path / "spectra.csv").read_text().splitlines()
    assert rows[0] == "t,n,re,im" and len(rows) == 1 + N * len(run.times)
    assert len(list((tmp_path / "outlines").iterdir())) == len(run.times)
    t, n, re, im = rows[1 + N * 3 + N // 2 + 1].split(",")  # modes run -N/2+1 .. N/2
    assert int(n) == 2 and float(re) == run.spectra[-1][2].real
    assert math.isclose(float(t), run.times[-1])
