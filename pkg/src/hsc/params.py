"""Physical parameters of the rotating cell and the derived coefficient set."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields


class ValidationError(ValueError):
    """Raised when a parameter set violates an admissibility bound.

    ``field`` names the first offending parameter; ``violations`` lists all.
    """

    def __init__(self, violations: list[tuple[str, str]]):
        self.violations = violations
        self.field = violations[0][0] if violations else None
        msg = "; ".join(f"{name}: {rule}" for name, rule in violations)
        super().__init__(f"invalid parameters ({msg})")


@dataclass(frozen=True)
class PhysicalParams:
    eta_i: float
    eta_o: float
    rho_i: float
    rho_o: float
    b: float
    omega: float
    sigma: float
    R: float
    E_i: float = 1.0
    E_o: float = 1.0
    F_i: float = 0.0
    F_o: float = 0.0


# (field, predicate, human-readable rule)
_PHYSICAL_BOUNDS = [
    ("eta_i", lambda v: v > 0, "eta_i > 0"),
    ("eta_o", lambda v: v > 0, "eta_o > 0"),
    ("rho_i", lambda v: v > 0, "rho_i > 0"),
    ("rho_o", lambda v: v > 0, "rho_o > 0"),
    ("b", lambda v: v > 0, "b > 0"),
    ("omega", lambda v: v > 0, "omega > 0"),
    ("sigma", lambda v: v > 0, "σ > 0"),
    ("R", lambda v: v >= 2, "R ≥ 2"),
    ("E_i", lambda v: v > 0, "E_i > 0"),
    ("E_o", lambda v: v > 0, "E_o > 0"),
    ("F_i", lambda v: v >= 0, "F_i ≥ 0"),
    ("F_o", lambda v: v >= 0, "F_o ≥ 0"),
]

_DERIVED_BOUNDS = [
    ("alpha_i", lambda v: v > 0, "alpha_i > 0"),
    ("alpha_o", lambda v: v > 0, "alpha_o > 0"),
    ("beta_i", lambda v: v >= 0, "beta_i ≥ 0"),
    ("beta_o", lambda v: v >= 0, "beta_o ≥ 0"),
    ("gamma_i", lambda v: v >= 0, "gamma_i ≥ 0"),
    ("gamma_o", lambda v: v >= 0, "gamma_o ≥ 0"),
    ("sigma", lambda v: v > 0, "σ > 0"),
    ("R", lambda v: v >= 2, "R ≥ 2"),
]


@dataclass(frozen=True)
class ValidationReport:
    violations: list[tuple[str, str]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:  # truthy iff there is something to report
        return bool(self.violations)

    def raise_if_invalid(self) -> None:
        if self.violations:
            raise ValidationError(self.violations)


def _check(obj, bounds) -> ValidationReport:
    out = []
    for name, pred, rule in bounds:
        value = getattr(obj, name)
        try:
            value = float(value)
        except (TypeError, ValueError):
            out.append((name, f"{rule} (not a number: {value!r})"))
            continue
        if not math.isfinite(value):
            out.append((name, f"{rule} (non-finite value {value!r})"))
        elif not pred(value):
            out.append((name, rule))
    return ValidationReport(out)


def validate(p: PhysicalParams | DerivedCoeffs) -> ValidationReport:
    """List every violated bound; an empty report means ``p`` is admissible."""
    if isinstance(p, DerivedCoeffs):
        return _check(p, _DERIVED_BOUNDS)
    return _check(p, _PHYSICAL_BOUNDS)


@dataclass(frozen=True)
class DerivedCoeffs:
    """Coefficients entering the pressure formulation.

    ``alpha`` are mobilities, ``beta`` Coriolis couplings and ``gamma`` the
    centrifugal coefficients of the inner (``_i``) and outer (``_o``) fluid.
    Surface tension and cell radius travel along so that every downstream
    routine needs a single parameter object.
    """

    alpha_i: float
    alpha_o: float
    beta_i: float
    beta_o: float
    gamma_i: float
    gamma_o: float
    sigma: float
    R: float

    @property
    def theta_i(self) -> complex:
        return complex(self.alpha_i, self.beta_i)

    @property
    def theta_o(self) -> complex:
        return complex(self.alpha_o, self.beta_o)

    @property
    def dgamma(self) -> float:
        """Centrifugal contrast gamma_o - gamma_i."""
        return self.gamma_o - self.gamma_i

    @property
    def B(self) -> float:
        """Coriolis asymmetry beta_o - beta_i."""
        return self.beta_o - self.beta_i

    def replace(self, **changes) -> DerivedCoeffs:
        values = {f.name: getattr(self, f.name) for f in fields(self)}
        values.update(changes)
        return derived_coefficients(**values)


def derive_coefficients(p: PhysicalParams) -> DerivedCoeffs:
    """Map raw physical inputs onto (alpha_j, beta_j, gamma_j, sigma, R)."""
    validate(p).raise_if_invalid()
    k = 12.0 / p.b**2
    return DerivedCoeffs(
        alpha_i=k * p.eta_i * p.E_i,
        alpha_o=k * p.eta_o * p.E_o,
        beta_i=k * p.eta_i * p.F_i,
        beta_o=k * p.eta_o * p.F_o,
        gamma_i=p.rho_i * p.omega**2 / 2.0,
        gamma_o=p.rho_o * p.omega**2 / 2.0,
        sigma=float(p.sigma),
        R=float(p.R),
    )


def derived_coefficients(
    alpha_i: float,
    alpha_o: float,
    beta_i: float = 0.0,
    beta_o: float = 0.0,
    gamma_i: float = 0.0,
    gamma_o: float = 0.0,
    sigma: float = 1.0,
    R: float = 2.0,
) -> DerivedCoeffs:
    """Build coefficients directly, bypassing the physical layer."""
    c = DerivedCoeffs(
        float(alpha_i), float(alpha_o), float(beta_i), float(beta_o),
        float(gamma_i), float(gamma_o), float(sigma), float(R),
    )
    validate(c).raise_if_invalid()
    return c


def coerce_coeffs(p: PhysicalParams | DerivedCoeffs) -> DerivedCoeffs:
    return p if isinstance(p, DerivedCoeffs) else derive_coefficients(p)


PHYSICAL_KEYS = tuple(f.name for f in fields(PhysicalParams))
DERIVED_KEYS = tuple(f.name for f in fields(DerivedCoeffs))


def params_from_mapping(values: dict[str, float]) -> PhysicalParams | DerivedCoeffs:
    """Pick the entry point from the keys present.

    Physical keys (eta_i, rho_i, ...) take precedence when ``eta_i`` is given;
    otherwise derived keys (alpha_i, ...) are expected.
    """
    if "eta_i" in values:
        missing = [k for k in PHYSICAL_KEYS[:8] if k not in values]
        if missing:
            raise ValidationError([(k, "required") for k in missing])
        p = PhysicalParams(**{k: float(values[k]) for k in PHYSICAL_KEYS if k in values})
        validate(p).raise_if_invalid()
        return p
    missing = [k for k in ("alpha_i", "alpha_o") if k not in values]
    if missing:
        raise ValidationError([(k, "required") for k in missing])
    return derived_coefficients(**{k: float(values[k]) for k in DERIVED_KEYS if k in values})
