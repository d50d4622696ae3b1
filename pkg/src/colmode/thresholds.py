"""Operational calculators: measured noise to entanglement thresholds.

This module works in SI units.  It links voltage noise density, bandwidth,
capacitance, and temperature to the effective occupancy of a collective
envelope mode, to the correlation cooperativity, to minimum collective
fluctuation amplitudes, to collective occupation numbers, and to phase
diffusion rates.  Distance enters only through a measured coupling curve
G(d).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    MissingNoiseInputError,
    OutOfRangeError,
    ValidationError,
    ZeroOccupancyError,
)

__all__ = [
    "K_B",
    "HBAR",
    "VminForm",
    "NoiseInputSpec",
    "CouplingCurve",
    "n_eff_from_noise",
    "cooperativity",
    "v_min",
    "collective_occupation",
    "phase_diffusion",
    "coupling_at",
    "max_entangled_distance",
]

#: Exact CODATA values.
K_B = 1.380649e-23  # J/K
HBAR = 1.054571817e-34  # J s


class VminForm(str, enum.Enum):
    """Which minimum-amplitude closed form to evaluate.

    GENERAL:      sqrt(S_V(0) B / C_corr)            from the measured noise density
    THERMAL:      sqrt(4 k_B T R_eff B / C_corr)     thermal voltage noise of R_eff
    CONSERVATIVE: sqrt(2 k_B T B / (C_eff kappa))    strong-coupling bound G ~ kappa
    """

    GENERAL = "GENERAL"
    THERMAL = "THERMAL"
    CONSERVATIVE = "CONSERVATIVE"


def _positive(name, v, allow_none=False):
    if v is None:
        if allow_none:
            return None
        raise ValidationError(f"{name} is required")
    if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
        raise ValidationError(f"{name} must be positive and finite, got {v!r}")
    return float(v)


@dataclass(frozen=True)
class NoiseInputSpec:
    """Measured inputs around the collective envelope band.

    S_V0 (V^2/Hz) may be omitted when it can be supplied by R_eff via the
    thermal form 4 k_B T R_eff, or by Re_Y_eff via R_eff = 1/Re_Y_eff.
    """

    B: float  # bandwidth, Hz
    C_eff: float  # effective capacitance, F
    omega_col: float  # collective envelope angular frequency, rad/s
    T_amb: float  # ambient temperature, K
    S_V0: float | None = None  # voltage noise density at band center, V^2/Hz
    R_eff: float | None = None  # effective series resistance, Ohm
    Re_Y_eff: float | None = None  # real part of effective admittance, S

    def __post_init__(self):
        object.__setattr__(self, "B", _positive("B", self.B))
        object.__setattr__(self, "C_eff", _positive("C_eff", self.C_eff))
        object.__setattr__(self, "omega_col", _positive("omega_col", self.omega_col))
        object.__setattr__(self, "T_amb", _positive("T_amb", self.T_amb))
        for name in ("S_V0", "R_eff", "Re_Y_eff"):
            object.__setattr__(self, name, _positive(name, getattr(self, name), allow_none=True))

    def resolved_S_V0(self) -> float:
        """S_V(0), taken directly or supplied by R_eff or Re_Y_eff."""
        if self.S_V0 is not None:
            return self.S_V0
        if self.R_eff is not None:
            return 4.0 * K_B * self.T_amb * self.R_eff
        if self.Re_Y_eff is not None:
            return 4.0 * K_B * self.T_amb / self.Re_Y_eff
        raise MissingNoiseInputError("need one of S_V0, R_eff, Re_Y_eff")

    def to_dict(self) -> dict:
        return {
            "B": self.B,
            "C_eff": self.C_eff,
            "omega_col": self.omega_col,
            "T_amb": self.T_amb,
            "S_V0": self.S_V0,
            "R_eff": self.R_eff,
            "Re_Y_eff": self.Re_Y_eff,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NoiseInputSpec":
        return cls(**d)


def n_eff_from_noise(spec: NoiseInputSpec) -> tuple[float, bool]:
    """Effective occupancy from in-band injected energy.

    2 n_eff + 1 = C_eff S_V(0) B / (hbar omega_col); the in-band energy is
    E = (1/2) C_eff <V^2> with <V^2> = S_V(0) B.  Returns (n_eff, clamped):
    a measured noise level below the vacuum floor clamps n_eff to zero and
    sets the flag.
    """
    ratio = spec.C_eff * spec.resolved_S_V0() * spec.B / (HBAR * spec.omega_col)
    n_eff = (ratio - 1.0) / 2.0
    if n_eff < 0.0:
        return 0.0, True
    return n_eff, False


def cooperativity(G: float, kappa: float, n_eff: float) -> float:
    """Correlation cooperativity C = (2G/kappa) (n_eff + 1) / n_eff.

    The unique form linear in 2G/kappa that equals one exactly on the
    separability boundary 2G/kappa = n_eff/(n_eff + 1); C > 1 is equivalent
    to entanglement of the symmetric closed-form steady state.
    """
    if not all(map(math.isfinite, (G, kappa, n_eff))):
        raise ValidationError("non-finite arguments")
    if kappa <= 0 or G < 0 or 2.0 * G >= kappa:
        raise ValidationError("domain requires kappa > 0 and 0 <= 2G < kappa")
    if n_eff < 0:
        raise ValidationError("n_eff must be nonnegative")
    if n_eff == 0:
        raise ZeroOccupancyError(
            "boundary degenerates at n_eff = 0; use the PT eigenvalue criterion directly"
        )
    return (2.0 * G / kappa) * (n_eff + 1.0) / n_eff


def v_min(
    form: VminForm,
    spec: NoiseInputSpec | None = None,
    C_corr: float | None = None,
    kappa: float | None = None,
) -> float:
    """Minimum collective rms fluctuation amplitude, in volts.

    GENERAL and THERMAL need the correlation cooperativity C_corr;
    CONSERVATIVE needs kappa and uses the strong-coupling grouping
    sqrt(2 k_B T B / (C_eff kappa)).
    """
    form = VminForm(form)
    if spec is None:
        raise ValidationError("a NoiseInputSpec is required")
    if form is VminForm.GENERAL:
        C_corr = _positive("C_corr", C_corr)
        return math.sqrt(spec.resolved_S_V0() * spec.B / C_corr)
    if form is VminForm.THERMAL:
        C_corr = _positive("C_corr", C_corr)
        R = _positive("R_eff", spec.R_eff)
        return math.sqrt(4.0 * K_B * spec.T_amb * R * spec.B / C_corr)
    kappa = _positive("kappa", kappa)
    return math.sqrt(2.0 * K_B * spec.T_amb * spec.B / (spec.C_eff * kappa))


def collective_occupation(V_col: float, C_eff: float, omega_col: float) -> float:
    """N_col = E_col / (hbar omega_col) with E_col = (1/2) C_eff V_col^2."""
    V_col = _positive("V_col", V_col)
    C_eff = _positive("C_eff", C_eff)
    omega_col = _positive("omega_col", omega_col)
    return 0.5 * C_eff * V_col**2 / (HBAR * omega_col)


def phase_diffusion(kappa: float, n_eff: float, N_col: float, T_int: float):
    """Collective phase diffusion: D_phi = kappa (2 n_eff + 1) / (4 N_col).

    Returns (D_phi, sigma2_phi) with sigma2_phi = 2 D_phi T_int.  Large
    collective occupation slows diffusion but never stops it.
    """
    kappa = _positive("kappa", kappa)
    N_col = _positive("N_col", N_col)
    if not (math.isfinite(n_eff) and n_eff >= 0):
        raise ValidationError("n_eff must be nonnegative")
    if not (math.isfinite(T_int) and T_int >= 0):
        raise ValidationError("T_int must be nonnegative")
    d_phi = kappa * (2.0 * n_eff + 1.0) / (4.0 * N_col)
    return d_phi, 2.0 * d_phi * T_int


@dataclass(frozen=True)
class CouplingCurve:
    """Measured coupling rate versus distance, interpolated piecewise-linearly.

    Distances must be strictly increasing and couplings nonnegative.  No
    extrapolation: queries outside the tabulated range are refused.
    """

    distances: tuple
    couplings: tuple

    def __post_init__(self):
        d = np.asarray(self.distances, dtype=float)
        g = np.asarray(self.couplings, dtype=float)
        if d.ndim != 1 or d.size < 2 or d.shape != g.shape:
            raise ValidationError("need matching 1-d arrays with at least two knots")
        if not np.all(np.isfinite(d)) or not np.all(np.isfinite(g)):
            raise ValidationError("curve contains non-finite values")
        if np.any(np.diff(d) <= 0):
            raise ValidationError("distances must be strictly increasing")
        if np.any(g < 0):
            raise ValidationError("couplings must be nonnegative")
        object.__setattr__(self, "distances", tuple(float(x) for x in d))
        object.__setattr__(self, "couplings", tuple(float(x) for x in g))


def coupling_at(curve: CouplingCurve, d: float) -> float:
    """G(d) by linear interpolation; out-of-range queries raise."""
    if not (isinstance(d, (int, float)) and math.isfinite(d)):
        raise ValidationError(f"distance must be finite, got {d!r}")
    lo, hi = curve.distances[0], curve.distances[-1]
    if d < lo or d > hi:
        raise OutOfRangeError(f"distance {d:g} outside tabulated range [{lo:g}, {hi:g}]")
    return float(np.interp(d, curve.distances, curve.couplings))


def max_entangled_distance(
    curve: CouplingCurve, kappa: float, n_eff: float, tol: float = 1e-12
) -> float | None:
    """Largest tabulated distance with cooperativity above one.

    Requires a nonincreasing coupling curve (bisection target); returns
    None when even the closest tabulated distance fails the condition, and
    clamps to the last knot rather than extrapolating.
    """
    kappa = _positive("kappa", kappa)
    if n_eff <= 0:
        raise ZeroOccupancyError("distance solver needs n_eff > 0")
    g = np.asarray(curve.couplings)
    if np.any(np.diff(g) > 0):
        raise ValidationError("distance solver requires a nonincreasing coupling curve")
    g_threshold = 0.5 * kappa * n_eff / (n_eff + 1.0)
    lo, hi = curve.distances[0], curve.distances[-1]
    if coupling_at(curve, lo) <= g_threshold:
        return None
    if coupling_at(curve, hi) > g_threshold:
        return hi
    while hi - lo > tol * max(1.0, abs(hi)):
        mid = 0.5 * (lo + hi)
        if coupling_at(curve, mid) > g_threshold:
            lo = mid
        else:
            hi = mid
    return lo
