"""Classical correlated-noise generators for falsification runs.

All three generators emit TrajectoryRecords whose stationary statistics are
classical Gaussian states by construction: a positive-semidefinite c-number
covariance V_cl convolved with the vacuum floor, V = V_cl + I/2.  States of
this form admit a positive P-representation, so the Duan sum can never drop
below 2 nor the smallest PT symplectic eigenvalue below 1/2; the generators
are free to chase strong correlations without ever crossing either bound.

Classical fluctuations are Lorentzian-filtered (single-pole) noise matched
in bandwidth and per-channel power to the quantum records they are compared
against; the vacuum floor is injected as an independent stream per
quadrature at the mode linewidth kappa/2.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.signal import lfilter

from .errors import NotPsdError, UnstableGainError, ValidationError
from .gaussian_core import (
    ModelParams,
    build_drift,
    solve_steady_lyapunov,
    symmetrize,
)
from .trajectory import (
    Scheme,
    SourceTag,
    TrajectoryConfig,
    TrajectoryRecord,
    derive_stream_seed,
    sample_exact_ou,
)

__all__ = [
    "NullKind",
    "NullModelSpec",
    "enforce_classicality",
    "gen_shared_noise",
    "gen_classical_paramp",
    "classical_paramp_covariance",
    "gen_optimized_mixture",
    "mixture_state",
    "matched_bandwidth",
    "matched_null_specs",
]

VACUUM = 0.5


class NullKind(str, enum.Enum):
    SHARED_NOISE = "SHARED_NOISE"
    CLASSICAL_PARAMP = "CLASSICAL_PARAMP"
    OPTIMIZED_MIXTURE = "OPTIMIZED_MIXTURE"


def matched_bandwidth(kappa: float) -> float:
    """Lorentzian half-width (cycles per unit time) of a mode of linewidth kappa."""
    return kappa / (4.0 * math.pi)


@dataclass(frozen=True)
class NullModelSpec:
    """Parameters of one classical dataset.

    target_bandwidth is the Lorentzian half-width of the classical
    fluctuations in cycles per unit time (use matched_bandwidth(kappa) to
    mimic a quantum mode); target_power is the per-channel variance of the
    classical part, i.e. the excess above the vacuum floor 1/2 per
    quadrature; correlation is the shared-source fraction; gain is the
    parametric drive rate for CLASSICAL_PARAMP, in the same units as kappa.
    """

    kind: NullKind
    target_bandwidth: float
    target_power: float
    correlation: float = 0.0
    gain: float = 0.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", NullKind(self.kind))
        for name in ("target_bandwidth", "target_power", "correlation", "gain"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v)):
                raise ValidationError(f"non-finite {name}={v!r}")
            object.__setattr__(self, name, float(v))
        object.__setattr__(self, "seed", int(self.seed))
        if self.target_bandwidth <= 0:
            raise ValidationError("target_bandwidth must be positive")
        if self.target_power <= 0:
            raise ValidationError("target_power must be positive")
        if not 0.0 <= self.correlation <= 1.0:
            raise ValidationError("correlation must lie in [0, 1]")
        if self.gain < 0:
            raise ValidationError("gain must be nonnegative")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "target_bandwidth": self.target_bandwidth,
            "target_power": self.target_power,
            "correlation": self.correlation,
            "gain": self.gain,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NullModelSpec":
        return cls(**d)


def enforce_classicality(V_cl: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Vacuum convolution of a positive-P state: V = V_cl + I/2.

    Requires V_cl >= 0; the result has every single-quadrature variance
    >= 1/2 and smallest PT symplectic eigenvalue >= 1/2.
    """
    V_cl = np.asarray(V_cl, dtype=float)
    if V_cl.shape != (4, 4):
        raise ValidationError("classical covariance must be 4x4")
    if np.max(np.abs(V_cl - V_cl.T)) > 1e-10 * max(1.0, np.max(np.abs(V_cl))):
        raise ValidationError("classical covariance must be symmetric")
    if np.min(np.linalg.eigvalsh(symmetrize(V_cl))) < -tol * max(1.0, np.max(np.abs(V_cl))):
        raise NotPsdError("classical covariance is not positive semidefinite")
    return symmetrize(V_cl) + VACUUM * np.eye(4)


def _streams(rates, variances, total: int, rng, dt: float) -> np.ndarray:
    """Stationary scalar OU streams, one column per (rate, variance) pair."""
    rates = np.asarray(rates, dtype=float)
    variances = np.asarray(variances, dtype=float)
    k = rates.size
    z = rng.standard_normal((total, k))
    out = np.empty((total, k))
    for j in range(k):
        f = math.exp(-rates[j] * dt)
        sigma = math.sqrt(max(variances[j], 0.0))
        drive = z[:, j].copy()
        drive[0] *= sigma
        if total > 1:
            drive[1:] *= sigma * math.sqrt(max(1.0 - f * f, 0.0))
        out[:, j] = lfilter([1.0], [1.0, -f], drive)
    return out


def _vacuum_part(kappa: float, total: int, rng, dt: float) -> np.ndarray:
    return _streams([kappa / 2.0] * 4, [VACUUM] * 4, total, rng, dt)


def _default_config(config: TrajectoryConfig | None) -> TrajectoryConfig:
    if config is None:
        return TrajectoryConfig(dt=0.05, n_steps=20000, scheme=Scheme.EXACT_OU)
    return config


def gen_shared_noise(
    spec: NullModelSpec,
    config: TrajectoryConfig | None = None,
    kappa: float = 1.0,
) -> TrajectoryRecord:
    """Null model A: shared Gaussian source, independently filtered channels.

    Each quadrature channel is sqrt(corr) * shared + sqrt(1-corr) * local,
    Lorentzian-filtered at the target bandwidth and scaled to the target
    power, then lifted by an independent vacuum stream per quadrature.
    """
    if spec.kind is not NullKind.SHARED_NOISE:
        raise ValidationError(f"spec kind {spec.kind} is not SHARED_NOISE")
    config = _default_config(config)
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    total = config.burn_in + config.n_steps
    gamma = 2.0 * math.pi * spec.target_bandwidth
    # six unit-variance classical streams: (shared, local_a, local_b) per quadrature
    cl = _streams([gamma] * 6, [1.0] * 6, total, rng, config.dt)
    vac = _vacuum_part(kappa, total, rng, config.dt)
    rho = spec.correlation
    amp = math.sqrt(spec.target_power)
    w_s, w_u = math.sqrt(rho), math.sqrt(1.0 - rho)
    samples = np.empty((total, 4))
    samples[:, 0] = amp * (w_s * cl[:, 0] + w_u * cl[:, 1])  # X_a
    samples[:, 2] = amp * (w_s * cl[:, 0] + w_u * cl[:, 2])  # X_b
    samples[:, 1] = amp * (w_s * cl[:, 3] + w_u * cl[:, 4])  # P_a
    samples[:, 3] = amp * (w_s * cl[:, 3] + w_u * cl[:, 5])  # P_b
    samples += vac
    samples = samples[config.burn_in :]
    meta = {
        "kappa": kappa,
        "null_kind": spec.kind.value,
        "burn_in": config.burn_in,
        "target_power": spec.target_power,
        "correlation": rho,
    }
    return TrajectoryRecord(
        samples=samples, dt=config.dt, source=SourceTag.NULL_A, seed=spec.seed, meta=meta
    )


def gen_classical_paramp(
    spec: NullModelSpec,
    config: TrajectoryConfig | None = None,
    kappa: float = 1.0,
) -> TrajectoryRecord:
    """Null model B: c-number analogue of the parametric-amplifier dynamics.

    Same drift as the two-mode-squeezing quantum model at the given gain,
    driven by purely classical noise (no vacuum term in the diffusion),
    then lifted by the vacuum floor.  Exhibits phase-sensitive
    cross-correlations while remaining positive-P by construction.
    """
    if spec.kind is not NullKind.CLASSICAL_PARAMP:
        raise ValidationError(f"spec kind {spec.kind} is not CLASSICAL_PARAMP")
    config = _default_config(config)
    g = spec.gain
    if 2.0 * g >= kappa:
        raise UnstableGainError(f"classical gain {g:g} at or beyond kappa/2 = {kappa / 2:g}")
    # classical occupancy reproducing the target per-quadrature power
    n_cl = spec.target_power * (kappa**2 - 4.0 * g**2) / kappa**2
    params = ModelParams(G=g, kappa_a=kappa, kappa_b=kappa, n_a=0.0, n_b=0.0)
    A = build_drift(params)
    D_cl = kappa * n_cl * np.eye(4)
    total = config.burn_in + config.n_steps
    if n_cl > 0:
        cl_cfg = TrajectoryConfig(
            dt=config.dt, n_steps=total, scheme=Scheme.EXACT_OU, master_seed=spec.seed
        )
        classical = sample_exact_ou(A, D_cl, cl_cfg).samples
    else:
        classical = np.zeros((total, 4))
    vac_rng = np.random.Generator(np.random.PCG64(derive_stream_seed(spec.seed, 1)))
    samples = classical + _vacuum_part(kappa, total, vac_rng, config.dt)
    samples = samples[config.burn_in :]
    meta = {
        "kappa": kappa,
        "null_kind": spec.kind.value,
        "burn_in": config.burn_in,
        "target_power": spec.target_power,
        "gain": g,
        "classical_occupancy": n_cl,
    }
    return TrajectoryRecord(
        samples=samples, dt=config.dt, source=SourceTag.NULL_B, seed=spec.seed, meta=meta
    )


def classical_paramp_covariance(spec: NullModelSpec, kappa: float = 1.0) -> np.ndarray:
    """Exact state of null model B (classical steady state plus vacuum)."""
    g = spec.gain
    if 2.0 * g >= kappa:
        raise UnstableGainError("classical gain at or beyond kappa/2")
    n_cl = spec.target_power * (kappa**2 - 4.0 * g**2) / kappa**2
    params = ModelParams(G=g, kappa_a=kappa, kappa_b=kappa, n_a=0.0, n_b=0.0)
    A = build_drift(params)
    V_cl = solve_steady_lyapunov(A, kappa * n_cl * np.eye(4)) if n_cl > 0 else np.zeros((4, 4))
    return enforce_classicality(V_cl)


# ---------------------------------------------------------------------------
# Null model C: optimally filtered and linearly mixed classical signals.

def mixture_state(M_X, M_P, source_vars, target_power: float):
    """Classical mixture covariance, per-channel power normalized, plus vacuum.

    Two independent classical complex sources with variances source_vars are
    mixed by real 2x2 matrices M_X (X quadratures) and M_P (P quadratures);
    each channel row pair is rescaled so the mean of its X and P classical
    variances equals target_power.  Returns (V, M_X_scaled, M_P_scaled) or
    None when a channel row carries no power.
    """
    M_X = np.asarray(M_X, dtype=float).reshape(2, 2)
    M_P = np.asarray(M_P, dtype=float).reshape(2, 2)
    S = np.diag(np.asarray(source_vars, dtype=float))
    BX = M_X @ S @ M_X.T
    BP = M_P @ S @ M_P.T
    scales = np.empty(2)
    for i in range(2):
        var_i = 0.5 * (BX[i, i] + BP[i, i])
        if var_i < 1e-12:
            return None
        scales[i] = math.sqrt(target_power / var_i)
    M_Xs = M_X * scales[:, None]
    M_Ps = M_P * scales[:, None]
    BX = M_Xs @ S @ M_Xs.T
    BP = M_Ps @ S @ M_Ps.T
    V_cl = np.zeros((4, 4))
    V_cl[0, 0], V_cl[2, 2], V_cl[0, 2] = BX[0, 0], BX[1, 1], BX[0, 1]
    V_cl[2, 0] = BX[0, 1]
    V_cl[1, 1], V_cl[3, 3], V_cl[1, 3] = BP[0, 0], BP[1, 1], BP[0, 1]
    V_cl[3, 1] = BP[0, 1]
    return enforce_classicality(V_cl), M_Xs, M_Ps


_PENALTY = 1e6


def _mixture_objective(theta, target_power, which):
    from .entanglement import _duan_raw, _nu_minus_raw

    lg = np.clip(theta[:2], -5.0, 5.0)
    out = mixture_state(theta[2:6], theta[6:10], np.exp(2.0 * lg), target_power)
    if out is None:
        return _PENALTY + float(np.sum(theta**2))
    V = out[0]
    return _duan_raw(V) if which == "duan" else _nu_minus_raw(V)


def gen_optimized_mixture(
    spec: NullModelSpec,
    objective: str = "duan",
    config: TrajectoryConfig | None = None,
    kappa: float = 1.0,
    restarts: int = 20,
    max_evals: int = 5000,
):
    """Null model C: search filter gains and mixing to minimize the witness.

    Derivative-free direct search (Nelder-Mead) over two source log-gains
    and the two real 2x2 mixing matrices, with seeded random restarts;
    classicality (vacuum floor) and per-channel power are enforced inside
    the objective, so the achieved Duan sum can approach but never beat 2.
    Returns (record, report) where report is the exact witness of the
    optimized state; optimizer metadata lands in record.meta["optimizer"].
    """
    if spec.kind is not NullKind.OPTIMIZED_MIXTURE:
        raise ValidationError(f"spec kind {spec.kind} is not OPTIMIZED_MIXTURE")
    if objective not in ("duan", "nu_minus"):
        raise ValidationError("objective must be 'duan' or 'nu_minus'")
    if restarts < 1 or max_evals < 10:
        raise ValidationError("need restarts >= 1 and max_evals >= 10")
    config = _default_config(config)

    best = None
    converged = False
    for r in range(restarts):
        rng = np.random.Generator(np.random.PCG64(derive_stream_seed(spec.seed, 100 + r)))
        x0 = rng.standard_normal(10)
        res = minimize(
            _mixture_objective,
            x0,
            args=(spec.target_power, objective),
            method="Nelder-Mead",
            options={"maxfev": max_evals, "xatol": 1e-8, "fatol": 1e-12},
        )
        converged = converged or bool(res.success)
        if best is None or res.fun < best.fun:
            best = res
    lg = np.clip(best.x[:2], -5.0, 5.0)
    source_vars = np.exp(2.0 * lg)
    V, M_Xs, M_Ps = mixture_state(best.x[2:6], best.x[6:10], source_vars, spec.target_power)

    # realize the optimized state as a time series: four classical source
    # streams (x1, x2, p1, p2) plus the four vacuum streams
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    total = config.burn_in + config.n_steps
    gamma = 2.0 * math.pi * spec.target_bandwidth
    src = _streams(
        [gamma] * 4,
        [source_vars[0], source_vars[1], source_vars[0], source_vars[1]],
        total,
        rng,
        config.dt,
    )
    vac = _vacuum_part(kappa, total, rng, config.dt)
    samples = np.empty((total, 4))
    samples[:, 0] = src[:, :2] @ M_Xs[0]
    samples[:, 2] = src[:, :2] @ M_Xs[1]
    samples[:, 1] = src[:, 2:] @ M_Ps[0]
    samples[:, 3] = src[:, 2:] @ M_Ps[1]
    samples += vac
    samples = samples[config.burn_in :]

    from .entanglement import witness_report_from_covariance

    report = witness_report_from_covariance(V)
    meta = {
        "kappa": kappa,
        "null_kind": spec.kind.value,
        "burn_in": config.burn_in,
        "target_power": spec.target_power,
        "optimizer": {
            "objective": objective,
            "achieved": float(best.fun),
            "converged": converged,
            "restarts": restarts,
            "max_evals": max_evals,
        },
    }
    record = TrajectoryRecord(
        samples=samples, dt=config.dt, source=SourceTag.NULL_C, seed=spec.seed, meta=meta
    )
    return record, report


def matched_null_specs(
    V_quantum: np.ndarray,
    kappa: float = 1.0,
    seed: int = 0,
    correlation: float = 0.7,
    gain: float | None = None,
) -> dict[NullKind, NullModelSpec]:
    """One spec per null model, power- and bandwidth-matched to a quantum state."""
    V_quantum = np.asarray(V_quantum, dtype=float)
    power = float(np.mean(np.diag(V_quantum))) - VACUUM
    if power <= 0:
        raise ValidationError("quantum state has no excess power to match")
    bw = matched_bandwidth(kappa)
    if gain is None:
        gain = 0.25 * kappa
    return {
        NullKind.SHARED_NOISE: NullModelSpec(
            kind=NullKind.SHARED_NOISE,
            target_bandwidth=bw,
            target_power=power,
            correlation=correlation,
            seed=derive_stream_seed(seed, 11),
        ),
        NullKind.CLASSICAL_PARAMP: NullModelSpec(
            kind=NullKind.CLASSICAL_PARAMP,
            target_bandwidth=bw,
            target_power=power,
            gain=gain,
            seed=derive_stream_seed(seed, 12),
        ),
        NullKind.OPTIMIZED_MIXTURE: NullModelSpec(
            kind=NullKind.OPTIMIZED_MIXTURE,
            target_bandwidth=bw,
            target_power=power,
            seed=derive_stream_seed(seed, 13),
        ),
    }
