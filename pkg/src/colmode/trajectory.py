"""Stochastic quadrature time series from the linear Langevin dynamics.

The primary scheme is the exact Ornstein-Uhlenbeck discretization

    R_{k+1} = F R_k + w_k,  F = e^{A dt},  w_k ~ N(0, Q),
    Q = Vinf - F Vinf F^T,

which is statistically exact for any step size; Euler-Maruyama is kept as a
cross-validation scheme.  Every trajectory owns an independent RNG stream
(numpy PCG64) whose seed is derived deterministically from a master seed, so
ensembles are reproducible sample-for-sample regardless of scheduling.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg
from scipy.signal import lfilter

from .errors import StepTooLargeError, UnstableDriftError, ValidationError
from .gaussian_core import is_stable, solve_steady_lyapunov, symmetrize

__all__ = [
    "Scheme",
    "SourceTag",
    "TrajectoryConfig",
    "TrajectoryRecord",
    "derive_stream_seed",
    "sample_exact_ou",
    "sample_euler_maruyama",
    "sample_ensemble",
    "save_record_csv",
    "load_record_csv",
]

RNG_ALGORITHM = "pcg64"

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


class Scheme(str, enum.Enum):
    EXACT_OU = "EXACT_OU"
    EULER_MARUYAMA = "EULER_MARUYAMA"


class SourceTag(str, enum.Enum):
    QUANTUM = "QUANTUM"
    NULL_A = "NULL_A"
    NULL_B = "NULL_B"
    NULL_C = "NULL_C"


def _splitmix64(x: int) -> int:
    """One round of the splitmix64 avalanche; a bijection on 64-bit ints."""
    x = (x + _GOLDEN) & _MASK64
    x ^= x >> 30
    x = (x * 0xBF58476D1CE4E5B9) & _MASK64
    x ^= x >> 27
    x = (x * 0x94D049BB133111EB) & _MASK64
    x ^= x >> 31
    return x


def derive_stream_seed(master_seed: int, task_index: int) -> int:
    """Collision-resistant deterministic seed for stream task_index.

    Pure 64-bit integer mixing (two splitmix64 rounds), identical on every
    platform.  For a fixed master seed the map index -> seed is injective,
    so consecutive task indices can never collide.
    """
    base = _splitmix64(int(master_seed) & _MASK64)
    return _splitmix64((base + (int(task_index) & _MASK64) * _GOLDEN) & _MASK64)


@dataclass(frozen=True)
class TrajectoryConfig:
    """Sampling plan: step dt (units 1/kappa), record length, scheme, seeding."""

    dt: float
    n_steps: int
    scheme: Scheme = Scheme.EXACT_OU
    master_seed: int = 0
    burn_in: int = 0

    def __post_init__(self):
        if not (isinstance(self.dt, (int, float)) and math.isfinite(self.dt) and self.dt > 0):
            raise ValidationError(f"dt must be positive and finite, got {self.dt!r}")
        if int(self.n_steps) <= 0:
            raise ValidationError("n_steps must be positive")
        if int(self.burn_in) < 0:
            raise ValidationError("burn_in must be nonnegative")
        object.__setattr__(self, "dt", float(self.dt))
        object.__setattr__(self, "n_steps", int(self.n_steps))
        object.__setattr__(self, "burn_in", int(self.burn_in))
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        object.__setattr__(self, "master_seed", int(self.master_seed))

    def to_dict(self) -> dict:
        return {
            "dt": self.dt,
            "n_steps": self.n_steps,
            "scheme": self.scheme.value,
            "master_seed": self.master_seed,
            "burn_in": self.burn_in,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrajectoryConfig":
        return cls(**d)


@dataclass
class TrajectoryRecord:
    """Sampled quadratures (n_steps, 4) at uniform dt, with provenance."""

    samples: np.ndarray
    dt: float
    source: SourceTag
    seed: int
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        if self.samples.ndim != 2 or self.samples.shape[1] != 4:
            raise ValidationError("samples must have shape (n_steps, 4)")
        if not np.all(np.isfinite(self.samples)):
            raise ValidationError("trajectory contains non-finite samples")
        self.source = SourceTag(self.source)
        self.meta = dict(self.meta)
        self.meta.setdefault("rng", RNG_ALGORITHM)

    @property
    def n_steps(self) -> int:
        return self.samples.shape[0]

    @property
    def duration(self) -> float:
        return self.n_steps * self.dt

    def times(self) -> np.ndarray:
        return np.arange(self.n_steps) * self.dt


def _psd_factor(Q: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """L with L L^T = Q for symmetric PSD Q, tolerant of tiny negative eigs."""
    Q = symmetrize(np.asarray(Q, dtype=float))
    w, U = np.linalg.eigh(Q)
    floor = -tol * max(1.0, float(np.max(np.abs(w))))
    if np.min(w) < floor:
        raise ValidationError(f"matrix is not PSD (min eigenvalue {np.min(w):.3e})")
    return U * np.sqrt(np.clip(w, 0.0, None))


def _ar1_path(F: np.ndarray, r0: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Iterate R_{k+1} = F R_k + w_k; returns (len(w)+1, 4) including R_0.

    Long paths are computed channel-wise in the eigenbasis of F with a
    C-level IIR filter; short paths (or ill-conditioned eigenbases) use the
    plain loop.  The branch depends only on the input sizes and F itself,
    so identical inputs always take identical code paths.
    """
    n = w.shape[0]
    total = n + 1
    use_fast = total >= 256
    if use_fast:
        lam, P = np.linalg.eig(F)
        if np.linalg.cond(P) > 1e8:
            use_fast = False
    if not use_fast:
        out = np.empty((total, 4))
        out[0] = r0
        r = r0
        for k in range(n):
            r = F @ r + w[k]
            out[k + 1] = r
        return out
    # x feeds y_k = lam y_{k-1} + x_k with x_0 = y_0 (zero initial filter state)
    x = np.empty((total, 4), dtype=complex)
    u0 = np.linalg.solve(P, r0.astype(complex))
    x[0] = u0
    x[1:] = np.linalg.solve(P, w.T.astype(complex)).T
    y = np.empty_like(x)
    for j in range(4):
        y[:, j] = lfilter([1.0], [1.0, -lam[j]], x[:, j])
    return (y @ P.T).real


def _steady_prep(A: np.ndarray, D: np.ndarray, dt: float):
    """Shared precomputation for exact-OU sampling: (F, Lq, Linf, Vinf)."""
    A = np.asarray(A, dtype=float)
    D = np.asarray(D, dtype=float)
    if not is_stable(A):
        raise UnstableDriftError("exact OU sampling requires a Hurwitz drift")
    Vinf = solve_steady_lyapunov(A, D)
    F = scipy.linalg.expm(A * dt)
    Q = symmetrize(Vinf - F @ Vinf @ F.T)
    return F, _psd_factor(Q), _psd_factor(Vinf), Vinf


def _draw_path(F, Lnoise, Linf, config: TrajectoryConfig, seed: int, r0=None) -> np.ndarray:
    """One stream: R_0 explicit, or Linf-distributed, or the origin."""
    rng = np.random.Generator(np.random.PCG64(seed))
    total = config.burn_in + config.n_steps
    if r0 is None:
        r0 = Linf @ rng.standard_normal(4) if Linf is not None else np.zeros(4)
    z = rng.standard_normal((total - 1, 4)) if total > 1 else np.empty((0, 4))
    w = z @ Lnoise.T
    path = _ar1_path(F, r0, w)
    return path[config.burn_in :]


def sample_exact_ou(
    A: np.ndarray,
    D: np.ndarray,
    config: TrajectoryConfig,
    source: SourceTag = SourceTag.QUANTUM,
    meta: dict | None = None,
) -> TrajectoryRecord:
    """Stationary trajectory with exact one-step statistics at any dt.

    R_0 is drawn from the steady-state Gaussian, so every sample is
    marginally steady-state distributed and burn_in only discards samples.
    """
    if config.scheme is not Scheme.EXACT_OU:
        config = replace(config, scheme=Scheme.EXACT_OU)
    F, Lq, Linf, _ = _steady_prep(A, D, config.dt)
    seed = config.master_seed
    samples = _draw_path(F, Lq, Linf, config, seed)
    m = {"scheme": Scheme.EXACT_OU.value, "burn_in": config.burn_in}
    if meta:
        m.update(meta)
    return TrajectoryRecord(samples=samples, dt=config.dt, source=source, seed=seed, meta=m)


def sample_euler_maruyama(
    A: np.ndarray,
    D: np.ndarray,
    config: TrajectoryConfig,
    source: SourceTag = SourceTag.QUANTUM,
    r0: np.ndarray | None = None,
    meta: dict | None = None,
) -> TrajectoryRecord:
    """First-order scheme R_{k+1} = R_k + A R_k dt + sqrt(dt) L z_k, L L^T = D.

    Guarded by dt <= 0.1 / max|eig A|.  By default R_0 is a steady-state draw
    when the drift is stable and D is nonzero, else the origin; pass r0 to
    override (e.g. for decay tests).  Noise streams are not sample-compatible
    with the exact scheme even at the same seed.
    """
    if config.scheme is not Scheme.EULER_MARUYAMA:
        config = replace(config, scheme=Scheme.EULER_MARUYAMA)
    A = np.asarray(A, dtype=float)
    D = np.asarray(D, dtype=float)
    rate = float(np.max(np.abs(np.linalg.eigvals(A))))
    if rate > 0 and config.dt > 0.1 / rate:
        raise StepTooLargeError(
            f"dt = {config.dt:g} exceeds accuracy guard 0.1/max|eig A| = {0.1 / rate:g}"
        )
    F = np.eye(4) + A * config.dt
    Lnoise = math.sqrt(config.dt) * _psd_factor(D)
    Linf = None
    if r0 is not None:
        r0 = np.asarray(r0, dtype=float)
        if r0.shape != (4,):
            raise ValidationError("r0 must be a 4-vector")
    elif is_stable(A) and np.max(np.abs(D)) > 0:
        Linf = _psd_factor(solve_steady_lyapunov(A, D))
    seed = config.master_seed
    samples = _draw_path(F, Lnoise, Linf, config, seed, r0=r0)
    m = {"scheme": Scheme.EULER_MARUYAMA.value, "burn_in": config.burn_in}
    if meta:
        m.update(meta)
    return TrajectoryRecord(samples=samples, dt=config.dt, source=source, seed=seed, meta=m)


def sample_ensemble(
    A: np.ndarray,
    D: np.ndarray,
    config: TrajectoryConfig,
    n_members: int,
    source: SourceTag = SourceTag.QUANTUM,
    meta: dict | None = None,
) -> list[TrajectoryRecord]:
    """n_members independent exact-OU trajectories.

    Member k uses the stream seed derive_stream_seed(master_seed, k); the
    per-member samples depend only on (A, D, config, k), never on execution
    order, so parallel and sequential runs agree sample-for-sample.
    """
    if n_members <= 0:
        raise ValidationError("ensemble size must be positive")
    F, Lq, Linf, _ = _steady_prep(A, D, config.dt)
    base_meta = {"scheme": Scheme.EXACT_OU.value, "burn_in": config.burn_in}
    if meta:
        base_meta.update(meta)
    records = []
    for k in range(n_members):
        seed = derive_stream_seed(config.master_seed, k)
        samples = _draw_path(F, Lq, Linf, config, seed)
        records.append(
            TrajectoryRecord(
                samples=samples,
                dt=config.dt,
                source=source,
                seed=seed,
                meta=dict(base_meta, member=k),
            )
        )
    return records


# ---------------------------------------------------------------------------
# Persistence: CSV with commented header metadata (timestamp-free, so a rerun
# with the same config and seed is byte-identical).

_META_KEYS = ("scheme", "kappa", "params_hash", "burn_in", "rng", "manifest", "member")


def save_record_csv(record: TrajectoryRecord, path) -> None:
    lines = ["# colmode-record v1"]
    fields = {
        "source": record.source.value,
        "seed": record.seed,
        "dt": repr(record.dt),
    }
    for key in _META_KEYS:
        if key in record.meta:
            fields[key] = record.meta[key]
    lines.append("# " + " ".join(f"{k}={v}" for k, v in fields.items()))
    lines.append("t,X_a,P_a,X_b,P_b")
    dt = record.dt
    for k, row in enumerate(record.samples):
        lines.append(
            ",".join(
                [
                    repr(k * dt),
                    repr(float(row[0])),
                    repr(float(row[1])),
                    repr(float(row[2])),
                    repr(float(row[3])),
                ]
            )
        )
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_record_csv(path) -> TrajectoryRecord:
    meta: dict = {}
    source = SourceTag.QUANTUM
    seed = 0
    dt = None
    data = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                for token in line[1:].split():
                    if "=" not in token:
                        continue
                    k, v = token.split("=", 1)
                    if k == "source":
                        source = SourceTag(v)
                    elif k == "seed":
                        seed = int(v)
                    elif k == "dt":
                        dt = float(v)
                    elif k in ("burn_in", "member"):
                        meta[k] = int(v)
                    elif k == "kappa":
                        meta[k] = float(v)
                    else:
                        meta[k] = v
                continue
            if line.startswith("t,"):
                continue
            data.append([float(x) for x in line.split(",")])
    arr = np.asarray(data, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 5:
        raise ValidationError(f"malformed record file {path}")
    if dt is None:
        dt = float(arr[1, 0] - arr[0, 0]) if arr.shape[0] > 1 else 1.0
    return TrajectoryRecord(samples=arr[:, 1:], dt=dt, source=source, seed=seed, meta=meta)
