"""The single analysis path applied identically to every dataset.

Records are band-limited, demodulated into the rotating frame, segmented,
and reduced to an empirical covariance matrix from which both witnesses are
computed.  There is no branching on the record's provenance tag anywhere in
this module: quantum and classical null datasets flow through literally the
same code.

Estimator.  The default segment statistic is the per-segment second-moment
matrix S_i = mean_k R_k R_k^T over segment i (records are zero-mean by
construction).  Averaging the S_i gives an estimate of V that is unbiased
for any stationary record regardless of its spectral composition, which
matters because null-model records mix classical and vacuum correlation
times; segment-level bootstrap resampling supplies the uncertainties, with
each segment of length T at bandwidth B carrying N_eff = T * B effective
samples.  The alternative "mean" statistic (per-segment quadrature means,
rescaled by the known Ornstein-Uhlenbeck segment-averaging attenuation
factor at the record's linewidth) is also provided; it is exact only for
single-rate records and is kept for cross-checks, with the applied factor
reported rather than hidden.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import filtfilt

from .errors import (
    BandwidthExceedsNyquistError,
    InsufficientEnsembleError,
    TooFewSegmentsError,
    ValidationError,
)
from .entanglement import (
    WitnessReport,
    _duan_raw,
    _nu_minus_raw,
    make_report,
)
from .gaussian_core import closed_form_dynamics, symmetrize
from .trajectory import (
    TrajectoryConfig,
    TrajectoryRecord,
    derive_stream_seed,
    sample_ensemble,
)

__all__ = [
    "PipelineConfig",
    "EstimatedCovariance",
    "bandlimit",
    "demodulate",
    "estimate_covariance",
    "witness_from_estimate",
    "witness_with_uncertainty",
    "analyze_record",
    "convergence_sweep",
    "crossing_scan",
]

_BOOT_STREAM = 0xBEEF


@dataclass(frozen=True)
class PipelineConfig:
    """Fixed-before-data analysis settings.

    bandwidth and demod_frequency are in cycles per unit time of the record;
    integration_time is the segment length in the same time units.  The
    product integration_time * bandwidth is the effective number of
    independent samples per segment and must be >= 1.
    """

    bandwidth: float
    integration_time: float
    demod_frequency: float = 0.0
    bootstrap_resamples: int = 1000
    segment_statistic: str = "second_moment"

    def __post_init__(self):
        for name in ("bandwidth", "integration_time", "demod_frequency"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v)):
                raise ValidationError(f"non-finite {name}={v!r}")
            object.__setattr__(self, name, float(v))
        object.__setattr__(self, "bootstrap_resamples", int(self.bootstrap_resamples))
        if self.bandwidth <= 0:
            raise ValidationError("bandwidth must be positive")
        if self.integration_time <= 0:
            raise ValidationError("integration_time must be positive")
        if self.integration_time * self.bandwidth < 1.0:
            raise ValidationError("need integration_time * bandwidth >= 1")
        if self.bootstrap_resamples < 0:
            raise ValidationError("bootstrap_resamples must be >= 0")
        if self.segment_statistic not in ("second_moment", "mean"):
            raise ValidationError("segment_statistic must be 'second_moment' or 'mean'")

    def to_dict(self) -> dict:
        return {
            "bandwidth": self.bandwidth,
            "integration_time": self.integration_time,
            "demod_frequency": self.demod_frequency,
            "bootstrap_resamples": self.bootstrap_resamples,
            "segment_statistic": self.segment_statistic,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        return cls(**d)

    def digest(self) -> str:
        return hashlib.sha256(
            json.dumps(self.to_dict(), sort_keys=True).encode()
        ).hexdigest()[:12]


@dataclass
class EstimatedCovariance:
    """Empirical covariance with segment-level resampling information.

    calibration is the accumulated vacuum-reference transfer of any applied
    band-limit filters (already divided out of V_hat and stderr);
    attenuation is the segment-averaging factor of the "mean" statistic
    (1.0 for second moments).  Both are reported, never hidden.
    """

    V_hat: np.ndarray
    n_segments: int
    n_eff: float
    stderr: np.ndarray
    attenuation: float
    calibration: float
    statistic: str
    segment_stats: np.ndarray
    record_seed: int
    source: str
    config_hash: str
    meta: dict = field(default_factory=dict)


def filter_pole_coefficient(B: float, dt: float) -> float:
    """AR(1) pole of the single-pass low-pass whose two-pass -3 dB point is B/2."""
    fc = (B / 2.0) / math.sqrt(math.sqrt(2.0) - 1.0)
    return math.exp(-2.0 * math.pi * fc * dt)


def vacuum_transfer(B: float, dt: float, kappa: float, n_grid: int = 4096) -> float:
    """Variance transfer of the band-limit filter on the vacuum reference.

    Ratio of filtered to unfiltered variance for a sampled Lorentzian
    process at the mode linewidth (amplitude decay kappa/2), computed from
    the discrete AR(1) spectrum and the zero-phase filter's power response.
    Dividing estimated covariances by this factor restores the vacuum floor
    to exactly 1/2, i.e. the usual shot-noise normalization; it is exact for
    records whose every component shares the mode linewidth, and it keeps
    classical records classical (the rescaled state is still a PSD matrix
    plus the vacuum floor), so the bounds cannot be crossed by filtering.
    """
    r = math.exp(-0.5 * kappa * dt)
    a = filter_pole_coefficient(B, dt)
    w = np.linspace(0.0, math.pi, n_grid)
    cw = np.cos(w)
    spec = (1.0 - r * r) / (1.0 - 2.0 * r * cw + r * r)
    gain = ((1.0 - a) ** 2 / (1.0 - 2.0 * a * cw + a * a)) ** 2
    return float(np.trapezoid(spec * gain, w) / np.trapezoid(spec, w))


def bandlimit(record: TrajectoryRecord, B: float) -> TrajectoryRecord:
    """Zero-phase low-pass with -3 dB point at B/2 (cycles per unit time).

    A single-pole filter run forward and backward; length preserving.  Not
    idempotent: filtering twice cascades the transfer function.  The
    vacuum-reference variance transfer of the applied filter accumulates in
    the record metadata so covariance estimates can be calibrated.
    """
    if not (isinstance(B, (int, float)) and math.isfinite(B) and B > 0):
        raise ValidationError(f"bandwidth must be positive and finite, got {B!r}")
    nyquist = 1.0 / (2.0 * record.dt)
    if B > nyquist:
        raise BandwidthExceedsNyquistError(
            f"bandwidth {B:g} exceeds record Nyquist {nyquist:g}"
        )
    a = filter_pole_coefficient(B, record.dt)
    n = record.n_steps
    tau = -1.0 / math.log(a) if a > 0 else 1.0
    padlen = int(min(n - 1, max(6, 10.0 * tau)))
    filtered = filtfilt([1.0 - a], [1.0, -a], record.samples, axis=0, padlen=padlen)
    meta = dict(record.meta)
    meta["bandlimit"] = meta.get("bandlimit", []) + [float(B)]
    kappa = float(meta.get("kappa", 1.0))
    meta["bandlimit_cal"] = meta.get("bandlimit_cal", 1.0) * vacuum_transfer(B, record.dt, kappa)
    return TrajectoryRecord(
        samples=filtered, dt=record.dt, source=record.source, seed=record.seed, meta=meta
    )


def demodulate(record: TrajectoryRecord, f0: float) -> TrajectoryRecord:
    """Rotate each mode's (X, P) pair by the angle -2 pi f0 t.

    f0 = 0 is the exact identity; simulator output is already in the
    rotating frame.
    """
    if not (isinstance(f0, (int, float)) and math.isfinite(f0)):
        raise ValidationError(f"demodulation frequency must be finite, got {f0!r}")
    if f0 == 0.0:
        return record
    theta = -2.0 * math.pi * f0 * record.times()
    c, s = np.cos(theta), np.sin(theta)
    X = record.samples
    out = np.empty_like(X)
    out[:, 0] = c * X[:, 0] - s * X[:, 1]
    out[:, 1] = s * X[:, 0] + c * X[:, 1]
    out[:, 2] = c * X[:, 2] - s * X[:, 3]
    out[:, 3] = s * X[:, 2] + c * X[:, 3]
    meta = dict(record.meta)
    meta["demod"] = meta.get("demod", 0.0) + float(f0)
    return TrajectoryRecord(
        samples=out, dt=record.dt, source=record.source, seed=record.seed, meta=meta
    )


def _ou_mean_attenuation(gamma: float, dt: float, m: int) -> float:
    """Variance attenuation of an m-sample segment mean of an OU process.

    c = (1/m^2) sum_{k,l} r^|k-l| with r = exp(-gamma dt); the segment-mean
    covariance of a single-rate record is c times its true covariance.
    """
    r = math.exp(-gamma * dt)
    if m == 1:
        return 1.0
    j = np.arange(1, m)
    return float(1.0 / m + (2.0 / m**2) * np.sum((m - j) * r**j))


def estimate_covariance(record: TrajectoryRecord, config: PipelineConfig) -> EstimatedCovariance:
    """Segmented covariance estimate with bootstrap uncertainties.

    The record is split into floor(duration / T) non-overlapping segments of
    length T = config.integration_time.  Each segment contributes one
    statistic (second-moment matrix by default); their average is the
    covariance estimate and segment-level bootstrap resampling gives the
    per-entry standard errors.  N_eff = T * B is reported alongside.
    """
    dt = record.dt
    m = int(round(config.integration_time / dt))
    if m < 1:
        raise ValidationError("integration_time shorter than one sample")
    n_seg = record.n_steps // m
    if n_seg < 2:
        raise TooFewSegmentsError(
            f"record holds {record.n_steps} samples, need >= 2 segments of {m}"
        )
    X = record.samples[: n_seg * m].reshape(n_seg, m, 4)
    cal = float(record.meta.get("bandlimit_cal", 1.0))

    if config.segment_statistic == "second_moment":
        stats = np.einsum("smi,smj->sij", X, X) / m
        V_hat = symmetrize(stats.mean(axis=0)) / cal
        atten = 1.0
    else:
        stats = X.mean(axis=1)
        kappa = float(record.meta.get("kappa", 1.0))
        atten = _ou_mean_attenuation(kappa / 2.0, dt, m)
        V_hat = symmetrize(np.cov(stats.T, ddof=1)) / (atten * cal)

    resamples = config.bootstrap_resamples
    if resamples > 0:
        rng = np.random.Generator(
            np.random.PCG64(derive_stream_seed(record.seed, _BOOT_STREAM))
        )
        idx = rng.integers(0, n_seg, size=(resamples, n_seg))
        if config.segment_statistic == "second_moment":
            boot = stats[idx].mean(axis=1) / cal
        else:
            boot = np.empty((resamples, 4, 4))
            for b in range(resamples):
                boot[b] = np.cov(stats[idx[b]].T, ddof=1) / (atten * cal)
        stderr = boot.std(axis=0, ddof=1)
    else:
        stderr = np.zeros((4, 4))

    return EstimatedCovariance(
        V_hat=V_hat,
        n_segments=int(n_seg),
        n_eff=config.integration_time * config.bandwidth,
        stderr=stderr,
        attenuation=atten,
        calibration=cal,
        statistic=config.segment_statistic,
        segment_stats=stats,
        record_seed=record.seed,
        source=record.source.value,
        config_hash=config.digest(),
        meta={"dt": dt, "samples_per_segment": m},
    )


def _witness_raw(V: np.ndarray) -> tuple[float, float]:
    """Tolerant witness pair for bootstrap replicates (no PD validation)."""
    return _nu_minus_raw(V), _duan_raw(V)


def _bootstrap_covariances(est: EstimatedCovariance, resamples: int) -> np.ndarray:
    rng = np.random.Generator(
        np.random.PCG64(derive_stream_seed(est.record_seed, _BOOT_STREAM))
    )
    n_seg = est.n_segments
    idx = rng.integers(0, n_seg, size=(resamples, n_seg))
    if est.statistic == "second_moment":
        return est.segment_stats[idx].mean(axis=1) / est.calibration
    boot = np.empty((resamples, 4, 4))
    for b in range(resamples):
        boot[b] = np.cov(est.segment_stats[idx[b]].T, ddof=1) / (
            est.attenuation * est.calibration
        )
    return boot


def witness_from_estimate(est: EstimatedCovariance, resamples: int | None = None) -> WitnessReport:
    """Witness pair for one estimate, with segment-bootstrap standard errors."""
    nu, duan = _witness_raw(symmetrize(est.V_hat))
    r = est.meta.get("bootstrap_resamples") if resamples is None else resamples
    if r is None:
        r = 1000
    if r > 0 and est.n_segments >= 2:
        boot = _bootstrap_covariances(est, int(r))
        vals = np.array([_witness_raw(symmetrize(Vb)) for Vb in boot])
        stderr_nu = float(vals[:, 0].std(ddof=1))
        stderr_duan = float(vals[:, 1].std(ddof=1))
    else:
        stderr_nu = stderr_duan = 0.0
    return make_report(nu, duan, stderr_nu, stderr_duan)


def witness_with_uncertainty(estimates) -> WitnessReport:
    """Ensemble witness: mean and standard error over independent estimates."""
    estimates = list(estimates)
    if len(estimates) < 2:
        raise InsufficientEnsembleError("need at least two independent estimates")
    vals = np.array([_witness_raw(symmetrize(e.V_hat)) for e in estimates])
    m = len(estimates)
    nu_mean, duan_mean = vals.mean(axis=0)
    nu_se = float(vals[:, 0].std(ddof=1)) / math.sqrt(m)
    duan_se = float(vals[:, 1].std(ddof=1)) / math.sqrt(m)
    return make_report(nu_mean, duan_mean, nu_se, duan_se)


def analyze_record(record: TrajectoryRecord, config: PipelineConfig) -> EstimatedCovariance:
    """The shared entry point: band-limit, demodulate, estimate.

    Applied identically to every record; nothing in this path inspects the
    record's provenance tag.
    """
    processed = bandlimit(record, config.bandwidth)
    processed = demodulate(processed, config.demod_frequency)
    est = estimate_covariance(processed, config)
    est.meta["bootstrap_resamples"] = config.bootstrap_resamples
    return est


def _cell_dt(B: float) -> float:
    return min(0.1, 1.0 / (8.0 * B))


def convergence_sweep(
    A: np.ndarray,
    D: np.ndarray,
    cells,
    runs_per_cell: int = 16,
    segments_per_record: int = 24,
    master_seed: int = 0,
    bootstrap_resamples: int = 0,
    segment_statistic: str = "second_moment",
) -> dict:
    """Witness mean and standard error versus N_eff = T * B.

    For each (T, B) cell, fresh trajectories are generated, pushed through
    the pipeline, and reduced to the ensemble witness; the fitted slope of
    log(stderr) against log(N_eff) is returned along with the per-cell rows.
    With the number of runs and segments held fixed across cells, the
    standard error scales as N_eff^(-1/2).
    """
    if runs_per_cell < 2:
        raise ValidationError("runs_per_cell must be >= 2")
    rows = []
    for i, (T, B) in enumerate(cells):
        dt = _cell_dt(B)
        m = int(round(T / dt))
        if m < 4:
            raise ValidationError(f"cell (T={T}, B={B}) has fewer than 4 samples per segment")
        cfg = TrajectoryConfig(
            dt=dt,
            n_steps=segments_per_record * m,
            master_seed=derive_stream_seed(master_seed, 1000 + i),
        )
        pconf = PipelineConfig(
            bandwidth=B,
            integration_time=T,
            bootstrap_resamples=bootstrap_resamples,
            segment_statistic=segment_statistic,
        )
        ests = [analyze_record(r, pconf) for r in sample_ensemble(A, D, cfg, runs_per_cell)]
        rep = witness_with_uncertainty(ests)
        rows.append(
            {
                "T": float(T),
                "B": float(B),
                "n_eff": float(T) * float(B),
                "nu_mean": rep.nu_minus,
                "nu_stderr": rep.stderr_nu,
                "duan_mean": rep.duan_sum,
                "duan_stderr": rep.stderr_duan,
                "n_runs": runs_per_cell,
            }
        )
    log_neff = np.log([r["n_eff"] for r in rows])
    slope_nu = float(np.polyfit(log_neff, np.log([r["nu_stderr"] for r in rows]), 1)[0])
    slope_duan = float(np.polyfit(log_neff, np.log([r["duan_stderr"] for r in rows]), 1)[0])
    return {"rows": rows, "slope_nu": slope_nu, "slope_duan": slope_duan}


def crossing_scan(
    kappa: float,
    n: float,
    g_values,
    cells,
    runs_per_cell: int = 12,
    segments_per_record: int = 24,
    master_seed: int = 0,
    segment_statistic: str = "second_moment",
) -> list[dict]:
    """Estimated location of the separability threshold for each (T, B) cell.

    Scans the coupling ratio g = G/kappa across the boundary, estimates the
    ensemble-mean smallest PT symplectic eigenvalue per grid point, and
    interpolates the crossing of the 1/2 bound.  The crossing location is a
    state property; within uncertainty it must not depend on T or B.
    """
    g_values = sorted(float(g) for g in g_values)
    rows = []
    for ci, (T, B) in enumerate(cells):
        dt = _cell_dt(B)
        m = int(round(T / dt))
        pconf = PipelineConfig(bandwidth=B, integration_time=T, bootstrap_resamples=0,
                               segment_statistic=segment_statistic)
        means, errs = [], []
        for gi, g in enumerate(g_values):
            A, D = closed_form_dynamics(g * kappa, kappa, n)
            cfg = TrajectoryConfig(
                dt=dt,
                n_steps=segments_per_record * m,
                master_seed=derive_stream_seed(master_seed, 10000 + 100 * ci + gi),
            )
            ests = [analyze_record(r, pconf) for r in sample_ensemble(A, D, cfg, runs_per_cell)]
            rep = witness_with_uncertainty(ests)
            means.append(rep.nu_minus)
            errs.append(rep.stderr_nu)
        g_cross = sigma = None
        for j in range(1, len(g_values)):
            if means[j - 1] >= 0.5 > means[j]:
                slope = (means[j] - means[j - 1]) / (g_values[j] - g_values[j - 1])
                g_cross = g_values[j - 1] + (0.5 - means[j - 1]) / slope
                sigma = 0.5 * (errs[j - 1] + errs[j]) / abs(slope)
                break
        rows.append({"T": float(T), "B": float(B), "g_cross": g_cross, "sigma": sigma})
    return rows
