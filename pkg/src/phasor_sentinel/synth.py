"""Synthetic correlated multi-PMU data generator.

Stands in for a real fleet of electrically-close PMUs. Each channel is a
mix of a fleet-wide common-mode process and spatially-correlated local
noise, tuned so the inter-PMU correlation structure is qualitatively
realistic: freq / |V+| / phi+ strongly correlated across the fleet,
negative- and zero-sequence channels weakly correlated, ROCOF poorly
correlated.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .phasors import ParameterId, Phasor, PhasorFrame, fortescue_arrays, wrap_angle_array

FRAMES_PER_SECOND = 60
CYCLES_PER_MINUTE = 3600

CHANNEL_NAMES = [p.short_name for p in ParameterId]

# Per-channel std-dev of additive white measurement noise.
DEFAULT_NOISE_PROFILE = {
    "freq": 2.0e-4,
    "rocof": 0.2,
    "v_pos_mag": 5.0e-4,
    "v_pos_ang": 2.0e-4,
    "v_neg_mag": 1.0e-3,
    "v_neg_ang": 0.0,
    "v_zero_mag": 1.0e-3,
    "v_zero_ang": 0.0,
}

# Fraction of each directly-generated channel's wander that is fleet-wide.
# rocof and v_pos_ang are derived from freq (differentiation / integration)
# and so inherit its common-mode structure; their entries are unused.
DEFAULT_COMMON_MODE = {
    "freq": 0.95,
    "rocof": 0.0,
    "v_pos_mag": 0.8,
    "v_pos_ang": 0.0,
    "v_neg_mag": 0.25,
    "v_neg_ang": 0.3,
    "v_zero_mag": 0.25,
    "v_zero_ang": 0.3,
}


def default_electrical_distance(pmu_count: int) -> np.ndarray:
    """Pairwise distances for PMUs placed evenly along a line."""
    u = np.linspace(0.0, 1.0, pmu_count)
    return np.abs(u[:, None] - u[None, :])


@dataclass
class FleetConfig:
    pmu_count: int = 10
    frames_per_second: int = FRAMES_PER_SECOND
    minutes: int = 1
    seed: int = 0
    electrical_distance: np.ndarray | None = None
    noise_profile: dict[str, float] = field(default_factory=lambda: dict(DEFAULT_NOISE_PROFILE))
    common_mode_strength: dict[str, float] = field(default_factory=lambda: dict(DEFAULT_COMMON_MODE))

    def __post_init__(self):
        if self.pmu_count < 2:
            raise ValueError("pmu_count must be >= 2")
        if self.minutes < 1:
            raise ValueError("minutes must be >= 1")
        if self.electrical_distance is None:
            self.electrical_distance = default_electrical_distance(self.pmu_count)
        d = np.asarray(self.electrical_distance, dtype=float)
        if d.shape != (self.pmu_count, self.pmu_count):
            raise ValueError("electrical_distance must be P x P")
        if not np.allclose(d, d.T):
            raise ValueError("electrical_distance must be symmetric")
        if not np.allclose(np.diag(d), 0.0):
            raise ValueError("electrical_distance diagonal must be zero")
        off = d[~np.eye(self.pmu_count, dtype=bool)]
        if np.any(off <= 0):
            raise ValueError("electrical_distance off-diagonal entries must be positive")
        self.electrical_distance = d


@dataclass
class MinuteDataset:
    """One minute (3600 cycles) of raw frames for every PMU.

    Arrays are shaped (pmu_count, n_cycles); cycle c of PMU p lives at
    [p, c - start_cycle]. Angles are wrapped radians.
    """

    minute_id: int
    va_mag: np.ndarray
    va_ang: np.ndarray
    vb_mag: np.ndarray
    vb_ang: np.ndarray
    vc_mag: np.ndarray
    vc_ang: np.ndarray
    freq: np.ndarray
    rocof: np.ndarray
    start_cycle: int = 0

    RAW_FIELDS = ("va_mag", "va_ang", "vb_mag", "vb_ang", "vc_mag", "vc_ang", "freq", "rocof")

    @property
    def pmu_count(self) -> int:
        return self.va_mag.shape[0]

    @property
    def n_cycles(self) -> int:
        return self.va_mag.shape[1]

    def raw(self, name: str) -> np.ndarray:
        return getattr(self, name)

    def copy(self) -> "MinuteDataset":
        return MinuteDataset(
            self.minute_id,
            *[self.raw(f).copy() for f in self.RAW_FIELDS],
            start_cycle=self.start_cycle,
        )

    def frame(self, pmu: int, cycle: int) -> PhasorFrame:
        c = cycle - self.start_cycle
        return PhasorFrame(
            pmu_id=pmu,
            cycle=cycle,
            va=Phasor(self.va_mag[pmu, c], self.va_ang[pmu, c]),
            vb=Phasor(self.vb_mag[pmu, c], self.vb_ang[pmu, c]),
            vc=Phasor(self.vc_mag[pmu, c], self.vc_ang[pmu, c]),
            freq=float(self.freq[pmu, c]),
            rocof=float(self.rocof[pmu, c]),
        )

    def channel_matrix(self) -> np.ndarray:
        """Derived analysis channels, shape (P, 8, N), ParameterId order."""
        pm, pa, nm, na, zm, za = fortescue_arrays(
            self.va_mag, self.va_ang, self.vb_mag, self.vb_ang, self.vc_mag, self.vc_ang
        )
        return np.stack([pm, pa, nm, na, zm, za, self.freq, self.rocof], axis=1)


def _ou(rng: np.random.Generator, shape: tuple[int, ...], tau_s: float, dt: float) -> np.ndarray:
    """Stationary unit-variance Ornstein-Uhlenbeck paths, time on last axis."""
    n = shape[-1]
    phi = np.exp(-dt / tau_s)
    innov_scale = np.sqrt(1.0 - phi * phi)
    z = rng.standard_normal(shape)
    x = np.empty(shape)
    x[..., 0] = z[..., 0]
    for t in range(1, n):
        x[..., t] = phi * x[..., t - 1] + innov_scale * z[..., t]
    return x


def _mixing_weights(distance: np.ndarray) -> np.ndarray:
    """Spatial mixing matrix: nearby PMUs share local noise.

    Rows are scaled to unit variance so corr(L_i, L_j) = sum_k w_ik w_jk,
    which decays with electrical distance.
    """
    off = distance[~np.eye(distance.shape[0], dtype=bool)]
    scale = 0.4 * float(off.mean())
    w = np.exp(-distance / scale)
    return w / np.sqrt((w * w).sum(axis=1, keepdims=True))


def _mixed_channel(
    rng: np.random.Generator,
    mix: np.ndarray,
    n: int,
    tau_s: float,
    dt: float,
    cms: float,
) -> np.ndarray:
    """Unit-variance channel wander: common-mode plus spatially mixed local."""
    p = mix.shape[0]
    shared = _ou(rng, (n,), tau_s, dt)
    local = mix @ _ou(rng, (p, n), tau_s, dt)
    return cms * shared[None, :] + (1.0 - cms) * local


def generate_minute(config: FleetConfig, minute_id: int) -> MinuteDataset:
    """Generate one minute of correlated fleet data, deterministic in
    (config.seed, minute_id)."""
    rng = np.random.default_rng(np.uint64(config.seed) ^ np.uint64(minute_id))
    p = config.pmu_count
    n = CYCLES_PER_MINUTE
    dt = 1.0 / config.frames_per_second
    mix = _mixing_weights(config.electrical_distance)
    noise = config.noise_profile
    cms = config.common_mode_strength

    # Frequency: OU wander around 60 Hz, excursions ~ +-20 mHz. A slow
    # component dominates; a small fast component adds fleet-wide texture
    # that time-shifted playback cannot reproduce.
    f_clean = (
        60.0
        + 0.006 * _mixed_channel(rng, mix, n, tau_s=10.0, dt=dt, cms=cms["freq"])
        + 0.005 * _mixed_channel(rng, mix, n, tau_s=0.3, dt=dt, cms=cms["freq"])
    )
    freq = f_clean + noise["freq"] * rng.standard_normal((p, n))

    # ROCOF: first difference of the (pre-noise) frequency, plus white noise.
    rocof_clean = np.zeros((p, n))
    rocof_clean[:, 1:] = np.diff(f_clean, axis=1) * config.frames_per_second
    rocof = rocof_clean + noise["rocof"] * rng.standard_normal((p, n))

    # Positive-sequence angle: integral of the local frequency deviation
    # plus a fixed per-PMU offset; keeps phi+ tightly coupled fleet-wide.
    theta0 = rng.uniform(-np.pi, np.pi, size=p)
    pos_ang = (
        theta0[:, None]
        + 2.0 * np.pi * np.cumsum(f_clean - 60.0, axis=1) * dt
        + noise["v_pos_ang"] * rng.standard_normal((p, n))
    )

    # Positive-sequence magnitude: slow correlated wander around 1 p.u.
    pos_mag = (
        1.0
        + 0.004 * _mixed_channel(rng, mix, n, tau_s=10.0, dt=dt, cms=cms["v_pos_mag"])
        + noise["v_pos_mag"] * rng.standard_normal((p, n))
    )

    # Negative / zero sequence: small magnitudes, mostly independent wander.
    def _small_sequence(base: float, spread: float, mag_noise: float, cms_mag: float, cms_ang: float):
        mag = (
            base
            + spread * _mixed_channel(rng, mix, n, tau_s=6.0, dt=dt, cms=cms_mag)
            + mag_noise * rng.standard_normal((p, n))
        )
        np.clip(mag, 1e-4, None, out=mag)
        ang = (
            rng.uniform(-np.pi, np.pi, size=p)[:, None]
            + 0.5 * _mixed_channel(rng, mix, n, tau_s=8.0, dt=dt, cms=cms_ang)
        )
        return mag, ang

    neg_mag, neg_ang = _small_sequence(0.02, 0.005, noise["v_neg_mag"], cms["v_neg_mag"], cms["v_neg_ang"])
    zero_mag, zero_ang = _small_sequence(0.015, 0.004, noise["v_zero_mag"], cms["v_zero_mag"], cms["v_zero_ang"])

    # Compose phase voltages from the sequence components.
    zp = pos_mag * np.exp(1j * pos_ang)
    zn = neg_mag * np.exp(1j * neg_ang)
    z0 = zero_mag * np.exp(1j * zero_ang)
    a = np.exp(2j * np.pi / 3)
    va = z0 + zp + zn
    vb = z0 + a * a * zp + a * zn
    vc = z0 + a * zp + a * a * zn

    assert np.all((freq > 55.0) & (freq < 65.0)), "generated frequency out of sanity bounds"

    return MinuteDataset(
        minute_id=minute_id,
        va_mag=np.abs(va),
        va_ang=wrap_angle_array(np.angle(va)),
        vb_mag=np.abs(vb),
        vb_ang=wrap_angle_array(np.angle(vb)),
        vc_mag=np.abs(vc),
        vc_ang=wrap_angle_array(np.angle(vc)),
        freq=freq,
        rocof=rocof,
    )


def generate_fleet(config: FleetConfig) -> list[MinuteDataset]:
    """Generate config.minutes minutes of fleet data (ids 0..minutes-1)."""
    return [generate_minute(config, m) for m in range(config.minutes)]
