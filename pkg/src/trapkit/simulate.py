"""Seeded synthetic-experiment generator for closed-loop fit testing.

Randomness comes from the counter-based Philox generator keyed by
(seed, stream, point index), so every simulated point is reproducible
independently of evaluation order and safe to generate concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import thermometry
from .beam import GratingOutputModel, RabiPositionScan, profile_intensity, rabi_from_intensity
from .charging import ChargingModelParams, DischargeModelParams, FrequencySeries, charging_freq, discharge_freq
from .heating import HeatingSeries
from .thermometry import RabiParams, SidebandObservation, ThermalMotionalState
from .units import TWO_PI, TrapContext, make_trap_context

# stream tags keep the per-experiment generators independent
STREAM_SIDEBAND_RED = 1
STREAM_SIDEBAND_BLUE = 2
STREAM_CHARGING = 3
STREAM_POSITION = 4


def point_rng(seed: int, stream: int, index: int = 0) -> np.random.Generator:
    """Philox generator for one simulated point; splittable by index."""
    key = (int(seed) & (2**64 - 1)) << 64 | ((stream & 0xFFFF) << 32 | (index & 0xFFFFFFFF))
    return np.random.Generator(np.random.Philox(key=key))


def _default_trap() -> TrapContext:
    return make_trap_context("Yb-171", TWO_PI * 5.329e6, TWO_PI * 12.7e6, 20e-6)


def _default_rabi() -> RabiParams:
    return RabiParams(base_rabi=TWO_PI * 200e3, lamb_dicke=0.1)


def _default_charging() -> ChargingModelParams:
    return ChargingModelParams(
        df1=151e3, df2=50e3, T1=21.0, T2=900.0, t_on=400.0, f0=5.329e6
    )


def _default_discharge() -> DischargeModelParams:
    # amplitudes continuous with the default charging curve at t_off=2400 s
    p = _default_charging()
    shift = charging_freq(2400.0, p) - p.f0
    return DischargeModelParams(
        df3=-0.75 * shift, df4=-0.25 * shift, T3=360.0, T4=18000.0,
        t_off=2400.0, f0=p.f0,
    )


@dataclass(frozen=True)
class SimConfig:
    seed: int = 0
    shots_per_point: int | None = 500  # None means analytic (infinite shots)
    trap: TrapContext = field(default_factory=_default_trap)
    rabi: RabiParams = field(default_factory=_default_rabi)
    initial_nbar: float = 0.1
    heating_rate: float = 780.0  # quanta/s
    charging: ChargingModelParams = field(default_factory=_default_charging)
    discharge: DischargeModelParams = field(default_factory=_default_discharge)
    noise_floor: float = 1e3  # Hz, charging-measurement noise
    sideband_probe_time: float | None = None  # s; default set from rabi
    rabi_noise_frac: float = 0.05

    def __post_init__(self):
        if self.shots_per_point is not None and self.shots_per_point < 1:
            raise ValueError("shots_per_point must be >= 1")
        if self.initial_nbar < 0:
            raise ValueError("initial_nbar must be >= 0")
        if self.heating_rate < 0:
            raise ValueError("heating_rate must be >= 0")
        if self.noise_floor < 0:
            raise ValueError("noise_floor must be >= 0")

    @property
    def probe_time(self) -> float:
        if self.sideband_probe_time is not None:
            return self.sideband_probe_time
        # roughly a blue-sideband pi-pulse from n=0
        return math.pi / (self.rabi.base_rabi * self.rabi.lamb_dicke)


def simulate_sideband_scan(cfg: SimConfig, wait_time: float, index: int = 0) -> SidebandObservation:
    """One red/blue sideband probe after the given heating wait."""
    if wait_time < 0:
        raise ValueError("wait_time must be >= 0")
    nbar = cfg.initial_nbar + cfg.heating_rate * wait_time
    state = ThermalMotionalState(nbar)
    t = cfg.probe_time
    p_blue = thermometry.sideband_excitation(state, cfg.rabi, t, +1)
    p_red = thermometry.sideband_excitation(state, cfg.rabi, t, -1)
    if cfg.shots_per_point is None:
        return SidebandObservation(t, p_red, p_blue, shots=None)
    shots = cfg.shots_per_point
    k_red = point_rng(cfg.seed, STREAM_SIDEBAND_RED, index).binomial(shots, p_red)
    k_blue = point_rng(cfg.seed, STREAM_SIDEBAND_BLUE, index).binomial(shots, p_blue)
    return SidebandObservation(t, k_red / shots, k_blue / shots, shots=shots)


def _expected_nbar_error(cfg: SimConfig, nbar: float) -> float:
    """Shot-noise error of the asymmetry estimate at a given true nbar."""
    state = ThermalMotionalState(max(nbar, 0.0))
    t = cfg.probe_time
    shots = cfg.shots_per_point
    p_blue = thermometry.sideband_excitation(state, cfg.rabi, t, +1)
    p_red = thermometry.sideband_excitation(state, cfg.rabi, t, -1)
    ratio = p_red / p_blue
    s_red = math.sqrt(max(p_red * (1 - p_red), 0.25 / shots) / shots)
    s_blue = math.sqrt(max(p_blue * (1 - p_blue), 0.25 / shots) / shots)
    sigma_ratio = math.hypot(s_red / p_blue, p_red * s_blue / p_blue**2)
    return sigma_ratio / (1.0 - ratio) ** 2


def simulate_heating_series(cfg: SimConfig, wait_times) -> HeatingSeries:
    """Thermometry applied to simulated sideband scans at each wait time.

    Per-point errors are propagated at the occupations predicted by a
    preliminary unweighted line fit, not at each point's own noisy
    estimate: weights correlated with the point noise would bias the
    downstream weighted heating fit.
    """
    wait_times = list(wait_times)
    nbars = []
    for i, wt in enumerate(wait_times):
        obs = simulate_sideband_scan(cfg, wt, index=i)
        nbar, _ = thermometry.nbar_with_uncertainty(obs)
        nbars.append(nbar)
    if cfg.shots_per_point is None:
        return HeatingSeries(
            wait_times=tuple(wait_times),
            nbar=tuple(nbars),
            nbar_err=None,
            context=cfg.trap,
        )
    t = np.asarray(wait_times)
    coeffs = np.polyfit(t, np.asarray(nbars), 1)
    predicted = np.clip(np.polyval(coeffs, t), 1e-3, None)
    errs = [_expected_nbar_error(cfg, p) for p in predicted]
    return HeatingSeries(
        wait_times=tuple(wait_times),
        nbar=tuple(nbars),
        nbar_err=tuple(errs),
        context=cfg.trap,
    )


def simulate_charging_series(
    cfg: SimConfig,
    sample_interval: float,
    on_window: tuple[float, float],
    total: float,
) -> FrequencySeries:
    """Baseline / charging / discharge frequency record on a fixed cadence."""
    if sample_interval <= 0:
        raise ValueError("sample_interval must be positive")
    t_on, t_off = on_window
    if not (0 <= t_on <= t_off <= total):
        raise ValueError("on_window must lie within [0, total]")
    times = np.arange(0.0, total + 0.5 * sample_interval, sample_interval)
    charge_p = ChargingModelParams(
        df1=cfg.charging.df1, df2=cfg.charging.df2,
        T1=cfg.charging.T1, T2=cfg.charging.T2,
        t_on=t_on, f0=cfg.charging.f0,
    )
    freqs = np.full_like(times, cfg.charging.f0)
    on = (times >= t_on) & (times < t_off)
    if np.any(on):
        freqs[on] = charging_freq(times[on], charge_p)
    after = times >= t_off
    if np.any(after) and t_off > t_on:
        shift = charging_freq(t_off, charge_p) - charge_p.f0
        total_amp = cfg.discharge.df3 + cfg.discharge.df4
        # rescale the configured amplitude split so the curves join at t_off
        if total_amp != 0:
            scale = -shift / total_amp
        else:
            scale = 0.0
        dis_p = DischargeModelParams(
            df3=cfg.discharge.df3 * scale, df4=cfg.discharge.df4 * scale,
            T3=cfg.discharge.T3, T4=cfg.discharge.T4,
            t_off=t_off, f0=cfg.charging.f0,
        ) if scale != 0 else None
        if dis_p is not None:
            freqs[after] = discharge_freq(times[after], dis_p)
    if cfg.noise_floor > 0:
        noise = point_rng(cfg.seed, STREAM_CHARGING).normal(0.0, cfg.noise_floor, times.size)
        freqs = freqs + noise
    errs = None if cfg.noise_floor == 0 else tuple([cfg.noise_floor] * times.size)
    intervals = ((t_on, t_off),) if t_off > t_on else ()
    return FrequencySeries(
        times=tuple(times.tolist()),
        freqs=tuple(freqs.tolist()),
        freq_errs=errs,
        light_on_intervals=intervals,
    )


def simulate_position_scan(
    cfg: SimConfig,
    beam: GratingOutputModel,
    positions,
    reference: tuple[float, float] | None = None,
) -> RabiPositionScan:
    """Rabi frequency sampled across the beam with multiplicative noise."""
    x = np.asarray(list(positions), dtype=float)
    if np.any(np.diff(x) <= 0):
        raise ValueError("positions must be strictly increasing")
    if reference is None:
        reference = (TWO_PI * 121.1e3, beam.peak_intensity)
    intensity = np.asarray(profile_intensity(x, beam), dtype=float)
    rabi = np.asarray(rabi_from_intensity(intensity, reference), dtype=float)
    frac = cfg.rabi_noise_frac
    if frac > 0:
        rng = point_rng(cfg.seed, STREAM_POSITION)
        rabi = rabi * (1.0 + rng.normal(0.0, frac, x.size))
        rabi = np.abs(rabi)
        err_scale = frac * np.maximum(rabi, 1e-6 * np.max(rabi) + 1e-30)
        errs = tuple(err_scale.tolist())
    else:
        errs = None
    return RabiPositionScan(
        positions=tuple(x.tolist()),
        rabi=tuple(rabi.tolist()),
        rabi_err=errs,
    )
