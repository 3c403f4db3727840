"""Photo-induced charging and discharging of the exposed grating dielectric.

Two superimposed exponentials describe the secular-frequency shift while
light is on (fast negative metal effect, slow positive dielectric effect)
and again while it discharges. Double-exponential fits are initialization
sensitive, so the nonlinear fits are multi-started over decade-spaced
time-constant pairs with amplitudes pre-solved by linear least squares.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import normaltest

from .fitting import (
    FitReport,
    covariance_from_jacobian,
    multistart_least_squares,
    weak_parameter_flags,
)

# Decade grid for time-constant seeding, seconds
TIME_CONSTANT_SEED_GRID = (1.0, 10.0, 100.0, 1e3, 1e4)

# Default settled-window start: this many slow time constants after turn-on
SETTLED_WINDOW_FACTOR = 5.0

# Calibration pair: a 0.1 MHz settled offset is nulled by 2.4 kV/cm
DEFAULT_FIELD_SENSITIVITY = 2.4e5 / 0.1e6  # (V/m)/Hz


@dataclass(frozen=True)
class ChargingModelParams:
    df1: float  # Hz, fast effect settling offset
    df2: float  # Hz, slow effect settling offset (enters with minus sign)
    T1: float  # s
    T2: float  # s
    t_on: float  # s
    f0: float  # Hz

    def __post_init__(self):
        if self.T1 <= 0 or self.T2 <= 0:
            raise ValueError("time constants must be positive")
        if self.T1 >= self.T2:
            raise ValueError("expected T1 < T2 (fast metal effect, slow dielectric)")
        if self.f0 <= 0:
            raise ValueError("f0 must be positive")


@dataclass(frozen=True)
class DischargeModelParams:
    df3: float  # Hz
    df4: float  # Hz
    T3: float  # s
    T4: float  # s
    t_off: float  # s
    f0: float  # Hz

    def __post_init__(self):
        if self.T3 <= 0 or self.T4 <= 0:
            raise ValueError("time constants must be positive")
        if self.T3 >= self.T4:
            raise ValueError("expected T3 < T4")
        if self.f0 <= 0:
            raise ValueError("f0 must be positive")


@dataclass(frozen=True)
class FrequencySeries:
    """Secular frequency vs wall-clock time with light on/off intervals."""

    times: tuple  # s, strictly increasing
    freqs: tuple  # Hz
    freq_errs: tuple | None = None
    light_on_intervals: tuple = ()

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        f = np.asarray(self.freqs, dtype=float)
        if t.size != f.size:
            raise ValueError("times and freqs must have equal length")
        if np.any(np.diff(t) <= 0):
            raise ValueError("times must be strictly increasing")
        if np.any(f <= 0):
            raise ValueError("frequencies must be positive")
        if self.freq_errs is not None:
            e = np.asarray(self.freq_errs, dtype=float)
            if e.size != t.size:
                raise ValueError("freq_errs length mismatch")
            if np.any(e <= 0):
                raise ValueError("freq_errs must be positive")
        for start, end in self.light_on_intervals:
            if end <= start:
                raise ValueError("light_on interval must have end > start")


@dataclass(frozen=True)
class DutyCycle:
    probe_time: float  # s, light-on time per cycle
    duty_fraction: float

    def __post_init__(self):
        if not 0 < self.duty_fraction <= 1:
            raise ValueError("duty_fraction must lie in (0, 1]")
        if self.probe_time <= 0:
            raise ValueError("probe_time must be positive")

    @property
    def cycle_period(self) -> float:
        return self.probe_time / self.duty_fraction


def charging_freq(t, p: ChargingModelParams):
    """Secular frequency while light is on: two saturating exponentials."""
    t = np.asarray(t, dtype=float)
    if np.any(t < p.t_on):
        raise ValueError("charging model only applies for t >= t_on")
    tau = t - p.t_on
    out = (
        p.f0
        + p.df1 * (1.0 - np.exp(-tau / p.T1))
        - p.df2 * (1.0 - np.exp(-tau / p.T2))
    )
    return float(out) if out.ndim == 0 else out


def discharge_freq(t, p: DischargeModelParams):
    """Secular frequency after light off, relaxing back toward f0."""
    t = np.asarray(t, dtype=float)
    if np.any(t < p.t_off):
        raise ValueError("discharge model only applies for t >= t_off")
    tau = t - p.t_off
    out = p.f0 - p.df3 * np.exp(-tau / p.T3) - p.df4 * np.exp(-tau / p.T4)
    return float(out) if out.ndim == 0 else out


def settled_offset(p: ChargingModelParams) -> float:
    """Long-time frequency offset with the light on, df1 - df2."""
    return p.df1 - p.df2


def compensation_field(offset: float, sensitivity: float = DEFAULT_FIELD_SENSITIVITY) -> float:
    """Vertical electric field (V/m) needed to null a settled offset (Hz)."""
    if sensitivity <= 0:
        raise ValueError("sensitivity must be positive")
    return offset * sensitivity


def effective_exposure(duty: DutyCycle, wall_time: float) -> float:
    """Equivalent continuous light-on time accumulated over wall_time."""
    if wall_time < 0:
        raise ValueError("wall_time must be >= 0")
    return wall_time * duty.duty_fraction


def _select(series: FrequencySeries, t_start, t_end):
    t = np.asarray(series.times, dtype=float)
    f = np.asarray(series.freqs, dtype=float)
    mask = t >= t_start
    if t_end is not None:
        mask &= t <= t_end
    w = None
    if series.freq_errs is not None:
        w = 1.0 / np.asarray(series.freq_errs, dtype=float)[mask]
    return t[mask], f[mask], w


def _baseline_f0(series: FrequencySeries, t_on: float):
    t = np.asarray(series.times, dtype=float)
    f = np.asarray(series.freqs, dtype=float)
    pre = f[t < t_on]
    return float(np.mean(pre)) if pre.size else None


def _seed_amplitudes(basis_cols, f, w):
    """Linear LSQ for the amplitude block given fixed time constants."""
    A = np.column_stack(basis_cols)
    if w is not None:
        A = A * w[:, None]
        f = f * w
    sol, _, _, _ = np.linalg.lstsq(A, f, rcond=None)
    return sol


def _double_exp_fit(t, f, w, model_kind, t_ref, fix_f0):
    """Shared core for the charging/discharge fits.

    model_kind 'charging' uses saturating exponentials with the slow term
    entering negatively; 'discharge' uses decaying exponentials. Returns
    (values, errs, cov, result) with keys (dfa, dfb, Ta, Tb, f0) ordered
    fast/slow.
    """
    if t.size < 8:
        raise ValueError("need at least 8 points for a double-exponential fit")
    tau = t - t_ref
    fit_f0 = fix_f0 is None

    def basis(Ta, Tb):
        if model_kind == "charging":
            return 1.0 - np.exp(-tau / Ta), -(1.0 - np.exp(-tau / Tb))
        return -np.exp(-tau / Ta), -np.exp(-tau / Tb)

    # floor keeps extreme trial points from underflowing exp() to zero
    t_floor = 1e-9 * max(float(tau[-1]), 1.0)

    def unpack(theta):
        dfa, dfb = theta[0], theta[1]
        Ta = max(math.exp(theta[2]), t_floor)
        Tb = max(math.exp(theta[3]), t_floor)
        f0 = theta[4] if fit_f0 else fix_f0
        return dfa, dfb, Ta, Tb, f0

    def residuals(theta):
        dfa, dfb, Ta, Tb, f0 = unpack(theta)
        ba, bb = basis(Ta, Tb)
        model = f0 + dfa * ba + dfb * bb
        r = model - f
        return r * w if w is not None else r

    seeds = []
    f0_guess = fix_f0 if fix_f0 is not None else float(f[0])
    for i, Ta in enumerate(TIME_CONSTANT_SEED_GRID):
        for Tb in TIME_CONSTANT_SEED_GRID[i + 1 :]:
            ba, bb = basis(Ta, Tb)
            cols = [ba, bb] + ([np.ones_like(tau)] if fit_f0 else [])
            target = f if fit_f0 else f - fix_f0
            amps = _seed_amplitudes(cols, target, w)
            seed = [amps[0], amps[1], math.log(Ta), math.log(Tb)]
            if fit_f0:
                seed.append(amps[2])
            seeds.append(seed)

    res = multistart_least_squares(residuals, seeds)
    dfa, dfb, Ta, Tb, f0 = unpack(res.x)

    cov = covariance_from_jacobian(res.jac, res.fun, absolute_sigma=w is not None)
    errs = np.sqrt(np.clip(np.diag(cov), 0, None))
    # log-T parameters back to T
    err_Ta = Ta * errs[2]
    err_Tb = Tb * errs[3]
    err_f0 = errs[4] if fit_f0 else 0.0

    values = {"dfa": dfa, "dfb": dfb, "Ta": Ta, "Tb": Tb, "f0": f0}
    err_map = {"dfa": errs[0], "dfb": errs[1], "Ta": err_Ta, "Tb": err_Tb, "f0": err_f0}

    # enforce fast-before-slow labeling
    if Ta > Tb:
        if model_kind == "charging":
            # swapping T1<->T2 maps (df1, df2) -> (-df2, -df1)
            values = {
                "dfa": -values["dfb"],
                "dfb": -values["dfa"],
                "Ta": Tb,
                "Tb": Ta,
                "f0": f0,
            }
        else:
            values = {
                "dfa": values["dfb"],
                "dfb": values["dfa"],
                "Ta": Tb,
                "Tb": Ta,
                "f0": f0,
            }
        err_map = {
            "dfa": err_map["dfb"],
            "dfb": err_map["dfa"],
            "Ta": err_Tb,
            "Tb": err_Ta,
            "f0": err_f0,
        }
        cov = None  # labeling swapped; cross terms no longer meaningful

    return values, err_map, cov, res


def _amplitude_degeneracy_flags(values, errs, keys):
    if all(abs(values[k]) <= max(errs[k], 0.0) for k in keys):
        return ["amplitudes-consistent-with-zero"]
    return []


def fit_charging(
    series: FrequencySeries,
    t_on: float,
    t_end: float | None = None,
    f0_mode: str = "fit",
) -> tuple[ChargingModelParams, FitReport]:
    """Fit the light-on charging model to the points in [t_on, t_end].

    f0_mode: 'fit' floats the baseline, 'baseline' fixes it to the mean of
    the pre-t_on points. Raises FitConvergenceError with best-so-far
    diagnostics if no start converges.
    """
    if f0_mode not in ("fit", "baseline"):
        raise ValueError("f0_mode must be 'fit' or 'baseline'")
    fix_f0 = None
    if f0_mode == "baseline":
        fix_f0 = _baseline_f0(series, t_on)
        if fix_f0 is None:
            raise ValueError("no pre-t_on points to fix the baseline from")
    t, f, w = _select(series, t_on, t_end)
    values, errs, cov, res = _double_exp_fit(t, f, w, "charging", t_on, fix_f0)

    params = ChargingModelParams(
        df1=values["dfa"],
        df2=values["dfb"],
        T1=values["Ta"],
        T2=values["Tb"],
        t_on=t_on,
        f0=values["f0"],
    )
    named = {"df1": params.df1, "df2": params.df2, "T1": params.T1, "T2": params.T2, "f0": params.f0}
    named_errs = {"df1": errs["dfa"], "df2": errs["dfb"], "T1": errs["Ta"], "T2": errs["Tb"], "f0": errs["f0"]}
    offset_err = math.hypot(named_errs["df1"], named_errs["df2"])
    if cov is not None:
        var = cov[0, 0] + cov[1, 1] - 2 * cov[0, 1]
        offset_err = math.sqrt(max(var, 0.0))
    flags = weak_parameter_flags(named, named_errs)
    flags += _amplitude_degeneracy_flags(values, errs, ("dfa", "dfb"))
    report = FitReport(
        model="charging-double-exponential",
        params=named,
        param_errs=named_errs,
        residual_rms=float(np.sqrt(np.mean((res.fun) ** 2))),
        n_points=t.size,
        flags=flags,
        extras={
            "settled_offset": settled_offset(params),
            "settled_offset_err": offset_err,
            "t_on": t_on,
            "f0_fixed": 0.0 if f0_mode == "fit" else 1.0,
        },
    )
    return params, report


def fit_discharge(
    series: FrequencySeries,
    t_off: float,
    t_end: float | None = None,
    f0_mode: str = "fit",
    f0_baseline_before: float | None = None,
    continuity_shift: float | None = None,
) -> tuple[DischargeModelParams, FitReport]:
    """Fit the light-off discharge model to the points in [t_off, t_end].

    With continuity_shift set (the charging model's shift above f0 at
    t_off), the amplitude sum is constrained by df3 + df4 = -shift so the
    two curves join continuously; this removes one free parameter.
    """
    if f0_mode not in ("fit", "baseline"):
        raise ValueError("f0_mode must be 'fit' or 'baseline'")
    fix_f0 = None
    if f0_mode == "baseline":
        ref = f0_baseline_before if f0_baseline_before is not None else t_off
        fix_f0 = _baseline_f0(series, ref)
        if fix_f0 is None:
            raise ValueError("no baseline points to fix f0 from")
    t, f, w = _select(series, t_off, t_end)

    if continuity_shift is None:
        values, errs, cov, res = _double_exp_fit(t, f, w, "discharge", t_off, fix_f0)
    else:
        values, errs, cov, res = _constrained_discharge_fit(
            t, f, w, t_off, fix_f0, continuity_shift
        )

    params = DischargeModelParams(
        df3=values["dfa"],
        df4=values["dfb"],
        T3=values["Ta"],
        T4=values["Tb"],
        t_off=t_off,
        f0=values["f0"],
    )
    named = {"df3": params.df3, "df4": params.df4, "T3": params.T3, "T4": params.T4, "f0": params.f0}
    named_errs = {"df3": errs["dfa"], "df4": errs["dfb"], "T3": errs["Ta"], "T4": errs["Tb"], "f0": errs["f0"]}
    flags = weak_parameter_flags(named, named_errs)
    flags += _amplitude_degeneracy_flags(values, errs, ("dfa", "dfb"))
    if continuity_shift is not None:
        flags.append("continuity-constrained")
    report = FitReport(
        model="discharge-double-exponential",
        params=named,
        param_errs=named_errs,
        residual_rms=float(np.sqrt(np.mean((res.fun) ** 2))),
        n_points=t.size,
        flags=flags,
        extras={"t_off": t_off, "f0_fixed": 0.0 if f0_mode == "fit" else 1.0},
    )
    return params, report


def _constrained_discharge_fit(t, f, w, t_off, fix_f0, shift):
    """Discharge fit with df4 eliminated via df3 + df4 = -shift."""
    if t.size < 8:
        raise ValueError("need at least 8 points for a double-exponential fit")
    tau = t - t_off
    fit_f0 = fix_f0 is None

    t_floor = 1e-9 * max(float(tau[-1]), 1.0)

    def unpack(theta):
        df3 = theta[0]
        T3 = max(math.exp(theta[1]), t_floor)
        T4 = max(math.exp(theta[2]), t_floor)
        f0 = theta[3] if fit_f0 else fix_f0
        return df3, -shift - df3, T3, T4, f0

    def residuals(theta):
        df3, df4, T3, T4, f0 = unpack(theta)
        model = f0 - df3 * np.exp(-tau / T3) - df4 * np.exp(-tau / T4)
        r = model - f
        return r * w if w is not None else r

    seeds = []
    for i, Ta in enumerate(TIME_CONSTANT_SEED_GRID):
        for Tb in TIME_CONSTANT_SEED_GRID[i + 1 :]:
            seed = [-shift / 2.0, math.log(Ta), math.log(Tb)]
            if fit_f0:
                seed.append(float(f[-1]))
            seeds.append(seed)
    res = multistart_least_squares(residuals, seeds)
    df3, df4, T3, T4, f0 = unpack(res.x)
    cov = covariance_from_jacobian(res.jac, res.fun, absolute_sigma=w is not None)
    errs = np.sqrt(np.clip(np.diag(cov), 0, None))
    if T3 > T4:
        df3, df4, T3, T4 = df4, df3, T4, T3
        errs = np.array([errs[0], errs[2], errs[1]] + ([errs[3]] if fit_f0 else []))
    values = {"dfa": df3, "dfb": df4, "Ta": T3, "Tb": T4, "f0": f0}
    err_map = {
        "dfa": errs[0],
        "dfb": errs[0],  # df4 = -shift - df3 inherits df3's uncertainty
        "Ta": T3 * errs[1],
        "Tb": T4 * errs[2],
        "f0": errs[3] if fit_f0 else 0.0,
    }
    return values, err_map, None, res


def settled_window_start(params: ChargingModelParams, factor: float = SETTLED_WINDOW_FACTOR) -> float:
    """Default start of the settled region: several slow time constants in."""
    return params.t_on + factor * params.T2


@dataclass(frozen=True)
class SettledStability:
    residuals: tuple  # Hz
    sigma: float  # Hz
    hist_counts: tuple
    hist_edges: tuple  # Hz
    normality_p: float
    flags: tuple


def settled_stability(
    series: FrequencySeries,
    predict,
    window: tuple[float, float],
    n_bins: int = 20,
) -> SettledStability:
    """Residual scatter of the settled region against a fitted model.

    predict maps times (s) to model frequencies (Hz). Flags non-normal
    residuals (e.g. leftover drift) via a D'Agostino-Pearson test.
    """
    t, f, _ = _select(series, window[0], window[1])
    if t.size < 3:
        raise ValueError("settled window contains fewer than 3 points")
    resid = f - np.asarray(predict(t), dtype=float)
    sigma = float(np.std(resid, ddof=1))
    counts, edges = np.histogram(resid, bins=n_bins)
    flags = []
    p_norm = float("nan")
    if t.size >= 20:
        if sigma == 0:
            p_norm = 1.0
        else:
            p_norm = float(normaltest(resid).pvalue)
            if p_norm < 0.05:
                flags.append("residuals-non-normal")
    return SettledStability(
        residuals=tuple(resid.tolist()),
        sigma=sigma,
        hist_counts=tuple(int(c) for c in counts),
        hist_edges=tuple(edges.tolist()),
        normality_p=p_norm,
        flags=tuple(flags),
    )
