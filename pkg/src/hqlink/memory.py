"""Atomic-frequency-comb quantum memory.

Models comb efficiency versus storage time, bandwidth matching between the
ion's double-Lorentzian emission and the memory's absorption band, the
optical-pumping plan that builds up the effective absorption depth, the
Stark-controlled on-demand readout schedule, and the heralded polarization
storage channel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .qstate import QuantumChannel, DensityMatrix, apply_channel, embed_single_qubit, Z

# Gaussian comb-tooth constant sqrt(pi / (4 ln 2))
COMB_B = math.sqrt(math.pi) / math.sqrt(4 * math.log(2))

FINESSE_CONSISTENCY_RTOL = 0.02  # fitted finesse vs delta/gamma, rounding headroom


class IntegrationError(RuntimeError):
    """Adaptive quadrature failed to reach the requested tolerance."""


@dataclass(frozen=True)
class CombParams:
    """AFC comb parameters.

    ``finesse`` may be omitted, in which case it is computed as
    delta / gamma_comb.  When both are given they must agree within 2%
    (published finesse values are rounded).
    """

    d: float
    gamma_comb_khz: float
    delta_mhz: float = 2.0
    bandwidth_mhz: float = 48.2
    finesse: float | None = None

    def __post_init__(self):
        if self.d <= 0:
            raise ValueError("absorption depth must be positive")
        if self.gamma_comb_khz <= 0 or self.delta_mhz <= 0:
            raise ValueError("comb frequencies must be positive")
        if self.bandwidth_mhz <= self.delta_mhz:
            raise ValueError("bandwidth must exceed the tooth spacing")
        implied = self.delta_mhz * 1e3 / self.gamma_comb_khz
        if self.finesse is None:
            object.__setattr__(self, "finesse", implied)
        elif abs(self.finesse - implied) > FINESSE_CONSISTENCY_RTOL * implied:
            raise ValueError(
                f"finesse {self.finesse} inconsistent with delta/gamma = {implied:.4f}")

    @property
    def echo_period_ns(self) -> float:
        return 1e3 / self.delta_mhz


@dataclass(frozen=True)
class SpectralModel:
    """Photon spectrum vs memory band.

    ``gamma_natural_mhz`` is the natural linewidth 1/(2 pi tau), i.e. the
    FWHM of each Lorentzian component; the lineshape uses half of it as the
    Lorentzian half-width.  The two components sit at +-zeeman/2.
    """

    gamma_natural_mhz: float = 19.6
    zeeman_split_mhz: float = 11.22
    qm_bandwidth_mhz: float = 48.2
    detuning_mhz: float = 0.0

    def __post_init__(self):
        if self.gamma_natural_mhz <= 0 or self.qm_bandwidth_mhz <= 0:
            raise ValueError("widths must be positive")
        if self.zeeman_split_mhz < 0:
            raise ValueError("zeeman splitting must be nonnegative")


def afc_efficiency(c: CombParams, t_storage_ns: float) -> float:
    """Internal storage efficiency of the comb after t_storage.

    eta = B^2 (d/F)^2 exp(-B d/F - 2 pi B^2 t^2 gamma^2) with Gaussian teeth,
    B = sqrt(pi)/sqrt(4 ln 2).  Clamped to [0, 1].
    """
    if t_storage_ns < 0:
        raise ValueError("storage time must be nonnegative")
    d_over_f = c.d / c.finesse
    t_s = t_storage_ns * 1e-9
    gamma_hz = c.gamma_comb_khz * 1e3
    eta = (COMB_B ** 2) * d_over_f ** 2 * math.exp(
        -COMB_B * d_over_f - 2 * math.pi * COMB_B ** 2 * t_s ** 2 * gamma_hz ** 2)
    return min(max(eta, 0.0), 1.0)


def spectral_density(f_mhz: float, m: SpectralModel):
    """Max-normalized emission spectrum, incoherent sum of two Lorentzians."""
    hw = m.gamma_natural_mhz / 2.0
    c = m.zeeman_split_mhz / 2.0
    f = np.asarray(f_mhz, dtype=float)
    val = hw ** 2 / ((f - c) ** 2 + hw ** 2) + hw ** 2 / ((f + c) ** 2 + hw ** 2)
    return float(val) if np.isscalar(f_mhz) else val


def _adaptive_simpson(fun, a: float, b: float, tol: float, max_depth: int = 50) -> float:
    """Recursive adaptive Simpson quadrature with an absolute tolerance."""

    def simpson(lo, hi, flo, fmid, fhi):
        return (hi - lo) / 6 * (flo + 4 * fmid + fhi)

    def recurse(lo, hi, flo, fmid, fhi, whole, eps, depth):
        mid = (lo + hi) / 2
        lmid, rmid = (lo + mid) / 2, (mid + hi) / 2
        flm, frm = fun(lmid), fun(rmid)
        left = simpson(lo, mid, flo, flm, fmid)
        right = simpson(mid, hi, fmid, frm, fhi)
        if depth <= 0:
            raise IntegrationError(
                f"adaptive Simpson did not converge on [{lo}, {hi}] (residual {left + right - whole:.3e})")
        if abs(left + right - whole) <= 15 * eps:
            return left + right + (left + right - whole) / 15
        return (recurse(lo, mid, flo, flm, fmid, left, eps / 2, depth - 1)
                + recurse(mid, hi, fmid, frm, fhi, right, eps / 2, depth - 1))

    fa, fb = fun(a), fun(b)
    fm = fun((a + b) / 2)
    whole = simpson(a, b, fa, fm, fb)
    return recurse(a, b, fa, fm, fb, whole, tol, max_depth)


def bandwidth_match(m: SpectralModel, tol: float = 1e-8) -> float:
    """Fraction of the photon spectrum inside the memory band.

    Integrates the spectrum over [-B/2 + df, B/2 + df] with adaptive Simpson
    and normalizes by the full-line integral (computed over +-10 linewidths
    plus the analytic arctan tails).
    """
    fun = lambda f: spectral_density(f, m)
    half = m.qm_bandwidth_mhz / 2.0
    df = m.detuning_mhz
    numerator = _adaptive_simpson(fun, -half + df, half + df, tol)

    span = 10 * m.gamma_natural_mhz + m.zeeman_split_mhz
    body = _adaptive_simpson(fun, -span, span, tol)
    hw = m.gamma_natural_mhz / 2.0
    c = m.zeeman_split_mhz / 2.0
    # arctan tails of both Lorentzian components beyond +-span
    tails = hw * sum(
        math.pi / 2 - math.atan((span - s * c) / hw) + math.pi / 2 - math.atan((span + s * c) / hw)
        for s in (+1, -1))
    denominator = body + tails
    return min(max(numerator / denominator, 0.0), 1.0)


# ---------------------------------------------------------------------------
# pump-region planning


Interval = tuple[float, float]


@dataclass(frozen=True)
class PumpPlan:
    """Result of planning the absorption-enhancement pumping.

    ``transitions`` maps (ground, excited) labels to the transition's
    frequency offset on the common axis.  ``pumped_regions`` lists, per
    transition and in its own detuning frame, the intervals excited by the
    pump windows.
    """

    transitions: dict
    pump_windows: tuple
    target: Interval
    broadening_mhz: float
    pumped_regions: dict
    effective_d: dict = field(default_factory=dict)


def _merge(intervals: list[Interval]) -> list[Interval]:
    out: list[Interval] = []
    for lo, hi in sorted(intervals):
        if out and lo <= out[-1][1] + 1e-9:
            out[-1] = (out[-1][0], max(out[-1][1], hi))
        else:
            out.append((lo, hi))
    return out


def _check_interval(iv, name: str):
    lo, hi = iv
    if not lo < hi:
        raise ValueError(f"{name} interval ({lo}, {hi}) is not ordered")


def plan_pump_regions(level_offsets: dict, windows: list[Interval],
                      target: Interval, broadening_mhz: float = 497.2) -> PumpPlan:
    """Compute per-transition pumped intervals for an enhancement pump set.

    ``level_offsets`` maps (ground, excited) label pairs to the transition
    offset on the common frequency axis.  Each pump window [lo, hi] excites a
    transition with offset T over the detuning range (window - T), clipped to
    [0, broadening].  Enhancement windows must not overlap the target band
    (they would burn away the absorbers they are meant to feed).
    """
    _check_interval(target, "target")
    for w in windows:
        _check_interval(w, "pump window")
        if w[0] < target[1] and target[0] < w[1]:
            raise ValueError(f"pump window {w} overlaps the target band {target}")
    regions = {}
    for key, offset in level_offsets.items():
        hits = []
        for lo, hi in windows:
            a, b = max(lo - offset, 0.0), min(hi - offset, broadening_mhz)
            if b > a + 1e-9:
                hits.append((a, b))
        regions[key] = tuple(_merge(hits))
    return PumpPlan(transitions=dict(level_offsets), pump_windows=tuple(tuple(w) for w in windows),
                    target=tuple(target), broadening_mhz=broadening_mhz,
                    pumped_regions=regions)


def pump_plan_csv(plan: PumpPlan) -> str:
    """Interval list as CSV rows (transition, lo_MHz, hi_MHz, fraction).

    Regions computed by the planner are fully pumped, so the fraction column
    is 1.0; partially weighted contributions only arise inside the
    effective-depth population model.
    """
    lines = ["transition,lo_MHz,hi_MHz,fraction"]
    for key in sorted(plan.pumped_regions):
        label = f"{key[0]}->{key[1]}"
        for lo, hi in plan.pumped_regions[key]:
            lines.append(f"{label},{lo:.6g},{hi:.6g},1")
    return "\n".join(lines) + "\n"


def _pumped_levels(transitions: dict, x: float, window: Interval) -> set:
    lo, hi = window
    out = set()
    for (ground, _), offset in transitions.items():
        if lo <= offset + x <= hi:
            out.add(ground)
    return out


def _population_after_sequence(transitions: dict, x: float, windows: list[Interval],
                               absorbing: set, partial_weight: float) -> dict:
    """Three-level populations at detuning x after the pump windows run in order.

    Each window empties the levels it addresses into the levels it does not;
    a window addressing all levels leaves the uniform mixture.  When a donor
    splits between two sinks and exactly one of them absorbs in the target
    band, that sink receives ``partial_weight`` of the moved population.
    """
    levels = sorted({g for g, _ in transitions})
    pop = {g: 1.0 / len(levels) for g in levels}
    for w in windows:
        pumped = _pumped_levels(transitions, x, w)
        dark = [g for g in levels if g not in pumped]
        if not dark:
            pop = {g: 1.0 / len(levels) for g in levels}
            continue
        moved = sum(pop[g] for g in pumped)
        for g in pumped:
            pop[g] = 0.0
        dark_absorbing = [g for g in dark if g in absorbing]
        if len(dark) == 2 and len(dark_absorbing) == 1:
            pop[dark_absorbing[0]] += moved * partial_weight
            other = dark[0] if dark[1] == dark_absorbing[0] else dark[1]
            pop[other] += moved * (1 - partial_weight)
        else:
            for g in dark:
                pop[g] += moved / len(dark)
    return pop


def effective_depth(plan: PumpPlan, native_d: float, strengths: dict,
                    include_transmission_pump: bool = True,
                    partial_weight: float = 0.5, grid_points: int = 400) -> float:
    """Band-averaged absorption depth after the pump sequence.

    ``strengths`` maps each (ground, excited) transition to its relative
    oscillator strength.  The sequence is: optional transmission pump over
    the target band, then the plan's enhancement windows in order.  The
    native depth scales by the ratio of pumped to equilibrium band
    absorption.
    """
    if native_d < 0:
        raise ValueError("native depth must be nonnegative")
    if not plan.pump_windows and not include_transmission_pump:
        return native_d
    windows = list(plan.pump_windows)
    if windows and include_transmission_pump:
        windows = [plan.target] + windows
    if not windows:
        return native_d
    n_levels = len({g for g, _ in plan.transitions})
    lo, hi = plan.target
    fs = np.linspace(lo, hi, grid_points + 1)[:-1] + (hi - lo) / (2 * grid_points)
    post = 0.0
    native = 0.0
    for key, s in strengths.items():
        if key not in plan.transitions:
            raise ValueError(f"strength given for unknown transition {key}")
        offset = plan.transitions[key]
        ground = key[0]
        acc = 0.0
        for f in fs:
            x = f - offset
            absorbing = {g for (g, _), t in plan.transitions.items() if lo <= t + x <= hi}
            pop = _population_after_sequence(plan.transitions, x, windows, absorbing,
                                             partial_weight)
            acc += pop[ground]
        post += s * acc / len(fs)
        native += s / n_levels
    if native == 0:
        return 0.0
    return native_d * post / native


# ---------------------------------------------------------------------------
# Stark-controlled readout


@dataclass(frozen=True)
class StarkControl:
    """Electric-pulse schedule for on-demand echo readout.

    The first pulse must arrive before the first echo; the second pulse has
    reverse polarity and selects which echo order is released.
    """

    shift_rate_khz_per_v_cm: float = 5.80
    pulse_voltage_v: float = 8.6
    pulse_duration_ns: float = 100.0
    echo_period_ns: float = 500.0
    readout_order_n: int = 2
    first_pulse_ns: float = 200.0
    second_pulse_ns: float = 750.0
    second_pulse_reversed: bool = True

    MAX_ORDER = 10  # beyond the measured regime

    def __post_init__(self):
        if self.shift_rate_khz_per_v_cm <= 0:
            raise ValueError("shift rate must be positive")
        if not 1 <= self.readout_order_n <= self.MAX_ORDER:
            raise ValueError(f"readout order must be in [1, {self.MAX_ORDER}]")
        if self.echo_period_ns <= 0 or self.pulse_duration_ns <= 0:
            raise ValueError("durations must be positive")


def smafc_readout_time(s: StarkControl) -> float:
    """Release time n * echo_period of the selected echo, with schedule checks."""
    if s.first_pulse_ns >= s.echo_period_ns:
        raise ValueError(
            f"first Stark pulse at {s.first_pulse_ns} ns misses the first echo "
            f"at {s.echo_period_ns} ns")
    if not s.second_pulse_reversed:
        raise ValueError("second Stark pulse must have reverse polarity")
    n = s.readout_order_n
    lo, hi = (n - 1) * s.echo_period_ns, n * s.echo_period_ns
    if not lo < s.second_pulse_ns <= hi:
        raise ValueError(
            f"second pulse at {s.second_pulse_ns} ns outside ({lo}, {hi}] for echo order {n}")
    return n * s.echo_period_ns


def stark_splitting(e_field_v_per_cm: float, rate_khz_per_v_cm: float = 5.80) -> float:
    """Linear Stark splitting in kHz between the two shifted sub-ensembles."""
    if rate_khz_per_v_cm <= 0:
        raise ValueError("shift rate must be positive")
    if e_field_v_per_cm < 0:
        raise ValueError("field must be nonnegative")
    return rate_khz_per_v_cm * e_field_v_per_cm


def mean_stark_rate(rate_plus: float, rate_minus: float) -> float:
    """Mean magnitude of the +/- shift-rate pair."""
    return (abs(rate_plus) + abs(rate_minus)) / 2


# ---------------------------------------------------------------------------
# storage channels


def storage_channel(eta_h: float, eta_v: float) -> QuantumChannel:
    """Heralded polarization storage with per-polarization efficiencies.

    Trace-decreasing: the herald probability on input rho is
    eta_h * p_H + eta_v * p_V.  Balanced efficiencies leave the post-selected
    state unchanged.
    """
    for name, v in (("eta_h", eta_h), ("eta_v", eta_v)):
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"{name}={v} outside [0, 1]")
    k = embed_single_qubit(np.diag([math.sqrt(eta_h), math.sqrt(eta_v)]).astype(complex), 1)
    return QuantumChannel((k,), trace_preserving=False)


def herald_probability(rho: DensityMatrix, ch: QuantumChannel) -> float:
    """Trace of the unnormalized channel output."""
    return apply_channel(rho, ch).trace


def storage_residual_channel(avg_infidelity: float) -> QuantumChannel:
    """Phenomenological storage imperfection as a photon-side phase flip.

    Calibrated so the Bell-state infidelity equals the measured average
    storage infidelity; not derived from a microscopic model.
    """
    if not 0.0 <= avg_infidelity <= 0.5:
        raise ValueError("average infidelity outside [0, 0.5]")
    z = embed_single_qubit(Z, 1)
    eye = np.eye(4, dtype=complex)
    return QuantumChannel((math.sqrt(1 - avg_infidelity) * eye,
                           math.sqrt(avg_infidelity) * z))
