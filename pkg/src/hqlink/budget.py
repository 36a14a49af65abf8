"""Deterministic rate-chain and error-ledger arithmetic.

Rates are products of a repetition rate, named prefactors and per-stage
efficiencies; error budgets compose either first-order (sum) or
multiplicatively (product).
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field


@dataclass(frozen=True)
class EfficiencyStage:
    """One stage of a photon chain; optionally polarization-resolved."""

    name: str
    value: float
    eta_h: float | None = None
    eta_v: float | None = None

    def __post_init__(self):
        vals = [self.value]
        if (self.eta_h is None) != (self.eta_v is None):
            raise ValueError(f"stage {self.name}: give both polarizations or neither")
        if self.eta_h is not None:
            vals += [self.eta_h, self.eta_v]
        for v in vals:
            if not 0.0 < v <= 1.0:
                raise ValueError(f"stage {self.name}: efficiency {v} outside (0, 1]")

    def resolved(self, polarization: str | None) -> float:
        if self.eta_h is None or polarization is None:
            if self.eta_h is not None:
                return (self.eta_h + self.eta_v) / 2
            return self.value
        if polarization == "H":
            return self.eta_h
        if polarization == "V":
            return self.eta_v
        raise ValueError(f"unknown polarization {polarization!r}")

    @classmethod
    def polarized(cls, name: str, eta_h: float, eta_v: float) -> "EfficiencyStage":
        return cls(name=name, value=(eta_h + eta_v) / 2, eta_h=eta_h, eta_v=eta_v)


@dataclass(frozen=True)
class RateChain:
    """Repetition rate times prefactors times stage efficiencies."""

    name: str
    repetition_rate_hz: float
    stages: tuple
    prefactors: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.repetition_rate_hz <= 0:
            raise ValueError("repetition rate must be positive")
        object.__setattr__(self, "stages", tuple(self.stages))
        object.__setattr__(self, "prefactors", dict(self.prefactors))


@dataclass(frozen=True)
class ErrorSource:
    """One row of the infidelity ledger."""

    name: str
    infidelity: float
    model_ref: str | None = None

    def __post_init__(self):
        if not 0.0 <= self.infidelity <= 1.0:
            raise ValueError(f"{self.name}: infidelity {self.infidelity} outside [0, 1]")


def rate(chain: RateChain, polarization: str | None = None) -> float:
    """Event rate of the chain in Hz."""
    if not chain.stages:
        raise ValueError(f"chain {chain.name} has no stages")
    value = chain.repetition_rate_hz
    for pf in chain.prefactors.values():
        value *= pf
    for stage in chain.stages:
        value *= stage.resolved(polarization)
    return value


def end_to_end_efficiency(stages, polarization: str | None = None) -> float:
    """Product of stage efficiencies; polarized stages average H and V unless
    a polarization is selected."""
    stages = list(stages)
    if not stages:
        raise ValueError("need at least one stage")
    value = 1.0
    for stage in stages:
        value *= stage.resolved(polarization)
    return value


def total_infidelity(sources, mode: str = "sum") -> float:
    """Compose error sources first-order ("sum") or exactly ("product")."""
    sources = list(sources)
    if not sources:
        raise ValueError("need at least one error source")
    if mode == "sum":
        return min(sum(s.infidelity for s in sources), 1.0)
    if mode == "product":
        alive = 1.0
        for s in sources:
            alive *= 1.0 - s.infidelity
        return 1.0 - alive
    raise ValueError(f"unknown mode {mode!r}")


def snr_and_noise_rate(signal_rate_hz: float, noise_rate_hz: float) -> tuple[float, float]:
    """(SNR, noise fraction p = 1/(SNR+1)); zero noise gives (inf, 0)."""
    if signal_rate_hz <= 0:
        raise ValueError("signal rate must be positive")
    if noise_rate_hz < 0:
        raise ValueError("noise rate must be nonnegative")
    if noise_rate_hz == 0:
        return math.inf, 0.0
    snr = signal_rate_hz / noise_rate_hz
    return snr, 1.0 / (snr + 1.0)


# ---------------------------------------------------------------------------
# CSV report layouts


def error_budget_csv(sources, mode: str = "sum") -> str:
    """Ledger table: one row per source plus the composed total."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["error_source", "infidelity_percent", "model_ref"])
    for s in sources:
        writer.writerow([s.name, f"{s.infidelity * 100:.6g}", s.model_ref or ""])
    writer.writerow(["total", f"{total_infidelity(sources, mode) * 100:.6g}", mode])
    return buf.getvalue()


def stage_table_csv(stages) -> str:
    """Efficiency table with per-polarization columns and the overall product."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["stage", "efficiency_H_percent", "efficiency_V_percent"])
    for s in stages:
        writer.writerow([s.name, f"{s.resolved('H') * 100:.6g}", f"{s.resolved('V') * 100:.6g}"])
    writer.writerow(["overall",
                     f"{end_to_end_efficiency(stages, 'H') * 100:.6g}",
                     f"{end_to_end_efficiency(stages, 'V') * 100:.6g}"])
    return buf.getvalue()


def rate_table_csv(chains_with_rates) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["chain", "rate_hz"])
    for name, value in chains_with_rates:
        writer.writerow([name, f"{value:.6g}"])
    return buf.getvalue()
