"""Scenario configuration: defaults, JSON loading and validation.

A config is one JSON document with one section per parameter group.  The
shipped defaults carry the full published operating point, so running any
scenario without a config file reproduces the headline numbers.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .budget import EfficiencyStage, ErrorSource, RateChain
from .ion import ExcitationFit, IonParams, SpamParams
from .memory import CombParams, SpectralModel, StarkControl
from .photon import JitterParams, NoiseParams

SCENARIOS = ("ion_photon", "post_qfc", "ti_qm", "chsh", "budget", "afc_sweep",
             "bandwidth_sweep")


class ConfigError(ValueError):
    """Invalid configuration; ``errors`` lists every offending field."""

    def __init__(self, errors: list[str]):
        super().__init__("invalid configuration:\n  " + "\n  ".join(errors))
        self.errors = errors


def default_config_dict() -> dict:
    """Full default configuration at the published operating point."""
    return {
        "scenario": "ti_qm",
        "master_seed": 20260810,
        "output_dir": "reports",
        "ion": {
            "zeeman_frequency_mhz": 11.22,
            "coherence_time_tau_ms": 0.989,
            "excited_lifetime_ns": 8.12,
            "branching_s12": 0.995,
            "pi_excitation_prob": 0.960,
        },
        "spam": {
            "mean_bright_counts": 12.0,
            "threshold": 1.5,
            "dark_fidelity": 0.998,
            "bright_fidelity": 0.987,
        },
        "excitation_fit": {"A": 0.960, "alpha": math.pi, "beta": 2.0, "E": 1.0},
        "jitter": {"awg_rms_ns": 0.305, "transceiver_rms_ns": 0.056},
        "noise": {"snr": 28.0, "pbs_extinction": 3500.0, "window_ns": 30.0,
                  "lifetime_ns": 8.05},
        "comb": {"d": 10.5, "gamma_comb_khz": 259.8, "delta_mhz": 2.0,
                 "bandwidth_mhz": 48.2, "finesse": 7.7},
        "spectral": {"gamma_natural_mhz": 19.6, "zeeman_split_mhz": 11.22,
                     "qm_bandwidth_mhz": 48.2, "detuning_mhz": 0.0},
        "stark": {
            "shift_rate_khz_per_v_cm": 5.80,
            "shift_rate_plus": 5.74,
            "shift_rate_minus": -5.85,
            "pulse_voltage_v": 8.6,
            "pulse_duration_ns": 100.0,
            "echo_period_ns": 500.0,
            "readout_order_n": 2,
            "first_pulse_ns": 200.0,
            "second_pulse_ns": 750.0,
            "second_pulse_reversed": True,
        },
        # Hyperfine offsets of the site-2 ion classes on the pump-design axis
        # (reference transition 5/2g -> 1/2e at zero) and relative transition
        # strengths.  Windows are the two enhancement chirps, applied in order.
        "pump": {
            "ground_offsets": {"1/2g": 224.5, "3/2g": 148.1, "5/2g": 0.0},
            "excited_offsets": {"1/2e": 0.0, "3/2e": 159.1, "5/2e": 431.8},
            "windows": [[274.0, 497.2], [0.0, 223.2]],
            "target": [224.5, 272.7],
            "broadening_mhz": 497.2,
            "strengths": {
                "1/2g:1/2e": 0.56, "1/2g:3/2e": 0.38, "1/2g:5/2e": 0.06,
                "3/2g:1/2e": 0.42, "3/2g:3/2e": 0.42, "3/2g:5/2e": 0.16,
                "5/2g:1/2e": 0.02, "5/2g:3/2e": 0.24, "5/2g:5/2e": 0.74,
            },
            "native_d": {"H": 5.24, "V": 4.66},
            "partial_weight": 0.5,
        },
        "storage": {
            "eta_internal_h": 0.310,
            "eta_internal_v": 0.289,
            "eta_device_h": 0.195,
            "eta_device_v": 0.183,
            "residual_infidelity": 0.0024,
        },
        "rates": {
            "r_exp1_hz": 250e3,
            "r_exp2_hz": 194e3,
            "r_exp3_hz": 162e3,
            "p_pi": 0.960,
            "p_s12": 0.995,
            "qe_369": 0.35,
            "qe_580": 0.80,
            "t_fib1": 0.27,
            "t_opt": 0.90,
            "e_obj": 0.0999,
            "eta_369": 0.708,
            "eta_conv_h": 0.0070,
            "eta_conv_v": 0.0075,
            "t_580": 0.478,
            "t_fib2": 0.40,
            "eta_aom": 0.80,
            "eta_bw": 0.74,
            "signal_rate_hz": 0.2,
            "noise_rate_hz": 0.007,
        },
        # Channel-pipeline knobs shared by the tomography scenarios.  Scalar
        # error rates without a microscopic model enter as white-noise
        # admixtures of matched infidelity.
        "pipeline": {
            "qfc_process_fidelity": 0.969,
            "decoherence_exponent_a": 2.0,
            "excitation_error": 0.033,
            "spam_error": 0.007,
            "mw_rotation_error": 0.001,
            "pi_collection_error": 0.005,
            "apply_storage_residual": True,
            "bootstrap_resamples": 200,
        },
        "error_budget": [
            {"name": "ion_decoherence", "infidelity": None,
             "model_ref": "ion.decoherence_infidelity"},
            {"name": "jitter_phase", "infidelity": None,
             "model_ref": "photon.jitter_infidelity"},
            {"name": "spam", "infidelity": 0.007, "model_ref": "measured"},
            {"name": "mw_rotation", "infidelity": 0.001, "model_ref": "measured"},
            {"name": "qfc", "infidelity": None, "model_ref": "photon.depolarizing_chi"},
            {"name": "pulse_excitation", "infidelity": 0.033, "model_ref": "measured"},
            {"name": "pi_collection", "infidelity": 0.005, "model_ref": "measured"},
            {"name": "dark_noise", "infidelity": 0.027,
             "model_ref": "photon.dark_noise_infidelity"},
            {"name": "photon_detection_pbs", "infidelity": None,
             "model_ref": "photon.pbs_bitflip_channel"},
            {"name": "qm_storage", "infidelity": 0.002, "model_ref": "measured"},
        ],
        "scenarios": {
            "ion_photon": {"shots": 62723, "snr": 1800.0, "decoherence_time_us": 1.01},
            "post_qfc": {"shots": 2714, "snr": 19.5, "decoherence_time_us": 2.17},
            "ti_qm": {"heralds": 1780, "snr": 28.0, "decoherence_time_us": 3.17},
            "chsh": {"trials": 3634, "snr": 28.0, "decoherence_time_us": 3.17},
            "afc_sweep": {"t_start_ns": 500.0, "t_stop_ns": 5000.0, "points": 46},
            "bandwidth_sweep": {"df_start_mhz": -60.0, "df_stop_mhz": 60.0, "points": 121},
        },
    }


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated scenario configuration with typed parameter sections."""

    scenario: str
    master_seed: int
    output_dir: str
    ion: IonParams
    spam: SpamParams
    excitation_fit: ExcitationFit
    jitter: JitterParams
    noise: NoiseParams
    comb: CombParams
    spectral: SpectralModel
    stark: StarkControl
    raw: dict = field(repr=False, default_factory=dict)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        cfg = copy.deepcopy(default_config_dict())
        _deep_update(cfg, data)
        errors: list[str] = []

        scenario = cfg.get("scenario")
        if scenario not in SCENARIOS:
            errors.append(f"scenario: {scenario!r} not one of {SCENARIOS}")
        seed = cfg.get("master_seed")
        if not isinstance(seed, int):
            errors.append(f"master_seed: expected an explicit integer, got {seed!r}")
        out_dir = cfg.get("output_dir")
        if not isinstance(out_dir, str) or not out_dir:
            errors.append(f"output_dir: expected a nonempty string, got {out_dir!r}")

        ion = _build(errors, "ion", _ion_params, cfg)
        spam = _build(errors, "spam", _spam_params, cfg)
        exc = _build(errors, "excitation_fit", lambda c: ExcitationFit(**c["excitation_fit"]), cfg)
        jit = _build(errors, "jitter", _jitter_params, cfg)
        noise = _build(errors, "noise", lambda c: NoiseParams(**c["noise"]), cfg)
        comb = _build(errors, "comb", lambda c: CombParams(**c["comb"]), cfg)
        spectral = _build(errors, "spectral", lambda c: SpectralModel(**c["spectral"]), cfg)
        stark = _build(errors, "stark", _stark_params, cfg)
        _validate_sections(errors, cfg)
        if comb is not None and stark is not None:
            expected = 1e3 / comb.delta_mhz
            if abs(stark.echo_period_ns - expected) > 1e-6:
                errors.append(
                    f"stark.echo_period_ns: {stark.echo_period_ns} != 1/delta = {expected} ns")

        if errors:
            raise ConfigError(errors)
        return cls(scenario=scenario, master_seed=seed, output_dir=out_dir, ion=ion,
                   spam=spam, excitation_fit=exc, jitter=jit, noise=noise, comb=comb,
                   spectral=spectral, stark=stark, raw=cfg)

    @classmethod
    def from_file(cls, path: str | Path) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                data = json.load(fh)
        except OSError as exc:
            raise ConfigError([f"config file {path}: {exc}"]) from exc
        except json.JSONDecodeError as exc:
            raise ConfigError([f"config file {path}: {exc}"]) from exc
        return cls.from_dict(data)

    @classmethod
    def defaults(cls, scenario: str = "ti_qm", **overrides) -> "ExperimentConfig":
        data = {"scenario": scenario}
        data.update(overrides)
        return cls.from_dict(data)

    def scenario_section(self, name: str | None = None) -> dict:
        return self.raw["scenarios"][name or self.scenario]

    def section(self, name: str) -> dict:
        return self.raw[name]

    def with_overrides(self, **kv) -> "ExperimentConfig":
        data = copy.deepcopy(self.raw)
        _deep_update(data, kv)
        return ExperimentConfig.from_dict(data)


def _deep_update(base: dict, extra: dict):
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(base.get(k), dict):
            _deep_update(base[k], v)
        else:
            base[k] = v


def _build(errors: list, section: str, fn, cfg: dict):
    try:
        return fn(cfg)
    except (TypeError, ValueError, KeyError) as exc:
        errors.append(f"{section}: {exc}")
        return None


def _ion_params(cfg: dict) -> IonParams:
    sec = dict(cfg["ion"])
    freq = sec.pop("zeeman_frequency_mhz")
    return IonParams(zeeman_omega=2 * math.pi * freq * 1e6, **sec)


def _spam_params(cfg: dict) -> SpamParams:
    sec = dict(cfg["spam"])
    if "leak_per_scatter" in sec and "background_mean" in sec:
        return SpamParams(**sec)
    return SpamParams.calibrated(**sec)


def _jitter_params(cfg: dict) -> JitterParams:
    sec = dict(cfg["jitter"])
    omega = 2 * math.pi * cfg["ion"]["zeeman_frequency_mhz"] * 1e6
    return JitterParams(zeeman_omega=omega, **sec)


def _stark_params(cfg: dict) -> StarkControl:
    sec = {k: v for k, v in cfg["stark"].items()
           if k not in ("shift_rate_plus", "shift_rate_minus")}
    return StarkControl(**sec)


def _validate_sections(errors: list, cfg: dict):
    pump = cfg.get("pump", {})
    for key in ("ground_offsets", "excited_offsets", "windows", "target", "strengths",
                "native_d"):
        if key not in pump:
            errors.append(f"pump.{key}: missing")
    rates = cfg.get("rates", {})
    for key in ("r_exp1_hz", "r_exp2_hz", "r_exp3_hz", "p_pi", "p_s12", "qe_369",
                "qe_580", "t_fib1", "t_opt", "e_obj", "eta_369", "eta_conv_h",
                "eta_conv_v", "t_580", "t_fib2", "eta_aom", "eta_bw",
                "signal_rate_hz", "noise_rate_hz"):
        if key not in rates:
            errors.append(f"rates.{key}: missing")
        elif not isinstance(rates[key], (int, float)) or rates[key] <= 0:
            errors.append(f"rates.{key}: expected a positive number, got {rates[key]!r}")
    pipeline = cfg.get("pipeline", {})
    for key in ("qfc_process_fidelity", "excitation_error", "spam_error",
                "mw_rotation_error", "pi_collection_error"):
        v = pipeline.get(key)
        if v is None:
            errors.append(f"pipeline.{key}: missing")
        elif not 0.0 <= float(v) <= 1.0:
            errors.append(f"pipeline.{key}: {v} outside [0, 1]")
    storage = cfg.get("storage", {})
    for key in ("eta_internal_h", "eta_internal_v", "eta_device_h", "eta_device_v",
                "residual_infidelity"):
        v = storage.get(key)
        if v is None:
            errors.append(f"storage.{key}: missing")
        elif not 0.0 <= float(v) <= 1.0:
            errors.append(f"storage.{key}: {v} outside [0, 1]")
    scen = cfg.get("scenario")
    if scen in cfg.get("scenarios", {}):
        sec = cfg["scenarios"][scen]
        needed = {
            "ion_photon": ("shots", "snr", "decoherence_time_us"),
            "post_qfc": ("shots", "snr", "decoherence_time_us"),
            "ti_qm": ("heralds", "snr", "decoherence_time_us"),
            "chsh": ("trials", "snr", "decoherence_time_us"),
            "afc_sweep": ("t_start_ns", "t_stop_ns", "points"),
            "bandwidth_sweep": ("df_start_mhz", "df_stop_mhz", "points"),
        }.get(scen, ())
        for key in needed:
            if key not in sec:
                errors.append(f"scenarios.{scen}.{key}: missing")
    elif scen in SCENARIOS and scen != "budget":
        errors.append(f"scenarios.{scen}: section missing")


# ---------------------------------------------------------------------------
# derived builders used by the scenario runner


def pump_inputs(cfg: ExperimentConfig):
    """(level_offsets, windows, target, broadening, strengths, native_d, w_partial)."""
    sec = cfg.section("pump")
    ground = sec["ground_offsets"]
    excited = sec["excited_offsets"]
    offsets = {(g, e): ground[g] + excited[e] for g in ground for e in excited}
    strengths = {tuple(k.split(":")): v for k, v in sec["strengths"].items()}
    windows = [tuple(w) for w in sec["windows"]]
    return (offsets, windows, tuple(sec["target"]), sec["broadening_mhz"],
            strengths, dict(sec["native_d"]), sec.get("partial_weight", 0.5))


def rate_chains(cfg: ExperimentConfig) -> dict:
    """Named rate chains and efficiency stage lists from the rates section."""
    r = cfg.section("rates")
    pre = {"branching_sigma": 2.0 / 3.0}
    collection = [
        EfficiencyStage("p_pi", r["p_pi"]),
        EfficiencyStage("p_s12", r["p_s12"]),
        EfficiencyStage("t_fib1", r["t_fib1"]),
        EfficiencyStage("t_opt", r["t_opt"]),
        EfficiencyStage("e_obj", r["e_obj"]),
    ]
    # rate chains use the balanced (2.00 W) conversion efficiency; the
    # polarized pair only enters the per-stage efficiency table
    qfc = [
        EfficiencyStage("eta_369", r["eta_369"]),
        EfficiencyStage("eta_conv", r["eta_conv_h"]),
        EfficiencyStage("t_580", r["t_580"]),
        EfficiencyStage("t_fib2", r["t_fib2"]),
        EfficiencyStage("eta_aom", r["eta_aom"]),
    ]
    storage = cfg.section("storage")
    qm = [
        EfficiencyStage("eta_bw", r["eta_bw"]),
        EfficiencyStage.polarized("eta_storage", storage["eta_device_h"],
                                  storage["eta_device_v"]),
    ]
    chains = {
        "r_369": RateChain("r_369", r["r_exp1_hz"],
                           collection + [EfficiencyStage("qe_369", r["qe_369"])], pre),
        "r_580": RateChain("r_580", r["r_exp2_hz"],
                           collection + [EfficiencyStage("qe_580", r["qe_580"])] + qfc, pre),
        "r_ti_qm": RateChain("r_ti_qm", r["r_exp3_hz"],
                             collection + [EfficiencyStage("qe_580", r["qe_580"])] + qfc + qm,
                             pre),
    }
    overall = [
        EfficiencyStage("eta_369", r["eta_369"]),
        EfficiencyStage("t_580", r["t_580"]),
        EfficiencyStage("t_fib2", r["t_fib2"]),
        EfficiencyStage.polarized("eta_conv", r["eta_conv_h"], r["eta_conv_v"]),
        qm[0], qm[1],
        EfficiencyStage("eta_aom", r["eta_aom"]),
    ]
    return {"chains": chains, "qfc_stages": qfc, "qm_stages": qm,
            "overall_stages": overall}


def error_budget_rows(cfg: ExperimentConfig) -> list[ErrorSource]:
    """Default ledger: measured rows as published, modeled rows from the models."""
    from .ion import decoherence_infidelity
    from .photon import jitter_infidelity, pbs_bitflip_channel  # noqa: F401

    pipeline = cfg.section("pipeline")
    t_us = cfg.scenario_section("ti_qm")["decoherence_time_us"]
    computed = {
        "ion_decoherence": decoherence_infidelity(cfg.ion, t_us,
                                                  pipeline["decoherence_exponent_a"]),
        "jitter_phase": jitter_infidelity(cfg.jitter),
        "qfc": 1.0 - pipeline["qfc_process_fidelity"],
        "photon_detection_pbs": 1.0 / cfg.noise.pbs_extinction,
    }
    rows = []
    for entry in cfg.section("error_budget"):
        inf = entry["infidelity"]
        if inf is None:
            inf = computed[entry["name"]]
        rows.append(ErrorSource(name=entry["name"], infidelity=float(inf),
                                model_ref=entry.get("model_ref")))
    return rows
