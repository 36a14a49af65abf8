"""Projective measurement simulation, maximum-likelihood state reconstruction,
CHSH evaluation and bootstrap error bars.

Measurements run on the 3x3 grid of mutually unbiased bases (Z, X, Y per
qubit), which is tomographically complete for two qubits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .photon import dark_noise_admixture
from .qstate import (
    PAULIS,
    DensityMatrix,
    Observable,
    StateError,
    X,
    Z,
    bell_state,
    expectation,
    fidelity,
)
from .rng import as_rng

AXES = ("Z", "X", "Y")
_AXIS_OP = {"Z": PAULIS[3], "X": PAULIS[1], "Y": PAULIS[2]}

OUTCOME_ORDER = ("++", "+-", "-+", "--")


class NonConvergenceError(RuntimeError):
    """MLE failed to converge; carries the final gradient norm."""

    def __init__(self, message: str, gradient_norm: float):
        super().__init__(message)
        self.gradient_norm = gradient_norm


@dataclass(frozen=True)
class MeasurementSetting:
    """One ion-axis / photon-axis pair from the MUB grid."""

    ion_axis: str
    photon_axis: str

    def __post_init__(self):
        for axis in (self.ion_axis, self.photon_axis):
            if axis not in AXES:
                raise ValueError(f"axis {axis!r} not in {AXES}")


def all_settings() -> list[MeasurementSetting]:
    return [MeasurementSetting(a, b) for a in AXES for b in AXES]


def setting_projectors(setting: MeasurementSetting) -> np.ndarray:
    """The four joint eigenprojectors of the setting, ordered ++, +-, -+, --."""
    out = []
    for si in (+1, -1):
        pi = (np.eye(2) + si * _AXIS_OP[setting.ion_axis]) / 2
        for sp in (+1, -1):
            pp = (np.eye(2) + sp * _AXIS_OP[setting.photon_axis]) / 2
            out.append(np.kron(pi, pp))
    return np.array(out)


@dataclass(frozen=True)
class CountRecord:
    """Outcome counts for one measurement setting.

    Counts are integers when sampled; fractional counts are accepted so exact
    outcome probabilities can be fed to the estimator directly.
    """

    setting: MeasurementSetting
    counts: tuple
    shots: float

    def __post_init__(self):
        counts = tuple(float(c) for c in self.counts)
        if len(counts) != 4:
            raise ValueError("expected 4 outcome counts")
        if any(c < 0 for c in counts):
            raise ValueError("counts must be nonnegative")
        if abs(sum(counts) - self.shots) > 1e-6:
            raise ValueError(f"counts sum {sum(counts)} != shots {self.shots}")
        object.__setattr__(self, "counts", counts)

    def frequencies(self) -> np.ndarray:
        if self.shots <= 0:
            raise ValueError("record has zero shots")
        return np.array(self.counts) / self.shots


def born_probabilities(rho: DensityMatrix, setting: MeasurementSetting,
                       snr: float | None = None) -> np.ndarray:
    """Outcome probabilities, optionally after the dark-noise admixture."""
    state = rho if snr is None or math.isinf(snr) else dark_noise_admixture(rho, snr)
    projs = setting_projectors(setting)
    p = np.real(np.einsum("nij,ji->n", projs, state.matrix))
    p = np.clip(p, 0.0, None)
    return p / p.sum()


def simulate_counts(rho: DensityMatrix, setting: MeasurementSetting, shots: int,
                    snr: float | None, rng_seed) -> CountRecord:
    """Multinomial sampling of one setting; deterministic for a fixed seed."""
    if shots <= 0:
        raise ValueError("shots must be positive")
    rng = as_rng(rng_seed)
    p = born_probabilities(rho, setting, snr)
    counts = rng.multinomial(shots, p)
    return CountRecord(setting=setting, counts=tuple(int(c) for c in counts), shots=shots)


def simulate_tomography(rho: DensityMatrix, shots_per_setting, snr: float | None,
                        rng_seed) -> list[CountRecord]:
    """Counts for the full 9-setting grid.

    ``shots_per_setting`` is an int applied to every setting or a mapping from
    (ion_axis, photon_axis) to shots.
    """
    rng = as_rng(rng_seed)
    records = []
    for setting in all_settings():
        if isinstance(shots_per_setting, dict):
            shots = shots_per_setting[(setting.ion_axis, setting.photon_axis)]
        else:
            shots = int(shots_per_setting)
        records.append(simulate_counts(rho, setting, shots, snr, rng))
    return records


def split_heralds(total: int, n_settings: int = 9) -> list[int]:
    """Divide a herald budget as evenly as possible across settings."""
    base, extra = divmod(int(total), n_settings)
    return [base + (1 if i < extra else 0) for i in range(n_settings)]


# ---------------------------------------------------------------------------
# maximum-likelihood reconstruction


def _collect(records: list[CountRecord]):
    seen = {(r.setting.ion_axis, r.setting.photon_axis) for r in records}
    missing = [(a, b) for a in AXES for b in AXES if (a, b) not in seen]
    if missing:
        raise ValueError(f"missing settings: {missing}")
    projs, counts = [], []
    for r in records:
        if r.shots <= 0:
            raise ValueError("every record needs positive shots")
        projs.append(setting_projectors(r.setting))
        counts.append(np.array(r.counts, dtype=float))
    return np.concatenate(projs), np.concatenate(counts)


def _log_likelihood(counts: np.ndarray, probs: np.ndarray) -> float:
    mask = counts > 0
    return float(counts[mask] @ np.log(probs[mask]))


def mle_reconstruct(records: list[CountRecord], tol: float = 1e-10,
                    step_tol: float = 5e-11, max_iters: int = 10000) -> DensityMatrix:
    """Maximum-likelihood two-qubit state from the 9-setting counts.

    Iterates the R rho R fixed point; when a full step lowers the likelihood
    it falls back to the diluted step (I + eps R) rho (I + eps R) with
    eps = 0.1, which restores monotonicity.  Convergence requires both the
    relative log-likelihood gain below ``tol`` and the iterate movement
    (trace distance per step) below ``step_tol``.
    """
    projs, counts = _collect(records)
    n_total = counts.sum()
    rho = np.eye(4, dtype=complex) / 4
    ll = None
    for _ in range(max_iters):
        probs = np.clip(np.real(np.einsum("nij,ji->n", projs, rho)), 1e-15, None)
        r_op = np.einsum("n,nij->ij", counts / (n_total * probs), projs)
        candidate = r_op @ rho @ r_op
        candidate /= np.trace(candidate).real
        cand_probs = np.clip(np.real(np.einsum("nij,ji->n", projs, candidate)), 1e-15, None)
        new_ll = _log_likelihood(counts, cand_probs)
        if ll is not None and new_ll < ll:
            # oscillating fixed point: diluted step keeps the ascent monotone
            eps = 0.1
            step = np.eye(4) + eps * r_op
            candidate = step @ rho @ step.conj().T
            candidate /= np.trace(candidate).real
            cand_probs = np.clip(np.real(np.einsum("nij,ji->n", projs, candidate)), 1e-15, None)
            new_ll = _log_likelihood(counts, cand_probs)
        moved = 0.5 * np.abs(np.linalg.eigvalsh(candidate - rho)).sum()
        ll_flat = ll is not None and abs(new_ll - ll) <= tol * max(abs(ll), 1.0)
        rho, ll = candidate, new_ll
        if ll_flat and moved <= step_tol:
            rho = (rho + rho.conj().T) / 2
            return DensityMatrix(rho)
    # fixed point is crawling; finish with gradient ascent on the Cholesky
    # parameters, which handles the nearly-flat directions directly
    polished = _polish_cholesky(projs, counts, rho)
    if polished is not None:
        return polished
    grad = np.linalg.norm(_mle_gradient(projs, counts, rho))
    raise NonConvergenceError(
        f"MLE did not converge in {max_iters} iterations (gradient norm {grad:.3e})", grad)


def _pack_lower(t: np.ndarray) -> np.ndarray:
    x = []
    for i in range(4):
        x.append(t[i, i].real)
        for j in range(i):
            x.extend((t[i, j].real, t[i, j].imag))
    return np.array(x)


def _unpack_lower(x: np.ndarray) -> np.ndarray:
    t = np.zeros((4, 4), dtype=complex)
    k = 0
    for i in range(4):
        t[i, i] = x[k]
        k += 1
        for j in range(i):
            t[i, j] = x[k] + 1j * x[k + 1]
            k += 2
    return t


def _polish_cholesky(projs, counts, rho) -> DensityMatrix | None:
    """Maximize the likelihood over rho = T T^dag / tr with T lower-triangular.

    Analytic gradient: dLL/dT* = (R_c - C I) T / tr(T T^dag) with
    R_c = sum_n (c_n / p_n) Pi_n and C the total count.
    """
    total = counts.sum()

    def neg_ll_and_grad(x):
        t = _unpack_lower(x)
        m = t @ t.conj().T
        norm = np.trace(m).real
        if norm <= 0:
            return np.inf, np.zeros_like(x)
        probs = np.clip(np.real(np.einsum("nij,ji->n", projs, m)) / norm, 1e-15, None)
        nll = -float(counts[counts > 0] @ np.log(probs[counts > 0]))
        r_c = np.einsum("n,nij->ij", counts / probs, projs)
        g_t = -((r_c - total * np.eye(4)) @ t) / norm
        grad = []
        for i in range(4):
            grad.append(2 * g_t[i, i].real)
            for j in range(i):
                grad.extend((2 * g_t[i, j].real, 2 * g_t[i, j].imag))
        return nll, np.array(grad)

    w, v = np.linalg.eigh((rho + rho.conj().T) / 2)
    seed = v @ np.diag(np.sqrt(np.clip(w, 1e-12, None))) @ v.conj().T
    x0 = _pack_lower(np.linalg.cholesky(seed @ seed.conj().T + 1e-14 * np.eye(4)))
    res = optimize.minimize(neg_ll_and_grad, x0, jac=True, method="L-BFGS-B",
                            options={"maxiter": 2000, "ftol": 1e-18, "gtol": 1e-14})
    t = _unpack_lower(res.x)
    m = t @ t.conj().T
    norm = np.trace(m).real
    if norm <= 0 or not np.isfinite(norm):
        return None
    return DensityMatrix(m / norm)


def _mle_gradient(projs, counts, rho) -> np.ndarray:
    probs = np.clip(np.real(np.einsum("nij,ji->n", projs, rho)), 1e-15, None)
    r_op = np.einsum("n,nij->ij", counts / (counts.sum() * probs), projs)
    return (r_op @ rho + rho @ r_op) / 2 - rho  # zero at the fixed point


def records_from_probabilities(rho: DensityMatrix, shots: float = 1.0,
                               snr: float | None = None) -> list[CountRecord]:
    """Exact-probability records (fractional counts), for estimator oracles."""
    out = []
    for setting in all_settings():
        p = born_probabilities(rho, setting, snr)
        out.append(CountRecord(setting=setting, counts=tuple(p * shots), shots=shots))
    return out


def records_to_csv(records: list[CountRecord]) -> str:
    """CSV export: setting_ion, setting_photon, n_pp, n_pm, n_mp, n_mm."""
    lines = ["setting_ion,setting_photon,n_pp,n_pm,n_mp,n_mm"]
    for r in records:
        counts = ",".join(f"{c:.15g}" for c in r.counts)
        lines.append(f"{r.setting.ion_axis},{r.setting.photon_axis},{counts}")
    return "\n".join(lines) + "\n"


def records_from_csv(text: str) -> list[CountRecord]:
    """Parse the CSV layout written by records_to_csv."""
    lines = [ln for ln in text.strip().splitlines() if ln]
    if not lines or lines[0] != "setting_ion,setting_photon,n_pp,n_pm,n_mp,n_mm":
        raise ValueError("unrecognized count-record CSV header")
    records = []
    for ln in lines[1:]:
        parts = ln.split(",")
        if len(parts) != 6:
            raise ValueError(f"malformed count row: {ln!r}")
        setting = MeasurementSetting(parts[0], parts[1])
        counts = tuple(float(p) for p in parts[2:])
        records.append(CountRecord(setting=setting, counts=counts, shots=sum(counts)))
    return records


# ---------------------------------------------------------------------------
# CHSH


EIGVAL_TOL = 1e-9


@dataclass(frozen=True)
class ChshSettings:
    """Four dichotomic observables; each must have eigenvalues +-1."""

    a0: Observable
    a1: Observable
    b0: Observable
    b1: Observable

    def __post_init__(self):
        for name in ("a0", "a1", "b0", "b1"):
            obs = getattr(self, name)
            if obs.dim != 2:
                raise StateError(f"{name} must be a single-qubit observable")
            evals = np.linalg.eigvalsh(obs.matrix)
            if np.max(np.abs(np.abs(evals) - 1.0)) > EIGVAL_TOL:
                raise StateError(f"{name} eigenvalues {evals} are not +-1")

    @classmethod
    def from_angles(cls, a0: float, a1: float, b0: float, b1: float) -> "ChshSettings":
        """Observables cos(theta) Z + sin(theta) X at the given angles."""
        def obs(theta):
            return Observable(math.cos(theta) * Z + math.sin(theta) * X)
        return cls(obs(a0), obs(a1), obs(b0), obs(b1))

    @classmethod
    def optimal(cls) -> "ChshSettings":
        """Tsirelson-optimal angles for the phase-zero entangled state."""
        return cls.from_angles(0.0, math.pi / 2, math.pi / 4, -math.pi / 4)

    @classmethod
    def paper_stated(cls) -> "ChshSettings":
        """Ion X/Z with photon Z/X analyzers; bounded by 2 on any state."""
        return cls.from_angles(math.pi / 2, 0.0, 0.0, math.pi / 2)

    def pairs(self):
        return ((self.a0, self.b0, +1), (self.a0, self.b1, +1),
                (self.a1, self.b0, +1), (self.a1, self.b1, -1))


def chsh(rho: DensityMatrix, s: ChshSettings) -> float:
    """S = <A0 B0> + <A0 B1> + <A1 B0> - <A1 B1>."""
    total = 0.0
    for a, b, sign in s.pairs():
        joint = Observable(np.kron(a.matrix, b.matrix))
        total += sign * expectation(rho, joint)
    return total


def simulate_chsh(rho: DensityMatrix, s: ChshSettings, shots_total: int,
                  snr: float | None, rng_seed) -> tuple[float, float]:
    """Sampled CHSH value and its standard error, shots split over 4 settings."""
    rng = as_rng(rng_seed)
    shots_each = split_heralds(shots_total, 4)
    total, var = 0.0, 0.0
    for (a, b, sign), shots in zip(s.pairs(), shots_each):
        if shots <= 0:
            raise ValueError("need at least one shot per CHSH setting")
        state = rho if snr is None or math.isinf(snr) else dark_noise_admixture(rho, snr)
        probs, values = _joint_outcome_table(state, a, b)
        counts = rng.multinomial(shots, probs)
        e = float(counts @ values) / shots
        total += sign * e
        var += (1 - e * e) / shots
    return total, math.sqrt(var)


def _joint_outcome_table(state: DensityMatrix, a: Observable, b: Observable):
    wa, va = np.linalg.eigh(a.matrix)
    wb, vb = np.linalg.eigh(b.matrix)
    probs, values = [], []
    for i in range(2):
        pa = np.outer(va[:, i], va[:, i].conj())
        for j in range(2):
            pb = np.outer(vb[:, j], vb[:, j].conj())
            probs.append(float(np.real(np.trace(np.kron(pa, pb) @ state.matrix))))
            values.append(float(np.sign(wa[i]) * np.sign(wb[j])))
    probs = np.clip(np.array(probs), 0, None)
    return probs / probs.sum(), np.array(values)


# ---------------------------------------------------------------------------
# bootstrap


def bootstrap_uncertainty(records: list[CountRecord], n_resamples: int,
                          statistic: str, rng_seed,
                          chsh_settings: ChshSettings | None = None) -> tuple[float, float]:
    """Multinomial-resampling error bar for a tomography statistic.

    ``statistic`` is "fidelity" (against the phase-zero target) or "chsh"
    (at the given or optimal settings).  Returns (mean, sample stddev) over
    the resampled estimates; deterministic per seed.
    """
    if n_resamples < 100:
        raise ValueError("need at least 100 resamples")
    if statistic not in ("fidelity", "chsh"):
        raise ValueError(f"unknown statistic {statistic!r}")
    if any(r.shots <= 0 for r in records):
        raise ValueError("degenerate record with zero shots")
    settings = chsh_settings or ChshSettings.optimal()
    target = bell_state(0.0)
    rng = as_rng(rng_seed)
    estimates = np.empty(n_resamples)
    for i in range(n_resamples):
        resampled = []
        for r in records:
            counts = rng.multinomial(int(round(r.shots)), r.frequencies())
            resampled.append(CountRecord(setting=r.setting,
                                         counts=tuple(int(c) for c in counts),
                                         shots=int(round(r.shots))))
        rho = mle_reconstruct(resampled)
        if statistic == "fidelity":
            estimates[i] = fidelity(rho, target)
        else:
            estimates[i] = chsh(rho, settings)
    return float(estimates.mean()), float(estimates.std(ddof=1))
