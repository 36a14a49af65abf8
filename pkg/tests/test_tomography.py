"""Tomography tests: count simulation, MLE reconstruction, CHSH and
bootstrap error bars."""

import math

import numpy as np
import pytest

from hqlink.qstate import (
    DensityMatrix,
    Observable,
    bell_state,
    fidelity,
    maximally_mixed,
    tensor_product,
    trace_distance,
    werner,
)
from hqlink.rng import child_rng
from hqlink.tomography import (
    ChshSettings,
    CountRecord,
    MeasurementSetting,
    all_settings,
    bootstrap_uncertainty,
    born_probabilities,
    chsh,
    mle_reconstruct,
    records_from_probabilities,
    simulate_counts,
    simulate_tomography,
    split_heralds,
)


def random_state(rng, dim=4):
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    m = g @ g.conj().T
    return DensityMatrix(m / np.trace(m).real)


def random_pm1_observable(rng) -> Observable:
    n = rng.normal(size=3)
    n /= np.linalg.norm(n)
    sx = np.array([[0, 1], [1, 0]], dtype=complex)
    sy = np.array([[0, -1j], [1j, 0]], dtype=complex)
    sz = np.array([[1, 0], [0, -1]], dtype=complex)
    return Observable(n[0] * sx + n[1] * sy + n[2] * sz)


class TestSimulateCounts:
    def test_bell_zz_pattern(self):
        setting = MeasurementSetting("Z", "Z")
        p = born_probabilities(bell_state(0.0).density(), setting)
        np.testing.assert_allclose(p, [0.5, 0, 0, 0.5], atol=1e-12)
        rec = simulate_counts(bell_state(0.0).density(), setting, 1000, None, 5)
        assert rec.counts[1] == 0 and rec.counts[2] == 0
        assert rec.counts[0] + rec.counts[3] == 1000

    def test_maximally_mixed_uniform(self):
        rec = simulate_counts(maximally_mixed(4), MeasurementSetting("X", "Y"),
                              40000, None, 6)
        for c in rec.counts:
            assert c == pytest.approx(10000, abs=500)

    def test_snr_shifts_probabilities_toward_uniform(self):
        setting = MeasurementSetting("Z", "Z")
        p_clean = born_probabilities(bell_state(0.0).density(), setting)
        p_noisy = born_probabilities(bell_state(0.0).density(), setting, snr=28.0)
        mix = 1 / 29
        np.testing.assert_allclose(p_noisy, (1 - mix) * p_clean + mix * 0.25, atol=1e-12)

    def test_deterministic_per_seed(self):
        rho = werner(0.9)
        a = simulate_counts(rho, MeasurementSetting("X", "X"), 500, 28.0, 99)
        b = simulate_counts(rho, MeasurementSetting("X", "X"), 500, 28.0, 99)
        assert a.counts == b.counts

    def test_record_validation(self):
        with pytest.raises(ValueError):
            CountRecord(MeasurementSetting("Z", "Z"), (1, 2, 3, 4), 11)
        with pytest.raises(ValueError):
            CountRecord(MeasurementSetting("Z", "Z"), (-1, 2, 3, 6), 10)
        with pytest.raises(ValueError):
            MeasurementSetting("Q", "Z")


class TestMle:
    def test_flat_counts_recover_maximally_mixed(self):
        recs = simulate_tomography(maximally_mixed(4), 10 ** 6, None, child_rng(1, "flat"))
        est = mle_reconstruct(recs)
        assert trace_distance(est, maximally_mixed(4)) < 0.01

    def test_bell_exact_probabilities(self):
        recs = records_from_probabilities(bell_state(0.0).density())
        est = mle_reconstruct(recs)
        assert fidelity(est, bell_state(0.0)) >= 0.999

    def test_full_rank_states_recovered_exactly(self):
        rng = np.random.default_rng(14)
        for _ in range(10):
            rho = random_state(rng)
            est = mle_reconstruct(records_from_probabilities(rho))
            assert trace_distance(est, rho) < 1e-6

    def test_missing_setting_rejected(self):
        recs = records_from_probabilities(werner(0.5))[:-1]
        with pytest.raises(ValueError, match="missing settings"):
            mle_reconstruct(recs)

    def test_output_always_physical(self):
        # adversarial: everything in one outcome bucket per setting
        recs = [CountRecord(s, (50, 0, 0, 0), 50) for s in all_settings()]
        est = mle_reconstruct(recs)
        assert est.eigenvalues().min() >= -1e-9
        assert est.trace == pytest.approx(1.0, abs=1e-9)
        rng = np.random.default_rng(15)
        for _ in range(10):
            counts = rng.multinomial(30, [0.97, 0.01, 0.01, 0.01], size=9)
            recs = [CountRecord(s, tuple(int(x) for x in c), 30)
                    for s, c in zip(all_settings(), counts)]
            est = mle_reconstruct(recs)
            assert est.eigenvalues().min() >= -1e-9


class TestChsh:
    def test_tsirelson_point(self):
        s = chsh(bell_state(0.0).density(), ChshSettings.optimal())
        assert s == pytest.approx(2 * math.sqrt(2), abs=1e-9)

    def test_maximally_mixed(self):
        assert chsh(maximally_mixed(4), ChshSettings.optimal()) == pytest.approx(0.0, abs=1e-12)

    def test_werner_scaling(self):
        s = chsh(werner(0.823), ChshSettings.optimal())
        assert s == pytest.approx(2 * math.sqrt(2) * 0.823, abs=1e-9)
        assert s == pytest.approx(2.328, abs=0.002)

    def test_paper_stated_axes_cap_at_two(self):
        s = chsh(bell_state(0.0).density(), ChshSettings.paper_stated())
        assert s == pytest.approx(2.0, abs=1e-9)

    def test_linear_in_state(self):
        rng = np.random.default_rng(16)
        settings = ChshSettings.optimal()
        r1, r2 = random_state(rng), random_state(rng)
        alpha = 0.37
        mix = DensityMatrix(alpha * r1.matrix + (1 - alpha) * r2.matrix)
        assert chsh(mix, settings) == pytest.approx(
            alpha * chsh(r1, settings) + (1 - alpha) * chsh(r2, settings), abs=1e-10)

    def test_tsirelson_bound_random_states_and_settings(self):
        rng = np.random.default_rng(18)
        bound = 2 * math.sqrt(2) + 1e-9
        for _ in range(200):
            rho = random_state(rng)
            settings = ChshSettings(random_pm1_observable(rng), random_pm1_observable(rng),
                                    random_pm1_observable(rng), random_pm1_observable(rng))
            assert abs(chsh(rho, settings)) <= bound

    def test_product_states_respect_classical_bound(self):
        rng = np.random.default_rng(19)
        for _ in range(200):
            rho = tensor_product(random_state(rng, 2), random_state(rng, 2))
            settings = ChshSettings(random_pm1_observable(rng), random_pm1_observable(rng),
                                    random_pm1_observable(rng), random_pm1_observable(rng))
            assert abs(chsh(rho, settings)) <= 2.0 + 1e-9

    def test_deterministic_strategies_bounded_by_two(self):
        # fixed +-1 assignments: S = a0 b0 + a0 b1 + a1 b0 - a1 b1
        for bits in range(16):
            a0, a1, b0, b1 = (((bits >> k) & 1) * 2 - 1 for k in range(4))
            s = a0 * b0 + a0 * b1 + a1 * b0 - a1 * b1
            assert abs(s) <= 2


class TestBootstrap:
    def test_large_shot_concentration(self):
        recs = simulate_tomography(werner(0.88), 10 ** 6, None, child_rng(2, "big"))
        mean, std = bootstrap_uncertainty(recs, 100, "fidelity", child_rng(3, "bs"))
        assert std < 0.002
        assert mean == pytest.approx(fidelity(werner(0.88), bell_state(0.0)), abs=0.01)

    def test_resample_counts_agree_across_sizes(self):
        recs = simulate_tomography(werner(0.85), 2000, 28.0, child_rng(4, "mid"))
        m1, s1 = bootstrap_uncertainty(recs, 100, "fidelity", child_rng(5, "a"))
        m2, s2 = bootstrap_uncertainty(recs, 300, "fidelity", child_rng(5, "b"))
        assert abs(m1 - m2) <= max(s1, s2)

    def test_chsh_statistic(self):
        recs = simulate_tomography(werner(0.9), 20000, None, child_rng(6, "c"))
        mean, std = bootstrap_uncertainty(recs, 100, "chsh", child_rng(7, "d"))
        assert mean == pytest.approx(2 * math.sqrt(2) * 0.9, abs=0.05)
        assert std < 0.05

    def test_zero_shot_record_rejected(self):
        recs = records_from_probabilities(werner(0.5))
        broken = recs[:-1] + [CountRecord(recs[-1].setting, (0, 0, 0, 0), 0)]
        with pytest.raises(ValueError):
            bootstrap_uncertainty(broken, 100, "fidelity", 1)

    def test_too_few_resamples_rejected(self):
        recs = records_from_probabilities(werner(0.5))
        with pytest.raises(ValueError):
            bootstrap_uncertainty(recs, 50, "fidelity", 1)

    def test_deterministic_per_seed(self):
        recs = simulate_tomography(werner(0.85), 500, 28.0, child_rng(8, "e"))
        r1 = bootstrap_uncertainty(recs, 100, "fidelity", 42)
        r2 = bootstrap_uncertainty(recs, 100, "fidelity", 42)
        assert r1 == r2


def test_split_heralds():
    parts = split_heralds(1780)
    assert sum(parts) == 1780
    assert len(parts) == 9
    assert max(parts) - min(parts) <= 1


class TestRecordCsv:
    def test_round_trip(self):
        from hqlink.tomography import records_from_csv, records_to_csv
        recs = simulate_tomography(werner(0.8), 500, 28.0, child_rng(9, "csv"))
        back = records_from_csv(records_to_csv(recs))
        assert len(back) == 9
        for a, b in zip(recs, back):
            assert a.setting == b.setting
            assert tuple(a.counts) == tuple(b.counts)

    def test_bad_header_rejected(self):
        from hqlink.tomography import records_from_csv
        with pytest.raises(ValueError, match="header"):
            records_from_csv("who,what\n1,2\n")

    def test_malformed_row_rejected(self):
        from hqlink.tomography import records_from_csv
        text = "setting_ion,setting_photon,n_pp,n_pm,n_mp,n_mm\nZ,Z,1,2\n"
        with pytest.raises(ValueError, match="malformed"):
            records_from_csv(text)
