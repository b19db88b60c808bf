import json

import numpy as np
import pytest

from fourphoton import (
    CannotCorrectError,
    DetectorBank,
    canonical_psi4,
    computational,
    correlation_exact,
    dump_frames_csv,
    dump_scan_csv,
    efficiency_correct,
    equatorial,
    events_from_hours,
    fit_scan,
    load_frames_csv,
    optimal_settings,
    run_bell,
    run_manifest,
    run_scan,
    sample_frame,
)

STATE = canonical_psi4()
DIAG = (equatorial(0.0),) * 4


def test_detector_bank_shapes_and_survival():
    bank = DetectorBank.ideal()
    assert np.array_equal(bank.survival(), np.ones(16))
    bank = DetectorBank(np.array([[0.5, 1.0], [1, 1], [1, 1], [1, 1.0]]))
    surv = bank.survival()
    # outcomes with arm a transmitted (+1) survive with 0.5, the rest fully
    for i in range(16):
        expected = 0.5 if (i >> 3) & 1 == 0 else 1.0
        assert abs(surv[i] - expected) < 1e-15
    with pytest.raises(ValueError):
        DetectorBank(np.full((4, 2), 1.2))
    with pytest.raises(ValueError):
        DetectorBank(np.ones((2, 4)))


def test_bank_json_round_trip():
    bank = DetectorBank(np.array([[0.53, 0.61], [0.72, 0.44], [0.99, 1.0], [0.5, 0.5]]))
    back = DetectorBank.from_json(bank.to_json())
    assert np.array_equal(back.efficiencies, bank.efficiencies)
    assert back.to_json() == bank.to_json()


def test_sample_frame_determinism_and_bounds():
    bank = DetectorBank(np.full((4, 2), 0.8))
    a = sample_frame(STATE, DIAG, visibility=0.9, bank=bank, n_emissions=5000, seed=3)
    b = sample_frame(STATE, DIAG, visibility=0.9, bank=bank, n_emissions=5000, seed=3)
    assert np.array_equal(a.counts, b.counts)
    c = sample_frame(STATE, DIAG, visibility=0.9, bank=bank, n_emissions=5000, seed=4)
    assert not np.array_equal(a.counts, c.counts)
    assert a.counts.sum() <= a.n_emissions
    # frame index shifts the stream without touching the seed
    d = sample_frame(STATE, DIAG, visibility=0.9, bank=bank, n_emissions=5000, seed=3, frame_index=1)
    assert not np.array_equal(a.counts, d.counts)


def test_sample_frame_ideal_counts_follow_born_rule():
    n = 200_000
    frame = sample_frame(STATE, DIAG, visibility=1.0, bank=DetectorBank.ideal(), n_emissions=n, seed=11)
    assert frame.counts.sum() == n
    rates = frame.counts / n
    # forbidden outcomes never fire, allowed ones sit within 5 sigma
    from fourphoton.states import outcome_distribution

    probs = outcome_distribution(STATE, DIAG)
    for i in range(16):
        if probs[i] < 1e-12:
            assert frame.counts[i] == 0
        else:
            sigma = np.sqrt(probs[i] * (1 - probs[i]) / n)
            assert abs(rates[i] - probs[i]) < 5 * sigma


def test_uniform_loss_thins_every_outcome():
    n = 100_000
    eta = 0.8
    bank = DetectorBank(np.full((4, 2), eta))
    frame = sample_frame(STATE, DIAG, visibility=0.0, bank=bank, n_emissions=n, seed=21)
    expected = eta**4
    sigma = np.sqrt(expected * (1 - expected) / n)
    assert abs(frame.counts.sum() / n - expected) < 5 * sigma


def test_single_arm_loss_at_zero_visibility():
    # with a flat outcome mixture, half the events see the lossy port
    n = 100_000
    bank = DetectorBank(np.array([[0.6, 1.0], [1, 1], [1, 1], [1, 1.0]]))
    frame = sample_frame(STATE, DIAG, visibility=0.0, bank=bank, n_emissions=n, seed=22)
    expected = 0.5 * 0.6 + 0.5 * 1.0
    sigma = np.sqrt(expected * (1 - expected) / n)
    assert abs(frame.counts.sum() / n - expected) < 5 * sigma


def test_efficiency_correction_neutral_for_ideal_bank():
    counts = np.arange(16.0)
    corrected = efficiency_correct(counts, DetectorBank.ideal())
    assert np.max(np.abs(corrected - counts)) < 1e-12


def test_efficiency_correction_restores_rates():
    bank = DetectorBank(np.array([[1.0, 0.5], [1.0, 0.5], [1.0, 0.5], [1.0, 0.5]]))
    n = 400_000
    frame = sample_frame(STATE, DIAG, visibility=1.0, bank=bank, n_emissions=n, seed=31)
    corrected = efficiency_correct(frame.counts, bank)
    from fourphoton.states import outcome_distribution

    probs = outcome_distribution(STATE, DIAG)
    rates = corrected / corrected.sum()
    for i in range(16):
        if probs[i] > 1e-12:
            assert abs(rates[i] - probs[i]) < 6 * np.sqrt(probs[i] / frame.counts.sum())
    assert abs(corrected.sum() - frame.counts.sum()) < 1e-6


def test_efficiency_correction_errors():
    with pytest.raises(CannotCorrectError):
        efficiency_correct(np.ones(16), DetectorBank(np.array([[0.0, 1.0], [1, 1], [1, 1], [1, 1.0]])))
    with pytest.raises(ValueError):
        efficiency_correct(np.ones(4), DetectorBank.ideal())
    assert np.array_equal(efficiency_correct(np.zeros(16), DetectorBank.ideal()), np.zeros(16))


def test_run_scan_fit_recovers_visibility():
    phis = np.linspace(0.0, 2.0 * np.pi, 13)
    dataset = run_scan(STATE, phis, visibility=0.85, bank=DetectorBank.ideal(), events_per_point=2000, seed=41)
    assert len(dataset.frames) == 13
    fit = fit_scan(dataset.phis, dataset.values(), dataset.sigmas())
    assert abs(fit.visibility - 0.85) < 4.0 * fit.visibility_error
    assert abs(fit.phase_offset) < 4.0 * fit.phase_offset_error


def test_run_scan_requires_increasing_phis():
    with pytest.raises(ValueError):
        run_scan(STATE, np.array([0.0, 0.0, 1.0]), visibility=1.0, bank=DetectorBank.ideal(), events_per_point=10, seed=1)


def test_scan_csv_round_trip():
    phis = np.linspace(0.0, np.pi, 5)
    dataset = run_scan(STATE, phis, visibility=0.9, bank=DetectorBank.ideal(), events_per_point=500, seed=43)
    text = dump_scan_csv(dataset)
    lines = text.strip().splitlines()
    assert lines[0] == "phi_a,E,sigma"
    assert len(lines) == 6
    first = lines[1].split(",")
    assert abs(float(first[0]) - phis[0]) < 1e-11
    assert abs(float(first[1]) - dataset.values()[0]) < 1e-11


def test_run_bell_exact_limit():
    # huge frames pin the sampled S near the exact visibility-scaled value
    result = run_bell(STATE, optimal_settings(), visibility=1.0, bank=DetectorBank.ideal(), events_per_frame=200_000, seed=51)
    s_exact = 4.0 * np.sqrt(2.0) / 3.0
    assert abs(result.s_value - s_exact) <= 3.0 * result.s_error
    assert result.s_error < 0.01
    assert len(result.frames) == 16
    assert not result.corrected


def test_run_bell_determinism():
    kwargs = dict(visibility=0.8, bank=DetectorBank.ideal(), events_per_frame=300, seed=52)
    a = run_bell(STATE, optimal_settings(), **kwargs)
    b = run_bell(STATE, optimal_settings(), **kwargs)
    assert a.s_value == b.s_value
    assert a.s_error == b.s_error
    for fa, fb in zip(a.frames, b.frames):
        assert np.array_equal(fa.counts, fb.counts)


def test_run_bell_corrected_uses_same_frames():
    bank = DetectorBank(np.array([[1.0, 0.5]] * 4))
    raw = run_bell(STATE, optimal_settings(), visibility=1.0, bank=bank, events_per_frame=2000, seed=53)
    cor = run_bell(STATE, optimal_settings(), visibility=1.0, bank=bank, events_per_frame=2000, seed=53, corrected=True)
    for fa, fb in zip(raw.frames, cor.frames):
        assert np.array_equal(fa.counts, fb.counts)
    assert cor.corrected
    assert cor.s_value != raw.s_value


def test_events_from_hours():
    assert events_from_hours(4.0) == 600
    assert events_from_hours(1.0, rate_per_hour=100.0) == 100
    with pytest.raises(ValueError):
        events_from_hours(-1.0)


def test_frames_csv_round_trip():
    result = run_bell(STATE, optimal_settings(), visibility=0.9, bank=DetectorBank.ideal(), events_per_frame=400, seed=54)
    text = dump_frames_csv(result.frames)
    back = load_frames_csv(text)
    assert len(back) == len(result.frames)
    for fa, fb in zip(result.frames, back):
        assert np.array_equal(fa.counts, fb.counts)
        for sa, sb in zip(fa.settings, fb.settings):
            assert sa.kind == sb.kind
            assert abs(sa.phi - sb.phi) < 1e-11
    assert dump_frames_csv(back) == text


def test_run_manifest_is_stable_json():
    bank = DetectorBank.ideal()
    text = run_manifest(seed=7, visibility=0.793, bank=bank, settings=optimal_settings(), events=600)
    obj = json.loads(text)
    assert obj["seed"] == 7
    assert obj["events"] == 600
    assert run_manifest(seed=7, visibility=0.793, bank=bank, settings=optimal_settings(), events=600) == text
