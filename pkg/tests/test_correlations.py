import numpy as np
import pytest

from fourphoton import (
    BellSettings,
    EmptyFrameError,
    ETable,
    UnderdeterminedFitError,
    bell_error,
    bell_functional,
    canonical_psi4,
    correlation_closed_form,
    correlation_estimate,
    correlation_exact,
    critical_visibility,
    dump_etable_csv,
    dump_settings_csv,
    etable_from_function,
    fit_scan,
    ghz4,
    ghz_correlation,
    load_etable_csv,
    load_settings_csv,
    optimal_settings,
    settings_search,
    state_correlation,
)

S_MAX = 4.0 * np.sqrt(2.0) / 3.0


def test_closed_form_special_points():
    # all analyzers at zero: perfect correlation
    assert abs(correlation_closed_form(np.zeros(4)) - 1.0) < 1e-12
    # single-arm scan with the rest at zero collapses to cos(phi)
    for phi in np.linspace(0.0, 2.0 * np.pi, 100):
        e = correlation_closed_form(np.array([phi, 0.0, 0.0, 0.0]))
        assert abs(e - np.cos(phi)) < 1e-12


def test_closed_form_matches_born_rule():
    state = canonical_psi4()
    rng = np.random.default_rng(31415)
    quads = rng.uniform(-np.pi, np.pi, size=(500, 4))
    closed = correlation_closed_form(quads)
    for quad, c in zip(quads, closed):
        assert abs(c - correlation_exact(state, quad)) < 1e-12


def test_state_correlation_callable_matches_exact():
    state = canonical_psi4()
    corr = state_correlation(state)
    rng = np.random.default_rng(99)
    quads = rng.uniform(-np.pi, np.pi, size=(64, 4))
    vec = corr(quads)
    for quad, v in zip(quads, vec):
        assert abs(v - correlation_exact(state, quad)) < 1e-12


def test_ghz_correlation():
    rng = np.random.default_rng(7)
    for _ in range(50):
        quad = rng.uniform(-np.pi, np.pi, 4)
        expected = np.cos(quad[0] + quad[1] - quad[2] - quad[3])
        assert abs(ghz_correlation(quad) - expected) < 1e-12
        assert abs(correlation_exact(ghz4(), quad) - expected) < 1e-12


def test_visibility_scales_linearly():
    state = canonical_psi4()
    quad = np.array([0.3, -0.7, 1.2, 0.4])
    e1 = correlation_exact(state, quad, visibility=1.0)
    for v in (0.0, 0.25, 0.5, 0.793, 1.0):
        assert abs(correlation_exact(state, quad, visibility=v) - v * e1) < 1e-12
    with pytest.raises(ValueError):
        correlation_exact(state, quad, visibility=1.5)


def test_bell_functional_at_documented_settings():
    table = etable_from_function(correlation_closed_form, optimal_settings())
    assert abs(bell_functional(table) - S_MAX) < 1e-12
    ghz_table = etable_from_function(ghz_correlation, optimal_settings())
    assert abs(bell_functional(ghz_table) - np.sqrt(8.0)) < 1e-12


def test_bell_functional_scales_with_visibility():
    settings = optimal_settings()
    for v in (0.25, 0.5, 0.793):
        table = etable_from_function(
            lambda quad: v * correlation_closed_form(quad), settings
        )
        assert abs(bell_functional(table) - v * S_MAX) < 1e-12


def test_critical_visibility():
    settings = optimal_settings()
    assert abs(critical_visibility(settings, correlation_closed_form) - 3.0 / (4.0 * np.sqrt(2.0))) < 1e-12
    assert abs(critical_visibility(settings, ghz_correlation) - 1.0 / np.sqrt(8.0)) < 1e-12


def test_settings_search_recovers_maximum():
    found, s = settings_search(correlation_closed_form, resolution=np.pi / 4)
    assert abs(s - S_MAX) < 1e-9
    table = etable_from_function(correlation_closed_form, found)
    assert abs(bell_functional(table) - s) < 1e-12


def test_settings_search_is_deterministic():
    a, sa = settings_search(correlation_closed_form, resolution=np.pi / 4)
    b, sb = settings_search(correlation_closed_form, resolution=np.pi / 4)
    assert sa == sb
    assert np.array_equal(a.phases, b.phases)


def test_settings_search_finer_grid_does_not_regress():
    _, s_coarse = settings_search(correlation_closed_form, resolution=np.pi / 4)
    _, s_fine = settings_search(correlation_closed_form, resolution=np.pi / 12)
    assert s_fine >= s_coarse - 1e-12
    with pytest.raises(ValueError):
        settings_search(correlation_closed_form, resolution=1.0)  # does not divide 2 pi


def test_local_deterministic_models_sit_on_the_bound():
    # every deterministic assignment of +-1 per arm and setting gives S = 1
    for code in range(256):
        bits = [(code >> i) & 1 for i in range(8)]
        values = np.empty((2, 2, 2, 2))
        for k in range(2):
            for l in range(2):
                for m in range(2):
                    for n in range(2):
                        signs = (
                            1 - 2 * bits[0 + k], 1 - 2 * bits[2 + l],
                            1 - 2 * bits[4 + m], 1 - 2 * bits[6 + n],
                        )
                        values[k, l, m, n] = np.prod(signs)
        assert abs(bell_functional(ETable(values)) - 1.0) < 1e-12


def test_local_mixtures_stay_below_the_bound():
    rng = np.random.default_rng(2718)
    for _ in range(300):
        n_models = rng.integers(2, 6)
        weights = rng.dirichlet(np.ones(n_models))
        values = np.zeros((2, 2, 2, 2))
        for w in weights:
            signs = rng.choice([-1.0, 1.0], size=(4, 2))
            for k in range(2):
                for l in range(2):
                    for m in range(2):
                        for n in range(2):
                            values[k, l, m, n] += w * signs[0, k] * signs[1, l] * signs[2, m] * signs[3, n]
        assert bell_functional(ETable(values)) <= 1.0 + 1e-9


def test_correlation_estimate():
    counts = np.zeros(16, dtype=np.int64)
    counts[0] = 75  # ++++ , parity +1
    counts[1] = 25  # +++- , parity -1
    est = correlation_estimate(counts)
    assert est.n_events == 100
    assert abs(est.value - 0.5) < 1e-12
    assert abs(est.std_error - np.sqrt((1.0 - 0.25) / 100.0)) < 1e-12
    with pytest.raises(EmptyFrameError):
        correlation_estimate(np.zeros(16, dtype=np.int64))


def test_estimator_converges_to_exact_value():
    # binomial sampling of one correlation at a known parity probability
    rng = np.random.default_rng(123)
    e_true = 2.0 / 3.0
    p_plus = (1.0 + e_true) / 2.0
    n = 10_000
    covered = 0
    trials = 500
    for _ in range(trials):
        plus = rng.binomial(n, p_plus)
        counts = np.zeros(16, dtype=np.int64)
        counts[0] = plus
        counts[1] = n - plus
        est = correlation_estimate(counts)
        if abs(est.value - e_true) <= 3.0 * est.std_error:
            covered += 1
    assert covered >= int(0.99 * trials) - 5


def test_bell_error_gradient():
    settings = optimal_settings()
    values = etable_from_function(correlation_closed_form, settings).values
    errors = np.full((2, 2, 2, 2), 0.01)
    table = ETable(values, errors)
    # every inner sign sum is well resolved here, so the sixteen gradient
    # weights are +-1/16 and the error has a closed form
    expected = np.sqrt(np.sum((np.ones(16) / 16.0) ** 2 * 0.01**2)) * 4.0
    assert abs(bell_error(table) - expected) < 1e-12
    with pytest.raises(ValueError):
        bell_error(ETable(values, None))


def test_fit_scan_recovers_parameters():
    rng = np.random.default_rng(77)
    phis = np.linspace(0.0, 2.0 * np.pi, 13)
    truth = 0.82 * np.cos(phis - 0.15) + 0.03
    sigmas = np.full(13, 0.02)
    values = truth + rng.normal(0.0, 0.02, 13)
    fit = fit_scan(phis, values, sigmas)
    assert abs(fit.visibility - 0.82) < 4.0 * fit.visibility_error
    assert abs(fit.phase_offset - 0.15) < 4.0 * fit.phase_offset_error
    assert abs(fit.offset - 0.03) < 4.0 * fit.offset_error


def test_fit_scan_exact_data_is_reproduced():
    phis = np.linspace(0.0, 2.0 * np.pi, 9)
    values = 0.6 * np.cos(phis + 0.4) - 0.01
    fit = fit_scan(phis, values)
    assert abs(fit.visibility - 0.6) < 1e-10
    assert abs(fit.phase_offset + 0.4) < 1e-10
    assert abs(fit.offset + 0.01) < 1e-10


def test_fit_scan_underdetermined():
    with pytest.raises(UnderdeterminedFitError):
        fit_scan(np.array([0.0, 1.0]), np.array([0.5, 0.1]))
    with pytest.raises(UnderdeterminedFitError):
        fit_scan(np.array([0.0, 0.0, 0.0, 0.0]), np.array([0.5, 0.5, 0.5, 0.5]))


def test_etable_csv_round_trip():
    settings = optimal_settings()
    table = etable_from_function(correlation_closed_form, settings)
    text = dump_etable_csv(table)
    back = load_etable_csv(text)
    assert np.max(np.abs(back.values - table.values)) < 1e-11
    assert back.errors is None
    with_err = ETable(table.values, np.full((2, 2, 2, 2), 0.025))
    text2 = dump_etable_csv(with_err)
    back2 = load_etable_csv(text2)
    assert np.max(np.abs(back2.errors - 0.025)) < 1e-12
    assert dump_etable_csv(back2) == text2


def test_etable_csv_rejects_bad_input():
    with pytest.raises(ValueError):
        load_etable_csv("nope\n")
    good = dump_etable_csv(etable_from_function(correlation_closed_form, optimal_settings()))
    truncated = "\n".join(good.splitlines()[:-2]) + "\n"
    with pytest.raises(ValueError):
        load_etable_csv(truncated)


def test_settings_csv_round_trip():
    settings = optimal_settings()
    text = dump_settings_csv(settings)
    back = load_settings_csv(text)
    assert np.max(np.abs(back.phases - settings.phases)) < 1e-11
    assert dump_settings_csv(back) == text
    with pytest.raises(ValueError):
        load_settings_csv("arm,index,phi_radians\nq,1,0.0\n")


def test_bell_settings_validation():
    with pytest.raises(ValueError):
        BellSettings(np.zeros((3, 2)))
    settings = optimal_settings()
    combos = list(settings.combos())
    assert len(combos) == 16
    assert combos[0] == (1, 1, 1, 1)
    assert combos[-1] == (2, 2, 2, 2)
    quad = settings.quad((2, 1, 1, 1))
    assert abs(quad[0] - settings.phases[0, 1]) < 1e-15
