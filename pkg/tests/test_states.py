import numpy as np
import pytest

from fourphoton import (
    InvalidStateError,
    StateVector4,
    apply_identical_unitary,
    canonical_psi4,
    computational,
    decompose_ghz_epr,
    dump_state_json,
    epr_pair,
    equal_up_to_global_phase,
    equatorial,
    ghz4,
    load_state_json,
    outcome_distribution,
    outcome_parity,
    outcome_probability,
    overlap,
    setting_eigenstate,
)
from fourphoton.states import (
    basis_index,
    index_outcomes,
    outcome_index,
    outcome_label,
)

S3 = 1.0 / np.sqrt(3.0)


def random_su2(rng):
    # Haar-ish: QR of a complex Gaussian, phase-fixed
    m = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    q, r = np.linalg.qr(m)
    return q * (np.conj(r.diagonal()) / np.abs(r.diagonal()))


def test_canonical_amplitudes():
    state = canonical_psi4()
    amps = state.amplitudes
    assert abs(np.linalg.norm(amps) - 1.0) < 1e-12
    assert abs(amps[basis_index(0, 0, 1, 1)] - S3) < 1e-12
    assert abs(amps[basis_index(1, 1, 0, 0)] - S3) < 1e-12
    for quad in ((0, 1, 0, 1), (0, 1, 1, 0), (1, 0, 0, 1), (1, 0, 1, 0)):
        assert abs(amps[basis_index(*quad)] + S3 / 2.0) < 1e-12
    # every other amplitude vanishes
    nonzero = {basis_index(0, 0, 1, 1), basis_index(1, 1, 0, 0),
               basis_index(0, 1, 0, 1), basis_index(0, 1, 1, 0),
               basis_index(1, 0, 0, 1), basis_index(1, 0, 1, 0)}
    for i in range(16):
        if i not in nonzero:
            assert abs(amps[i]) < 1e-15


def test_ghz_epr_decomposition():
    g, e, residual = decompose_ghz_epr(canonical_psi4())
    assert abs(g - np.sqrt(2.0 / 3.0)) < 1e-12
    assert abs(e + np.sqrt(1.0 / 3.0)) < 1e-12
    assert residual < 1e-12
    # rebuild from the parts
    pair = epr_pair("psi+")
    product = np.kron(pair, pair)
    rebuilt = g * ghz4().amplitudes + e * product
    assert np.max(np.abs(rebuilt - canonical_psi4().amplitudes)) < 1e-12


def test_epr_pair_kinds():
    plus = epr_pair("psi+")
    minus = epr_pair("psi-")
    assert abs(plus[1] - 1 / np.sqrt(2)) < 1e-12 and abs(plus[2] - 1 / np.sqrt(2)) < 1e-12
    assert abs(minus[1] - 1 / np.sqrt(2)) < 1e-12 and abs(minus[2] + 1 / np.sqrt(2)) < 1e-12
    with pytest.raises(ValueError):
        epr_pair("phi+")


def test_invariance_under_identical_unitaries():
    state = canonical_psi4()
    rng = np.random.default_rng(20240117)
    for _ in range(100):
        u = random_su2(rng)
        rotated = apply_identical_unitary(state, u)
        assert abs(abs(overlap(rotated, state)) - 1.0) < 1e-10


def test_ghz_alone_is_not_invariant():
    # the invariance is a property of the full superposition, not of GHZ
    state = ghz4()
    u = random_su2(np.random.default_rng(5))
    rotated = apply_identical_unitary(state, u)
    assert abs(abs(overlap(rotated, state)) - 1.0) > 1e-3


def test_distribution_common_basis():
    state = canonical_psi4()
    for settings in ((computational(),) * 4, (equatorial(0.0),) * 4):
        dist = outcome_distribution(state, settings)
        assert abs(dist.sum() - 1.0) < 1e-12
        top = sorted(dist)[-2:]
        mid = sorted(x for x in dist if 1e-12 < x < 0.3)
        assert len(mid) == 4
        assert all(abs(x - 1.0 / 3.0) < 1e-12 for x in top)
        assert all(abs(x - 1.0 / 12.0) < 1e-12 for x in mid)


def test_outcome_probability_matches_distribution():
    state = canonical_psi4()
    settings = (equatorial(0.4), equatorial(-0.2), equatorial(1.1), computational())
    dist = outcome_distribution(state, settings)
    for i in range(16):
        p = outcome_probability(state, settings, index_outcomes(i))
        assert abs(p - dist[i]) < 1e-12


def test_setting_eigenstates_orthonormal():
    for setting in (computational(), equatorial(0.0), equatorial(0.7), equatorial(-2.1)):
        plus = setting_eigenstate(setting, +1)
        minus = setting_eigenstate(setting, -1)
        assert abs(np.vdot(plus, plus) - 1.0) < 1e-12
        assert abs(np.vdot(minus, minus) - 1.0) < 1e-12
        assert abs(np.vdot(plus, minus)) < 1e-12


def test_outcome_index_round_trip():
    for i in range(16):
        outcomes = index_outcomes(i)
        assert outcome_index(outcomes) == i
        assert outcome_parity(i) == int(np.prod(outcomes))
    assert outcome_index((1, 1, 1, 1)) == 0
    assert outcome_index((-1, -1, -1, -1)) == 15


def test_outcome_label():
    settings = (computational(), computational(), equatorial(0.0), equatorial(0.0))
    assert outcome_label((1, -1, 1, -1), settings) == "HV+-"


def test_state_validation():
    with pytest.raises(InvalidStateError):
        StateVector4(np.zeros(16))
    with pytest.raises(InvalidStateError):
        StateVector4(np.ones(15))
    bad = np.zeros(16)
    bad[0] = np.nan
    with pytest.raises(InvalidStateError):
        StateVector4(bad)
    with pytest.raises(InvalidStateError):
        StateVector4(np.full(16, 0.3))  # norm well off 1


def test_state_is_immutable():
    state = canonical_psi4()
    with pytest.raises(ValueError):
        state.amplitudes[0] = 1.0


def test_apply_unitary_rejects_non_unitary():
    with pytest.raises(ValueError):
        apply_identical_unitary(canonical_psi4(), np.array([[1.0, 1.0], [0.0, 1.0]]))


def test_global_phase_comparison():
    state = canonical_psi4()
    shifted = StateVector4(state.amplitudes * np.exp(0.73j))
    assert equal_up_to_global_phase(state, shifted)
    assert not equal_up_to_global_phase(state, ghz4())


def test_state_json_round_trip():
    state = apply_identical_unitary(canonical_psi4(), random_su2(np.random.default_rng(8)))
    text = dump_state_json(state)
    back = load_state_json(text)
    assert np.array_equal(back.amplitudes, state.amplitudes)
    assert dump_state_json(back) == text
