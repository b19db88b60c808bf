"""Polarization state algebra for four photons in spatial arms a, a', b, b'.

The computational basis is |H> = index 0, |V> = index 1 per arm, and a
four-photon basis ket |p_a p_a' p_b p_b'> lives at flat index
8*p_a + 4*p_a' + 2*p_b + p_b'.

The canonical four-photon state produced by splitting a double emission of
polarization-entangled pairs into four arms is

    (1/sqrt(3)) (|HHVV> + |VVHH>)
  - (1/(2*sqrt(3))) (|HVHV> + |HVVH> + |VHHV> + |VHVH>)

which decomposes as sqrt(2/3)|GHZ> - sqrt(1/3)|Psi+>_aa' |Psi+>_bb' with
|GHZ> = (|HHVV> + |VVHH>)/sqrt(2). The sign on all four mixed terms is
negative; that convention is the one derived by the bosonic source model in
:mod:`fourphoton.spdc`, and the only one invariant under applying the same
local unitary to every arm.

Polarization analyzers are described by `MeasurementSetting`. An equatorial
setting phi has eigenvectors

    |l, phi> = (|V> + l exp(-i phi) |H>) / sqrt(2),   l = +-1,

so outcome +1 is the transmitted port. A computational setting analyzes H/V
directly; outcome +1 means H.
"""
from __future__ import annotations

from dataclasses import dataclass
import json

import numpy as np

from .errors import InvalidStateError

ARMS = ("a", "a'", "b", "b'")
H, V = 0, 1
NORM_TOL = 1e-12

#: the four mixed-term kets (one H and one V in each source pair)
MIXED_QUADS = ((H, V, H, V), (H, V, V, H), (V, H, H, V), (V, H, V, H))


def basis_index(p_a: int, p_ap: int, p_b: int, p_bp: int) -> int:
    """Flat index of the basis ket |p_a p_a' p_b p_b'>."""
    return 8 * p_a + 4 * p_ap + 2 * p_b + p_bp


@dataclass(frozen=True, eq=False)
class StateVector4:
    """Normalized pure state of four polarization qubits.

    `amplitudes` is a complex vector of length 16 in the canonical index
    order. Construction validates shape, finiteness and normalization
    (within 1e-12) and freezes the array.
    """

    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.shape != (16,):
            raise InvalidStateError(f"need 16 amplitudes, got shape {amps.shape}")
        if not np.all(np.isfinite(amps.view(float))):
            raise InvalidStateError("amplitudes must be finite")
        norm = float(np.linalg.norm(amps))
        if abs(norm - 1.0) > NORM_TOL:
            raise InvalidStateError(f"state not normalized: |psi| = {norm!r}")
        amps = amps.copy()
        amps.flags.writeable = False
        object.__setattr__(self, "amplitudes", amps)

    def amplitude(self, quad) -> complex:
        """Amplitude of the basis ket given as a (p_a, p_a', p_b, p_b') quad."""
        return complex(self.amplitudes[basis_index(*quad)])

    def tensor(self) -> np.ndarray:
        """Amplitudes reshaped to (2, 2, 2, 2), arm a first."""
        return self.amplitudes.reshape(2, 2, 2, 2)


def canonical_psi4() -> StateVector4:
    """The canonical four-photon state (all four mixed terms negative)."""
    amps = np.zeros(16, dtype=complex)
    amps[basis_index(H, H, V, V)] = 1.0 / np.sqrt(3.0)
    amps[basis_index(V, V, H, H)] = 1.0 / np.sqrt(3.0)
    for quad in MIXED_QUADS:
        amps[basis_index(*quad)] = -0.5 / np.sqrt(3.0)
    return StateVector4(amps)


def ghz4() -> StateVector4:
    """(|HHVV> + |VVHH>)/sqrt(2), the maximally entangled component."""
    amps = np.zeros(16, dtype=complex)
    amps[basis_index(H, H, V, V)] = 1.0 / np.sqrt(2.0)
    amps[basis_index(V, V, H, H)] = 1.0 / np.sqrt(2.0)
    return StateVector4(amps)


def epr_pair(kind: str = "psi+") -> np.ndarray:
    """Two-qubit Bell pair (|HV> +- |VH>)/sqrt(2) as a length-4 vector.

    kind "psi+" carries the plus sign; "psi-" the minus sign. Index order is
    2*p_1 + p_2 with H = 0.
    """
    sign = {"psi+": 1.0, "psi-": -1.0}.get(kind)
    if sign is None:
        raise ValueError(f"unknown pair kind {kind!r}")
    vec = np.zeros(4, dtype=complex)
    vec[2 * H + V] = 1.0 / np.sqrt(2.0)
    vec[2 * V + H] = sign / np.sqrt(2.0)
    return vec


def decompose_ghz_epr(state: StateVector4) -> tuple[complex, complex, float]:
    """Project onto |GHZ> and |Psi+>_aa' |Psi+>_bb'.

    Returns (ghz_coef, epr_coef, residual_norm). The two projectors are
    orthogonal, so the squared magnitudes plus the squared residual add to
    one for any normalized input. The pair kind is the canonical
    convention's (psi+); see the module docstring.
    """
    ghz_vec = ghz4().amplitudes
    pair = epr_pair("psi+")
    epr_vec = np.kron(pair, pair)
    g = complex(np.vdot(ghz_vec, state.amplitudes))
    e = complex(np.vdot(epr_vec, state.amplitudes))
    residual = state.amplitudes - g * ghz_vec - e * epr_vec
    return g, e, float(np.linalg.norm(residual))


# ---------------------------------------------------------------------------
# measurement settings


@dataclass(frozen=True)
class MeasurementSetting:
    """One arm's analyzer: 'equatorial' with phase phi, or 'computational'."""

    kind: str
    phi: float = 0.0

    def __post_init__(self):
        if self.kind not in ("equatorial", "computational"):
            raise ValueError(f"unknown setting kind {self.kind!r}")
        object.__setattr__(self, "phi", float(self.phi))

    def label(self) -> str:
        """Token used in CSV artifacts: radians, or "HV"."""
        if self.kind == "computational":
            return "HV"
        from .formats import fmt

        return fmt(self.phi)


def equatorial(phi: float) -> MeasurementSetting:
    return MeasurementSetting("equatorial", phi)


def computational() -> MeasurementSetting:
    return MeasurementSetting("computational")


def setting_eigenstate(setting: MeasurementSetting, outcome: int) -> np.ndarray:
    """(amp_H, amp_V) of the analyzer eigenvector for outcome +-1."""
    if outcome not in (+1, -1):
        raise ValueError(f"outcome must be +-1, got {outcome!r}")
    if setting.kind == "computational":
        return np.array([1.0, 0.0], dtype=complex) if outcome == +1 else np.array([0.0, 1.0], dtype=complex)
    return np.array([outcome * np.exp(-1j * setting.phi), 1.0], dtype=complex) / np.sqrt(2.0)


def outcome_index(outcomes) -> int:
    """Flat index of an outcome quad; +1 maps to bit 0, arm a most significant."""
    i = 0
    for l in outcomes:
        if l not in (+1, -1):
            raise ValueError(f"outcome must be +-1, got {l!r}")
        i = 2 * i + (0 if l == +1 else 1)
    return i


def index_outcomes(i: int) -> tuple[int, int, int, int]:
    """Inverse of outcome_index."""
    return tuple(+1 if (i >> shift) & 1 == 0 else -1 for shift in (3, 2, 1, 0))


def outcome_parity(i: int) -> int:
    """Product of the four +-1 outcomes at flat outcome index i."""
    return -1 if bin(i).count("1") % 2 else +1


def outcome_label(outcomes, settings) -> str:
    """Render an outcome quad as "+-+-" (equatorial) or "HVHV" (computational)."""
    chars = []
    for l, s in zip(outcomes, settings):
        if s.kind == "computational":
            chars.append("H" if l == +1 else "V")
        else:
            chars.append("+" if l == +1 else "-")
    return "".join(chars)


def _analysis_tensors(settings) -> list[np.ndarray]:
    # row o of B_x is the conjugated eigenvector of outcome index bit o
    mats = []
    for s in settings:
        plus = setting_eigenstate(s, +1).conj()
        minus = setting_eigenstate(s, -1).conj()
        mats.append(np.stack([plus, minus]))
    return mats


def outcome_probability(state: StateVector4, settings, outcomes) -> float:
    """Born probability of one outcome quad under the four settings."""
    vec = np.array([1.0], dtype=complex)
    for s, l in zip(settings, outcomes):
        vec = np.kron(vec, setting_eigenstate(s, l))
    amp = np.vdot(vec, state.amplitudes)
    return float(abs(amp) ** 2)


def outcome_distribution(state: StateVector4, settings) -> np.ndarray:
    """All 16 outcome probabilities, indexed by `outcome_index` order.

    Sums to 1 within 1e-12 for any valid state and settings.
    """
    if len(settings) != 4:
        raise ValueError("need one setting per arm")
    ba, bap, bb, bbp = _analysis_tensors(settings)
    amp = np.einsum("ai,bj,ck,dl,ijkl->abcd", ba, bap, bb, bbp, state.tensor())
    return np.abs(amp.reshape(16)) ** 2


def apply_identical_unitary(state: StateVector4, u: np.ndarray) -> StateVector4:
    """Apply the same single-qubit unitary to all four arms."""
    u = np.asarray(u, dtype=complex)
    if u.shape != (2, 2):
        raise ValueError("unitary must be 2x2")
    if np.linalg.norm(u @ u.conj().T - np.eye(2)) > 1e-10:
        raise ValueError("matrix is not unitary")
    out = np.einsum("ai,bj,ck,dl,ijkl->abcd", u, u, u, u, state.tensor())
    return StateVector4(out.reshape(16))


def overlap(first: StateVector4, second: StateVector4) -> complex:
    """<first|second>."""
    return complex(np.vdot(first.amplitudes, second.amplitudes))


def equal_up_to_global_phase(first: StateVector4, second: StateVector4, tol: float = 1e-12) -> bool:
    return abs(abs(overlap(first, second)) - 1.0) <= tol


# ---------------------------------------------------------------------------
# state dump interface: a JSON array of 16 (re, im) pairs in index order


def dump_state_json(state: StateVector4) -> str:
    # full precision: amplitudes are data, and rounding could push the
    # reloaded norm outside the validation tolerance
    pairs = [[float(a.real), float(a.imag)] for a in state.amplitudes]
    return json.dumps(pairs)


def load_state_json(text: str) -> StateVector4:
    pairs = json.loads(text)
    if not isinstance(pairs, list) or len(pairs) != 16:
        raise InvalidStateError("state dump must be a JSON array of 16 (re, im) pairs")
    amps = np.array([complex(re, im) for re, im in pairs])
    return StateVector4(amps)
