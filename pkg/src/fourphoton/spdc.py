"""Bosonic model of the pulsed down-conversion source.

This module rebuilds the four-photon state from first principles so that the
hardcoded amplitudes in :func:`fourphoton.states.canonical_psi4` have an
independent check. A double pair emission is the square of the pair creation
operator

    S+ = a0H+ b0V+ - a0V+ b0H+

acting on vacuum, with the usual sqrt(n+1) bosonic enhancement; each source
mode then meets a polarization-independent 50-50 splitter feeding arms
(a, a') and (b, b'), and fourfold coincidences keep exactly one photon per
arm.

Mode bookkeeping: source vectors use the 4 modes (a0H, a0V, b0H, b0V);
split vectors use the 8 modes (aH, aV, a'H, a'V, bH, bV, b'H, b'V). Fock
dumps always write 8 occupation slots, with source modes embedded at the
a/b slots and the primed slots zero.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import json
import math

import numpy as np

from .errors import InvalidStateError
from .states import StateVector4, basis_index

SOURCE_MODES = ("a0H", "a0V", "b0H", "b0V")
SPLIT_MODES = ("aH", "aV", "a'H", "a'V", "bH", "bV", "b'H", "b'V")

# where each source mode lands after the splitters: (kept-arm slot, primed slot)
_SPLIT_TARGETS = {0: (0, 2), 1: (1, 3), 2: (4, 6), 3: (5, 7)}

# embedding of the 4 source modes into the 8 dump slots
_SOURCE_EMBED = (0, 1, 4, 5)


@dataclass
class FockVector:
    """Sparse multi-mode Fock state: occupation tuple -> complex amplitude."""

    mode_set: str  # "source" or "split"
    terms: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.mode_set not in ("source", "split"):
            raise ValueError(f"unknown mode set {self.mode_set!r}")

    @property
    def n_modes(self) -> int:
        return 4 if self.mode_set == "source" else 8

    def norm(self) -> float:
        return math.sqrt(sum(abs(a) ** 2 for a in self.terms.values()))

    def normalized(self) -> "FockVector":
        n = self.norm()
        if n == 0:
            raise InvalidStateError("cannot normalize the zero vector")
        return FockVector(self.mode_set, {k: a / n for k, a in self.terms.items()})

    def apply_creation(self, mode: int) -> "FockVector":
        """Apply a creation operator: |n> -> sqrt(n+1) |n+1> on one mode."""
        out: dict = {}
        for occ, amp in self.terms.items():
            new = list(occ)
            new[mode] += 1
            key = tuple(new)
            out[key] = out.get(key, 0.0) + amp * math.sqrt(new[mode])
        return FockVector(self.mode_set, out)

    def amplitude(self, occ) -> complex:
        return complex(self.terms.get(tuple(occ), 0.0))


def vacuum(mode_set: str = "source") -> FockVector:
    n = 4 if mode_set == "source" else 8
    return FockVector(mode_set, {(0,) * n: 1.0 + 0.0j})


def _apply_pair_creation(fv: FockVector) -> FockVector:
    # S+ = a0H+ b0V+ - a0V+ b0H+
    plus = fv.apply_creation(0).apply_creation(3)
    minus = fv.apply_creation(1).apply_creation(2)
    out: dict = dict(plus.terms)
    for occ, amp in minus.terms.items():
        out[occ] = out.get(occ, 0.0) - amp
        if out[occ] == 0:
            del out[occ]
    return FockVector("source", out)


def two_pair_source() -> FockVector:
    """Normalized double emission (S+)^2 |vac>.

    The sqrt(n+1) factors make the two same-polarization occupations,
    (2,0,0,2) and (0,2,2,0), twice as probable as the mixed (1,1,1,1) one:
    amplitudes 1/sqrt(3), 1/sqrt(3), -1/sqrt(3).
    """
    return _apply_pair_creation(_apply_pair_creation(vacuum())).normalized()


@dataclass(frozen=True)
class SplitterConvention:
    """50-50 beam splitter amplitudes plus per-arm compensator phases.

    The used input port transforms as c+ -> t * (kept arm)+ + r * (primed
    arm)+, identically for H and V. The full 2x2 matrix is completed as
    [[t, conj(r)], [r, -conj(t)]], which for the default real t = r =
    1/sqrt(2) is the symmetric real (Hadamard) form. Compensation phases
    multiply the V component of each output arm by exp(i theta); the
    defaults (all zero) map the raw postselected state exactly onto
    canonical_psi4.
    """

    t: complex = 1.0 / np.sqrt(2.0)
    r: complex = 1.0 / np.sqrt(2.0)
    compensation_phases: tuple = (0.0, 0.0, 0.0, 0.0)

    def __post_init__(self):
        if abs(abs(self.t) ** 2 - 0.5) > 1e-12 or abs(abs(self.r) ** 2 - 0.5) > 1e-12:
            raise ValueError("need |t|^2 = |r|^2 = 1/2")
        if len(self.compensation_phases) != 4:
            raise ValueError("need one compensation phase per arm")
        m = self.matrix()
        if np.linalg.norm(m @ m.conj().T - np.eye(2)) > 1e-12:
            raise ValueError("splitter matrix is not unitary")

    def matrix(self) -> np.ndarray:
        t, r = complex(self.t), complex(self.r)
        return np.array([[t, np.conj(r)], [r, -np.conj(t)]])


def apply_beam_splitters(fv: FockVector, convention: SplitterConvention | None = None) -> FockVector:
    """Send each source mode through its splitter; apply compensators.

    A source occupation n in one mode expands as
    sum_k sqrt(C(n, k)) t^k r^(n-k) |k, n-k> over the two output modes.
    """
    if fv.mode_set != "source":
        raise ValueError("expected a source-mode vector")
    conv = convention or SplitterConvention()
    t, r = complex(conv.t), complex(conv.r)
    out: dict = {}
    for occ, amp in fv.terms.items():
        expansions = []
        for mode, n in enumerate(occ):
            kept, primed = _SPLIT_TARGETS[mode]
            choices = []
            for k in range(n + 1):
                coeff = math.sqrt(math.comb(n, k)) * t**k * r ** (n - k)
                choices.append((kept, k, primed, n - k, coeff))
            expansions.append(choices)
        stack = [((0,) * 8, amp)]
        for choices in expansions:
            new_stack = []
            for occ8, a in stack:
                for kept, k, primed, nk, coeff in choices:
                    o = list(occ8)
                    o[kept] += k
                    o[primed] += nk
                    new_stack.append((tuple(o), a * coeff))
            stack = new_stack
        for occ8, a in stack:
            out[occ8] = out.get(occ8, 0.0) + a
    # compensators: phase exp(i theta_x) per V photon in arm x
    phases = conv.compensation_phases
    v_slots = (1, 3, 5, 7)
    comp: dict = {}
    for occ8, a in out.items():
        ph = sum(phases[x] * occ8[v_slots[x]] for x in range(4))
        comp[occ8] = a * np.exp(1j * ph)
    return FockVector("split", comp)


def postselect_one_per_arm(fv: FockVector):
    """Keep terms with exactly one photon in each spatial arm.

    Returns (StateVector4 or None, success_probability). The success
    probability is the squared norm of the kept component; when it is zero
    no state is returned.
    """
    if fv.mode_set != "split":
        raise ValueError("expected a split-mode vector")
    amps = np.zeros(16, dtype=complex)
    success = 0.0
    for occ, amp in fv.terms.items():
        pols = []
        for arm in range(4):
            n_h, n_v = occ[2 * arm], occ[2 * arm + 1]
            if n_h + n_v != 1:
                pols = None
                break
            pols.append(0 if n_h == 1 else 1)
        if pols is None:
            continue
        amps[basis_index(*pols)] += amp
        success += abs(amp) ** 2
    if success == 0.0:
        return None, 0.0
    return StateVector4(amps / math.sqrt(success)), float(success)


def oracle_state(convention: SplitterConvention | None = None):
    """Full source-to-coincidence chain: returns (StateVector4, success_prob)."""
    split = apply_beam_splitters(two_pair_source(), convention)
    return postselect_one_per_arm(split)


# ---------------------------------------------------------------------------
# Fock dump interface: {"modes": ..., "terms": [{occupation, re, im} ...]},
# occupations always written over the 8 split-mode slots


def dump_fock_json(fv: FockVector) -> str:
    records = []
    for occ in sorted(fv.terms):
        amp = fv.terms[occ]
        if fv.mode_set == "source":
            occ8 = [0] * 8
            for i, slot in enumerate(_SOURCE_EMBED):
                occ8[slot] = occ[i]
        else:
            occ8 = list(occ)
        records.append(
            {"occupation": occ8, "re": float(amp.real), "im": float(amp.imag)}
        )
    return json.dumps({"modes": fv.mode_set, "terms": records})


def load_fock_json(text: str) -> FockVector:
    obj = json.loads(text)
    mode_set = obj["modes"]
    if mode_set not in ("source", "split"):
        raise ValueError(f"unknown mode set {mode_set!r}")
    terms = {}
    for rec in obj["terms"]:
        occ8 = tuple(int(n) for n in rec["occupation"])
        if len(occ8) != 8 or any(n < 0 for n in occ8):
            raise ValueError("occupation must be 8 non-negative integers")
        if mode_set == "source":
            if any(occ8[i] for i in range(8) if i not in _SOURCE_EMBED):
                raise ValueError("source vector occupies a split-only mode")
            occ = tuple(occ8[slot] for slot in _SOURCE_EMBED)
        else:
            occ = occ8
        terms[occ] = complex(rec["re"], rec["im"])
    return FockVector(mode_set, terms)
