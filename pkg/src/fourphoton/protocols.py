"""Multi-party key distribution on the four-photon state.

Every round, arms a', b, b' analyze along +pi/4 or -pi/4 (coin flip each).
Arm a analyzes along pi/4 with probability key_fraction and otherwise along
0 or pi/2; those rounds are the Bell rounds and feed the security check.
Key rounds are the sifted rounds where all four analyzers sit at +pi/4, the
one setting pattern with a perfect fourfold correlation (the product of the
four outcomes is +1), so any two outcomes determine the other two.

Modes
-----
four_party      settings and Bell announcements only; outcomes of key
                rounds stay private (the baseline protocol).
secret_sharing  a chosen revealing pair additionally announces its key-round
                outcomes; each remaining party then infers the other's
                outcome through the product rule and the two of them share
                a key the revealing parties cannot reconstruct alone.
three_party     rounds that would have been key rounds become comparison
                rounds measured in a common basis by all parties; arms a
                and a' act as one merged party and keep the rounds where
                they agree. Agreement happens only through the GHZ part of
                the state, so on kept rounds b and b' are anticorrelated
                with the merged party and the three of them share a key.

An intercept-resend eavesdropper measures one arm's photon in a fixed basis
every round and resends the eigenstate. Enumerating her two outcomes gives
the exact post-attack statistics; the security check estimates S from the
Bell rounds and flags a violation only when S - k_sigma * sigma_S > 1.
"""
from __future__ import annotations

from dataclasses import dataclass
import io
import json

import numpy as np

from .correlations import (
    PARITY,
    CorrelationEstimate,
    ETable,
    bell_error,
    bell_functional,
    correlation_estimate,
)
from .errors import InsufficientDataError
from .formats import fmt, json_round
from .states import (
    ARMS,
    MeasurementSetting,
    StateVector4,
    _analysis_tensors,
    computational,
    equatorial,
    setting_eigenstate,
)

ROUND_BELL, ROUND_KEY, ROUND_COMPARISON = 0, 1, 2
_ROUND_NAMES = {ROUND_BELL: "bell", ROUND_KEY: "key", ROUND_COMPARISON: "comparison"}

#: numerical floor: outcome probabilities below this fraction of the largest
#: one are exact zeros analytically and are clamped so that sampling can
#: never produce an analytically forbidden outcome.
PROB_FLOOR = 1e-12


@dataclass(frozen=True)
class EveModel:
    """Intercept-resend attack on one arm in a fixed analyzer basis."""

    arm: str
    basis: MeasurementSetting

    def __post_init__(self):
        if self.arm not in ARMS:
            raise ValueError(f"unknown arm {self.arm!r}")


@dataclass(frozen=True)
class RoundRecord:
    index: int
    round_type: str
    settings: tuple
    outcomes: tuple
    announced_setting: tuple
    announced_outcome: tuple


@dataclass(frozen=True, eq=False)
class ProtocolTranscript:
    """Columnar record of every round of one protocol run."""

    mode: str
    key_fraction: float
    visibility: float
    seed: int | None
    comparison_basis: str
    revealing_pair: tuple
    eve: EveModel | None
    round_type: np.ndarray      # (n,) uint8
    kinds: np.ndarray           # (n, 4) uint8, 0 equatorial / 1 computational
    phis: np.ndarray            # (n, 4) float
    outcomes: np.ndarray        # (n, 4) int8, +-1
    announced_setting: np.ndarray
    announced_outcome: np.ndarray

    @property
    def n_rounds(self) -> int:
        return int(self.round_type.size)

    def setting(self, i: int, arm: int) -> MeasurementSetting:
        if self.kinds[i, arm]:
            return computational()
        return equatorial(float(self.phis[i, arm]))

    def rounds(self):
        for i in range(self.n_rounds):
            yield RoundRecord(
                index=i,
                round_type=_ROUND_NAMES[int(self.round_type[i])],
                settings=tuple(self.setting(i, x) for x in range(4)),
                outcomes=tuple(int(v) for v in self.outcomes[i]),
                announced_setting=tuple(bool(v) for v in self.announced_setting[i]),
                announced_outcome=tuple(bool(v) for v in self.announced_outcome[i]),
            )


def _distribution(state: StateVector4, settings, eve: EveModel | None) -> np.ndarray:
    """Outcome distribution seen by the parties, marginal over the attack."""
    if eve is None:
        tensors = [state.tensor()]
    else:
        axis = ARMS.index(eve.arm)
        tensors = []
        for e in (+1, -1):
            v = setting_eigenstate(eve.basis, e)
            proj = np.outer(v, v.conj())
            t = np.tensordot(proj, state.tensor(), axes=([1], [axis]))
            tensors.append(np.moveaxis(t, 0, axis))
    ba, bap, bb, bbp = _analysis_tensors(settings)
    dist = np.zeros(16)
    for t in tensors:
        amp = np.einsum("ai,bj,ck,dl,ijkl->abcd", ba, bap, bb, bbp, t)
        dist += np.abs(amp.reshape(16)) ** 2
    return dist


def _sampling_distribution(state, settings, eve, visibility) -> np.ndarray:
    p = visibility * _distribution(state, settings, eve) + (1.0 - visibility) / 16.0
    p[p < PROB_FLOOR * p.max()] = 0.0
    return p / p.sum()


def run_protocol(
    state: StateVector4,
    n_rounds: int,
    mode: str,
    seed: int,
    key_fraction: float = 0.5,
    visibility: float = 1.0,
    eve: EveModel | None = None,
    comparison_basis: str = "computational",
    revealing_pair: tuple = ("a", "a'"),
) -> ProtocolTranscript:
    """Simulate a protocol run; identical inputs give identical transcripts."""
    if mode not in ("four_party", "secret_sharing", "three_party"):
        raise ValueError(f"unknown mode {mode!r}")
    if not 0.0 <= key_fraction <= 1.0:
        raise ValueError("key_fraction must lie in [0, 1]")
    if not 0.0 <= visibility <= 1.0:
        raise ValueError("visibility must lie in [0, 1]")
    if comparison_basis not in ("computational", "diagonal"):
        raise ValueError(f"unknown comparison basis {comparison_basis!r}")
    revealing_pair = tuple(revealing_pair)
    if len(revealing_pair) != 2 or len(set(revealing_pair)) != 2:
        raise ValueError("revealing pair must be two distinct arms")
    for arm in revealing_pair:
        if arm not in ARMS:
            raise ValueError(f"unknown arm {arm!r} in revealing pair")
    if n_rounds < 0:
        raise ValueError("n_rounds must be non-negative")

    rng = np.random.default_rng(np.random.SeedSequence(seed))
    # draw order is part of the reproducibility contract:
    # round category, a's bell phase bit, the three +-pi/4 bits, outcome uniform
    u_cat = rng.random(n_rounds)
    a_bell_bit = rng.integers(0, 2, n_rounds)
    side_bits = rng.integers(0, 2, (n_rounds, 3))
    u_out = rng.random(n_rounds)

    is_key_intent = u_cat < key_fraction
    round_type = np.where(
        is_key_intent,
        ROUND_COMPARISON if mode == "three_party" else ROUND_KEY,
        ROUND_BELL,
    ).astype(np.uint8)

    kinds = np.zeros((n_rounds, 4), dtype=np.uint8)
    phis = np.empty((n_rounds, 4))
    phis[:, 0] = np.where(is_key_intent, np.pi / 4, np.where(a_bell_bit == 0, 0.0, np.pi / 2))
    for j in range(3):
        phis[:, j + 1] = np.where(side_bits[:, j] == 0, np.pi / 4, -np.pi / 4)
    comparison = round_type == ROUND_COMPARISON
    if comparison.any():
        if comparison_basis == "computational":
            kinds[comparison] = 1
            phis[comparison] = 0.0
        else:
            phis[comparison] = 0.0

    # group rounds by their settings pattern and sample from each exact
    # distribution with the per-round uniforms
    outcome_idx = np.empty(n_rounds, dtype=np.int64)
    group_id = np.where(
        comparison,
        24,
        np.where(is_key_intent, 16, 8 * a_bell_bit) + 4 * side_bits[:, 0] + 2 * side_bits[:, 1] + side_bits[:, 2],
    )
    for gid in np.unique(group_id):
        rows = np.nonzero(group_id == gid)[0]
        i = rows[0]
        settings = tuple(
            computational() if kinds[i, x] else equatorial(float(phis[i, x])) for x in range(4)
        )
        p = _sampling_distribution(state, settings, eve, visibility)
        outcome_idx[rows] = np.searchsorted(np.cumsum(p), u_out[rows], side="right")
    outcome_idx = np.minimum(outcome_idx, 15)
    bits = (outcome_idx[:, None] >> np.array([3, 2, 1, 0])) & 1
    outcomes = np.where(bits == 0, 1, -1).astype(np.int8)

    announced_setting = np.ones((n_rounds, 4), dtype=bool)
    announced_outcome = np.zeros((n_rounds, 4), dtype=bool)
    announced_outcome[round_type == ROUND_BELL] = True
    if mode == "secret_sharing":
        usable = (round_type == ROUND_KEY) & np.all(side_bits == 0, axis=1)
        for arm in revealing_pair:
            announced_outcome[usable, ARMS.index(arm)] = True

    return ProtocolTranscript(
        mode=mode,
        key_fraction=float(key_fraction),
        visibility=float(visibility),
        seed=int(seed),
        comparison_basis=comparison_basis,
        revealing_pair=revealing_pair,
        eve=eve,
        round_type=round_type,
        kinds=kinds,
        phis=phis,
        outcomes=outcomes,
        announced_setting=announced_setting,
        announced_outcome=announced_outcome,
    )


# ---------------------------------------------------------------------------
# security check


@dataclass(frozen=True, eq=False)
class SecurityReport:
    etable: ETable
    s_value: float
    s_error: float
    k_sigma: float
    violation: bool
    n_bell_rounds: int
    rounds_per_combo: dict


def security_check(transcript: ProtocolTranscript, k_sigma: float = 3.0) -> SecurityReport:
    """Estimate S from the Bell rounds; flag violation if S - k*sigma > 1.

    Needs at least one round in each of the 16 setting combinations; missing
    combinations are reported in the error.
    """
    bell = transcript.round_type == ROUND_BELL
    k_idx = (transcript.phis[:, 0] != 0.0).astype(int)  # 0 -> setting 1, pi/2 -> 2
    side_idx = (transcript.phis[:, 1:] < 0).astype(int)  # +pi/4 -> 1, -pi/4 -> 2
    combo = ((k_idx * 2 + side_idx[:, 0]) * 2 + side_idx[:, 1]) * 2 + side_idx[:, 2]
    out_idx = np.sum((transcript.outcomes < 0) * np.array([8, 4, 2, 1]), axis=1)
    counts = np.bincount(combo[bell] * 16 + out_idx[bell], minlength=256).reshape(16, 16)

    missing = [i for i in range(16) if counts[i].sum() == 0]
    if missing:
        labels = [
            f"(k,l,m,n)=({(i >> 3 & 1) + 1},{(i >> 2 & 1) + 1},{(i >> 1 & 1) + 1},{(i & 1) + 1})"
            for i in missing
        ]
        raise InsufficientDataError("no Bell rounds for " + ", ".join(labels))

    values = np.empty((2, 2, 2, 2))
    errors = np.empty((2, 2, 2, 2))
    per_combo = {}
    for i in range(16):
        est = correlation_estimate(counts[i])
        idx = ((i >> 3) & 1, (i >> 2) & 1, (i >> 1) & 1, i & 1)
        values[idx] = est.value
        errors[idx] = est.std_error
        per_combo["".join(str(b + 1) for b in idx)] = int(counts[i].sum())
    table = ETable(values, errors)
    s = bell_functional(table)
    err = bell_error(table)
    return SecurityReport(
        etable=table,
        s_value=s,
        s_error=err,
        k_sigma=float(k_sigma),
        violation=bool(s - k_sigma * err > 1.0),
        n_bell_rounds=int(bell.sum()),
        rounds_per_combo=per_combo,
    )


# ---------------------------------------------------------------------------
# key extraction


@dataclass(frozen=True, eq=False)
class KeyMaterial:
    """Per-party key bits plus agreement statistics.

    All holders of the same key have strings of equal length. For the
    three-party distillation the qualifying-round bookkeeping is filled in;
    pair keys leave it None.
    """

    bits: dict
    qber: dict
    n_rounds: int
    n_qualifying: int | None = None
    kept_fraction: float | None = None

    def __post_init__(self):
        lengths = {len(v) for v in self.bits.values()}
        if len(lengths) > 1:
            raise ValueError("key holders disagree on key length")


def _bit(l):
    return ((1 - l) // 2).astype(np.uint8)


def extract_pair_keys(transcript: ProtocolTranscript, revealing_pair: tuple | None = None) -> KeyMaterial:
    """Key for the two parties that did not reveal their key-round outcomes.

    On key rounds the fourfold outcome product is +1, so the earlier holder's
    outcome (in arm order) is the key bit and the later holder recovers it as
    the product of the two revealed outcomes with its own. Returns empty key
    material when the transcript has no usable key rounds.
    """
    pair = tuple(revealing_pair) if revealing_pair is not None else transcript.revealing_pair
    if len(pair) != 2 or len(set(pair)) != 2 or any(a not in ARMS for a in pair):
        raise ValueError("revealing pair must be two distinct arms")
    holders = tuple(a for a in ARMS if a not in pair)
    usable = (transcript.round_type == ROUND_KEY) & np.all(
        (transcript.kinds == 0) & (np.abs(transcript.phis - np.pi / 4) < 1e-12), axis=1
    )
    if not usable.any():
        return KeyMaterial(bits={h: np.zeros(0, np.uint8) for h in holders}, qber={holders: float("nan")}, n_rounds=0)
    l = transcript.outcomes[usable].astype(int)
    r1, r2 = (ARMS.index(a) for a in pair)
    h1, h2 = (ARMS.index(a) for a in holders)
    own = l[:, h1]
    inferred = l[:, r1] * l[:, r2] * l[:, h2]
    bits = {holders[0]: _bit(own), holders[1]: _bit(inferred)}
    qber = {holders: float(np.mean(bits[holders[0]] != bits[holders[1]]))}
    return KeyMaterial(bits=bits, qber=qber, n_rounds=int(usable.sum()))


def distill_three_party(transcript: ProtocolTranscript) -> KeyMaterial:
    """Merge arms a and a', keep comparison rounds where they agree.

    Agreement can only come from the |HHVV> and |VVHH> terms, so on kept
    rounds the b and b' outcomes are the complement of the merged party's:
    key bit (1 - l)/2 for a*, complemented for b and b'.
    """
    qualifying = transcript.round_type == ROUND_COMPARISON
    n_qual = int(qualifying.sum())
    holders = ("a*", "b", "b'")
    if n_qual == 0:
        return KeyMaterial(
            bits={h: np.zeros(0, np.uint8) for h in holders},
            qber={},
            n_rounds=0,
            n_qualifying=0,
            kept_fraction=None,
        )
    l = transcript.outcomes[qualifying].astype(int)
    kept = l[:, 0] == l[:, 1]
    lk = l[kept]
    bits = {
        "a*": _bit(lk[:, 0]),
        "b": 1 - _bit(lk[:, 2]),
        "b'": 1 - _bit(lk[:, 3]),
    }
    qber = {
        ("a*", "b"): float(np.mean(bits["a*"] != bits["b"])) if kept.any() else float("nan"),
        ("a*", "b'"): float(np.mean(bits["a*"] != bits["b'"])) if kept.any() else float("nan"),
        ("b", "b'"): float(np.mean(bits["b"] != bits["b'"])) if kept.any() else float("nan"),
    }
    return KeyMaterial(
        bits=bits,
        qber=qber,
        n_rounds=int(kept.sum()),
        n_qualifying=n_qual,
        kept_fraction=float(kept.sum() / n_qual),
    )


# ---------------------------------------------------------------------------
# exact oracle for intercept-resend statistics


def eve_exact_etable(state: StateVector4, settings, eve: EveModel) -> ETable:
    """Exact post-attack correlation table by enumerating the attack outcomes."""
    values = np.empty((2, 2, 2, 2))
    for combo in settings.combos():
        quad = settings.quad(combo)
        p = _distribution(state, tuple(equatorial(float(x)) for x in quad), eve)
        values[tuple(i - 1 for i in combo)] = float(PARITY @ p)
    return ETable(values)


def eve_exact_qber(state: StateVector4, eve: EveModel) -> float:
    """Exact key-round error rate under the attack: P(fourfold product = -1)."""
    settings = (equatorial(np.pi / 4),) * 4
    p = _distribution(state, settings, eve)
    p = p / p.sum()
    return float(p[PARITY < 0].sum())


# ---------------------------------------------------------------------------
# artifacts


def key_to_hex(bits: np.ndarray) -> str:
    """Pack key bits MSB-first into bytes and render as hex."""
    bits = np.asarray(bits, dtype=np.uint8)
    if bits.size == 0:
        return ""
    return np.packbits(bits).tobytes().hex()


def hex_to_key(text: str, n_bits: int) -> np.ndarray:
    raw = bytes.fromhex(text.strip())
    bits = np.unpackbits(np.frombuffer(raw, dtype=np.uint8))
    if n_bits > bits.size:
        raise ValueError("hex string is too short for the requested bit count")
    return bits[:n_bits].astype(np.uint8)


_ANN = {(False, False): "-", (True, False): "s", (True, True): "so", (False, True): "o"}


def dump_transcript_csv(transcript: ProtocolTranscript) -> str:
    out = io.StringIO()
    out.write(
        "round,setting_a,setting_a_prime,setting_b,setting_b_prime,"
        "l_a,l_a_prime,l_b,l_b_prime,"
        "announced_a,announced_a_prime,announced_b,announced_b_prime\n"
    )
    for i in range(transcript.n_rounds):
        tokens = [str(i)]
        tokens += ["HV" if transcript.kinds[i, x] else fmt(transcript.phis[i, x]) for x in range(4)]
        tokens += [str(int(v)) for v in transcript.outcomes[i]]
        tokens += [
            _ANN[(bool(transcript.announced_setting[i, x]), bool(transcript.announced_outcome[i, x]))]
            for x in range(4)
        ]
        out.write(",".join(tokens) + "\n")
    return out.getvalue()


def load_transcript_csv(text: str) -> ProtocolTranscript:
    """Rebuild a transcript from its CSV; round types are re-derived."""
    lines = [ln for ln in text.strip().splitlines() if ln.strip()]
    header = (
        "round,setting_a,setting_a_prime,setting_b,setting_b_prime,"
        "l_a,l_a_prime,l_b,l_b_prime,"
        "announced_a,announced_a_prime,announced_b,announced_b_prime"
    )
    if not lines or lines[0].strip() != header:
        raise ValueError("bad transcript header")
    n = len(lines) - 1
    kinds = np.zeros((n, 4), dtype=np.uint8)
    phis = np.zeros((n, 4))
    outcomes = np.zeros((n, 4), dtype=np.int8)
    ann_s = np.zeros((n, 4), dtype=bool)
    ann_o = np.zeros((n, 4), dtype=bool)
    for i, ln in enumerate(lines[1:]):
        parts = ln.split(",")
        if len(parts) != 13:
            raise ValueError(f"bad transcript row: {ln!r}")
        for x in range(4):
            tok = parts[1 + x].strip()
            if tok == "HV":
                kinds[i, x] = 1
            else:
                phis[i, x] = float(tok)
            outcomes[i, x] = int(parts[5 + x])
            code = parts[9 + x].strip()
            ann_s[i, x] = "s" in code
            ann_o[i, x] = "o" in code
    # classify rounds from the stored settings
    round_type = np.full(n, ROUND_BELL, dtype=np.uint8)
    all_comp = kinds.all(axis=1)
    all_zero_eq = (kinds == 0).all(axis=1) & (phis == 0.0).all(axis=1)
    round_type[all_comp | all_zero_eq] = ROUND_COMPARISON
    key_like = (kinds[:, 0] == 0) & (np.abs(phis[:, 0] - np.pi / 4) < 1e-9)
    round_type[key_like] = ROUND_KEY
    return ProtocolTranscript(
        mode="imported",
        key_fraction=float("nan"),
        visibility=float("nan"),
        seed=None,
        comparison_basis="computational",
        revealing_pair=("a", "a'"),
        eve=None,
        round_type=round_type,
        kinds=kinds,
        phis=phis,
        outcomes=outcomes,
        announced_setting=ann_s,
        announced_outcome=ann_o,
    )


def dump_security_json(report: SecurityReport) -> str:
    rows = []
    for k in (1, 2):
        for l in (1, 2):
            for m in (1, 2):
                for nn in (1, 2):
                    idx = (k - 1, l - 1, m - 1, nn - 1)
                    rows.append(
                        {
                            "k": k,
                            "l": l,
                            "m": m,
                            "n": nn,
                            "E": json_round(report.etable.values[idx]),
                            "sigma": json_round(report.etable.errors[idx]),
                        }
                    )
    obj = {
        "s_value": json_round(report.s_value),
        "s_error": json_round(report.s_error),
        "k_sigma": json_round(report.k_sigma),
        "violation": report.violation,
        "n_bell_rounds": report.n_bell_rounds,
        "rounds_per_combo": report.rounds_per_combo,
        "etable": rows,
    }
    return json.dumps(obj, indent=2, sort_keys=True)


def load_security_json(text: str) -> SecurityReport:
    obj = json.loads(text)
    values = np.empty((2, 2, 2, 2))
    errors = np.empty((2, 2, 2, 2))
    for row in obj["etable"]:
        idx = (row["k"] - 1, row["l"] - 1, row["m"] - 1, row["n"] - 1)
        values[idx] = row["E"]
        errors[idx] = row["sigma"]
    return SecurityReport(
        etable=ETable(values, errors),
        s_value=float(obj["s_value"]),
        s_error=float(obj["s_error"]),
        k_sigma=float(obj["k_sigma"]),
        violation=bool(obj["violation"]),
        n_bell_rounds=int(obj["n_bell_rounds"]),
        rounds_per_combo=dict(obj["rounds_per_combo"]),
    )
