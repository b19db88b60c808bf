"""Seeded Monte Carlo simulation of fourfold coincidence runs.

A frame is one integration period at fixed analyzer settings. Each emission
draws an outcome quad from visibility * (exact distribution) +
(1 - visibility) * uniform, then survives only if all four addressed
detectors fire. Outcome +1 addresses the transmitted-port detector of its
arm, -1 the reflected one (H and V for computational settings).

Frames are reproducible bit for bit: the generator of frame i is derived
from SeedSequence(seed, spawn_key=(i,)), so any parallel schedule over
frames yields identical counts.
"""
from __future__ import annotations

from dataclasses import dataclass
import io
import json

import numpy as np

from .correlations import (
    BellSettings,
    CorrelationEstimate,
    ETable,
    bell_error,
    bell_functional,
    correlation_estimate,
)
from .errors import CannotCorrectError
from .formats import fmt, json_round
from .states import (
    ARMS,
    MeasurementSetting,
    StateVector4,
    equatorial,
    index_outcomes,
    outcome_distribution,
    outcome_label,
)


@dataclass(frozen=True, eq=False)
class DetectorBank:
    """Eight detector efficiencies, efficiencies[arm, port] in [0, 1].

    Zero marks a dead detector: frames can still be sampled, but counts
    involving it cannot be efficiency corrected.

    Port 0 is the transmitted (+1 / H) port, port 1 the reflected one.
    """

    efficiencies: np.ndarray

    def __post_init__(self):
        eff = np.asarray(self.efficiencies, dtype=float)
        if eff.shape != (4, 2):
            raise ValueError("need efficiencies of shape (4, 2)")
        if np.any(eff < 0) or np.any(eff > 1):
            raise ValueError("efficiencies must lie in [0, 1]")
        eff = eff.copy()
        eff.flags.writeable = False
        object.__setattr__(self, "efficiencies", eff)

    @classmethod
    def ideal(cls) -> "DetectorBank":
        return cls(np.ones((4, 2)))

    def survival(self) -> np.ndarray:
        """Probability that all four detectors of each outcome quad fire."""
        surv = np.ones(16)
        for i in range(16):
            for arm, l in enumerate(index_outcomes(i)):
                surv[i] *= self.efficiencies[arm, 0 if l == +1 else 1]
        return surv

    def to_json(self) -> str:
        obj = {arm: [json_round(v) for v in self.efficiencies[x]] for x, arm in enumerate(ARMS)}
        return json.dumps(obj)

    @classmethod
    def from_json(cls, text: str) -> "DetectorBank":
        obj = json.loads(text)
        aliases = {"a_prime": "a'", "b_prime": "b'"}
        eff = np.full((4, 2), np.nan)
        for key, pair in obj.items():
            arm = aliases.get(key, key)
            if arm not in ARMS:
                raise ValueError(f"unknown arm {key!r} in detector bank")
            eff[ARMS.index(arm)] = pair
        if np.any(np.isnan(eff)):
            raise ValueError("detector bank is missing arms")
        return cls(eff)


@dataclass(frozen=True, eq=False)
class CoincidenceFrame:
    """Counts of one integration period at fixed settings."""

    settings: tuple
    counts: np.ndarray
    n_emissions: int
    seed: int
    frame_index: int

    def __post_init__(self):
        c = np.asarray(self.counts, dtype=np.int64)
        if c.shape != (16,) or np.any(c < 0):
            raise ValueError("counts must be 16 non-negative integers")
        if int(c.sum()) > self.n_emissions:
            raise ValueError("more counts than emissions")
        c = c.copy()
        c.flags.writeable = False
        object.__setattr__(self, "counts", c)
        object.__setattr__(self, "settings", tuple(self.settings))


def _frame_rng(seed: int, frame_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(frame_index,)))


def sample_frame(
    state: StateVector4,
    settings,
    visibility: float,
    bank: DetectorBank,
    n_emissions: int,
    seed: int,
    frame_index: int = 0,
) -> CoincidenceFrame:
    """Simulate one frame of n_emissions source events."""
    if not 0.0 <= visibility <= 1.0:
        raise ValueError("visibility must lie in [0, 1]")
    if n_emissions < 0:
        raise ValueError("n_emissions must be non-negative")
    probs = visibility * outcome_distribution(state, settings) + (1.0 - visibility) / 16.0
    probs = probs / probs.sum()
    rng = _frame_rng(seed, frame_index)
    emitted = rng.multinomial(n_emissions, probs)
    detected = rng.binomial(emitted, bank.survival())
    return CoincidenceFrame(tuple(settings), detected, n_emissions, seed, frame_index)


def efficiency_correct(counts, bank: DetectorBank) -> np.ndarray:
    """Divide each outcome's count by its fourfold detection probability.

    Returns rates normalized to the raw total, so downstream estimators see
    the same effective event number.
    """
    surv = bank.survival()
    if np.any(surv <= 0):
        raise CannotCorrectError("a required detector has zero efficiency")
    c = np.asarray(counts, dtype=float)
    if c.shape != (16,):
        raise ValueError("need 16 outcome counts")
    total = c.sum()
    if total == 0:
        return np.zeros(16)
    rates = c / surv
    return rates * (total / rates.sum())


# ---------------------------------------------------------------------------
# scans


@dataclass(frozen=True, eq=False)
class ScanDataset:
    """Correlation estimates on a strictly increasing phi_a grid."""

    phis: np.ndarray
    estimates: tuple
    frames: tuple

    def __post_init__(self):
        p = np.asarray(self.phis, dtype=float)
        if p.ndim != 1 or p.size != len(self.estimates):
            raise ValueError("phis and estimates must match")
        if np.any(np.diff(p) <= 0):
            raise ValueError("scan abscissae must be strictly increasing")
        p = p.copy()
        p.flags.writeable = False
        object.__setattr__(self, "phis", p)
        object.__setattr__(self, "estimates", tuple(self.estimates))
        object.__setattr__(self, "frames", tuple(self.frames))

    def values(self) -> np.ndarray:
        return np.array([e.value for e in self.estimates])

    def sigmas(self) -> np.ndarray:
        return np.array([e.std_error for e in self.estimates])


def run_scan(
    state: StateVector4,
    phis,
    visibility: float,
    bank: DetectorBank,
    events_per_point: int,
    seed: int,
) -> ScanDataset:
    """Sweep phi_a with the other analyzers at phase zero.

    Each point is one frame; estimates come from efficiency-corrected rates.
    """
    phis = np.asarray(phis, dtype=float)
    frames = []
    estimates = []
    for i, phi in enumerate(phis):
        settings = (equatorial(float(phi)), equatorial(0.0), equatorial(0.0), equatorial(0.0))
        frame = sample_frame(state, settings, visibility, bank, events_per_point, seed, frame_index=i)
        rates = efficiency_correct(frame.counts, bank)
        estimates.append(correlation_estimate(rates))
        frames.append(frame)
    return ScanDataset(phis, tuple(estimates), tuple(frames))


def dump_scan_csv(dataset: ScanDataset) -> str:
    out = io.StringIO()
    out.write("phi_a,E,sigma\n")
    for phi, est in zip(dataset.phis, dataset.estimates):
        out.write(f"{fmt(phi)},{fmt(est.value)},{fmt(est.std_error)}\n")
    return out.getvalue()


# ---------------------------------------------------------------------------
# Bell runs


@dataclass(frozen=True, eq=False)
class BellRunResult:
    """Sixteen frames, their E table, and the Bell value with its error."""

    settings: BellSettings
    etable: ETable
    s_value: float
    s_error: float
    frames: tuple
    corrected: bool


def run_bell(
    state: StateVector4,
    settings: BellSettings,
    visibility: float,
    bank: DetectorBank,
    events_per_frame: int,
    seed: int,
    corrected: bool = False,
) -> BellRunResult:
    """One frame per setting combination, then S and its propagated error."""
    values = np.empty((2, 2, 2, 2))
    errors = np.empty((2, 2, 2, 2))
    frames = []
    for frame_index, combo in enumerate(settings.combos()):
        quad = settings.quad(combo)
        frame_settings = tuple(equatorial(p) for p in quad)
        frame = sample_frame(
            state, frame_settings, visibility, bank, events_per_frame, seed, frame_index
        )
        counts = efficiency_correct(frame.counts, bank) if corrected else frame.counts
        est = correlation_estimate(counts)
        idx = tuple(i - 1 for i in combo)
        values[idx] = est.value
        errors[idx] = est.std_error
        frames.append(frame)
    table = ETable(values, errors)
    return BellRunResult(
        settings=settings,
        etable=table,
        s_value=bell_functional(table),
        s_error=bell_error(table),
        frames=tuple(frames),
        corrected=corrected,
    )


def events_from_hours(hours: float, rate_per_hour: float = 150.0) -> int:
    """Frame size from an integration time at the observed fourfold rate."""
    if hours < 0 or rate_per_hour < 0:
        raise ValueError("hours and rate must be non-negative")
    return int(round(hours * rate_per_hour))


# ---------------------------------------------------------------------------
# frame CSV and run manifest


def dump_frames_csv(frames) -> str:
    out = io.StringIO()
    out.write("setting_a,setting_a_prime,setting_b,setting_b_prime,outcome,count\n")
    for frame in frames:
        labels = [s.label() for s in frame.settings]
        for i in range(16):
            word = outcome_label(index_outcomes(i), frame.settings)
            out.write(",".join(labels + [word, str(int(frame.counts[i]))]) + "\n")
    return out.getvalue()


def _parse_setting(token: str) -> MeasurementSetting:
    if token == "HV":
        return MeasurementSetting("computational")
    return equatorial(float(token))


def load_frames_csv(text: str):
    """Parse frames back; groups rows by their setting columns in file order."""
    lines = [ln for ln in text.strip().splitlines() if ln.strip()]
    header = "setting_a,setting_a_prime,setting_b,setting_b_prime,outcome,count"
    if not lines or lines[0].strip() != header:
        raise ValueError("bad frames header")
    groups: dict = {}
    order = []
    for ln in lines[1:]:
        parts = ln.split(",")
        if len(parts) != 6:
            raise ValueError(f"bad frame row: {ln!r}")
        key = tuple(parts[:4])
        if key not in groups:
            groups[key] = np.zeros(16, dtype=np.int64)
            order.append(key)
        word = parts[4].strip()
        bits = 0
        for ch in word:
            if ch not in "+-HV":
                raise ValueError(f"bad outcome word {word!r}")
            bits = 2 * bits + (0 if ch in "+H" else 1)
        groups[key][bits] += int(parts[5])
    frames = []
    for key in order:
        settings = tuple(_parse_setting(tok) for tok in key)
        counts = groups[key]
        frames.append(
            CoincidenceFrame(settings, counts, int(counts.sum()), seed=0, frame_index=len(frames))
        )
    return frames


def run_manifest(seed: int, visibility: float, bank: DetectorBank, settings, events: int) -> str:
    """JSON record of everything needed to reproduce a run."""
    if isinstance(settings, BellSettings):
        settings_obj = [
            {"arm": ARMS[x], "index": j, "phi_radians": json_round(settings.phases[x, j - 1])}
            for x in range(4)
            for j in (1, 2)
        ]
    else:
        settings_obj = [json_round(float(p)) for p in np.asarray(settings, dtype=float).ravel()]
    obj = {
        "seed": int(seed),
        "visibility": json_round(visibility),
        "bank": json.loads(bank.to_json()),
        "settings": settings_obj,
        "events": int(events),
    }
    return json.dumps(obj, indent=2, sort_keys=True)
