"""Correlation functions and the four-party Bell functional.

The equatorial correlation of the canonical state has the closed form

    E(phi_a, phi_a', phi_b, phi_b')
        = (2/3) cos(phi_a + phi_a' - phi_b - phi_b')
        + (1/3) cos(phi_a - phi_a') cos(phi_b - phi_b')

and the Bell functional over two settings per party is

    S = (1/16) sum_{s_a, s_a', s_b, s_b' = +-1}
        | sum_{k,l,m,n in {1,2}} s_a^k s_a'^l s_b^m s_b'^n E(k,l,m,n) |

with the convention s^1 = s, s^2 = 1. Local hidden variable models obey
S <= 1; the canonical state reaches 4*sqrt(2)/3 = 1.8856 at the analyzer
settings phi_a in {0, pi/2} and +-pi/4 elsewhere, and a perfect GHZ
correlation reaches sqrt(8) there.
"""
from __future__ import annotations

from dataclasses import dataclass
import io
import itertools
import math

import numpy as np

from .errors import EmptyFrameError, UnderdeterminedFitError
from .formats import fmt
from .states import (
    ARMS,
    StateVector4,
    equatorial,
    outcome_distribution,
    outcome_parity,
)

#: parity of each outcome index (product of the four +-1 outcomes)
PARITY = np.array([outcome_parity(i) for i in range(16)], dtype=float)

# sign-weight matrix: row = sign quad s (bit 0 means s = +1), column =
# setting combo (k,l,m,n) flattened with bit 0 meaning index 1. Entry is the
# product over parties of (s if the party's index is 1 else 1).
_KLMN = list(itertools.product((0, 1), repeat=4))


def _weights() -> np.ndarray:
    w = np.empty((16, 16))
    for si, sbits in enumerate(_KLMN):
        s = [1.0 if b == 0 else -1.0 for b in sbits]
        for ti, tbits in enumerate(_KLMN):
            prod = 1.0
            for x in range(4):
                if tbits[x] == 0:
                    prod *= s[x]
            w[si, ti] = prod
    return w


WEIGHTS = _weights()


def correlation_closed_form(quad) -> np.ndarray | float:
    """Closed-form correlation; broadcasts over a trailing axis of 4 phases."""
    q = np.asarray(quad, dtype=float)
    val = (2.0 / 3.0) * np.cos(q[..., 0] + q[..., 1] - q[..., 2] - q[..., 3]) + (
        1.0 / 3.0
    ) * np.cos(q[..., 0] - q[..., 1]) * np.cos(q[..., 2] - q[..., 3])
    return float(val) if val.ndim == 0 else val


def ghz_correlation(quad) -> np.ndarray | float:
    """Correlation of a perfect GHZ component, cos(phi_a + phi_a' - phi_b - phi_b')."""
    q = np.asarray(quad, dtype=float)
    val = np.cos(q[..., 0] + q[..., 1] - q[..., 2] - q[..., 3])
    return float(val) if val.ndim == 0 else val


def correlation_exact(state: StateVector4, quad, visibility: float = 1.0) -> float:
    """Born-rule correlation at equatorial phases, scaled by the visibility.

    White noise admixed with probability 1 - visibility is uniform over the
    16 outcomes and contributes nothing to the parity expectation, so the
    correlation is exactly visibility times the noiseless value.
    """
    if not 0.0 <= visibility <= 1.0:
        raise ValueError("visibility must lie in [0, 1]")
    settings = [equatorial(p) for p in quad]
    probs = outcome_distribution(state, settings)
    return float(visibility * (PARITY @ probs))


def state_correlation(state: StateVector4):
    """Vectorized equatorial correlation function of an arbitrary state.

    The parity observable at phase phi is off-diagonal in H/V, so the
    correlation is a trigonometric polynomial
    E(q) = Re sum_i c_i exp(-i sum_x eps_x(i) phi_x) with eps = +1 for H and
    c_i the product of the amplitude and the conjugate amplitude of the
    arm-wise flipped ket. Returns a callable with the same broadcasting
    behavior as correlation_closed_form.
    """
    amps = state.amplitudes
    coefs = np.empty(16, dtype=complex)
    signs = np.empty((16, 4))
    for i in range(16):
        flipped = i ^ 0b1111
        coefs[i] = np.conj(amps[i]) * amps[flipped]
        signs[i] = [+1.0 if (i >> shift) & 1 == 0 else -1.0 for shift in (3, 2, 1, 0)]

    def corr(quad):
        q = np.asarray(quad, dtype=float)
        phase = q @ signs.T  # (..., 16)
        val = np.real(np.exp(-1j * phase) @ coefs)
        return float(val) if val.ndim == 0 else val

    return corr


# ---------------------------------------------------------------------------
# counting estimator


@dataclass(frozen=True)
class CorrelationEstimate:
    """Parity estimate from fourfold counts with its Poisson standard error."""

    value: float
    std_error: float
    n_events: float


def correlation_estimate(counts) -> CorrelationEstimate:
    """Estimate E = sum_i parity_i c_i / N from 16 outcome counts.

    Poisson propagation through the normalized sum gives
    sigma = sqrt((1 - E^2)/N), which vanishes at perfect correlation.
    `counts` may be efficiency-corrected rates; N is then the effective
    total used in the error.
    """
    c = np.asarray(counts, dtype=float)
    if c.shape != (16,):
        raise ValueError("need 16 outcome counts")
    if np.any(c < 0):
        raise ValueError("counts must be non-negative")
    n = float(c.sum())
    if n == 0:
        raise EmptyFrameError("frame has no events")
    value = float(PARITY @ c) / n
    std_error = math.sqrt(max(0.0, 1.0 - value**2) / n)
    return CorrelationEstimate(value, std_error, n)


# ---------------------------------------------------------------------------
# Bell settings and functional


@dataclass(frozen=True, eq=False)
class BellSettings:
    """Two analyzer phases per arm; phases[arm, k-1] is setting k."""

    phases: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.phases, dtype=float)
        if p.shape != (4, 2):
            raise ValueError("need phases of shape (4, 2)")
        p = p.copy()
        p.flags.writeable = False
        object.__setattr__(self, "phases", p)

    def quad(self, combo) -> np.ndarray:
        """Phases of one setting combination (k, l, m, n) with entries 1 or 2."""
        return np.array([self.phases[x, combo[x] - 1] for x in range(4)])

    def combos(self):
        """All 16 setting combinations in lexicographic order."""
        return itertools.product((1, 2), repeat=4)


def optimal_settings() -> BellSettings:
    """phi_a in {0, pi/2}; +pi/4 and -pi/4 on the other three arms."""
    return BellSettings(
        np.array(
            [
                [0.0, np.pi / 2],
                [np.pi / 4, -np.pi / 4],
                [np.pi / 4, -np.pi / 4],
                [np.pi / 4, -np.pi / 4],
            ]
        )
    )


@dataclass(frozen=True, eq=False)
class ETable:
    """Correlation values (and optionally errors) on the 2x2x2x2 setting grid."""

    values: np.ndarray
    errors: np.ndarray | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).reshape(2, 2, 2, 2).copy()
        v.flags.writeable = False
        object.__setattr__(self, "values", v)
        if self.errors is not None:
            e = np.asarray(self.errors, dtype=float).reshape(2, 2, 2, 2).copy()
            if np.any(e < 0):
                raise ValueError("errors must be non-negative")
            e.flags.writeable = False
            object.__setattr__(self, "errors", e)


def etable_from_function(corr, settings: BellSettings) -> ETable:
    """Evaluate a correlation function on all 16 setting combinations."""
    vals = np.empty((2, 2, 2, 2))
    for combo in settings.combos():
        vals[tuple(i - 1 for i in combo)] = corr(settings.quad(combo))
    return ETable(vals)


def bell_functional(table) -> float:
    """S = mean over the 16 sign quads of |weighted sum of the 16 E values|."""
    values = table.values if isinstance(table, ETable) else np.asarray(table, dtype=float)
    inner = WEIGHTS @ values.reshape(16)
    return float(np.mean(np.abs(inner)))


def bell_error(table: ETable) -> float:
    """Propagated error of S with the gradient frozen at the measured signs.

    Inner sums whose magnitude is below their own propagated error are given
    gradient zero: their sign is not resolved by the data, and a sign that
    flips under resampling contributes no first-order sensitivity.
    """
    if table.errors is None:
        raise ValueError("table carries no errors")
    e = table.values.reshape(16)
    sig = table.errors.reshape(16)
    inner = WEIGHTS @ e
    inner_err = np.sqrt(WEIGHTS**2 @ sig**2)
    frozen = np.where(np.abs(inner) < inner_err, 0.0, np.sign(inner))
    grad = (frozen @ WEIGHTS) / 16.0
    return float(np.sqrt(np.sum(grad**2 * sig**2)))


def critical_visibility(settings: BellSettings, corr=correlation_closed_form) -> float:
    """Smallest white-noise visibility still violating S <= 1 at the settings.

    S scales linearly in the visibility, so the threshold is 1/S. Values at
    or above 1 signal that no violation is possible there; a vanishing S
    returns inf.
    """
    s = bell_functional(etable_from_function(corr, settings))
    if s == 0.0:
        return math.inf
    return 1.0 / s


# ---------------------------------------------------------------------------
# settings search

#: largest number of grid combinations evaluated exhaustively
MAX_EXHAUSTIVE = 3_000_000


def _grid(resolution: float) -> np.ndarray:
    k = 2.0 * math.pi / resolution
    n = round(k)
    if n < 1 or abs(k - n) > 1e-9:
        raise ValueError("resolution must divide 2*pi")
    return np.arange(n) * (2.0 * math.pi / n)


def _eval_tables(corr, quads: np.ndarray) -> np.ndarray:
    # quads: (n, 16, 4) -> S: (n,)
    e = corr(quads)
    return np.abs(e @ WEIGHTS.T).mean(axis=-1)


def _exhaustive(corr, grid: np.ndarray, fix_first: bool):
    k = grid.size
    bits = np.array(_KLMN)  # (16, 4), bit 0 = setting 1
    # the table entries only ever see single-setting combinations, so the
    # correlation is evaluated once on the k^4 grid and gathered from there
    mesh = np.stack(np.meshgrid(grid, grid, grid, grid, indexing="ij"), axis=-1)
    e_full = np.asarray(corr(mesh.reshape(-1, 4))).reshape(k, k, k, k)
    pairs = np.array(list(itertools.product(range(k), repeat=2)))  # lexicographic
    a_pairs = pairs[:k] if fix_first else pairs  # (0, j) pairs come first
    n_bb = len(pairs) ** 2
    ib = np.arange(n_bb) // len(pairs)
    ibp = np.arange(n_bb) % len(pairs)
    col_b = pairs[ib][:, bits[:, 2]]  # (n_bb, 16)
    col_bp = pairs[ibp][:, bits[:, 3]]
    best_s = -np.inf
    best_phases = None
    for a_pair in a_pairs:
        col_a = a_pair[bits[:, 0]]  # (16,)
        for ap_pair in pairs:
            col_ap = ap_pair[bits[:, 1]]
            tables = e_full[col_a[None, :], col_ap[None, :], col_b, col_bp]
            s = np.abs(tables @ WEIGHTS.T).mean(axis=-1)
            i = int(np.argmax(s))  # first hit = lexicographically smallest
            if s[i] > best_s + 1e-12:
                best_s = float(s[i])
                best_phases = np.array(
                    [grid[a_pair], grid[ap_pair], grid[pairs[ib[i]]], grid[pairs[ibp[i]]]]
                )
    return best_phases, best_s


def _coordinate_ascent(corr, grid: np.ndarray, phases: np.ndarray, max_passes: int = 8):
    phases = phases.copy()
    combo_bits = np.array(_KLMN)

    def s_of(p):
        quads = np.empty((1, 16, 4))
        for ti, bits in enumerate(combo_bits):
            for x in range(4):
                quads[0, ti, x] = p[x, bits[x]]
        return float(_eval_tables(corr, quads)[0])

    best = s_of(phases)
    for _ in range(max_passes):
        improved = False
        for arm in range(4):
            for j in range(2):
                if arm == 0 and j == 0:
                    continue  # symmetry-reduced coordinate stays fixed
                candidates = np.repeat(phases[None, :, :], grid.size, axis=0)
                candidates[:, arm, j] = grid
                quads = np.empty((grid.size, 16, 4))
                for ti, bits in enumerate(combo_bits):
                    for x in range(4):
                        quads[:, ti, x] = candidates[:, x, bits[x]]
                s = _eval_tables(corr, quads)
                i = int(np.argmax(s))
                if s[i] > best + 1e-12:
                    best = float(s[i])
                    phases = candidates[i]
                    improved = True
        if not improved:
            break
    return phases, best


def settings_search(
    corr=correlation_closed_form,
    resolution: float = math.pi / 12,
    reduce_symmetry: bool = True,
):
    """Maximize S over analyzer phases on a grid. Returns (BellSettings, S).

    The first phase of arm a is fixed to zero when reduce_symmetry is on;
    shifting every phase by a constant leaves both provided correlation
    functions invariant, so nothing is lost. Small grids are searched
    exhaustively in lexicographic order (ties resolve to the smallest phase
    vector); finer grids start from the exhaustive optimum of the coarsest
    embedded sub-grid and run deterministic coordinate-ascent sweeps to a
    fixpoint.
    """
    grid = _grid(resolution)
    k = grid.size
    free = 7 if reduce_symmetry else 8
    if float(k) ** free <= MAX_EXHAUSTIVE:
        phases, s = _exhaustive(corr, grid, fix_first=reduce_symmetry)
        return BellSettings(phases), s
    # coarse stage: largest divisor sub-grid that fits the exhaustive budget
    step = 1
    while (k // step) ** free > MAX_EXHAUSTIVE or k % step:
        step += 1
        if step > k:
            step = k
            break
    coarse = grid[::step]
    phases, _ = _exhaustive(corr, coarse, fix_first=reduce_symmetry)
    phases, s = _coordinate_ascent(corr, grid, phases)
    return BellSettings(phases), s


# ---------------------------------------------------------------------------
# sinusoidal scan fit


@dataclass(frozen=True)
class ScanFit:
    """E(phi) = visibility * cos(phi - phase_offset) + offset, with errors."""

    visibility: float
    phase_offset: float
    offset: float
    visibility_error: float
    phase_offset_error: float
    offset_error: float


def fit_scan(phis, values, sigmas=None) -> ScanFit:
    """Least-squares sinusoid with known unit frequency.

    Linear regression on {cos phi, sin phi, 1}. When per-point errors are
    given they weight the fit and the parameter errors come from the exact
    covariance; otherwise the residual variance estimates them (zero when
    there are no spare degrees of freedom).
    """
    phis = np.asarray(phis, dtype=float)
    values = np.asarray(values, dtype=float)
    if phis.shape != values.shape or phis.ndim != 1:
        raise ValueError("phis and values must be matching 1-d arrays")
    if np.unique(phis).size < 3:
        raise UnderdeterminedFitError("need at least 3 distinct scan phases")
    design = np.stack([np.cos(phis), np.sin(phis), np.ones_like(phis)], axis=1)
    if sigmas is not None:
        sig = np.asarray(sigmas, dtype=float)
        if np.any(sig <= 0):
            raise ValueError("sigmas must be positive")
        w = 1.0 / sig
        dw = design * w[:, None]
        yw = values * w
    else:
        dw, yw = design, values
    if np.linalg.matrix_rank(dw) < 3:
        raise UnderdeterminedFitError("scan phases leave the fit degenerate")
    coef, res, _, _ = np.linalg.lstsq(dw, yw, rcond=None)
    gram_inv = np.linalg.inv(dw.T @ dw)
    if sigmas is not None:
        cov = gram_inv
    else:
        dof = phis.size - 3
        resid = yw - dw @ coef
        s2 = float(resid @ resid) / dof if dof > 0 else 0.0
        cov = gram_inv * s2
    a, b, c = coef
    amp = math.hypot(a, b)
    delta = math.atan2(b, a)
    # delta method for (amp, delta) from (a, b)
    if amp > 0:
        ja = np.array([a / amp, b / amp])
        jd = np.array([-b / amp**2, a / amp**2])
        amp_err = math.sqrt(max(0.0, ja @ cov[:2, :2] @ ja))
        delta_err = math.sqrt(max(0.0, jd @ cov[:2, :2] @ jd))
    else:
        amp_err = math.sqrt(max(0.0, cov[0, 0]))
        delta_err = math.inf
    return ScanFit(
        visibility=float(amp),
        phase_offset=float(delta),
        offset=float(c),
        visibility_error=float(amp_err),
        phase_offset_error=float(delta_err),
        offset_error=float(math.sqrt(max(0.0, cov[2, 2]))),
    )


# ---------------------------------------------------------------------------
# CSV interfaces


def dump_etable_csv(table: ETable) -> str:
    out = io.StringIO()
    out.write("k,l,m,n,E,sigma\n")
    for combo in itertools.product((1, 2), repeat=4):
        i = tuple(x - 1 for x in combo)
        sigma = "" if table.errors is None else fmt(table.errors[i])
        out.write(
            f"{combo[0]},{combo[1]},{combo[2]},{combo[3]},{fmt(table.values[i])},{sigma}\n"
        )
    return out.getvalue()


def load_etable_csv(text: str) -> ETable:
    lines = [ln for ln in text.strip().splitlines() if ln.strip()]
    if not lines or lines[0].strip() != "k,l,m,n,E,sigma":
        raise ValueError("bad E-table header")
    values = np.full((2, 2, 2, 2), np.nan)
    errors = np.full((2, 2, 2, 2), np.nan)
    has_err = False
    for ln in lines[1:]:
        parts = ln.split(",")
        if len(parts) != 6:
            raise ValueError(f"bad E-table row: {ln!r}")
        k, l, m, n = (int(p) for p in parts[:4])
        idx = (k - 1, l - 1, m - 1, n - 1)
        values[idx] = float(parts[4])
        if parts[5] != "":
            errors[idx] = float(parts[5])
            has_err = True
    if np.any(np.isnan(values)):
        raise ValueError("E-table is missing setting combinations")
    if has_err and np.any(np.isnan(errors)):
        raise ValueError("E-table mixes rows with and without errors")
    return ETable(values, errors if has_err else None)


def dump_settings_csv(settings: BellSettings) -> str:
    out = io.StringIO()
    out.write("arm,index,phi_radians\n")
    for x, arm in enumerate(ARMS):
        for j in (1, 2):
            out.write(f"{arm},{j},{fmt(settings.phases[x, j - 1])}\n")
    return out.getvalue()


def load_settings_csv(text: str) -> BellSettings:
    lines = [ln for ln in text.strip().splitlines() if ln.strip()]
    if not lines or lines[0].strip() != "arm,index,phi_radians":
        raise ValueError("bad settings header")
    phases = np.full((4, 2), np.nan)
    for ln in lines[1:]:
        parts = ln.split(",")
        if len(parts) != 3:
            raise ValueError(f"bad settings row: {ln!r}")
        arm, j, phi = parts[0].strip(), int(parts[1]), float(parts[2])
        if arm not in ARMS:
            raise ValueError(f"unknown arm {arm!r}")
        phases[ARMS.index(arm), j - 1] = phi
    if np.any(np.isnan(phases)):
        raise ValueError("settings file is missing rows")
    return BellSettings(phases)
