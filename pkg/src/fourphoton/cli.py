"""Command line front end.

Subcommands
-----------
state       print the four-photon state, its GHZ/EPR split, and the source check
correlate   closed-form and Born-rule correlations, or a sampled analyzer scan
bell        the sixteen-term Bell functional, exact or from sampled frames
counts      fourfold coincidence distribution in a common analyzer basis
qkd         run a key distribution protocol and its security check

Angles are radians; fractions of pi such as ``pi/4`` or ``-3pi/4`` are
accepted anywhere an angle is. Stochastic commands require --seed and are
bit-reproducible. A JSON file passed with --config supplies defaults for any
long option of the subcommand; explicit flags win. Exit codes: 0 success,
2 bad usage or configuration, 3 insufficient data.
"""
from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .correlations import (
    BellSettings,
    bell_error,
    bell_functional,
    correlation_closed_form,
    correlation_exact,
    critical_visibility,
    dump_etable_csv,
    dump_settings_csv,
    etable_from_function,
    fit_scan,
    load_settings_csv,
    optimal_settings,
    state_correlation,
)
from .errors import ConfigError, EmptyFrameError, InsufficientDataError
from .experiment import (
    DetectorBank,
    dump_frames_csv,
    dump_scan_csv,
    run_bell,
    run_manifest,
    run_scan,
    sample_frame,
)
from .formats import fmt, parse_angle
from .protocols import (
    EveModel,
    distill_three_party,
    dump_security_json,
    dump_transcript_csv,
    extract_pair_keys,
    key_to_hex,
    run_protocol,
    security_check,
)
from .spdc import oracle_state
from .states import (
    ARMS,
    canonical_psi4,
    computational,
    decompose_ghz_epr,
    dump_state_json,
    equatorial,
    index_outcomes,
    outcome_distribution,
    overlap,
)

_ARM_TOKENS = {
    "a": "a",
    "a'": "a'",
    "a_prime": "a'",
    "ap": "a'",
    "b": "b",
    "b'": "b'",
    "b_prime": "b'",
    "bp": "b'",
}
_FILE_TOKENS = {"a": "a", "a'": "a_prime", "b": "b", "b'": "b_prime", "a*": "a_star"}


def _fmt_complex(z: complex) -> str:
    if abs(z.imag) < 1e-14:
        return fmt(z.real)
    sign = "+" if z.imag >= 0 else "-"
    return f"{fmt(z.real)} {sign} {fmt(abs(z.imag))}i"


def _parse_arm(token: str) -> str:
    try:
        return _ARM_TOKENS[token.strip()]
    except KeyError:
        raise ConfigError(f"unknown arm {token!r}; use one of a, a', b, b'") from None


def _parse_basis(token: str):
    token = token.strip()
    if token.upper() in ("HV", "COMP", "COMPUTATIONAL"):
        return computational()
    if token.lower() in ("diag", "diagonal"):
        return equatorial(0.0)
    return equatorial(parse_angle(token))


def _parse_eve(text: str) -> EveModel:
    if ":" not in text:
        raise ConfigError("eavesdropper must be given as arm:basis, e.g. b:pi/4 or b:HV")
    arm, basis = text.split(":", 1)
    return EveModel(arm=_parse_arm(arm), basis=_parse_basis(basis))


def _load_bank(path: str | None) -> DetectorBank:
    if path is None:
        return DetectorBank.ideal()
    with open(path, encoding="utf-8") as fh:
        return DetectorBank.from_json(fh.read())


def _load_settings(token: str) -> BellSettings:
    if token == "optimal":
        return optimal_settings()
    with open(token, encoding="utf-8") as fh:
        return load_settings_csv(fh.read())


def _write(path: str, text: str):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
    print(f"wrote {path}")


def _require(ns, names):
    for name in names:
        if getattr(ns, name, None) is None:
            raise ConfigError(f"--{name.replace('_', '-')} is required for this invocation")


# ---------------------------------------------------------------------------
# subcommand handlers


def cmd_state(ns) -> int:
    state = canonical_psi4()
    print("four-photon polarization-entangled state (arms a, a', b, b')")
    for i, amp in enumerate(state.amplitudes):
        if abs(amp) > 1e-14:
            label = "".join("HV"[(i >> s) & 1] for s in (3, 2, 1, 0))
            print(f"  |{label}>  {_fmt_complex(complex(amp))}")
    if ns.decompose:
        g, e, residual = decompose_ghz_epr(state)
        print("decomposition onto GHZ and the EPR-pair product:")
        print(f"  GHZ coefficient        {_fmt_complex(g)}  (|c|^2 = {fmt(abs(g) ** 2)})")
        print(f"  EPR product coefficient {_fmt_complex(e)}  (|c|^2 = {fmt(abs(e) ** 2)})")
        print(f"  residual norm          {fmt(residual)}")
    if ns.check_oracle:
        produced, prob = oracle_state()
        print("second-order emission through the splitters, one photon per arm:")
        print(f"  overlap modulus with the canonical state  {fmt(abs(overlap(produced, state)))}")
        print(f"  postselection success probability         {fmt(prob)}")
    if ns.out:
        _write(ns.out, dump_state_json(state))
    return 0


def cmd_correlate(ns) -> int:
    state = canonical_psi4()
    if ns.scan:
        _require(ns, ["events", "seed"])
        phis = np.linspace(0.0, 2.0 * np.pi, int(ns.points))
        dataset = run_scan(
            state,
            phis,
            visibility=ns.visibility,
            bank=_load_bank(ns.bank),
            events_per_point=int(ns.events),
            seed=int(ns.seed),
        )
        fit = fit_scan(dataset.phis, dataset.values(), dataset.sigmas())
        print(f"analyzer scan on arm a, {ns.points} points, {ns.events} events per point")
        print(f"  visibility    {fmt(fit.visibility)} +- {fmt(fit.visibility_error)}")
        print(f"  phase offset  {fmt(fit.phase_offset)} +- {fmt(fit.phase_offset_error)}")
        print(f"  offset        {fmt(fit.offset)} +- {fmt(fit.offset_error)}")
        if ns.out:
            _write(ns.out, dump_scan_csv(dataset))
        return 0
    _require(ns, ["phases"])
    tokens = [t for t in ns.phases.split(",") if t.strip()]
    if len(tokens) != 4:
        raise ConfigError("--phases needs four comma-separated angles, one per arm")
    quad = np.array([parse_angle(t) for t in tokens])
    closed = ns.visibility * float(correlation_closed_form(quad))
    exact = correlation_exact(state, quad, visibility=ns.visibility)
    print(f"settings (a, a', b, b') = ({', '.join(fmt(x) for x in quad)})")
    print(f"  closed form   {fmt(closed)}")
    print(f"  Born rule     {fmt(exact)}")
    return 0


def cmd_bell(ns) -> int:
    state = canonical_psi4()
    settings = _load_settings(ns.settings)
    if ns.exact:
        corr = state_correlation(state)
        table = etable_from_function(lambda quad: ns.visibility * corr(quad), settings)
        s = bell_functional(table)
        print(f"exact Bell functional at visibility {fmt(ns.visibility)}")
        print(f"  S = {fmt(s)}")
        print(f"  critical visibility = {fmt(critical_visibility(settings, corr))}")
        if ns.out:
            _write(ns.out + "_etable.csv", dump_etable_csv(table))
            _write(ns.out + "_settings.csv", dump_settings_csv(settings))
        return 0
    _require(ns, ["events", "seed"])
    bank = _load_bank(ns.bank)
    result = run_bell(
        state,
        settings,
        visibility=ns.visibility,
        bank=bank,
        events_per_frame=int(ns.events),
        seed=int(ns.seed),
        corrected=ns.corrected,
    )
    sigmas = (result.s_value - 1.0) / result.s_error if result.s_error > 0 else float("inf")
    print(f"sampled Bell functional, {ns.events} events per setting frame")
    print(f"  S = {fmt(result.s_value)} +- {fmt(result.s_error)}")
    if result.s_value > 1.0:
        print(f"  exceeds the local-model bound 1 by {fmt(sigmas)} standard deviations")
    else:
        print("  does not exceed the local-model bound 1")
    if ns.out:
        _write(ns.out + "_etable.csv", dump_etable_csv(result.etable))
        _write(ns.out + "_frames.csv", dump_frames_csv(result.frames))
        _write(
            ns.out + "_manifest.json",
            run_manifest(
                seed=int(ns.seed),
                visibility=ns.visibility,
                bank=bank,
                settings=settings,
                events=int(ns.events),
            ),
        )
    return 0


def cmd_counts(ns) -> int:
    state = canonical_psi4()
    setting = _parse_basis(ns.basis)
    settings = (setting,) * 4
    labels = [
        "".join(("H" if o > 0 else "V") if setting.kind == "computational" else ("+" if o > 0 else "-") for o in index_outcomes(i))
        for i in range(16)
    ]
    if ns.events is None:
        dist = outcome_distribution(state, settings)
        dist = ns.visibility * dist + (1.0 - ns.visibility) / 16.0
        rows = [(labels[i], dist[i]) for i in range(16)]
        header = "outcome,probability"
        values = {labels[i]: float(dist[i]) for i in range(16)}
    else:
        _require(ns, ["seed"])
        frame = sample_frame(
            state,
            settings,
            visibility=ns.visibility,
            bank=_load_bank(ns.bank),
            n_emissions=int(ns.events),
            seed=int(ns.seed),
        )
        rows = [(labels[i], int(frame.counts[i])) for i in range(16)]
        header = "outcome,count"
        values = {labels[i]: int(frame.counts[i]) for i in range(16)}
    if ns.format == "json":
        text = json.dumps(values, indent=2, sort_keys=True)
    else:
        body = "\n".join(f"{label},{fmt(v) if isinstance(v, float) else v}" for label, v in rows)
        text = header + "\n" + body + "\n"
    if ns.out:
        _write(ns.out, text)
    else:
        print(text, end="" if text.endswith("\n") else "\n")
    return 0


def cmd_qkd(ns) -> int:
    _require(ns, ["mode", "rounds", "seed"])
    if ns.mode not in ("four_party", "secret_sharing", "three_party"):
        raise ConfigError(f"unknown mode {ns.mode!r}")
    if ns.comparison_basis not in ("computational", "diagonal"):
        raise ConfigError(f"unknown comparison basis {ns.comparison_basis!r}")
    eve = _parse_eve(ns.eve) if ns.eve else None
    revealing = tuple(_parse_arm(t) for t in ns.reveal.split(","))
    transcript = run_protocol(
        canonical_psi4(),
        int(ns.rounds),
        ns.mode,
        seed=int(ns.seed),
        key_fraction=ns.key_fraction,
        visibility=ns.visibility,
        eve=eve,
        comparison_basis=ns.comparison_basis,
        revealing_pair=revealing,
    )
    report = security_check(transcript, k_sigma=ns.k_sigma)
    print(f"{ns.mode} run, {ns.rounds} rounds, seed {ns.seed}")
    print(f"  Bell rounds {report.n_bell_rounds}, S = {fmt(report.s_value)} +- {fmt(report.s_error)}")
    if report.violation:
        print(f"  S - {fmt(report.k_sigma)} sigma exceeds 1: channel accepted")
    else:
        print(f"  S - {fmt(report.k_sigma)} sigma does not exceed 1: channel rejected, keys discarded")

    artifacts = {}
    if ns.mode == "three_party":
        key = distill_three_party(transcript)
        if key.n_qualifying == 0 or key.n_rounds == 0:
            print("  no comparison rounds survived; nothing to distill")
            return 3
        print(f"  comparison rounds {key.n_qualifying}, kept {key.n_rounds} (fraction {fmt(key.kept_fraction)})")
        for pair, q in sorted(key.qber.items()):
            print(f"  error rate {pair[0]} vs {pair[1]}: {fmt(q)}")
        artifacts = key.bits
    elif ns.mode == "secret_sharing":
        key = extract_pair_keys(transcript)
        if key.n_rounds == 0:
            print("  no usable key rounds; nothing to extract")
            return 3
        holders = tuple(key.bits)
        print(f"  revealing pair ({', '.join(revealing)}), key holders ({', '.join(holders)})")
        print(f"  key length {key.n_rounds}")
        for pair, q in key.qber.items():
            print(f"  error rate {pair[0]} vs {pair[1]}: {fmt(q)}")
        artifacts = key.bits
    else:
        usable = extract_pair_keys(transcript)
        print(f"  usable key rounds {usable.n_rounds} (outcomes stay private in this mode)")

    if ns.out:
        _write(ns.out + "_transcript.csv", dump_transcript_csv(transcript))
        _write(ns.out + "_security.json", dump_security_json(report))
        for party, bits in artifacts.items():
            _write(ns.out + f"_key_{_FILE_TOKENS[party]}.hex", key_to_hex(bits) + "\n")
    return 0


# ---------------------------------------------------------------------------
# parser assembly and config merging


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="fourphoton",
        description="four-photon entanglement simulations: correlations, Bell tests, key distribution",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    built = {}

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="JSON file with defaults for this subcommand")
        built[name] = p
        return p

    p = add("state", "print the four-photon state and its structure")
    p.add_argument("--decompose", action="store_true", help="show the GHZ / EPR-product split")
    p.add_argument("--check-oracle", action="store_true", help="rebuild the state from the two-pair source")
    p.add_argument("--out", help="write the state as JSON")
    p.set_defaults(func=cmd_state)

    p = add("correlate", "fourfold correlation functions")
    p.add_argument("--phases", help="four analyzer angles, comma separated")
    p.add_argument("--visibility", type=float, default=1.0)
    p.add_argument("--scan", action="store_true", help="sampled analyzer scan on arm a")
    p.add_argument("--points", type=int, default=13, help="scan points across one full turn")
    p.add_argument("--events", type=int, help="emitted events per scan point")
    p.add_argument("--seed", type=int)
    p.add_argument("--bank", help="detector bank JSON file")
    p.add_argument("--out", help="write the scan as CSV")
    p.set_defaults(func=cmd_correlate)

    p = add("bell", "sixteen-term Bell functional")
    p.add_argument("--exact", action="store_true", help="closed-form value instead of sampling")
    p.add_argument("--settings", default="optimal", help="'optimal' or a settings CSV file")
    p.add_argument("--visibility", type=float, default=1.0)
    p.add_argument("--events", type=int, help="emitted events per setting frame")
    p.add_argument("--seed", type=int)
    p.add_argument("--bank", help="detector bank JSON file")
    p.add_argument("--corrected", action="store_true", help="apply efficiency correction to the counts")
    p.add_argument("--out", help="prefix for etable/frames/manifest artifacts")
    p.set_defaults(func=cmd_bell)

    p = add("counts", "fourfold coincidence distribution in a common basis")
    p.add_argument("--basis", default="HV", help="HV, diag, or an analyzer angle")
    p.add_argument("--visibility", type=float, default=1.0)
    p.add_argument("--events", type=int, help="sample counts instead of printing probabilities")
    p.add_argument("--seed", type=int)
    p.add_argument("--bank", help="detector bank JSON file")
    p.add_argument("--format", default="csv", help="csv or json")
    p.add_argument("--out", help="write the table to a file")
    p.set_defaults(func=cmd_counts)

    p = add("qkd", "key distribution protocols with security check")
    p.add_argument("--mode", help="four_party, secret_sharing, or three_party")
    p.add_argument("--rounds", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--visibility", type=float, default=1.0)
    p.add_argument("--key-fraction", dest="key_fraction", type=float, default=0.5)
    p.add_argument("--eve", help="intercept-resend attack, arm:basis (e.g. b:pi/4 or b:HV)")
    p.add_argument("--reveal", default="a,a'", help="revealing pair for secret sharing")
    p.add_argument("--comparison-basis", dest="comparison_basis", default="computational")
    p.add_argument("--k-sigma", dest="k_sigma", type=float, default=3.0)
    p.add_argument("--out", help="prefix for transcript/security/key artifacts")
    p.set_defaults(func=cmd_qkd)

    return parser, built


def _merge_config(ns, argv, subparser):
    if not getattr(ns, "config", None):
        return
    try:
        with open(ns.config, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config file must hold a JSON object")
    actions = {a.dest: a for a in subparser._actions}
    allowed = set(actions) - {"help", "config", "func"}
    unknown = sorted(set(cfg) - allowed)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    for key, value in cfg.items():
        option = "--" + key.replace("_", "-")
        explicit = any(tok == option or tok.startswith(option + "=") for tok in argv)
        if explicit:
            continue
        action = actions[key]
        if isinstance(value, str) and action.type is not None and action.type is not str:
            value = action.type(value)
        setattr(ns, key, value)


def main(argv=None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    parser, built = _build_parser()
    ns = parser.parse_args(argv)
    try:
        _merge_config(ns, argv, built[ns.command])
        return ns.func(ns)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (InsufficientDataError, EmptyFrameError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
