"""Simulation toolkit for a pulsed four-photon polarization-entangled source.

The package builds the four-photon state produced by double-pair emission
split over four arms, evaluates its fourfold correlation functions and a
sixteen-term Bell functional, samples finite coincidence data with detector
efficiencies, and runs multi-party key distribution protocols on top with an
intercept-resend eavesdropper model.
"""
from .correlations import (
    BellSettings,
    CorrelationEstimate,
    ETable,
    ScanFit,
    WEIGHTS,
    bell_error,
    bell_functional,
    correlation_closed_form,
    correlation_estimate,
    correlation_exact,
    critical_visibility,
    dump_etable_csv,
    dump_settings_csv,
    etable_from_function,
    fit_scan,
    ghz_correlation,
    load_etable_csv,
    load_settings_csv,
    optimal_settings,
    settings_search,
    state_correlation,
)
from .errors import (
    CannotCorrectError,
    ConfigError,
    EmptyFrameError,
    InsufficientDataError,
    InvalidStateError,
    UnderdeterminedFitError,
)
from .experiment import (
    BellRunResult,
    CoincidenceFrame,
    DetectorBank,
    ScanDataset,
    dump_frames_csv,
    dump_scan_csv,
    efficiency_correct,
    events_from_hours,
    load_frames_csv,
    run_bell,
    run_manifest,
    run_scan,
    sample_frame,
)
from .formats import fmt, parse_angle
from .protocols import (
    EveModel,
    KeyMaterial,
    ProtocolTranscript,
    SecurityReport,
    distill_three_party,
    dump_security_json,
    dump_transcript_csv,
    eve_exact_etable,
    eve_exact_qber,
    extract_pair_keys,
    hex_to_key,
    key_to_hex,
    load_security_json,
    load_transcript_csv,
    run_protocol,
    security_check,
)
from .spdc import (
    FockVector,
    SplitterConvention,
    apply_beam_splitters,
    dump_fock_json,
    load_fock_json,
    oracle_state,
    postselect_one_per_arm,
    two_pair_source,
    vacuum,
)
from .states import (
    ARMS,
    MeasurementSetting,
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

__version__ = "0.1.0"

__all__ = [
    "ARMS",
    "BellRunResult",
    "BellSettings",
    "CannotCorrectError",
    "CoincidenceFrame",
    "ConfigError",
    "CorrelationEstimate",
    "DetectorBank",
    "ETable",
    "EmptyFrameError",
    "EveModel",
    "FockVector",
    "InsufficientDataError",
    "InvalidStateError",
    "KeyMaterial",
    "MeasurementSetting",
    "ProtocolTranscript",
    "ScanDataset",
    "ScanFit",
    "SecurityReport",
    "SplitterConvention",
    "StateVector4",
    "UnderdeterminedFitError",
    "WEIGHTS",
    "apply_beam_splitters",
    "apply_identical_unitary",
    "bell_error",
    "bell_functional",
    "canonical_psi4",
    "computational",
    "correlation_closed_form",
    "correlation_estimate",
    "correlation_exact",
    "critical_visibility",
    "decompose_ghz_epr",
    "distill_three_party",
    "dump_etable_csv",
    "dump_fock_json",
    "dump_frames_csv",
    "dump_scan_csv",
    "dump_security_json",
    "dump_settings_csv",
    "dump_state_json",
    "dump_transcript_csv",
    "efficiency_correct",
    "epr_pair",
    "equal_up_to_global_phase",
    "equatorial",
    "etable_from_function",
    "eve_exact_etable",
    "eve_exact_qber",
    "events_from_hours",
    "extract_pair_keys",
    "fit_scan",
    "fmt",
    "ghz4",
    "ghz_correlation",
    "hex_to_key",
    "key_to_hex",
    "load_etable_csv",
    "load_fock_json",
    "load_frames_csv",
    "load_security_json",
    "load_settings_csv",
    "load_state_json",
    "load_transcript_csv",
    "optimal_settings",
    "oracle_state",
    "outcome_distribution",
    "outcome_parity",
    "outcome_probability",
    "overlap",
    "parse_angle",
    "postselect_one_per_arm",
    "run_bell",
    "run_manifest",
    "run_protocol",
    "run_scan",
    "sample_frame",
    "security_check",
    "setting_eigenstate",
    "settings_search",
    "state_correlation",
    "two_pair_source",
    "vacuum",
]
