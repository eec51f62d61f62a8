"""Desk-scale simulation of a time-variant dual-LFSR arbiter PUF and its
replay-resistant two-time authentication protocol."""

from .adversary import (
    AttackReport,
    CrpRecord,
    LinearAttackModel,
    MetricsRecord,
    ReplayAttacker,
    collect_naked_crps,
    collect_obfuscated_crps,
    eavesdrop,
    puf_metrics,
    replay_attack,
    train_linear_attack,
)
from .apuf import (
    ApufInstance,
    evaluate_raw,
    parity_features,
    response_probability_one,
    sample_instance,
)
from .device import (
    DeviceConfig,
    PufDevice,
    build_device,
    default_lane_pairs,
    deserialize_response,
    load_device,
    preprocess,
    save_device,
    serialize_response,
)
from .errors import SimulationError
from .lfsr import (
    LfsrSpec,
    LfsrState,
    classify,
    find_primitive,
    is_m_sequence,
    make_lfsr,
    period,
    pick_lfsr_pair,
    step,
)
from .obfuscator import (
    DualLfsrSpec,
    ObfuscatorState,
    challenge_trace,
    generate_response,
    next_real_challenge,
    seed_obfuscator,
    trace_records,
)
from .postproc import (
    AdjustParams,
    AdjustReport,
    randomness_adjust,
    vote,
    xor_fold,
)
from .protocol import (
    AuthResult,
    Frame,
    SessionTranscript,
    SimChannel,
    run_authentication,
    run_registration,
)
from .server import (
    ServerRegistry,
    compare,
    default_tau,
    gen_session,
    load_registry,
    predict_response,
    register_from_ttp,
    save_registry,
)

__version__ = "0.1.0"

__all__ = [
    "AdjustParams",
    "AdjustReport",
    "ApufInstance",
    "AttackReport",
    "AuthResult",
    "CrpRecord",
    "DeviceConfig",
    "DualLfsrSpec",
    "Frame",
    "LfsrSpec",
    "LfsrState",
    "LinearAttackModel",
    "MetricsRecord",
    "ObfuscatorState",
    "PufDevice",
    "ReplayAttacker",
    "ServerRegistry",
    "SessionTranscript",
    "SimChannel",
    "SimulationError",
    "build_device",
    "challenge_trace",
    "classify",
    "collect_naked_crps",
    "collect_obfuscated_crps",
    "compare",
    "default_lane_pairs",
    "default_tau",
    "deserialize_response",
    "eavesdrop",
    "evaluate_raw",
    "find_primitive",
    "gen_session",
    "generate_response",
    "is_m_sequence",
    "load_device",
    "load_registry",
    "make_lfsr",
    "next_real_challenge",
    "parity_features",
    "period",
    "pick_lfsr_pair",
    "predict_response",
    "preprocess",
    "puf_metrics",
    "randomness_adjust",
    "register_from_ttp",
    "replay_attack",
    "response_probability_one",
    "run_authentication",
    "run_registration",
    "sample_instance",
    "save_device",
    "save_registry",
    "seed_obfuscator",
    "serialize_response",
    "step",
    "trace_records",
    "train_linear_attack",
    "vote",
    "xor_fold",
]
