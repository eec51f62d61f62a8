"""Command-line surface: register analysis, device lifecycle, protocol runs,
attacks, and metrics.  Every run is deterministic given its flags and seed.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .adversary import (
    ReplayAttacker,
    collect_naked_crps,
    collect_obfuscated_crps,
    eavesdrop,
    puf_metrics,
    replay_attack,
    train_linear_attack,
)
from .apuf import sample_instance
from .device import (
    DeviceConfig,
    _atomic_write,
    build_device,
    default_lane_pairs,
    load_device,
    save_device,
)
from .errors import SimulationError
from .lfsr import LfsrSpec, classify, find_primitive
from .obfuscator import DualLfsrSpec, trace_records
from .protocol import run_authentication, run_registration
from .server import load_registry

DEFAULT_ROUNDS = 5


def _common() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="run seed")
    common.add_argument("--out", help="output file path")
    common.add_argument(
        "--format", choices=("table", "records"), default="table",
        help="report style: aligned table or key=value records",
    )
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(
        prog="dualpuf",
        description="Simulation toolkit for a time-variant dual-LFSR arbiter "
        "PUF and its two-time authentication protocol.",
    )
    top = parser.add_subparsers(dest="group", required=True)

    lfsr = top.add_parser("lfsr", help="register and polynomial analysis")
    lfsr_sub = lfsr.add_subparsers(dest="command", required=True)
    p = lfsr_sub.add_parser("primitive", parents=[common], help="list primitive polynomials")
    p.add_argument("--order", type=int, required=True)
    p = lfsr_sub.add_parser("classify", parents=[common], help="cycle partition of a polynomial")
    p.add_argument("--poly", required=True, help="mask (0b1011) or human form (x^3+x+1)")
    p = lfsr_sub.add_parser("trace", parents=[common], help="challenge trace for a vote history")
    p.add_argument("--poly", required=True)
    p.add_argument("--poly2", required=True)
    p.add_argument("--challenge", required=True, help="external challenge, any int literal")
    p.add_argument("--mode", type=int, choices=(0, 1), default=1)
    p.add_argument("--bits", required=True, help="per-round vote history, e.g. 00110")

    device = top.add_parser("device", help="tag lifecycle")
    device_sub = device.add_subparsers(dest="command", required=True)
    p = device_sub.add_parser("build", parents=[common], help="manufacture and initialize a tag")
    p.add_argument("--stages", type=int, required=True)
    p.add_argument("--lanes", type=int, default=1)
    p.add_argument("--sigma", type=float, default=0.0)
    p.add_argument("--voter-t", type=int, default=5)
    p.add_argument("--rounds", type=int, default=DEFAULT_ROUNDS)
    p = device_sub.add_parser("fuse", parents=[common], help="close the raw interface")
    p.add_argument("--device", required=True)
    p = device_sub.add_parser("crp", parents=[common], help="raw naked query (pre-fuse only)")
    p.add_argument("--device", required=True)
    p.add_argument("--challenge", required=True)

    auth = top.add_parser("auth", help="registration and authentication")
    auth_sub = auth.add_subparsers(dest="command", required=True)
    p = auth_sub.add_parser("register", parents=[common], help="enroll a device, fuse it")
    p.add_argument("--device", required=True)
    p.add_argument("--policy", choices=("auto", "full", "params"), default="auto")
    p.add_argument("--tau", type=int)
    p.add_argument("--t-min", type=int, default=2)
    p.add_argument("--t-max", type=int, default=17)
    p = auth_sub.add_parser("run", parents=[common], help="honest sessions")
    p.add_argument("--device", required=True)
    p.add_argument("--registry", required=True)
    p.add_argument("--sessions", type=int, default=100)
    p.add_argument("--tau", type=int, help="override the registered threshold")

    attack = top.add_parser("attack", help="adversary harnesses")
    attack_sub = attack.add_subparsers(dest="command", required=True)
    p = attack_sub.add_parser("replay", parents=[common], help="record one session, replay it")
    p.add_argument("--device", required=True)
    p.add_argument("--registry", required=True)
    p.add_argument("--sessions", type=int, default=2000)
    p.add_argument("--parity", choices=("random", "flip", "match"), default="random")
    p.add_argument("--no-reuse", action="store_true", help="server draws fresh challenges")
    p = attack_sub.add_parser("model", parents=[common], help="linear modeling attack")
    p.add_argument("--stages", type=int, required=True)
    p.add_argument("--train", type=int, default=20000)
    p.add_argument("--test", type=int, default=5000)
    p.add_argument("--epochs", type=int, default=300)
    p.add_argument("--lr", type=float, default=0.5)
    p.add_argument("--obfuscated", action="store_true", help="attack the external interface")

    p = top.add_parser("metrics", parents=[common], help="uniformity/reliability/uniqueness")
    p.add_argument("--stages", type=int, required=True)
    p.add_argument("--lanes", type=int, default=50)
    p.add_argument("--challenges", type=int, default=1000)
    p.add_argument("--repeats", type=int, default=11)
    p.add_argument("--sigma", type=float, default=0.0)
    return parser


def _emit(args, lines: list[str]) -> None:
    text = "\n".join(lines)
    print(text)
    if args.out:
        _atomic_write(args.out, text + "\n")


def _cmd_lfsr(args) -> list[str]:
    if args.command == "primitive":
        return [" ".join(spec.mask_str() for spec in find_primitive(args.order))]
    if args.command == "classify":
        spec = LfsrSpec.parse(args.poly)
        result = classify(spec)
        width = spec.order
        lines = [f"poly = {spec}", f"useless = {0:0{width}b}"]
        lines += [
            "useful = " + " ".join(f"{s:0{width}b}" for s in cycle)
            for cycle in result.useful
        ]
        lines += [
            "additional = " + " ".join(f"{s:0{width}b}" for s in cycle)
            for cycle in result.additional
        ]
        if args.format == "records":
            lines = [
                f"poly = {spec.mask_str()}",
                "useless_states = 1",
                f"useful_cycles = {len(result.useful)}",
                f"useful_states = {result.useful_count}",
                f"additional_cycles = {len(result.additional)}",
                f"additional_states = {result.additional_count}",
            ]
        return lines
    pair = DualLfsrSpec(
        (LfsrSpec.parse(args.poly), LfsrSpec.parse(args.poly2)),
        rounds_per_response=len(args.bits),
    )
    bits = [int(b) for b in args.bits]
    return trace_records(pair, int(args.challenge, 0), args.mode, bits)


def _cmd_device(args) -> list[str]:
    if args.command == "build":
        if not args.out:
            raise SimulationError("device build needs --out for the device file")
        config = DeviceConfig(
            k=args.lanes,
            n_stages=args.stages,
            lane_pairs=default_lane_pairs(args.stages, args.lanes, args.rounds),
            voter_t=args.voter_t,
            sigma_noise=args.sigma,
            device_seed=args.seed,
        )
        device = build_device(config)
        # --out is the device file here, not a report copy
        target, args.out = args.out, None
        save_device(device, target)
        return [f"built k={args.lanes} stages={args.stages} -> {target}"]
    if args.command == "fuse":
        device = load_device(args.device)
        device.fuse()
        save_device(device, args.device)
        return ["fused"]
    device = load_device(args.device)
    bits = device.raw_crp_query(int(args.challenge, 0))
    value = 0
    for i, b in enumerate(bits):
        value |= int(b) << i
    return [f"{value:0{(device.config.k + 3) // 4}x}"]


def _cmd_auth(args) -> list[str]:
    if args.command == "register":
        if not args.out:
            raise SimulationError("auth register needs --out for the registry file")
        device = load_device(args.device)
        # --out is the registry file here, not a report copy
        target, args.out = args.out, None
        registry = run_registration(
            device,
            registry_path=target,
            policy=args.policy,
            tau=args.tau,
            t_range=(args.t_min, args.t_max),
            rng_seed=args.seed,
        )
        save_device(device, args.device)  # persist the fused flag
        return [f"registered mode={registry.mode} tau={registry.tau} -> {target}"]
    device = load_device(args.device)
    registry = load_registry(args.registry)
    if args.tau is not None:
        registry.tau = args.tau
    passes = sum(
        run_authentication(registry, device).passed for _ in range(args.sessions)
    )
    return [f"pass={passes}/{args.sessions}"]


def _cmd_attack(args) -> list[str]:
    if args.command == "replay":
        device = load_device(args.device)
        registry = load_registry(args.registry)
        honest = run_authentication(registry, device)
        if not honest.passed:
            raise SimulationError("the recorded honest session did not pass")
        attacker = eavesdrop(ReplayAttacker(), honest.transcript)
        report = replay_attack(
            attacker,
            registry,
            sessions=args.sessions,
            reuse_challenges=not args.no_reuse,
            recorded=honest.transcript if not args.no_reuse else None,
            parity_policy=args.parity,
            rng_seed=args.seed,
        )
        if args.format == "records":
            return report.record_lines()
        return report.format_table().split("\n")

    total = args.train + args.test
    split = args.train / total
    if args.obfuscated:
        config = DeviceConfig(
            k=1,
            n_stages=args.stages,
            lane_pairs=default_lane_pairs(args.stages, 1),
            device_seed=args.seed,
        )
        crps = collect_obfuscated_crps(build_device(config), total, rng_seed=args.seed + 1)
    else:
        lane = sample_instance(args.stages, args.seed)
        crps = collect_naked_crps(lane, total, rng_seed=args.seed + 1)
    model = train_linear_attack(
        crps, split=split, epochs=args.epochs, learning_rate=args.lr, rng_seed=args.seed
    )
    lines = model.record_lines()
    lines.insert(0, f"target = {'obfuscated' if args.obfuscated else 'naked'}")
    return lines


def _cmd_metrics(args) -> list[str]:
    lanes = [
        sample_instance(args.stages, np.random.SeedSequence([args.seed, i]), args.sigma)
        for i in range(args.lanes)
    ]
    rng = np.random.default_rng(args.seed)
    challenges = rng.integers(0, 1 << args.stages, size=args.challenges)
    record = puf_metrics(lanes, challenges, repeats=args.repeats, rng_seed=args.seed + 1)
    if args.format == "records":
        return record.record_lines()
    return record.format_table().split("\n")


def dispatch(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.group == "lfsr":
            lines = _cmd_lfsr(args)
        elif args.group == "device":
            lines = _cmd_device(args)
        elif args.group == "auth":
            lines = _cmd_auth(args)
        elif args.group == "attack":
            lines = _cmd_attack(args)
        else:
            lines = _cmd_metrics(args)
    except SimulationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    _emit(args, lines)
    return 0


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
