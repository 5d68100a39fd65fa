"""Operator command line: validate, run, compile, protocol-verify, serve."""

from __future__ import annotations

import argparse
import logging
import sys
import time

from .compiler import parse_logical_program, transform_program
from .errors import ProgramSyntaxError, QetSimError, QpuRuntimeError
from .isa import format_program, parse_program_with_lines, validate_program
from .machine import run_program
from .protocol import (ProtocolInput, assemble_state, initial_state,
                       protocol_sequence, run_protocol, step_term_trace,
                       verify_against_cqet)
from .service import QpfService, ServiceServer, encode_message, serve_stdio
from .statevector import RandomSource, fidelity

IDEAL_INFIDELITY_GATE = 1e-9


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qetsim",
        description="Emulator tools for the excitation-transfer QPU")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a physical or logical program file")
    p.add_argument("path")

    p = sub.add_parser("run", help="execute a program file")
    p.add_argument("path")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--shots", type=_positive_int, default=1)
    p.add_argument("--output", choices=("human", "machine"), default="human")

    p = sub.add_parser("compile", help="lower a logical program to machine text")
    p.add_argument("path")

    p = sub.add_parser("protocol-verify",
                       help="run the physics-level transfer protocol oracle")
    p.add_argument("--samples", type=_positive_int, default=100)
    p.add_argument("--convention", choices=("ideal", "physical"),
                   default="ideal")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", choices=("human", "machine"), default="human")

    p = sub.add_parser("serve", help="serve the multi-client framework protocol")
    p.add_argument("--capacity", type=_positive_int, default=1024)
    p.add_argument("--transport", choices=("stdio", "socket"), default="stdio")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=0)
    return parser


def _read(path: str) -> str:
    with open(path, "r", encoding="utf-8") as handle:
        return handle.read()


def _program_kind(text: str) -> str:
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            return line.split()[0].upper()
    return ""


def _print_syntax_errors(exc: ProgramSyntaxError, out):
    for lineno, message in exc.issues:
        print(f"line {lineno}: {message}", file=out)


def cmd_validate(args) -> int:
    text = _read(args.path)
    kind = _program_kind(text)
    if kind == "LQ":
        try:
            parse_logical_program(text)
        except ProgramSyntaxError as exc:
            _print_syntax_errors(exc, sys.stdout)
            return 1
        print("ok")
        return 0
    try:
        program, lines = parse_program_with_lines(text)
    except ProgramSyntaxError as exc:
        _print_syntax_errors(exc, sys.stdout)
        return 1
    issues = validate_program(program)
    for index, message in issues:
        print(f"line {lines[index]} (instruction {index}): {message}")
    if issues:
        return 1
    print("ok")
    return 0


def cmd_run(args) -> int:
    text = _read(args.path)
    try:
        if _program_kind(text) == "LQ":
            program = transform_program(parse_logical_program(text))
        else:
            program, _ = parse_program_with_lines(text)
    except ProgramSyntaxError as exc:
        _print_syntax_errors(exc, sys.stdout)
        return 1
    except QetSimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    rng = RandomSource(args.seed)
    counts: dict[str, int] = {}
    try:
        for shot in range(args.shots):
            results, _ = run_program(program, rng)
            key = "".join(str(bit) for _, bit in results)
            counts[key] = counts.get(key, 0) + 1
            if args.output == "machine":
                print(encode_message(
                    {"type": "shot", "shot": shot,
                     "results": [{"qubit": addr, "bit": bit}
                                 for addr, bit in results]}))
            else:
                readout = " ".join(f"m{addr}={bit}" for addr, bit in results)
                print(f"shot {shot}: {readout or '(no measurements)'}")
    except QpuRuntimeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if args.output == "machine":
        print(encode_message({"type": "aggregate", "shots": args.shots,
                              "counts": counts}))
    else:
        print(f"counts over {args.shots} shot(s):")
        for key in sorted(counts):
            fraction = counts[key] / args.shots
            print(f"  {key or '-'}: {counts[key]} ({fraction:.4f})")
    return 0


def cmd_compile(args) -> int:
    text = _read(args.path)
    try:
        logical = parse_logical_program(text)
        program = transform_program(logical)
    except ProgramSyntaxError as exc:
        _print_syntax_errors(exc, sys.stdout)
        return 1
    except QetSimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    sys.stdout.write(format_program(program))
    return 0


def cmd_protocol_verify(args) -> int:
    reference = ProtocolInput(0.5, 0.5, 0.5, 0.5)
    result = run_protocol(reference, args.convention)
    trace = step_term_trace(args.convention)
    rows = [("initial state", fidelity(initial_state(reference),
                                       initial_state(reference)))]
    for step, terms, state in zip(protocol_sequence(args.convention),
                                  trace, result.intermediates):
        rows.append((step.name, fidelity(assemble_state(terms, reference),
                                         state)))
    comparison = verify_against_cqet(args.samples, args.convention, args.seed)

    if args.output == "machine":
        for index, (name, value) in enumerate(rows):
            print(encode_message({"type": "step", "step": index, "name": name,
                                  "fidelity": value}))
        print(encode_message({
            "type": "summary", "convention": comparison.convention,
            "samples": comparison.samples,
            "transfer_infidelity": comparison.transfer_infidelity,
            "matrix_infidelity": comparison.matrix_infidelity,
            "branch_phases": {name: [phase.real, phase.imag]
                              for name, phase in
                              comparison.branch_phases.items()}}))
    else:
        for index, (name, value) in enumerate(rows):
            print(f"step {index:2d}  {name:<36s} fidelity {value:.12f}")
        print(f"transfer infidelity (plain swap target):  "
              f"{comparison.transfer_infidelity:.3e}")
        print(f"gate-matrix infidelity (with i factors):  "
              f"{comparison.matrix_infidelity:.3e}")
        for name, phase in comparison.branch_phases.items():
            print(f"branch phase {name:<6s} {phase.real:+.6f}{phase.imag:+.6f}i")
    if (args.convention == "ideal"
            and comparison.transfer_infidelity > IDEAL_INFIDELITY_GATE):
        return 1
    return 0


def cmd_serve(args) -> int:
    logging.basicConfig(level=logging.INFO,
                        format="%(asctime)s %(name)s %(message)s")
    service = QpfService(seed=args.seed, capacity=args.capacity)
    if args.transport == "stdio":
        serve_stdio(service, sys.stdin, sys.stdout)
        return 0
    server = ServiceServer(service, args.host, args.port)
    server.start()
    host, port = server.address
    print(f"listening on {host}:{port}", flush=True)
    try:
        while True:
            time.sleep(3600)
    except KeyboardInterrupt:
        pass
    finally:
        server.stop()
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {
        "validate": cmd_validate,
        "run": cmd_run,
        "compile": cmd_compile,
        "protocol-verify": cmd_protocol_verify,
        "serve": cmd_serve,
    }
    try:
        return handlers[args.command](args)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
