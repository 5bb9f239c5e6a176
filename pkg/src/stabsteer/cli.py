"""Batch command-line frontend.

Subcommands: verify, correct, simulate, correlate, protocol, todd.
Exit codes: 0 success, 2 verification failure, 3 infeasible correction,
4 capacity, 5 parse error.
"""

from __future__ import annotations

import argparse
import io
import json
import sys

import numpy as np

from . import __version__
from .correct import (
    correct_error,
    error_generator,
    protocol_to_lindbladian,
    recalibrate_for_readout_errors,
)
from .errors import CapacityError, SpecFileError, StabsteerError
from .evolve import (
    SimulationConfig,
    correlation,
    evolve,
    steady_state_solve,
)
from .lindblad import (
    check_strong_symmetry,
    check_weak_symmetry,
    merge_models,
    stationarity_residual,
    t_parity_split,
    time_reverse,
)
from .modelspec import (
    parse_model_spec,
    spec_dict_for_model,
    write_atomic,
)
from .pauli import PauliSum, parse_pauli
from .todd import (
    classical_todd_rates,
    enumerate_g_basis,
    motif_str,
    motif_words,
    quantum_block_solve,
)

EXIT_OK = 0
EXIT_VERIFY = 2
EXIT_INFEASIBLE = 3
EXIT_CAPACITY = 4
EXIT_PARSE = 5


def _load(path):
    import os

    if str(path).endswith(".json") and not os.path.exists(path):
        raise SpecFileError(f"no such file {path}")
    return parse_model_spec(path)


def _product_state(n, dim):
    rho = np.zeros((dim, dim), dtype=complex)
    rho[0, 0] = 1.0
    return rho


def cmd_verify(args):
    spec = _load(args.spec)
    model = spec.build_model()
    lines = [f"stabsteer verify ({spec.config_hash()})"]
    res = stationarity_residual(model)
    lines.append(f"stationarity residual: {res:.3e}")
    margin = model.min_gamma_eig()
    lines.append(f"gamma PSD margin (min eigenvalue): {margin:.3e}")
    if model.m is not None:
        m_h = (model.m + model.m.conj().T) / 2
        m_a = model.m - m_h
        odd = np.linalg.norm(m_a) / max(np.linalg.norm(model.m), 1e-300)
        kindof = "T-even" if odd <= 1e-10 else (
            "T-odd" if odd >= 1 - 1e-10 else "mixed T parity"
        )
        lines.append(f"T parity from m: {kindof} (odd fraction {odd:.3e})")
    elif res <= args.tolerance:
        rev = time_reverse(model)
        diff = np.abs(rev.to_superoperator() - model.to_superoperator()).max()
        lines.append(
            "T parity: " + ("T-even" if diff <= 1e-10 else
                            f"not T-invariant (|L~ - L| = {diff:.3e})")
        )
    for u in spec.symmetries:
        weak = check_weak_symmetry(model, u)
        strong = check_strong_symmetry(model, u)
        lines.append(f"symmetry {u}: weak={weak} strong={strong}")
    report = "\n".join(lines) + "\n"
    if args.out:
        write_atomic(args.out, report)
    print(report, end="")
    return EXIT_OK if res <= args.tolerance else EXIT_VERIFY


def cmd_correct(args):
    spec = _load(args.spec)
    if not spec.errors:
        print("no errors listed in the spec", file=sys.stderr)
        return EXIT_PARSE
    model = spec.build_model()
    combined = model
    status = EXIT_OK
    for k, err in enumerate(spec.errors):
        combined = merge_models(combined, error_generator(spec.potential, err))
        delta, proto = correct_error(spec.potential, err)
        combined = merge_models(combined, delta)
        if args.emit_protocol and hasattr(proto, "rows"):
            if args.readout_q > 0:
                recal = recalibrate_for_readout_errors(proto, args.readout_q)
                if not recal.feasible:
                    print(
                        f"error {k}: recalibration infeasible at q={args.readout_q}; "
                        f"signed rates {recal.solved_vector}",
                        file=sys.stderr,
                    )
                    status = EXIT_INFEASIBLE
                    proto = None
                else:
                    proto = recal.protocol
            if proto is not None:
                proto.write_csv(f"{args.emit_protocol}.{k}.csv")
                proto.write_json(f"{args.emit_protocol}.{k}.json")
    out = spec_dict_for_model(combined, spec)
    text = json.dumps(out, indent=1, sort_keys=True)
    if args.out:
        write_atomic(args.out, text)
    else:
        print(text)
    res = stationarity_residual(combined) if combined.n_qubits <= 6 else None
    if res is not None:
        print(f"corrected residual: {res:.3e}", file=sys.stderr)
    return status


def _observables(spec, model):
    obs = list(spec.simulation.observables) if spec.simulation else []
    if not obs:
        obs = [("Z0", PauliSum.from_pairs(
            [(1.0, parse_pauli("Z0", model.n_qubits))], model.n_qubits))]
    return obs


def _csv_series(times, columns, hash_line):
    buf = io.StringIO()
    buf.write(f"# config {hash_line}\n")
    buf.write("t,observable,re,im\n")
    for name, series in columns.items():
        for t, v in zip(times, series):
            buf.write(f"{t:.10g},{name},{v.real:.12g},{v.imag:.12g}\n")
    return buf.getvalue()


def cmd_simulate(args):
    spec = _load(args.spec)
    model = spec.build_model()
    for err in spec.errors:
        model = merge_models(model, error_generator(spec.potential, err))
    cfg = spec.simulation or SimulationConfig()
    cfg.observables = _observables(spec, model)
    if args.mode == "dense":
        cfg.integrator = "dense_exponential"
    elif args.mode == "sparse":
        cfg.integrator = "adaptive_rk"
    dim = 2 ** model.n_qubits
    res = evolve(_product_state(model.n_qubits, dim), model, cfg)
    text = _csv_series(res.times, res.expectations, spec.config_hash())
    if args.out:
        write_atomic(args.out, text)
    else:
        print(text, end="")
    return EXIT_OK


def _parse_times(text):
    if ":" in text:
        start, stop, step = (float(x) for x in text.split(":"))
        return np.arange(start, stop + 1e-12, step)
    return np.array([float(x) for x in text.split(",")])


def cmd_correlate(args):
    spec = _load(args.spec)
    model = spec.build_model()
    for err in spec.errors:
        model = merge_models(model, error_generator(spec.potential, err))
    times = _parse_times(args.times)
    columns = {}
    n = model.n_qubits
    for pair in args.pairs.split(";"):
        a_text, b_text = (s.strip() for s in pair.split(","))
        a = PauliSum.from_pairs([(1.0, parse_pauli(a_text, n))], n)
        b = PauliSum.from_pairs([(1.0, parse_pauli(b_text, n))], n)
        columns[f"<{a_text}(t) {b_text}>"] = correlation(model, a, b, times)
    text = _csv_series(times, columns, spec.config_hash())
    if args.out:
        write_atomic(args.out, text)
    else:
        print(text, end="")
    return EXIT_OK


def cmd_protocol(args):
    spec = _load(args.spec)
    if not spec.errors:
        print("no errors listed in the spec", file=sys.stderr)
        return EXIT_PARSE
    status = EXIT_OK
    for k, err in enumerate(spec.errors):
        _, proto = correct_error(spec.potential, err)
        if not hasattr(proto, "rows"):
            # generalized-measurement plan: emit the class table as JSON
            plan = {
                "classes": [
                    {"c": e["c"], "rate": e["rate"], "jump": str(e["jump"]),
                     "projective": bool(e.get("projective", False))}
                    for e in proto.entries
                ]
            }
            write_atomic(f"{args.out}.{k}.json", json.dumps(plan, indent=1))
            continue
        if args.readout_q > 0:
            recal = recalibrate_for_readout_errors(proto, args.readout_q)
            curve = {
                "q": args.readout_q,
                "feasible": recal.feasible,
                "solved_rates": list(map(float, recal.solved_vector)),
            }
            write_atomic(f"{args.out}.{k}.recal.json", json.dumps(curve, indent=1))
            if not recal.feasible:
                status = EXIT_INFEASIBLE
                continue
            proto = recal.protocol
        proto.write_csv(f"{args.out}.{k}.csv")
        proto.write_json(f"{args.out}.{k}.json")
    return status


def cmd_todd(args):
    if args.q > 4:
        print("q > 4 exceeds the enumeration guard", file=sys.stderr)
        return EXIT_CAPACITY
    if args.q < 2:
        print("q must be at least 2", file=sys.stderr)
        return EXIT_PARSE
    lines = []
    if args.mode == "classical":
        basis = enumerate_g_basis(args.q)
        lines.append(f"g basis size: {len(basis)}")
        for k, g in enumerate(basis):
            table = classical_todd_rates(g, args.q, [args.mu] * args.q)
            check = table.check_stationarity(min(2 * args.q, 10))
            lines.append(f"g[{k}]: {len(table.rates)} rates, "
                         f"stationarity defect {check:.2e}")
            if args.out:
                table.write_csv(f"{args.out}.g{k}.csv")
    else:
        core = (1,) * (args.q - args.n) if args.alpha is None else None
        alpha = tuple(int(x) for x in args.alpha.split(",")) if args.alpha else (1,) * (args.q - args.n)
        beta = tuple(-a for a in alpha)
        sol = quantum_block_solve(args.q, args.n, [args.mu] * (args.q + args.n),
                                  alpha, beta)
        lines.append(
            f"quantum block q={args.q} n={args.n}: {sol.n_equations} equations, "
            f"rank {sol.rank}, solution dimension {sol.dimension}"
        )
        if args.out:
            write_atomic(f"{args.out}.block.json",
                         json.dumps(sol.to_json_dict(), indent=1))
    print("\n".join(lines))
    return EXIT_OK


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="stabsteer",
        description="design, verify, correct and simulate Lindbladians with "
                    "stabilizer Gibbs steady states",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, spec=True):
        if spec:
            p.add_argument("--spec", required=True, help="model spec JSON path")
        p.add_argument("--out", help="output path")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--tolerance", type=float, default=1e-9)
        p.add_argument("--mode", choices=["dense", "sparse", "auto"],
                       default="auto")

    p = sub.add_parser("verify", help="stationarity / PSD / symmetry report")
    common(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("correct", help="synthesize corrections for the errors")
    common(p)
    p.add_argument("--emit-protocol", help="path prefix for protocol files")
    p.add_argument("--readout-q", type=float, default=0.0)
    p.set_defaults(func=cmd_correct)

    p = sub.add_parser("simulate", help="time evolution, CSV series")
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("correlate", help="two-time correlation functions")
    common(p)
    p.add_argument("--pairs", required=True,
                   help="semicolon-separated 'A,B' Pauli pairs")
    p.add_argument("--times", required=True, help="start:stop:step or list")
    p.set_defaults(func=cmd_correlate)

    p = sub.add_parser("protocol", help="export feedback protocols")
    common(p)
    p.add_argument("--readout-q", type=float, default=0.0)
    p.set_defaults(func=cmd_protocol)

    p = sub.add_parser("todd", help="T-odd generators: g basis and blocks")
    p.add_argument("--out", help="output path prefix")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-q", type=int, required=True, help="motif length")
    p.add_argument("-n", type=int, default=1, help="pad length (quantum mode)")
    p.add_argument("--mu", type=float, default=0.25 * np.log(2))
    p.add_argument("--alpha", help="comma-separated core word, quantum mode")
    p.add_argument("--mode", choices=["classical", "quantum"],
                   default="classical")
    p.set_defaults(func=cmd_todd)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CapacityError as exc:
        print(f"capacity: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except SpecFileError as exc:
        print(f"parse: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except StabsteerError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VERIFY


if __name__ == "__main__":
    raise SystemExit(main())
