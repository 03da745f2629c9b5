"""Command-line entry point: ``python -m firstdetect <command> ...``.

Exit status is 0 on success, 2 for invalid input (bad configuration or
arguments) and 3 when a numerical routine fails.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .detection import DetectionSpec, projectors
from .errors import ConfigError, FirstDetectError, NumericalError
from .lattice import Geometry, LatticeModel, evolution, many_body_hamiltonian
from .linalg import hermitian_eig
from .manybody import InternalGram, initial_state
from .resonance import degenerate_times, scan_hamiltonian, snap_to_degenerate
from .strobe import StrobeProblem, detection_statistics
from .sweep import load_config, moduli_csv, overlap_state, reproduce_fig3, run_sweep

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

log = logging.getLogger("firstdetect")


def _lattice_args(p: argparse.ArgumentParser, *, with_detector: bool = True) -> None:
    p.add_argument("--l", type=int, required=True, help="number of lattice sites")
    p.add_argument("--N", type=int, default=2, help="number of particles (default 2)")
    p.add_argument("--J", type=float, default=1.0, help="tunneling amplitude (default 1)")
    p.add_argument("--geometry", choices=[g.value for g in Geometry], default="chain")
    p.add_argument("--target", type=int, default=None, help="detection site (default: last site)")
    if with_detector:
        p.add_argument("--detector", default=">=1", help="'=n' or '>=n' (default >=1)")


def _grid_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--tau-min", type=float, default=0.0)
    p.add_argument("--tau-max", type=float, default=10.0)
    p.add_argument("--points", type=int, default=501)


def _model(args) -> tuple[LatticeModel, DetectionSpec]:
    try:
        model = LatticeModel(args.l, args.J, args.geometry)
        spec = DetectionSpec.parse(args.detector, args.N, args.l, args.target)
    except ValueError as exc:
        raise ConfigError({"arguments": str(exc)}) from exc
    return model, spec


def _grid(args) -> np.ndarray:
    if args.points < 2 or args.tau_min < 0 or not args.tau_max > args.tau_min:
        raise ConfigError({"tau": "need 0 <= tau-min < tau-max and at least 2 points"})
    return np.linspace(args.tau_min, args.tau_max, args.points)


def _emit(text: str, out) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def cmd_sweep(args) -> int:
    config = load_config(args.config)
    if args.workers is not None:
        config = replace(config, workers=args.workers)
    if args.csv is not None:
        config = replace(config, csv_path=Path(args.csv))
    result = run_sweep(config)
    if config.csv_path is None:
        sys.stdout.write(result.to_csv())
    else:
        log.info("wrote %d rows to %s", len(result.rows), config.csv_path)
    return EXIT_OK


def cmd_fig3(args) -> int:
    result = reproduce_fig3(args.l, args.out, workers=args.workers, svg=not args.no_svg,
                            tau_points=args.points)
    log.info("wrote %d rows for l=%d to %s", len(result.rows), args.l, args.out)
    return EXIT_OK


def cmd_spectrum(args) -> int:
    model, spec = _model(args)
    grid = _grid(args)
    h = many_body_hamiltonian(model.hamiltonian(), spec.N)
    scan = scan_hamiltonian(h, projectors(spec), grid / args.J, refine=False)
    _emit(moduli_csv(scan, args.J), args.out)
    return EXIT_OK


def cmd_resonances(args) -> int:
    model, spec = _model(args)
    grid = _grid(args)
    h = many_body_hamiltonian(model.hamiltonian(), spec.N)
    scan = scan_hamiltonian(h, projectors(spec), grid / args.J)
    energies = hermitian_eig(h).energies
    cands = degenerate_times(energies, (args.tau_max + 1.0) / args.J)
    raw = scan.resonant_taus()
    snapped = snap_to_degenerate(raw, cands)
    out = {
        "detector": spec.label,
        "resonances": [
            {"tau_J_per_hbar": s * args.J, "scanned": r * args.J, "degenerate": s != r}
            for r, s in zip(raw, snapped)
        ],
        "degenerate_times": sorted({round(c.tau * args.J, 12) for c in cands if c.tau * args.J <= args.tau_max}),
        "skipped": [t * args.J for t in scan.skipped],
    }
    _emit(json.dumps(out, indent=2) + "\n", args.out)
    return EXIT_OK


def cmd_tfirst(args) -> int:
    model, spec = _model(args)
    if not -1.0 <= args.overlap <= 1.0:
        raise ConfigError({"overlap": "must lie in [-1, 1]"})
    if args.tau < 0:
        raise ConfigError({"tau": "must be >= 0"})
    st = overlap_state(args.overlap, args.N)
    try:
        state = initial_state(InternalGram(st.gram), st.species, args.l)
        ev = evolution(model, args.N, args.tau / args.J)
        problem = StrobeProblem(ev.U, projectors(spec), state, args.tau / args.J, hamiltonian=ev.H)
    except NumericalError:
        raise
    except ValueError as exc:
        raise ConfigError({"arguments": str(exc)}) from exc
    stats = detection_statistics(problem, k_max=1, eps=args.eps, k_cap=args.k_cap)
    out = {
        "tau_J_per_hbar": args.tau,
        "overlap_signed": args.overlap,
        "detector": spec.label,
        "S_inf": stats.S_inf,
        "t_first": None if stats.t_first is None else stats.t_first * args.J,
        "t_first_flag": None if stats.flag is None else stats.flag.value,
        "k_truncated": stats.k_truncated,
        "truncation_reason": stats.truncation_reason.value,
        "max_modulus": stats.max_modulus,
    }
    sys.stdout.write(json.dumps(out, indent=2) + "\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="firstdetect", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep", help="run a sweep described by a YAML file")
    p.add_argument("config")
    p.add_argument("--workers", type=int, default=None, help="override the worker count")
    p.add_argument("--csv", default=None, help="override the CSV path")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("reproduce-fig3", help="two particles on an l-site chain")
    p.add_argument("--l", type=int, required=True, choices=[3, 5, 7, 10])
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--points", type=int, default=501)
    p.add_argument("--no-svg", action="store_true")
    p.set_defaults(func=cmd_fig3)

    p = sub.add_parser("spectrum", help="eigenvalue moduli of the no-detection block vs tau")
    _lattice_args(p)
    _grid_args(p)
    p.add_argument("--out", default=None, help="CSV path (default stdout)")
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("resonances", help="resonant and degenerate sampling times")
    _lattice_args(p)
    _grid_args(p)
    p.add_argument("--out", default=None, help="JSON path (default stdout)")
    p.set_defaults(func=cmd_resonances)

    p = sub.add_parser("tfirst", help="statistics at a single sampling time (JSON)")
    _lattice_args(p)
    p.add_argument("--tau", type=float, required=True, help="tau J / hbar")
    p.add_argument("--overlap", type=float, default=0.0, help="signed overlap in [-1, 1]")
    p.add_argument("--eps", type=float, default=1e-4)
    p.add_argument("--k-cap", type=int, default=10000)
    p.set_defaults(func=cmd_tfirst)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        for field, msg in exc.errors.items():
            print(f"config error: {field}: {msg}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (FirstDetectError, ValueError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
