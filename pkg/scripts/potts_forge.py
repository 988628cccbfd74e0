#!/usr/bin/env python3
"""
potts-forge: band-gap parameter estimation for Potts and Ising models.

Commands:
  estimate-das   parameters whose ground set is exactly the given data set
  estimate-gsm   parameters with a prescribed number of ground states
  gsm-oracle     brute-force reference for estimate-gsm (tiny models only)
  spectrum       ground states, first excited energy and band gap of given parameters
  nll-curve      NLL and its theorem bounds over a beta grid (CSV)
  compare        likelihood-trained versus band-gap-trained NLL curves (CSV + summary JSON)

Progress goes to stderr, results to stdout or --out.
Exit codes: 0 success, 1 usage or input error, 2 rejected estimate, 3 solver limit.
"""

from __future__ import annotations

import argparse
import io
import json
import logging
import os
import sys
from dataclasses import dataclass

# プロジェクトルートをパスに追加
sys.path.insert(0, os.path.join(os.path.dirname(os.path.abspath(__file__)), ".."))

from scripts.errors import DegenerateGap, InputFormatError, InvalidArgument, PottsForgeError
from scripts.formulations import estimate_das, estimate_gsm, gsm_bruteforce, result_from_dict, result_to_dict
from scripts.milp import DEFAULT_NODE_LIMIT, SolverConfig
from scripts.potts import box_bounds, encode, model_from_dict, params_from_dict, params_to_dict, parse_state
from scripts.spectrum import (
    DEFAULT_BETA_MAX,
    DEFAULT_BETA_MIN,
    DEFAULT_BETA_POINTS,
    DEFAULT_LEARNING_RATE,
    DEFAULT_TRAIN_STEPS,
    beta_grid,
    compute_spectrum,
    format_float,
    nll,
    nll_curve,
    spectrum_summary,
    train_nll,
    write_curve_csv,
)

__version__ = "0.1.0"

THREADS_ENV = "POTTS_FORGE_THREADS"

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_REJECTED = 2
EXIT_LIMIT = 3

COMMANDS = ("estimate-das", "estimate-gsm", "spectrum", "nll-curve", "compare", "gsm-oracle")


@dataclass(frozen=True)
class RunConfig:
    command: str
    model_path: str
    data_path: str | None = None
    n_gs: int | None = None
    params_path: str | None = None
    beta_min: float = DEFAULT_BETA_MIN
    beta_max: float = DEFAULT_BETA_MAX
    beta_points: int = DEFAULT_BETA_POINTS
    beta_scale: str = "log"
    out_path: str | None = None
    summary_path: str | None = None
    node_limit: int = DEFAULT_NODE_LIMIT
    time_limit: float | None = None
    threads: int = 1
    steps: int = DEFAULT_TRAIN_STEPS
    learning_rate: float = DEFAULT_LEARNING_RATE
    verbose: bool = False

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise InvalidArgument(f"unknown command {self.command!r}")
        needs = {
            "estimate-das": ("data_path",),
            "estimate-gsm": ("n_gs",),
            "gsm-oracle": ("n_gs",),
            "spectrum": ("params_path",),
            "nll-curve": ("params_path",),
            "compare": ("data_path",),
        }[self.command]
        for name in needs:
            if getattr(self, name) is None:
                raise InvalidArgument(f"{self.command} needs --{name.replace('_path', '').replace('_', '')}")
        if self.threads < 1:
            raise InvalidArgument(f"threads must be at least 1, got {self.threads}")

    def solver_config(self) -> SolverConfig:
        return SolverConfig(node_limit=self.node_limit, time_limit=self.time_limit)

    @classmethod
    def from_args(cls, args, environ=None) -> "RunConfig":
        environ = os.environ if environ is None else environ
        threads = args.threads
        if environ.get(THREADS_ENV):
            try:
                threads = int(environ[THREADS_ENV])
            except ValueError:
                raise InvalidArgument(f"{THREADS_ENV} must be an integer, got {environ[THREADS_ENV]!r}")
        return cls(
            command=args.command,
            model_path=args.model,
            data_path=getattr(args, "data", None),
            n_gs=getattr(args, "ngs", None),
            params_path=getattr(args, "params", None),
            beta_min=args.beta_min,
            beta_max=args.beta_max,
            beta_points=args.beta_points,
            beta_scale=args.beta_scale,
            out_path=args.out,
            summary_path=getattr(args, "summary", None),
            node_limit=args.node_limit,
            time_limit=args.time_limit,
            threads=threads,
            steps=getattr(args, "steps", DEFAULT_TRAIN_STEPS),
            learning_rate=getattr(args, "learning_rate", DEFAULT_LEARNING_RATE),
            verbose=args.verbose,
        )


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise InvalidArgument(message)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--model", required=True, help="model JSON (graph, preset or U/V tables, bounds)")
    common.add_argument("--out", help="output file (default: stdout)")
    common.add_argument("--beta-min", type=float, default=DEFAULT_BETA_MIN)
    common.add_argument("--beta-max", type=float, default=DEFAULT_BETA_MAX)
    common.add_argument("--beta-points", type=int, default=DEFAULT_BETA_POINTS)
    common.add_argument("--beta-scale", choices=("log", "linear"), default="log")
    common.add_argument("--node-limit", type=int, default=DEFAULT_NODE_LIMIT)
    common.add_argument("--time-limit", type=float, help="seconds per solve")
    common.add_argument("--threads", type=int, default=1, help=f"worker threads ({THREADS_ENV} overrides)")
    common.add_argument("--verbose", action="store_true", help="debug logging on stderr")

    parser = _Parser(prog="potts-forge", description="Band-gap parameter estimation for Potts models")
    parser.add_argument("--version", action="version", version=f"potts-forge {__version__}")
    commands = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    das = commands.add_parser("estimate-das", parents=[common], help="ground set prescribed by a data set")
    das.add_argument("--data", required=True, help="JSON array of states")

    for name, text in (("estimate-gsm", "prescribed ground-state multiplicity"), ("gsm-oracle", "brute-force GSM reference")):
        sub = commands.add_parser(name, parents=[common], help=text)
        sub.add_argument("--ngs", type=int, required=True, help="number of ground states")

    spectrum = commands.add_parser("spectrum", parents=[common], help="spectrum summary of given parameters")
    spectrum.add_argument("--params", required=True, help="params or result JSON")

    curve = commands.add_parser("nll-curve", parents=[common], help="NLL and bounds over a beta grid")
    curve.add_argument("--params", required=True, help="params or result JSON")
    curve.add_argument("--data", help="JSON array of states (default: ground set of the parameters)")

    compare = commands.add_parser("compare", parents=[common], help="NLL-trained versus DAS curves")
    compare.add_argument("--data", required=True, help="JSON array of states")
    compare.add_argument("--summary", help="summary JSON output file")
    compare.add_argument("--steps", type=int, default=DEFAULT_TRAIN_STEPS)
    compare.add_argument("--learning-rate", type=float, default=DEFAULT_LEARNING_RATE)
    return parser


def say(message):
    """Progress line on stderr."""
    print(message, file=sys.stderr)


def load_json(path, what):
    with open(path, encoding="utf-8") as f:
        try:
            return json.load(f)
        except json.JSONDecodeError as exc:
            raise InputFormatError(f"{what} file {path} is not valid JSON: {exc}")


def load_model(config: RunConfig):
    model, bounds = model_from_dict(load_json(config.model_path, "model"))
    if bounds is None:
        bounds = box_bounds(model.graph)
    say(f"Loaded model: {model.n_vertices} vertices, {model.n_edges} edges, {model.n_labels} labels")
    return model, bounds


def load_data(model, path):
    raw = load_json(path, "data")
    if not isinstance(raw, list):
        raise InputFormatError("data must be a JSON array of states")
    return [parse_state(model, state) for state in raw]


def emit(config: RunConfig, text: str, path: str | None = None, what: str = "Output"):
    """Write to `path` (default --out) or stdout."""
    path = path or config.out_path
    if path is None:
        sys.stdout.write(text)
        return
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(text)
    say(f"{what} generated: {path}")


def to_json(data) -> str:
    return json.dumps(data, indent=2) + "\n"


def exit_code(result) -> int:
    if result.status.is_limit:
        return EXIT_LIMIT
    return EXIT_OK if result.accepted else EXIT_REJECTED


def report(result):
    verdict = "accepted" if result.accepted else "rejected"
    say(f"Estimate {verdict}: status={result.status.value} delta_E={format_float(result.delta_E)} nodes={result.nodes_explored}")


def cmd_estimate_das(config: RunConfig) -> int:
    model, bounds = load_model(config)
    data = load_data(model, config.data_path)
    say(f"Starting DAS estimation for {len(data)} data states...")
    result = estimate_das(model, bounds, data, config.solver_config(), threads=config.threads)
    report(result)
    emit(config, to_json(result_to_dict(result, model)), what="Result")
    return exit_code(result)


def cmd_estimate_gsm(config: RunConfig) -> int:
    model, bounds = load_model(config)
    say(f"Starting GSM estimation with {config.n_gs} ground states...")
    result = estimate_gsm(model, bounds, config.n_gs, config.solver_config(), threads=config.threads)
    report(result)
    emit(config, to_json(result_to_dict(result, model)), what="Result")
    return exit_code(result)


def cmd_gsm_oracle(config: RunConfig) -> int:
    model, bounds = load_model(config)
    say(f"Starting brute-force GSM search with {config.n_gs} ground states...")
    result = gsm_bruteforce(model, bounds, config.n_gs, config=config.solver_config(), threads=config.threads)
    report(result)
    emit(config, to_json(result_to_dict(result, model)), what="Result")
    return exit_code(result)


def cmd_spectrum(config: RunConfig) -> int:
    model, _ = load_model(config)
    params = params_from_dict(model, load_json(config.params_path, "params"))
    spectrum = compute_spectrum(model, params, threads=config.threads)
    say(f"Found {spectrum.n_ground} ground states, delta_E={format_float(spectrum.delta_E)}")
    emit(config, to_json(spectrum_summary(model, spectrum)), what="Spectrum")
    return EXIT_OK


def _grid(config: RunConfig):
    return beta_grid(config.beta_min, config.beta_max, config.beta_points, config.beta_scale)


def cmd_nll_curve(config: RunConfig) -> int:
    model, _ = load_model(config)
    raw = load_json(config.params_path, "params")
    if isinstance(raw, dict) and "accepted" in raw:
        result = result_from_dict(model, raw, threads=config.threads)
        if not result.accepted:
            say("Error: result was rejected; the NLL bounds do not apply")
            return EXIT_REJECTED
        spectrum = result.spectrum
    else:
        spectrum = compute_spectrum(model, params_from_dict(model, raw), threads=config.threads)
    if config.data_path is not None:
        data = [encode(state, model) for state in load_data(model, config.data_path)]
    else:
        data = list(spectrum.ground)
    try:
        rows = nll_curve(spectrum, data, _grid(config))
    except DegenerateGap as exc:
        say(f"Error: {exc}")
        return EXIT_REJECTED
    stream = io.StringIO()
    write_curve_csv(rows, stream)
    emit(config, stream.getvalue(), what="NLL curve")
    return EXIT_OK


def _interior_minimum(values) -> bool:
    lowest = min(range(len(values)), key=values.__getitem__)
    return 0 < lowest < len(values) - 1


def cmd_compare(config: RunConfig) -> int:
    model, bounds = load_model(config)
    data = load_data(model, config.data_path)
    indices = [encode(state, model) for state in data]

    say("Starting NLL gradient training at beta=1...")
    trained = train_nll(model, bounds, indices, beta=1.0, steps=config.steps, learning_rate=config.learning_rate)
    say("Starting DAS estimation...")
    result = estimate_das(model, bounds, data, config.solver_config(), threads=config.threads)
    report(result)

    das_spectrum = result.spectrum
    grad_spectrum = compute_spectrum(model, trained, threads=config.threads)
    betas = [float(b) for b in _grid(config)]
    das_curve = [nll(das_spectrum, indices, b) for b in betas]
    grad_curve = [nll(grad_spectrum, indices, b) for b in betas]

    def lower(a, b):
        if a < b:
            return "das"
        return "grad" if b < a else "tie"

    stream = io.StringIO()
    stream.write("beta,eta_das,eta_grad,lower\n")
    for beta, a, b in zip(betas, das_curve, grad_curve):
        stream.write(f"{format_float(beta)},{format_float(a)},{format_float(b)},{lower(a, b)}\n")
    emit(config, stream.getvalue(), what="Comparison")

    summary = {
        "das": result_to_dict(result, model),
        "grad": {"params": params_to_dict(trained), "eta_at_1": nll(grad_spectrum, indices, 1.0)},
        "das_monotone": all(later <= earlier for earlier, later in zip(das_curve, das_curve[1:])),
        "grad_interior_minimum": _interior_minimum(grad_curve),
        "lower": [{"beta": beta, "model": lower(a, b)} for beta, a, b in zip(betas, das_curve, grad_curve)],
    }
    if config.summary_path:
        emit(config, to_json(summary), path=config.summary_path, what="Summary")
    return exit_code(result)


HANDLERS = {
    "estimate-das": cmd_estimate_das,
    "estimate-gsm": cmd_estimate_gsm,
    "spectrum": cmd_spectrum,
    "nll-curve": cmd_nll_curve,
    "compare": cmd_compare,
    "gsm-oracle": cmd_gsm_oracle,
}


def main(argv=None) -> int:
    say(f"potts-forge {__version__}")
    try:
        args = build_parser().parse_args(argv)
        config = RunConfig.from_args(args)
    except InvalidArgument as exc:
        say(f"Error: {exc}")
        return EXIT_ERROR
    except SystemExit as exc:
        # --help and --version
        return int(exc.code or 0)

    logging.basicConfig(
        level=logging.DEBUG if config.verbose else logging.WARNING,
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return HANDLERS[config.command](config)
    except (PottsForgeError, OSError) as exc:
        say(f"Error: {exc}")
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
