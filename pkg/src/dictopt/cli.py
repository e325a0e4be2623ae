"""Command-line driver: ``dictopt <command> [options]``.

Commands: ``simulate``, ``fit``, ``scan``, ``spectrum``, ``benchmark``.
Global flags (``--config``, ``--seed``, ``--out``, ``--verbose``) may be given
before or after the command.  Settings resolve as preset defaults, then
the JSON config file, then command-line flags.

Exit codes: 0 success, 1 benchmark failure, 2 configuration or input error,
3 simulation blow-up, 4 optimizer divergence.
"""

import argparse
import json
import logging
import os
import sys

from . import benchmarks
from . import io as mio
from .errors import BlowUpError, ConfigurationError, ContractError, DivergedError, LoadError
from .experiment import (
    ExperimentConfig,
    load_config,
    load_data,
    run_fit,
    run_scan,
    write_history,
    write_scan,
    write_spectrum,
)
from .koopman import KoopmanModel

__all__ = ["main", "build_parser", "EXIT_OK", "EXIT_BENCHMARK", "EXIT_CONFIG", "EXIT_BLOWUP",
           "EXIT_DIVERGED"]

EXIT_OK, EXIT_BENCHMARK, EXIT_CONFIG, EXIT_BLOWUP, EXIT_DIVERGED = 0, 1, 2, 3, 4

log = logging.getLogger("dictopt")


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors, which matches the config-error code
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigurationError(message)


def _global_flags(default):
    p = argparse.ArgumentParser(add_help=False)
    kw = {} if default else {"default": argparse.SUPPRESS}
    p.add_argument("--config", help="JSON experiment configuration file", **kw)
    p.add_argument("--seed", type=int, help="random seed (overrides the config)", **kw)
    p.add_argument("--out", help="output directory (overrides the config)", **kw)
    p.add_argument("--verbose", action="store_true", help="log progress to stderr", **kw)
    return p


def _key_value(text):
    key, sep, value = text.partition("=")
    if not sep or not key:
        raise argparse.ArgumentTypeError(f"expected KEY=VALUE, got {text!r}")
    try:
        return key, json.loads(value)
    except json.JSONDecodeError:
        return key, value


def _data_flags(p):
    p.add_argument("--system", help="ou, triple-well, chua, heat or file:<path>")
    p.add_argument("--data", help="dataset CSV (shorthand for --system file:<path>)")
    p.add_argument("--set", action="append", type=_key_value, default=[], metavar="KEY=VALUE",
                   help="system parameter override (repeatable)")
    for name in ("alpha", "beta", "tau", "eta"):
        p.add_argument(f"--{name}", type=float, help=f"system parameter {name}")
    p.add_argument("--m", type=int, help="number of samples")


def _fit_flags(p):
    p.add_argument("--kind", choices=("edmd", "sindy", "pdefind"), help="fit kind")
    p.add_argument("--max-iters", type=int)
    p.add_argument("--step-size", type=float)
    p.add_argument("--step-size-w", type=float)
    p.add_argument("--threshold", type=float, help="relative hard threshold after the fit")
    p.add_argument("--w0", type=json.loads, help="initial parameters as JSON")


def build_parser():
    parser = _Parser(prog="dictopt", description="Parametric dictionary learning for EDMD, SINDy and PDE-FIND.",
                     parents=[_global_flags(True)])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    flags = _global_flags(False)

    p = sub.add_parser("simulate", parents=[flags], help="generate a benchmark dataset")
    _data_flags(p)

    p = sub.add_parser("fit", parents=[flags], help="fit a model and write its artifacts")
    _data_flags(p)
    _fit_flags(p)

    p = sub.add_parser("scan", parents=[flags], help="loss landscape over one parameter")
    _data_flags(p)
    p.add_argument("--kind", choices=("edmd", "sindy", "pdefind"))
    p.add_argument("--w0", type=json.loads, help="base parameters as JSON")
    p.add_argument("--param", help="parameter name: b<i>.<k>, w[<j>] or a PDE parameter")
    p.add_argument("--range", nargs=2, type=float, metavar=("LO", "HI"))
    p.add_argument("--resolution", type=int, help="number of grid values")

    p = sub.add_parser("spectrum", parents=[flags], help="eigendecomposition of a saved Koopman model")
    p.add_argument("model", help="model JSON file")
    p.add_argument("--lo", type=json.loads, help="grid lower bounds (JSON number or list)")
    p.add_argument("--hi", type=json.loads, help="grid upper bounds (JSON number or list)")
    p.add_argument("--points", type=int, help="grid points per axis")

    p = sub.add_parser("benchmark", parents=[flags], help="run the pinned benchmarks")
    p.add_argument("--only", action="append", default=[], metavar="NAME",
                   help=f"run only these benchmarks ({', '.join(benchmarks.BENCHMARKS)}); repeatable or comma separated")
    return parser


def _config(args):
    cfg = load_config(args.config) if getattr(args, "config", None) else ExperimentConfig()
    changes = {}
    system = getattr(args, "system", None)
    if getattr(args, "data", None):
        if system:
            raise ConfigurationError("give either --system or --data")
        system = "file:" + args.data
    if system and system != cfg.system:
        changes["system"] = system
        # parameters in the config file belong to the system it names
        params = {}
    else:
        params = dict(cfg.params)
    for key, value in getattr(args, "set", []):
        params[key] = value
    for key in ("alpha", "beta", "tau", "eta", "m"):
        value = getattr(args, key, None)
        if value is not None:
            params[key] = value
    changes["params"] = params
    if getattr(args, "kind", None):
        changes["fit"] = args.kind
    opt = dict(cfg.optimizer)
    for flag, key in (("max_iters", "max_iters"), ("step_size", "step_size"), ("step_size_w", "step_size_w")):
        value = getattr(args, flag, None)
        if value is not None:
            opt[key] = value
    changes["optimizer"] = opt
    for key in ("threshold", "w0", "seed", "out"):
        value = getattr(args, key, None)
        if value is not None:
            changes[key] = value
    if getattr(args, "command", None) == "scan":
        scan = dict(cfg.scan or {})
        if args.param is not None:
            scan["param"] = args.param
        if args.range is not None:
            scan["range"] = list(args.range)
        if args.resolution is not None:
            scan["resolution"] = args.resolution
        changes["scan"] = scan
    return cfg.updated(**changes)


def _out_dir(cfg):
    os.makedirs(cfg.out, exist_ok=True)
    return cfg.out


def cmd_simulate(args):
    cfg = _config(args)
    if cfg.preset is None:
        raise ConfigurationError("simulate needs a preset system, not a dataset file")
    data = load_data(cfg)
    path = os.path.join(_out_dir(cfg), "data.csv")
    mio.write_dataset(data, path)
    print(f"wrote {path}")
    return EXIT_OK


def _write_report(kind, model, out, data, cfg):
    if kind == "edmd":
        spec = write_spectrum(model, out, data, cfg.grid)
        lines = ["eigenvalue modulus real imag"]
        lines += [f"{i + 1} {abs(v):.10g} {v.real:.10g} {v.imag:.10g}" for i, v in enumerate(spec.eigenvalues)]
    else:
        lines = model.equations().splitlines()
    path = os.path.join(out, "report.txt")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    return lines


def cmd_fit(args):
    cfg = _config(args)
    data = load_data(cfg)
    out = _out_dir(cfg)
    try:
        kind, model, history = run_fit(cfg, data)
    except DivergedError as exc:
        write_history(exc.history, os.path.join(out, "history.csv"))
        raise
    mio.save_model(model, os.path.join(out, "model.json"))
    write_history(history, os.path.join(out, "history.csv"))
    for line in _write_report(kind, model, out, data, cfg):
        print(line)
    return EXIT_OK


def cmd_scan(args):
    cfg = _config(args)
    table = run_scan(cfg)
    path = os.path.join(_out_dir(cfg), "scan.csv")
    write_scan(table, path)
    best = table[table[:, 1].argmin()]
    print(f"wrote {path}; minimum loss {best[1]:.6g} at {best[0]:.6g}")
    return EXIT_OK


def cmd_spectrum(args):
    cfg = _config(args)
    model = mio.load_model(args.model)
    if not isinstance(model, KoopmanModel):
        raise ConfigurationError("spectrum needs a Koopman (edmd) model")
    grid = dict(cfg.grid or {})
    for key in ("lo", "hi", "points"):
        if getattr(args, key) is not None:
            grid[key] = getattr(args, key)
    spec = write_spectrum(model, _out_dir(cfg), None, grid)
    for i, v in enumerate(spec.eigenvalues):
        print(f"{i + 1} {abs(v):.10g} {v.real:.10g} {v.imag:.10g}")
    return EXIT_OK


def cmd_benchmark(args):
    only = [n for item in args.only for n in item.split(",") if n]
    results = benchmarks.run_benchmarks(only or None, progress=lambda r: log.info(benchmarks.format_result(r)))
    for r in results:
        print(benchmarks.format_result(r))
    out = getattr(args, "out", None)
    if out:
        os.makedirs(out, exist_ok=True)
        report = [dict(criterion=r.number, title=r.title, passed=r.passed, values=r.values,
                       failures=r.failures) for r in results]
        with open(os.path.join(out, "benchmark.json"), "w", encoding="utf-8") as fh:
            json.dump(mio.to_jsonable(report), fh, indent=2)
    failed = [r for r in results if not r.passed]
    if failed:
        names = ", ".join(f"criterion {r.number} ({r.title})" for r in failed)
        print(f"FAILED: {names}", file=sys.stderr)
        return EXIT_BENCHMARK
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "fit": cmd_fit, "scan": cmd_scan, "spectrum": cmd_spectrum,
            "benchmark": cmd_benchmark}


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except BlowUpError as exc:
        print(f"simulation blew up: {exc}", file=sys.stderr)
        return EXIT_BLOWUP
    except DivergedError as exc:
        print(f"optimizer diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (ConfigurationError, ContractError, LoadError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
