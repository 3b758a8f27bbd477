"""``colorgrade`` command line.

Exit codes: 0 success, 2 usage or validation error, 3 algorithm failure.

Any long option may also come from a flat ``key = value`` file passed with
``--config``; keys are option names with dashes or underscores
(``seed = 7``, ``sharpen-radius = 1.5``).  Options given on the command line
win over the file.  The resolved configuration is echoed to stderr as one
JSON line so every run can be repeated exactly.  ``COLORGRADE_LOG_LEVEL``
sets log verbosity (default ``WARNING``).
"""

from __future__ import annotations

import argparse
import configparser
import json
import logging
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import stats
from .evalreport import (METHOD_IDS, REGISTRY, SuiteConfig, export_artifacts, export_report,
                         run_suite)
from .exceptions import ContractError, DegenerateInputError, ImageFormatError
from .imagecore import load_image, save_image, sharpen
from .nst_loss import (FeatureFileError, LossWeights, content_loss, gram, read_feature_maps,
                       style_layer_loss, total_loss, total_variation_loss)
from .regrain import SolverConfig, auto_levels, regrain
from .transfer_hist import equalize

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_FAILURE = 3
LOG_ENV = "COLORGRADE_LOG_LEVEL"

log = logging.getLogger("colorgrade")


class UsageError(Exception):
    pass


# --------------------------------------------------------------------------
# Argument types
# --------------------------------------------------------------------------

def _ranged(kind, lo=None, hi=None, lo_open=False, hi_open=False):
    def parse(text):
        try:
            v = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected {kind.__name__}, got {text!r}") from None
        if lo is not None and (v < lo or (lo_open and v == lo)):
            raise argparse.ArgumentTypeError(f"{v} is out of range")
        if hi is not None and (v > hi or (hi_open and v == hi)):
            raise argparse.ArgumentTypeError(f"{v} is out of range")
        return v
    parse.__name__ = kind.__name__
    return parse


def _levels(text):
    if str(text).lower() == "auto":
        return "auto"
    return _ranged(int, 1)(text)


def _method_list(text):
    ids = [m.strip() for m in str(text).split(",") if m.strip()]
    bad = [m for m in ids if m not in REGISTRY]
    if bad or not ids:
        raise argparse.ArgumentTypeError(
            f"unknown method(s) {bad}; choose from {', '.join(METHOD_IDS)}")
    return ids


def _float_list(text):
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _bool(text):
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


# --------------------------------------------------------------------------
# Parser
# --------------------------------------------------------------------------

def _add_solver(p):
    g = p.add_argument_group("regrain solver")
    g.add_argument("--max-sweeps", type=_ranged(int, 1), default=2000)
    g.add_argument("--tolerance", type=_ranged(float, 0, lo_open=True), default=1e-5)
    g.add_argument("--levels", type=_levels, default=1,
                   help="multigrid depth, 1 for plain SOR, or 'auto'")
    g.add_argument("--omega", type=_ranged(float, 0, 2, True, True), default=1.9)


def _add_algorithm(p):
    p.add_argument("--seed", type=_ranged(int, 0), default=42)
    p.add_argument("--iterations", type=_ranged(int, 1), default=20)
    p.add_argument("--color-space", choices=("Lab", "YIQ"), default="Lab")
    p.add_argument("--sharpen", action="store_true")
    p.add_argument("--sharpen-radius", type=_ranged(float, 0, lo_open=True), default=1.0)
    p.add_argument("--sharpen-amount", type=_ranged(float, 0), default=0.8)
    _add_solver(p)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="colorgrade",
                                     description="Color transfer and evaluation toolkit.")
    parser.add_argument("--config", help="key = value file supplying option defaults")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("transfer", help="recolor SOURCE toward TARGET")
    p.add_argument("source")
    p.add_argument("target")
    p.add_argument("--method", required=True, choices=METHOD_IDS, metavar="METHOD",
                   help=f"one of {', '.join(METHOD_IDS)}")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--regrain", action="store_true", help="regrain the result against SOURCE")
    p.add_argument("--trace", help="write the IDT KL trace CSV here")
    _add_algorithm(p)

    p = sub.add_parser("evaluate", help="run the method suite and write a KL report")
    p.add_argument("source")
    p.add_argument("target")
    p.add_argument("reference", nargs="?", help="palette to score against (default TARGET)")
    p.add_argument("--methods", type=_method_list, default=list(METHOD_IDS))
    p.add_argument("--report", required=True, help="JSON report path")
    p.add_argument("--out-dir", help="directory for output PNGs and CSVs "
                                     "(default: next to the report)")
    p.add_argument("--strict", action="store_true",
                   help="exit 3 if any method failed or did not converge")
    p.add_argument("--no-timing", action="store_true",
                   help="report wall_time_s as 0 so reports are byte-reproducible")
    p.add_argument("--symmetric", action="store_true", help="also report D(output || reference)")
    _add_algorithm(p)

    p = sub.add_parser("histogram", help="export channel histograms or KDE densities as CSV")
    p.add_argument("image")
    p.add_argument("--kde", action="store_true", help="write densities instead of counts")
    p.add_argument("--grid-size", type=_ranged(int, 2), default=stats.GRID_SIZE)
    p.add_argument("-o", "--output", required=True)

    p = sub.add_parser("equalize", help="per-channel histogram equalization")
    p.add_argument("image")
    p.add_argument("-o", "--output", required=True)

    p = sub.add_parser("regrain", help="restore ORIGINAL's gradients in MAPPED")
    p.add_argument("original")
    p.add_argument("mapped")
    p.add_argument("-o", "--output", required=True)
    _add_solver(p)

    p = sub.add_parser("nstloss", help="style transfer losses from feature map files")
    p.add_argument("--generated", required=True, help="feature maps of the generated image")
    p.add_argument("--content", help="content feature maps (matched by layer id)")
    p.add_argument("--style", help="style image feature maps (matched by layer id)")
    p.add_argument("--image", help="generated image for the total variation term")
    p.add_argument("--alpha", type=_ranged(float, 0), default=1.0)
    p.add_argument("--beta", type=_ranged(float, 0), default=1.0)
    p.add_argument("--gamma", type=_ranged(float, 0), default=0.0)
    p.add_argument("--kappa", type=int, choices=(1, 2), default=2)
    p.add_argument("--layer-weights", type=_float_list,
                   help="comma-separated w_l, one per style layer (default 0.2 each)")
    return parser


def _subparser(parser, name):
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices[name]
    raise KeyError(name)


def _apply_config_file(parser, argv):
    """Parse ``argv`` with option defaults taken from the ``--config`` file."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, rest = pre.parse_known_args(argv)
    command = next((tok for tok in rest if tok in COMMANDS), None)
    if not known.config or command is None:
        return parser.parse_args(argv)
    path = Path(known.config)
    if not path.is_file():
        parser.error(f"config file not found: {path}")
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string("[options]\n" + path.read_text())
    except configparser.Error as exc:
        parser.error(f"malformed config file {path}: {exc}")
    sub = _subparser(parser, command)
    options = {a.dest: a for a in sub._actions if a.option_strings}
    defaults = {}
    for key, raw in cp["options"].items():
        dest = key.replace("-", "_")
        action = options.get(dest)
        if action is None or dest == "help":
            parser.error(f"config file {path}: unknown option {key!r} for '{command}'")
        try:
            if isinstance(action, argparse._StoreTrueAction):
                value = _bool(raw)
            else:
                value = action.type(raw) if action.type else raw
                if action.choices is not None and value not in action.choices:
                    raise argparse.ArgumentTypeError(f"invalid choice {value!r}")
        except argparse.ArgumentTypeError as exc:
            parser.error(f"config file {path}: {key}: {exc}")
        defaults[dest] = value
    sub.set_defaults(**defaults)
    # required options satisfied by the file must not be demanded again
    for action in sub._actions:
        if action.dest in defaults:
            action.required = False
    return parser.parse_args(argv)


# --------------------------------------------------------------------------
# Commands
# --------------------------------------------------------------------------

def _load(path):
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"no such file: {p}")
    try:
        return load_image(p)
    except (ImageFormatError, OSError) as exc:
        raise UsageError(f"cannot read image {p}: {exc}") from None


def _out_path(path):
    p = Path(path)
    if p.parent and not p.parent.exists():
        raise UsageError(f"output directory does not exist: {p.parent}")
    return p


def _solver(args, shape=None) -> SolverConfig:
    levels = args.levels
    if levels == "auto":
        levels = auto_levels(*shape) if shape else 1
    return SolverConfig(max_sweeps=args.max_sweeps, tolerance=args.tolerance,
                        levels=levels, omega=args.omega)


def _suite_config(args, shape, timing=True, symmetric=False) -> SuiteConfig:
    return SuiteConfig(seed=args.seed, iterations=args.iterations,
                       color_space=args.color_space, solver=_solver(args, shape),
                       sharpen=args.sharpen, sharpen_radius=args.sharpen_radius,
                       sharpen_amount=args.sharpen_amount, timing=timing,
                       symmetric_kl=symmetric)


def cmd_transfer(args) -> int:
    source, target = _load(args.source), _load(args.target)
    out_path = _out_path(args.output)
    cfg = _suite_config(args, (source.height, source.width))
    result = REGISTRY.get(args.method)(source, target, cfg)
    out = result.image
    if args.regrain:
        out, info = regrain(source, out, cfg.solver)
        log.info("regrain sweeps %s", info.sweeps)
    if args.sharpen:
        out = sharpen(out, args.sharpen_radius, args.sharpen_amount)
    save_image(out, out_path)
    if args.trace:
        if result.trace is None:
            raise UsageError("--trace is only available for idt methods")
        result.trace.write_csv(args.trace)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    source, target = _load(args.source), _load(args.target)
    reference = _load(args.reference) if args.reference else target
    report_path = Path(args.report)
    report_path.parent.mkdir(parents=True, exist_ok=True)
    out_dir = Path(args.out_dir) if args.out_dir else report_path.parent / "outputs"
    cfg = _suite_config(args, (source.height, source.width),
                        timing=not args.no_timing, symmetric=args.symmetric)
    result = run_suite(source, target, reference, args.methods, cfg, out_dir)
    export_report(result.reports, report_path, args.source, args.target,
                  args.reference or args.target, args.seed, args.symmetric)
    export_artifacts(result, out_dir)
    problems = [f"{r.method}: {f}" for r in result.reports for f in r.flags
                if f.startswith(("error", "not_converged"))]
    for p in problems:
        print(f"colorgrade: {p}", file=sys.stderr)
    if args.strict and problems:
        return EXIT_FAILURE
    return EXIT_OK


def cmd_histogram(args) -> int:
    img = _load(args.image)
    out = _out_path(args.output)
    if args.kde:
        dens = [stats.channel_density(img.plane(c), grid_size=args.grid_size) for c in range(3)]
        stats.write_density_csv(out, dens)
    else:
        stats.write_histogram_csv(out, [stats.histogram(img.plane(c)) for c in range(3)])
    return EXIT_OK


def cmd_equalize(args) -> int:
    img = _load(args.image)
    out = _out_path(args.output)
    save_image(equalize(img), out)
    return EXIT_OK


def cmd_regrain(args) -> int:
    original, mapped = _load(args.original), _load(args.mapped)
    out = _out_path(args.output)
    J, info = regrain(original, mapped, _solver(args, (original.height, original.width)))
    save_image(J, out)
    return EXIT_OK


def _read_maps(path):
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"no such file: {p}")
    try:
        return {fm.layer: fm for fm in read_feature_maps(p)}
    except FeatureFileError as exc:
        raise UsageError(f"{p}: {exc}") from None


def cmd_nstloss(args) -> int:
    gen = _read_maps(args.generated)
    content = _read_maps(args.content) if args.content else {}
    style = _read_maps(args.style) if args.style else {}
    for name, maps in (("content", content), ("style", style)):
        missing = [k for k in maps if k not in gen]
        if missing:
            raise UsageError(f"{name} layers {missing} are absent from the generated maps")

    c_loss = sum(content_loss(gen[k], content[k]) for k in content)
    weights = args.layer_weights if args.layer_weights is not None else [0.2] * len(style)
    if len(weights) != len(style):
        raise UsageError(f"{len(weights)} layer weights for {len(style)} style layers")
    per_layer = {}
    for k in style:
        F = gen[k]
        if style[k].N != F.N:
            raise UsageError(f"layer {k}: style has {style[k].N} filters, generated has {F.N}")
        per_layer[k] = style_layer_loss(gram(F), gram(style[k]), F.N, F.M)
    s_loss = float(sum(w * e for w, e in zip(weights, per_layer.values())))
    tv = 0.0
    if args.image:
        tv = total_variation_loss(_load(args.image), args.gamma, args.kappa)
    w = LossWeights(alpha=args.alpha, beta=args.beta, gamma=args.gamma, kappa=args.kappa,
                    layer_weights=tuple(weights))
    doc = {"content": c_loss, "style": s_loss, "style_layers": per_layer,
           "total_variation": tv, "total": total_loss(c_loss, s_loss, tv, w)}
    print(json.dumps(doc))
    return EXIT_OK


COMMANDS = {
    "transfer": cmd_transfer,
    "evaluate": cmd_evaluate,
    "histogram": cmd_histogram,
    "equalize": cmd_equalize,
    "regrain": cmd_regrain,
    "nstloss": cmd_nstloss,
}


def _resolved(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items())}


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get(LOG_ENV, "WARNING").upper(),
                        format="%(name)s: %(levelname)s: %(message)s")
    parser = build_parser()
    try:
        args = _apply_config_file(parser, argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    print("colorgrade: config " + json.dumps(_resolved(args), default=str), file=sys.stderr)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("always")
            warnings.showwarning = _show_warning
            return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"colorgrade: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DegenerateInputError as exc:
        print(f"colorgrade: degenerate input (channel {exc.channel}): {exc}", file=sys.stderr)
        return EXIT_FAILURE
    except ContractError as exc:
        print(f"colorgrade: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"colorgrade: algorithm failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    except OSError as exc:
        print(f"colorgrade: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def _show_warning(message, category, filename, lineno, file=None, line=None):
    print(f"colorgrade: warning: {category.__name__}: {message}", file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
