"""Run every transfer method on one image pair and score the results.

Each method recolors ``source`` toward ``target``.  The recolored image is
quantized exactly as it is saved, and each of its channels is compared
with the same channel of ``reference`` via KDE densities on ``[0, 1]`` and
``D(reference || output)``.

Methods are isolated from one another.  An exception inside one method is
recorded in that method's flags (with null KL and output) and the suite
moves on.  Warnings raised while a method runs become flags as well.

A ``density_floor`` flag marks a channel where more than 1% of the
reference mass lies on grid points where the output density had to be
floored; such KL values are dominated by the floor.
"""

from __future__ import annotations

import json
import time
import warnings
from collections import OrderedDict
from dataclasses import dataclass, field, replace
from pathlib import Path

from . import stats
from .exceptions import ContractError, ConvergenceWarning, DegenerateInputWarning
from .imagecore import ImagePlanar, quantize, save_image, sharpen
from .regrain import SolverConfig, regrain
from .transfer_hist import luminance_transfer, match_histogram
from .transfer_idt import DEFAULT_ITERATIONS, IdtTrace, idt
from .transfer_linear import linear_transfer, reinhard_transfer

CHANNELS = ("r", "g", "b")
FLOOR_FLAG_FRACTION = 0.01


@dataclass(frozen=True)
class SuiteConfig:
    seed: int = 42
    iterations: int = DEFAULT_ITERATIONS
    color_space: str = "Lab"
    solver: SolverConfig = field(default_factory=SolverConfig)
    sharpen: bool = False
    sharpen_radius: float = 1.0
    sharpen_amount: float = 0.8
    grid_size: int = stats.GRID_SIZE
    symmetric_kl: bool = False
    timing: bool = True


@dataclass
class MethodOutput:
    image: ImagePlanar
    trace: IdtTrace | None = None
    solver: object = None


def _reinhard(s, t, cfg):
    return MethodOutput(reinhard_transfer(s, t))


def _idt(s, t, cfg):
    out, trace = idt(s, t, cfg.iterations, cfg.seed)
    return MethodOutput(out, trace)


def _idt_regrain(s, t, cfg):
    mapped, trace = idt(s, t, cfg.iterations, cfg.seed)
    out, info = regrain(s, mapped, cfg.solver)
    return MethodOutput(out, trace, info)


def _luminance(s, t, cfg):
    # the source plays the image being updated; the target supplies the luminance moments
    return MethodOutput(luminance_transfer(s, t, cfg.color_space))


def _histmatch(s, t, cfg):
    return MethodOutput(match_histogram(s, t))


def _linear(method):
    def run(s, t, cfg):
        return MethodOutput(linear_transfer(s, t, method))
    return run


class MethodRegistry:
    """Ordered map from method id to ``fn(source, target, SuiteConfig) -> MethodOutput``."""

    def __init__(self):
        self._methods = OrderedDict()

    def register(self, method_id, fn):
        if method_id in self._methods:
            raise ContractError(f"method {method_id!r} already registered")
        self._methods[method_id] = fn

    def ids(self) -> tuple:
        return tuple(self._methods)

    def get(self, method_id):
        try:
            return self._methods[method_id]
        except KeyError:
            raise ContractError(f"unknown method {method_id!r}; "
                                f"choose from {', '.join(self._methods)}") from None

    def __contains__(self, method_id):
        return method_id in self._methods


REGISTRY = MethodRegistry()
for _id, _fn in (("reinhard", _reinhard), ("idt", _idt), ("idt_regrain", _idt_regrain),
                 ("mkl", _linear("mkl")), ("luminance", _luminance),
                 ("histmatch", _histmatch), ("cholesky", _linear("cholesky")),
                 ("pca", _linear("sqrt"))):
    REGISTRY.register(_id, _fn)
METHOD_IDS = REGISTRY.ids()


@dataclass
class TransferReport:
    method: str
    kl: dict | None
    flags: list = field(default_factory=list)
    wall_time_s: float = 0.0
    output: str | None = None
    kl_reverse: dict | None = None
    image: ImagePlanar | None = None
    histograms: list | None = None
    densities: list | None = None
    trace: IdtTrace | None = None

    @property
    def failed(self) -> bool:
        return self.kl is None

    def to_dict(self, symmetric=False) -> dict:
        d = {
            "id": self.method,
            "kl": self.kl,
            "flags": list(self.flags),
            "wall_time_s": self.wall_time_s,
            "output": self.output,
        }
        if symmetric:
            d["kl_reverse"] = self.kl_reverse
        return d


@dataclass
class SuiteResult:
    reports: list
    reference_histograms: list
    reference_densities: list
    config: SuiteConfig


def _warning_flag(w) -> str:
    if issubclass(w.category, ConvergenceWarning):
        kind = "not_converged"
    elif issubclass(w.category, DegenerateInputWarning):
        kind = "degenerate_input"
    else:
        kind = "warning"
    return f"{kind}: {w.message}"


def channel_densities(img: ImagePlanar, grid_size=stats.GRID_SIZE) -> list:
    return [stats.channel_density(img.plane(c), grid_size=grid_size) for c in range(3)]


def channel_histograms(img: ImagePlanar) -> list:
    return [stats.histogram(img.plane(c)) for c in range(3)]


def score(reference_densities, output: ImagePlanar, grid_size=stats.GRID_SIZE):
    """Per-channel ``D(reference || output)`` plus the output densities."""
    dens = channel_densities(output, grid_size)
    kl = {ch: stats.kl_divergence(p, q) for ch, p, q in zip(CHANNELS, reference_densities, dens)}
    rev = {ch: stats.kl_divergence(q, p) for ch, p, q in zip(CHANNELS, reference_densities, dens)}
    return kl, rev, dens


def run_method(method_id, source, target, reference_densities, config: SuiteConfig,
               output_dir=None) -> TransferReport:
    fn = REGISTRY.get(method_id)
    report = TransferReport(method=method_id, kl=None)
    t0 = time.perf_counter()
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            result = fn(source, target, config)
            out = result.image
            if config.sharpen:
                out = sharpen(out, config.sharpen_radius, config.sharpen_amount)
            out = quantize(out)
        except Exception as exc:  # isolation: record and continue
            report.flags.append(f"error: {type(exc).__name__}: {exc}")
            out = None
    report.flags.extend(dict.fromkeys(_warning_flag(w) for w in caught))
    if out is None:
        return report

    report.image = out
    report.trace = result.trace
    report.kl, report.kl_reverse, report.densities = score(reference_densities, out,
                                                           config.grid_size)
    report.histograms = channel_histograms(out)
    for ch, p, q in zip(CHANNELS, reference_densities, report.densities):
        if q.mass_where_floored(p) > FLOOR_FLAG_FRACTION:
            report.flags.append(f"density_floor: {ch}")
    if output_dir is not None:
        path = Path(output_dir) / f"{method_id}.png"
        save_image(out, path)
        report.output = str(path)
    if config.timing:
        report.wall_time_s = time.perf_counter() - t0
    return report


def run_suite(source: ImagePlanar, target: ImagePlanar, reference: ImagePlanar,
              methods=None, config: SuiteConfig | None = None, output_dir=None) -> SuiteResult:
    """Run ``methods`` (default: all, in registry order) and score each output.

    With ``output_dir`` every output is written there as ``<method>.png``.
    """
    config = config or SuiteConfig()
    methods = list(METHOD_IDS if methods is None else methods)
    if not methods:
        raise ContractError("no methods selected")
    for m in methods:
        REGISTRY.get(m)
    if output_dir is not None:
        Path(output_dir).mkdir(parents=True, exist_ok=True)
    ref_dens = channel_densities(reference, config.grid_size)
    reports = [run_method(m, source, target, ref_dens, config, output_dir) for m in methods]
    return SuiteResult(reports, channel_histograms(reference), ref_dens, config)


def report_document(reports, source=None, target=None, reference=None, seed=42,
                    symmetric=False) -> dict:
    return {
        "source": None if source is None else str(source),
        "target": None if target is None else str(target),
        "reference": None if reference is None else str(reference),
        "seed": int(seed),
        "methods": [r.to_dict(symmetric) for r in reports],
    }


def export_report(reports, path, source=None, target=None, reference=None, seed=42,
                  symmetric=False) -> dict:
    """Write the JSON report; keys keep a fixed order so output is reproducible."""
    doc = report_document(reports, source, target, reference, seed, symmetric)
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")
    return doc


def export_artifacts(result: SuiteResult, directory) -> list:
    """Histogram and density CSVs for the reference and every method, plus IDT traces."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []

    def put(name, writer, payload):
        p = directory / name
        writer(p, payload)
        written.append(p)

    put("reference_hist.csv", stats.write_histogram_csv, result.reference_histograms)
    put("reference_density.csv", stats.write_density_csv, result.reference_densities)
    for r in result.reports:
        if r.failed:
            continue
        put(f"{r.method}_hist.csv", stats.write_histogram_csv, r.histograms)
        put(f"{r.method}_density.csv", stats.write_density_csv, r.densities)
        if r.trace is not None:
            p = directory / f"{r.method}_trace.csv"
            r.trace.write_csv(p)
            written.append(p)
    return written


def with_overrides(config: SuiteConfig, **kw) -> SuiteConfig:
    return replace(config, **kw)
