"""Command-line experiment runner.

Subcommands: synthesize, train, analyze, experiment (train + analyze per
seed) and report (re-aggregate an experiment directory).  Settings come from
the built-in catalog, then an optional ``--spec`` JSON file, then flags.

Exit status: 0 ok, 2 usage error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import platform
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np
import scipy

from . import __version__
from .activation import from_tag
from .analyzer import AnalyzerError, Analysis, Thresholds, Verdict, analyze, axis_alignment, write_plot_csv
from .expr import CATALOG, ExpressionError, lookup, parse_expression
from .polyspline import KnotSet1D, Spline1D, SplineError, StandardPartitionSpline, construct_spline_from_derivative, construct_spline_nd
from .synth import SynthesisError, TwoLayerNet, synthesize_spline_1d, synthesize_spline_nd
from .trainer import Dataset, DivergenceError, TrainConfig, TrainError, init_net, train, write_trace
from .wronskian import WronskianError

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 2, 3


class UsageError(ValueError):
    pass


class Mode(str, Enum):
    SYNTHESIZE = "synthesize"
    TRAIN = "train"
    ANALYZE = "analyze"
    FULL = "full"


@dataclass(frozen=True)
class SynthOptions:
    m: int | None = None
    pieces: int | None = None
    tol: float | None = None

    def resolved(self, n: int) -> tuple[int, int, float]:
        """(m, pieces per axis, tolerance) with dimension-dependent defaults."""
        if n == 1:
            return self.m or 3, self.pieces or 5, self.tol or 1e-3
        return self.m or 2, self.pieces or 3, self.tol or 1e-2


@dataclass(frozen=True)
class ExperimentSpec:
    name: str
    function: str
    dim: int = 1
    grid: float = 0.01
    train: TrainConfig = TrainConfig()
    thresholds: Thresholds = Thresholds()
    seeds: tuple[int, ...] = tuple(range(1, 11))
    mode: Mode = Mode.FULL
    synth: SynthOptions = SynthOptions()
    workers: int = 1

    def __post_init__(self) -> None:
        if not self.seeds:
            raise UsageError("seeds must be a non-empty list")
        if self.dim not in (1, 2):
            raise UsageError("dim must be 1 or 2")
        if not 0.0 < self.grid <= 0.5:
            raise UsageError("grid step must lie in (0, 0.5]")
        if self.workers < 1:
            raise UsageError("workers must be >= 1")
        expr = parse_expression(self.function)
        if expr.n > self.dim:
            raise UsageError(f"function {self.function!r} uses y but dim is {self.dim}")

    def to_json(self) -> dict:
        t = self.train
        return {
            "name": self.name,
            "function": self.function,
            "dim": self.dim,
            "grid": self.grid,
            "train": {
                "theta": t.theta,
                "lr": t.lr,
                "steps": t.steps,
                "init": list(t.init),
                "kind": t.kind.to_tag(),
                "output_bias": t.output_bias,
                "objective": t.objective,
            },
            "thresholds": asdict(self.thresholds),
            "seeds": list(self.seeds),
            "mode": self.mode.value,
            "synth": asdict(self.synth),
            "workers": self.workers,
        }

    @staticmethod
    def from_json(doc: Mapping[str, Any]) -> "ExperimentSpec":
        return _merge(_defaults(doc.get("function")), doc)


def _defaults(function: str | None) -> dict:
    """Flat settings dictionary seeded from the catalog when ``function`` is in it."""
    entry = lookup(function) if function else None
    base: dict[str, Any] = {"name": "custom", "function": function, "dim": None, "grid": 0.01}
    tr: dict[str, Any] = {}
    th: dict[str, Any] = {}
    if entry is not None:
        base.update(name=entry.name, function=entry.expression, dim=entry.n, grid=entry.step)
        tr = {"theta": entry.theta, "lr": entry.lr, "steps": entry.steps, "kind": entry.kind}
        th = {f"gamma{i}": getattr(entry, f"gamma{i}") for i in range(1, 5)}
    base["train"] = tr
    base["thresholds"] = th
    return base


def _merge(base: dict, doc: Mapping[str, Any]) -> ExperimentSpec:
    known = {"name", "function", "dim", "grid", "train", "thresholds", "seeds", "mode", "synth", "workers"}
    unknown = set(doc) - known
    if unknown:
        raise UsageError(f"unknown spec field(s): {', '.join(sorted(unknown))}")
    d = {**base, **{k: v for k, v in doc.items() if k not in ("train", "thresholds", "synth") and v is not None}}
    tr = {**base.get("train", {}), **(doc.get("train") or {})}
    th = {**base.get("thresholds", {}), **(doc.get("thresholds") or {})}
    sy = {**base.get("synth", {}), **(doc.get("synth") or {})}
    if not d.get("function"):
        raise UsageError("a target function is required (--function or the spec file)")
    entry = lookup(str(d["function"]))
    if entry is not None:
        d["function"] = entry.expression
    try:
        if "kind" in tr:
            tr["kind"] = from_tag(tr["kind"]) if isinstance(tr["kind"], str) else tr["kind"]
        if "init" in tr:
            tr["init"] = tuple(tr["init"])
        tr.pop("seed", None)
        cfg = TrainConfig(**tr)
        thresholds = Thresholds(**th)
        synth = SynthOptions(**sy)
    except TypeError as exc:
        raise UsageError(str(exc)) from exc
    dim = d.get("dim") or parse_expression(d["function"]).n
    return ExperimentSpec(
        name=str(d.get("name", "custom")),
        function=str(d["function"]),
        dim=int(dim),
        grid=float(d.get("grid", 0.01)),
        train=cfg,
        thresholds=thresholds,
        seeds=tuple(int(s) for s in d.get("seeds", range(1, 11))),
        mode=Mode(d.get("mode", "full")),
        synth=synth,
        workers=int(d.get("workers", 1)),
    )


def parse_seeds(text: str) -> list[int]:
    """'1..10', '0,3,7' or a mix such as '1..3,9'."""
    out: list[int] = []
    for part in filter(None, (p.strip() for p in text.split(","))):
        try:
            if ".." in part:
                lo, hi = part.split("..", 1)
                out.extend(range(int(lo), int(hi) + 1))
            else:
                out.append(int(part))
        except ValueError:
            raise UsageError(f"bad seed list entry {part!r}") from None
    return out


def _dump(doc: Any, path: Path) -> None:
    path.write_text(json.dumps(doc, indent=2) + "\n")


def _write_metadata(out: Path, command: str, argv: Sequence[str], started: float, extra: dict | None = None) -> None:
    meta = {
        "command": command,
        "argv": list(argv),
        "started": time.strftime("%Y-%m-%dT%H:%M:%S%z", time.localtime(started)),
        "finished": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "elapsed_s": round(time.time() - started, 3),
        "versions": {"splinenet": __version__, "python": platform.python_version(), "numpy": np.__version__, "scipy": scipy.__version__},
    }
    _dump({**meta, **(extra or {})}, out / "metadata.json")


# synthesis


def target_spline(spec: ExperimentSpec) -> Spline1D | StandardPartitionSpline:
    f = parse_expression(spec.function, spec.dim)
    m, pieces, _ = spec.synth.resolved(spec.dim)
    if spec.dim == 1:
        return construct_spline_from_derivative(f, m, KnotSet1D.uniform(pieces))
    return construct_spline_nd(f, m, [pieces] * spec.dim)


def run_synthesize(spec: ExperimentSpec, out: Path, spline: Spline1D | StandardPartitionSpline | None = None) -> int:
    s = target_spline(spec) if spline is None else spline
    _, _, tol = spec.synth.resolved(s.n if isinstance(s, StandardPartitionSpline) else 1)
    kind = spec.train.kind
    if isinstance(s, StandardPartitionSpline):
        res = synthesize_spline_nd(s, kind, tol)
    else:
        res = synthesize_spline_1d(s, kind, tol)
    _dump(s.to_json(), out / "spline.json")
    _dump(res.net.to_json(), out / "network.json")
    _dump({"units": res.net.theta, "tolerance": tol, **res.to_json()}, out / "construction.json")
    if res.final_error > tol:
        print(f"synthesis missed tolerance {tol:g}: L2 error {res.final_error:.3g}", file=sys.stderr)
        return EXIT_NUMERIC
    print(f"synthesized {res.net.theta} units, L2 error {res.final_error:.3g}")
    return EXIT_OK


# training and analysis


def _dataset(spec: ExperimentSpec) -> Dataset:
    return Dataset.from_function(parse_expression(spec.function, spec.dim), spec.dim, spec.grid)


def _artifact_status(ok: bool, reason: str = "") -> str:
    return "ok" if ok else f"failed: {reason}"


def _seed_run(args: tuple[dict, int, str, bool]) -> dict:
    spec_doc, seed, outdir, do_analyze = args
    spec = ExperimentSpec.from_json(spec_doc)
    out = Path(outdir) / f"seed_{seed}"
    out.mkdir(parents=True, exist_ok=True)
    data = _dataset(spec)
    cfg = replace(spec.train, seed=seed)
    record: dict[str, Any] = {"seed": seed, "status": "ok"}
    arts: dict[str, str] = {}
    try:
        result = train(init_net(cfg, spec.dim), data, cfg)
    except DivergenceError as exc:
        write_trace(exc.trace, out / "trace.csv")
        reason = f"training diverged at step {exc.step}"
        record.update(status="diverged", reason=reason, initial_eps=float(exc.trace[0]))
        arts = {"trace": "ok", "network": _artifact_status(False, reason)}
        if do_analyze:
            arts.update(report=_artifact_status(False, reason), plot=_artifact_status(False, reason))
        record["artifacts"] = arts
        _dump(record, out / "run.json")
        return record
    write_trace(result.trace, out / "trace.csv")
    result.net.save(out / "network.json")
    arts.update(trace="ok", network="ok")
    record.update(initial_eps=result.initial_eps, final_eps=result.final_eps)
    if do_analyze:
        try:
            analysis = analyze(result.net, data, spec.thresholds)
        except (AnalyzerError, np.linalg.LinAlgError, FloatingPointError) as exc:
            record.update(status="analysis-failed", reason=str(exc))
            arts.update(report=_artifact_status(False, str(exc)), plot=_artifact_status(False, str(exc)))
        else:
            analysis.save(out / "report.json")
            write_plot_csv(result.net, data, analysis, out / "plot.csv", spec.thresholds.scan_step)
            arts.update(report="ok", plot="ok")
    record["artifacts"] = arts
    _dump(record, out / "run.json")
    return record


def _seed_summary(run: dict, report: dict | None) -> dict:
    row: dict[str, Any] = {"seed": run["seed"], "status": run["status"]}
    if "reason" in run:
        row["reason"] = run["reason"]
    if "final_eps" in run:
        row["final_eps"] = run["final_eps"]
    if report is not None:
        counts = {v.value: 0 for v in Verdict}
        for u in report["units"]:
            counts[u["verdict"]] += 1
        row.update(eps=report["eps"], mode=report["mode"], counts=counts)
        lines = [u["line"] for u in report["units"] if u["verdict"] == Verdict.LOCAL.value and u["line"] is not None]
        if lines:
            row["axis_aligned_local"] = sum(1 for ln in lines if axis_alignment(ln["w"]) > 0.9)
    return row


def aggregate(out: Path) -> dict:
    """Fold per-seed records found under ``out`` in seed order."""
    runs = sorted((json.loads(p.read_text()) for p in out.glob("seed_*/run.json")), key=lambda r: r["seed"])
    if not runs:
        raise UsageError(f"no seed runs found under {out}")
    rows = []
    for run in runs:
        rp = out / f"seed_{run['seed']}" / "report.json"
        rows.append(_seed_summary(run, json.loads(rp.read_text()) if rp.exists() else None))
    analysed = [r for r in rows if "counts" in r]
    totals = {
        "seeds": len(rows),
        "trained": sum(1 for r in rows if r["status"] != "diverged"),
        "diverged": sum(1 for r in rows if r["status"] == "diverged"),
        "analysed": len(analysed),
        "local_approximation": sum(1 for r in analysed if r["mode"] == "local"),
        "global_approximation": sum(1 for r in analysed if r["mode"] == "global"),
        "with_local_unit": sum(1 for r in analysed if r["counts"]["local"] >= 1),
        "with_constant_term": sum(1 for r in analysed if r["counts"]["constant-term"] >= 1),
        "with_3_axis_aligned_local": sum(1 for r in analysed if r.get("axis_aligned_local", 0) >= 3),
    }
    return {"totals": totals, "per_seed": rows}


def _write_summary(out: Path, summary: dict) -> None:
    _dump(summary, out / "summary.json")
    cols = ["seed", "status", "final_eps", "eps", "mode"] + [v.value for v in Verdict] + ["axis_aligned_local"]
    with open(out / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for r in summary["per_seed"]:
            c = r.get("counts", {})
            w.writerow([r["seed"], r["status"], r.get("final_eps", ""), r.get("eps", ""), r.get("mode", "")] + [c.get(v.value, "") for v in Verdict] + [r.get("axis_aligned_local", "")])


def run_seeds(spec: ExperimentSpec, out: Path, do_analyze: bool) -> dict:
    _dataset(spec).to_csv(out / "dataset.csv")
    _dump(spec.to_json(), out / "spec.json")
    jobs = [(spec.to_json(), s, str(out), do_analyze) for s in spec.seeds]
    if spec.workers > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            list(pool.map(_seed_run, jobs))
    else:
        for job in jobs:
            _seed_run(job)
    summary = aggregate(out)
    _write_summary(out, summary)
    return summary


def run(spec: ExperimentSpec, out: str | Path) -> int:
    """Execute ``spec`` and write its artifacts into ``out``; returns an exit status."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    if spec.mode is Mode.SYNTHESIZE:
        return run_synthesize(spec, out)
    if spec.mode is Mode.ANALYZE:
        raise UsageError("analyze needs a trained network; use the analyze subcommand")
    summary = run_seeds(spec, out, spec.mode is Mode.FULL)
    _print_totals(summary)
    return EXIT_OK


def _print_totals(summary: dict) -> None:
    t = summary["totals"]
    print(" ".join(f"{k}={v}" for k, v in t.items()))


def run_analyze(net: TwoLayerNet, data: Dataset, th: Thresholds, out: Path) -> Analysis:
    analysis = analyze(net, data, th)
    analysis.save(out / "report.json")
    write_plot_csv(net, data, analysis, out / "plot.csv", th.scan_step)
    return analysis


# argument handling


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="splinenet", description="Spline-based synthesis and analysis of two-layer networks.")
    sub = p.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--spec", type=Path, help="JSON experiment spec; flags override its values")
    common.add_argument("--out", type=Path, required=True, help="output directory")
    common.add_argument("--function", help=f"expression in x (and y) or a catalog name: {', '.join(CATALOG)}")
    common.add_argument("--dim", type=int, choices=(1, 2))
    common.add_argument("--grid", type=float, help="dataset discretization step")
    common.add_argument("--kind", choices=("logistic", "tanh"))

    training = argparse.ArgumentParser(add_help=False)
    training.add_argument("--seed", type=int)
    training.add_argument("--seeds", help="e.g. 1..10 or 0,4,7")
    training.add_argument("--theta", type=int)
    training.add_argument("--lr", type=float)
    training.add_argument("--steps", type=int)
    training.add_argument("--objective", choices=("mse", "sse"))
    training.add_argument("--workers", type=int)

    thresholds = argparse.ArgumentParser(add_help=False)
    for i in range(1, 5):
        thresholds.add_argument(f"--gamma{i}", type=float)
    thresholds.add_argument("--step", type=float, help="analyzer scan step")

    s = sub.add_parser("synthesize", parents=[common], help="build a network that implements a spline")
    s.add_argument("--spline", type=Path, help="spline JSON to implement instead of fitting --function")
    s.add_argument("--m", type=int)
    s.add_argument("--pieces", type=int, help="uniform pieces per axis (knots + 1)")
    s.add_argument("--tol", type=float)

    sub.add_parser("train", parents=[common, training], help="train one network per seed")
    sub.add_parser("experiment", parents=[common, training, thresholds], help="train and analyze per seed")

    a = sub.add_parser("analyze", parents=[common, thresholds], help="classify the units of a trained network")
    a.add_argument("--network", type=Path, required=True)
    a.add_argument("--data", type=Path, help="dataset CSV (default: discretize --function)")

    r = sub.add_parser("report", help="re-aggregate an experiment directory")
    r.add_argument("--out", type=Path, required=True)
    return p


_MODES = {"synthesize": Mode.SYNTHESIZE, "train": Mode.TRAIN, "experiment": Mode.FULL, "analyze": Mode.ANALYZE}


def spec_from_args(ns: argparse.Namespace) -> ExperimentSpec:
    doc: dict[str, Any] = {}
    if ns.spec is not None:
        try:
            doc = json.loads(ns.spec.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read spec file: {exc}") from exc
        if not isinstance(doc, dict):
            raise UsageError("spec file must hold a JSON object")
    function = ns.function or doc.get("function")
    base = _defaults(function)
    if ns.function:
        # a flag-selected function brings its own catalog defaults and replaces the file's
        doc = {**doc, "function": base["function"]}
        if lookup(ns.function) is not None:
            doc.pop("name", None)
    flags: dict[str, Any] = {"mode": _MODES[ns.command].value}
    for key in ("dim", "grid", "workers"):
        if getattr(ns, key, None) is not None:
            flags[key] = getattr(ns, key)
    seeds = getattr(ns, "seeds", None)
    if seeds is not None:
        flags["seeds"] = parse_seeds(seeds)
    elif getattr(ns, "seed", None) is not None:
        flags["seeds"] = [ns.seed]
    tr = {k: getattr(ns, k) for k in ("theta", "lr", "steps", "objective", "kind") if getattr(ns, k, None) is not None}
    th = {f"gamma{i}": getattr(ns, f"gamma{i}") for i in range(1, 5) if getattr(ns, f"gamma{i}", None) is not None}
    if getattr(ns, "step", None) is not None:
        th["scan_step"] = ns.step
    sy = {k: getattr(ns, k) for k in ("m", "pieces", "tol") if getattr(ns, k, None) is not None}
    merged = {
        **doc,
        **flags,
        "train": {**(doc.get("train") or {}), **tr},
        "thresholds": {**(doc.get("thresholds") or {}), **th},
        "synth": {**(doc.get("synth") or {}), **sy},
    }
    return _merge(base, merged)


def _synth_spec_fallback(ns: argparse.Namespace) -> ExperimentSpec:
    """Spec for ``synthesize --spline`` where no function is needed."""
    ns = argparse.Namespace(**{**vars(ns), "function": ns.function or "0*x"})
    return spec_from_args(ns)


def _load_spline(path: Path) -> Spline1D | StandardPartitionSpline:
    doc = json.loads(path.read_text())
    return StandardPartitionSpline.from_json(doc) if "grid" in doc else Spline1D.from_json(doc)


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    started = time.time()
    try:
        ns = _parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if ns.command == "report":
            summary = aggregate(ns.out)
            _write_summary(ns.out, summary)
            _print_totals(summary)
            return EXIT_OK
        ns.out.mkdir(parents=True, exist_ok=True)
        if ns.command == "synthesize" and ns.spline is not None:
            spec = _synth_spec_fallback(ns)
            try:
                spline = _load_spline(ns.spline)
            except (OSError, json.JSONDecodeError, KeyError, SplineError) as exc:
                raise UsageError(f"cannot read spline: {exc}") from exc
            status = run_synthesize(spec, ns.out, spline)
        elif ns.command == "analyze":
            spec = spec_from_args(argparse.Namespace(**{**vars(ns), "function": ns.function or ("0*x" if ns.data else None)}))
            try:
                net = TwoLayerNet.load(ns.network)
                data = Dataset.from_csv(ns.data) if ns.data else _dataset(spec)
            except (OSError, json.JSONDecodeError, KeyError) as exc:
                raise UsageError(f"cannot read input: {exc}") from exc
            analysis = run_analyze(net, data, spec.thresholds, ns.out)
            print(f"eps={analysis.eps:.6g} mode={analysis.mode.value} " + " ".join(f"{k}={v}" for k, v in analysis.counts().items()))
            status = EXIT_OK
        else:
            spec = spec_from_args(ns)
            status = run(spec, ns.out)
        _write_metadata(ns.out, ns.command, argv, started)
        return status
    except (SynthesisError, WronskianError, DivergenceError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (UsageError, ExpressionError, TrainError, AnalyzerError, SplineError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
