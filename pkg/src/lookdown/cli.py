"""Batch front-end: one JSON config document per run.

Usage::

    lookdown CONFIG.json [--seed N] [--threads N] [--out DIR]

Exit status is 0 on success, 1 when a check inside the run rejects, and 2 on
a usage or validation error.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import io
import json
import os
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from . import __version__
from .core import (
    BUDGET_ENV,
    SAMPLERS,
    FamilySpec,
    ModelSpec,
    canonical_form,
    dumps_genealogy,
    enumeration_budget,
    exact_unlabelled_distribution,
    family_from_document,
    pushforward,
    exact_labelled_distribution,
    sample,
)
from .errors import BudgetExceeded, LookdownError, ParseError, SpecError, ValidationError
from .experiments import (
    dichotomy_experiment,
    distribution_equality_test,
    fixation_experiment,
    rank_recovery_experiment,
)
from .gw import OffspringDistribution, exact_spinal_law, exact_spine_via_lookdown_law, spine_diagnostics
from .harness import DEFAULT_ALPHA, DEFAULT_REPS, replicate_map
from .sbo import exact_sbo_distribution
from .seeding import as_seed
from .stats import coalescent_scale, descendant_table, monte_carlo_coalescence

COMMANDS = (
    "sample",
    "verify-neutrality",
    "sbo-check",
    "coalescent",
    "identify-base",
    "rank-recovery",
    "fixation",
    "gw-spine",
)

DEFAULTS = {"seed": 0, "reps": DEFAULT_REPS, "alpha": DEFAULT_ALPHA, "n": 0, "output": "out"}


@dataclass
class RunConfig:
    command: str
    model: Mapping
    seed: int
    reps: int
    alpha: float
    horizon: int | None
    grid: list | None
    n: int
    output: str
    options: dict = field(default_factory=dict)
    document: dict = field(default_factory=dict)

    def family(self) -> FamilySpec:
        return family_from_document(self.model)

    def spec(self) -> ModelSpec:
        fam = self.family()
        if fam.kind == "gw":
            raise ValidationError("family", "a gw family has no fixed spec for this command")
        return fam.expand()

    def to_manifest(self) -> dict:
        """Every field, defaults included, plus the document as given."""
        return {
            "command": self.command,
            "model": _plain(self.model),
            "seed": self.seed,
            "reps": self.reps,
            "alpha": self.alpha,
            "horizon": self.horizon,
            "grid": self.grid,
            "n": self.n,
            "output": self.output,
            "options": _plain(self.options),
            "document": self.document,
        }


def _plain(v):
    if isinstance(v, Fraction):
        return f"{v.numerator}/{v.denominator}"
    if isinstance(v, Mapping):
        return {k: _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    return v


def _int_field(doc: Mapping, name: str, default=None, minimum: int | None = None):
    v = doc.get(name, default)
    if v is None:
        return None
    if isinstance(v, bool) or not isinstance(v, int):
        raise ValidationError(name, "must be an integer")
    if minimum is not None and v < minimum:
        raise ValidationError(name, f"must be at least {minimum}")
    return v


def parse_config(text: str) -> RunConfig:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, exc.lineno, exc.colno) from None
    if not isinstance(doc, dict):
        raise ValidationError("document", "must be a JSON object")
    cmd = doc.get("command")
    if cmd is None:
        raise ValidationError("command")
    if cmd not in COMMANDS:
        raise ValidationError("command", f"unknown command {cmd!r}; expected one of {', '.join(COMMANDS)}")
    model_keys = ("family", "X", "litters", "cap", "capped", "pmf")
    model = {k: doc[k] for k in model_keys if k in doc}
    if "pmf" in model:
        try:
            model["pmf"] = [Fraction(str(p)) for p in model["pmf"]]
            OffspringDistribution(tuple(model["pmf"]))
        except (ValueError, ZeroDivisionError, SpecError) as exc:
            raise ValidationError("pmf", str(exc)) from None
    fam = model.get("family")
    if isinstance(fam, Mapping) and "pmf" in fam:
        try:
            model["family"] = dict(fam, pmf=[Fraction(str(p)) for p in fam["pmf"]])
        except (ValueError, ZeroDivisionError) as exc:
            raise ValidationError("family.pmf", str(exc)) from None
    if cmd != "gw-spine" and "family" not in model and "X" not in model:
        raise ValidationError("family", "a model block (family or X/litters) is required")
    if cmd == "gw-spine" and "pmf" not in model and not (isinstance(fam, Mapping) and "pmf" in fam):
        raise ValidationError("pmf", "gw-spine needs an offspring pmf")
    alpha = doc.get("alpha", DEFAULTS["alpha"])
    if not isinstance(alpha, (int, float)) or not 0 < alpha < 1:
        raise ValidationError("alpha", "must lie in (0, 1)")
    grid = doc.get("grid")
    if grid is not None and (not isinstance(grid, list) or not all(isinstance(g, int) and g >= 0 for g in grid)):
        raise ValidationError("grid", "must be a list of non-negative integers")
    sampler = doc.get("sampler", "forward")
    if sampler not in SAMPLERS:
        raise ValidationError("sampler", f"must be one of {SAMPLERS}")
    output = doc.get("output", DEFAULTS["output"])
    if not isinstance(output, str):
        raise ValidationError("output", "must be a path string")
    known = set(model_keys) | {"command", "seed", "reps", "alpha", "horizon", "grid", "n", "output"}
    options = {k: v for k, v in doc.items() if k not in known}
    options.setdefault("sampler", sampler)
    return RunConfig(
        command=cmd,
        model=model,
        seed=_int_field(doc, "seed", DEFAULTS["seed"], 0),
        reps=_int_field(doc, "reps", DEFAULTS["reps"], 1),
        alpha=float(alpha),
        horizon=_int_field(doc, "horizon", None, 0),
        grid=grid,
        n=_int_field(doc, "n", DEFAULTS["n"], 0),
        output=output,
        options=options,
        document=doc,
    )


# ---------------------------------------------------------------------------
# commands; each returns (csv files, summary, passed)


def _q(x) -> str:
    x = Fraction(x)
    return f"{x.numerator}/{x.denominator}"


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _cmd_sample(cfg: RunConfig, workers: int):
    spec = cfg.spec()
    g = sample(spec, cfg.seed, cfg.options["sampler"])
    files = {"genealogy.txt": dumps_genealogy(g), "descendants.csv": descendant_table(g, cfg.n).to_csv()}
    return files, {"X": list(spec.X), "canonical_form": str(canonical_form(g))}, True


def _cmd_verify_neutrality(cfg: RunConfig, workers: int):
    spec = cfg.spec()
    try:
        laws = {s: exact_unlabelled_distribution(spec, s) for s in SAMPLERS}
    except BudgetExceeded:
        return _verify_by_sampling(cfg, spec, workers)
    reports = [
        distribution_equality_test(laws["forward"], laws[s], cfg.alpha, f"forward vs {s}") for s in SAMPLERS[1:]
    ]
    keys = sorted(set().union(*laws.values()))
    rows = [[str(k)] + [_q(laws[s].get(k, 0)) for s in SAMPLERS] for k in keys]
    files = {"neutrality.csv": _csv(["canonical_form", *SAMPLERS], rows)}
    passed = all(r.passed for r in reports)
    return files, {"method": "exact", "tests": [r.to_dict() for r in reports], "exact_equality": passed}, passed


@dataclass(frozen=True)
class _CanonicalDraw:
    spec: ModelSpec
    sampler: str

    def __call__(self, seed):
        return str(canonical_form(sample(self.spec, seed, self.sampler)))


def _verify_by_sampling(cfg: RunConfig, spec: ModelSpec, workers: int):
    seed = as_seed(cfg.seed)
    draws = {s: replicate_map(_CanonicalDraw(spec, s), seed.child(s), cfg.reps, workers) for s in SAMPLERS}
    reports = [
        distribution_equality_test(draws["forward"], draws[s], cfg.alpha, f"forward vs {s}") for s in SAMPLERS[1:]
    ]
    counts = {s: {} for s in SAMPLERS}
    for s, d in draws.items():
        for k in d:
            counts[s][k] = counts[s].get(k, 0) + 1
    keys = sorted(set().union(*counts.values()))
    rows = [[k] + [counts[s].get(k, 0) for s in SAMPLERS] for k in keys]
    files = {"neutrality.csv": _csv(["canonical_form", *SAMPLERS], rows)}
    passed = all(r.passed for r in reports)
    return files, {"method": "chi-square", "tests": [r.to_dict() for r in reports]}, passed


def _cmd_sbo_check(cfg: RunConfig, workers: int):
    spec = cfg.spec()
    n = cfg.n
    m = cfg.horizon if cfg.horizon is not None else spec.last
    look = exact_labelled_distribution(spec, "lookdown")

    def sizes_by_ancestor(key):
        anc = np.arange(spec.X[m])
        for j in range(m - 1, n - 1, -1):
            anc = np.asarray(key[j])[anc]
        return tuple(np.bincount(anc, minlength=spec.X[n]).tolist())

    observed = pushforward(look, sizes_by_ancestor)
    # reference: size-biased order of the same block sizes, padded with zeros
    reference: dict = {}
    for key, p in look.items():
        sizes = sorted(sizes_by_ancestor(key), reverse=True)
        for order, q in exact_sbo_distribution(sizes).items():
            k = tuple(sizes[i] for i in order)
            reference[k] = reference.get(k, Fraction(0)) + p * q
    report = distribution_equality_test(observed, reference, cfg.alpha, "lookdown descendant counts vs size-biased order")
    keys = sorted(set(observed) | set(reference))
    rows = [[" ".join(map(str, k)), _q(observed.get(k, 0)), _q(reference.get(k, 0))] for k in keys]
    files = {"sbo.csv": _csv(["counts", "lookdown", "size_biased"], rows)}
    return files, {"n": n, "m": m, "test": report.to_dict()}, report.passed


def _cmd_coalescent(cfg: RunConfig, workers: int):
    spec = cfg.spec()
    scale = coalescent_scale(spec)
    summary: dict[str, Any] = {"generations": spec.last, "t_last": _q(scale.t[-1]), "t_trunc_last": _q(scale.t_trunc[-1])}
    passed = True
    check = cfg.options.get("check")
    if check:
        from .stats import pairwise_coalescence_probability

        n, m = int(check["n"]), int(check["m"])
        est = monte_carlo_coalescence(spec, n, m, cfg.reps, cfg.seed, cfg.options["sampler"], workers)
        exact = pairwise_coalescence_probability(scale, n, m)
        passed = est.within(exact, 4)
        summary["check"] = {"n": n, "m": m, "exact": _q(exact), **est.to_dict(), "within_4se": passed}
    return {"scale.csv": scale.to_csv()}, summary, passed


def _cmd_identify_base(cfg: RunConfig, workers: int):
    fam = cfg.family()
    horizon = cfg.horizon if cfg.horizon is not None else fam.cap
    grid = cfg.grid if cfg.grid is not None else list(range(0, min(horizon, 10) + 1))
    model = fam if fam.kind == "gw" else fam.expand()
    table = dichotomy_experiment(model, grid, horizon, cfg.reps, cfg.seed, workers)
    rows = [[r.n, _q(r.t_n), repr(r.estimate.estimate), repr(r.estimate.se)] for r in table.rows]
    files = {"identify_base.csv": _csv(["n", "t_n", "rho_hat", "se"], rows)}
    summary = {"horizon": horizon, "grid": grid, "t_n_trunc": [_q(r.t_n_trunc) for r in table.rows]}
    return files, summary, True


def _cmd_rank_recovery(cfg: RunConfig, workers: int):
    spec = cfg.spec()
    reports = rank_recovery_experiment(spec, cfg.reps, cfg.seed, workers)
    rows = [[i, sum(r.resolvable), sum(r.matched), sum(r.sizes), int(r.monotone)] for i, r in enumerate(reports)]
    resolvable = sum(sum(r.resolvable) for r in reports)
    matched = sum(sum(r.matched) for r in reports)
    monotone = all(r.monotone for r in reports)
    summary = {
        "resolvable": resolvable,
        "matched": matched,
        "accuracy": matched / resolvable if resolvable else None,
        "monotone_in_every_replicate": monotone,
    }
    files = {"rank_recovery.csv": _csv(["rep", "resolvable", "matched", "vertices", "monotone"], rows)}
    return files, summary, monotone and matched == resolvable


def _cmd_fixation(cfg: RunConfig, workers: int):
    spec = cfg.spec()
    res = fixation_experiment(spec, cfg.n, cfg.reps, cfg.seed, workers)
    rows = [[i, "none" if m is None else m] for i, m in enumerate(res.fixed_at)]
    summary = {"events": res.events, "reps": res.reps, "frequency": res.frequency, "base_path_fixed": res.base_path_fixed}
    return {"fixation.csv": _csv(["rep", "fixed_at"], rows)}, summary, res.base_path_fixed


def _cmd_gw_spine(cfg: RunConfig, workers: int):
    fam = cfg.model.get("family")
    pmf = cfg.model["pmf"] if "pmf" in cfg.model else fam["pmf"]
    cap = int(cfg.model.get("cap", fam.get("cap", 3) if isinstance(fam, Mapping) else 3))
    d = OffspringDistribution(tuple(pmf))
    diag = spine_diagnostics(d)
    a = exact_spinal_law(d, cap)
    b = exact_spine_via_lookdown_law(d, cap)
    report = distribution_equality_test(a, b, cfg.alpha, "spinal vs lookdown spine")
    keys = sorted(set(a) | set(b))
    rows = [
        [" ".join(map(str, X)), "|".join(" ".join(str(v + 1) for v in p) for p in par), " ".join(str(v + 1) for v in sp),
         _q(a.get((X, par, sp), 0)), _q(b.get((X, par, sp), 0))]
        for X, par, sp in keys
    ]
    files = {"gw_spine.csv": _csv(["X", "parents", "spine", "spinal", "lookdown"], rows)}
    return files, {"cap": cap, "diagnostics": diag.to_dict(), "test": report.to_dict()}, report.passed


_DISPATCH = {
    "sample": _cmd_sample,
    "verify-neutrality": _cmd_verify_neutrality,
    "sbo-check": _cmd_sbo_check,
    "coalescent": _cmd_coalescent,
    "identify-base": _cmd_identify_base,
    "rank-recovery": _cmd_rank_recovery,
    "fixation": _cmd_fixation,
    "gw-spine": _cmd_gw_spine,
}


def run(config: RunConfig, out_dir: str | os.PathLike | None = None, workers: int = 1) -> int:
    """Execute ``config``, writing CSV files and ``manifest.json`` into the
    output directory.  Returns the exit status."""
    out = Path(out_dir if out_dir is not None else config.output)
    files, summary, passed = _DISPATCH[config.command](config, workers)
    out.mkdir(parents=True, exist_ok=True)
    for name, body in files.items():
        (out / name).write_text(body)
    manifest = {
        "config": config.to_manifest(),
        "software": {"package": "lookdown", "version": __version__, "numpy": np.__version__},
        "enumeration_budget": enumeration_budget(),
        "streams": "replicate i uses substream (seed, 'rep', i)",
        "outputs": sorted(files),
        "summary": summary,
        "passed": passed,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, default=_plain) + "\n")
    return 0 if passed else 1


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="lookdown", description="Run a neutral-genealogy experiment from a JSON config.")
    ap.add_argument("config", help="path to the config document, or - for stdin")
    ap.add_argument("--seed", type=int, help="override the config seed")
    ap.add_argument("--threads", type=int, default=os.cpu_count() or 1, help="worker processes for replicates")
    ap.add_argument("--out", help="output directory (default: the config's output field)")
    args = ap.parse_args(argv)
    try:
        text = sys.stdin.read() if args.config == "-" else Path(args.config).read_text()
        cfg = parse_config(text)
        if args.seed is not None:
            cfg.seed = args.seed
        return run(cfg, args.out, max(1, args.threads))
    except ParseError as exc:
        print(f"error: config line {exc.line} column {exc.column}: {exc}", file=sys.stderr)
    except ValidationError as exc:
        print(f"error: invalid field {exc}", file=sys.stderr)
    except (OSError, LookdownError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
    return 2


__all__ = ["RunConfig", "parse_config", "run", "main", "COMMANDS", "BUDGET_ENV"]
