"""Command-line entry point: ``wbslr <command> [options]``.

Commands read a YAML config (``--config``) whose sections mirror the library
dataclasses; command-line flags override config values.  Every command writes
its artifacts atomically into ``--out`` together with ``manifest.json``.

Exit codes: 0 success, 1 usage or config error, 2 data error, 3 numerical
failure.
"""
from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import io
import json
import logging
import os
import sys
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import __version__, cohort, ensemble, experiment, featurize, metrics, seqmine, sgl, synth
from .experiment import DataError, RunConfig

log = logging.getLogger("wbslr")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

DEFAULTS = {
    "seed": 0,
    "threads": 1,
    "representation": "wbslr",
    "window_days": 120,
    "synth": {"n_patients": 2000, "t_windows": 6, "p_events": 50, "window_days": 60,
              "planted": [], "base_rate": 0.05, "visit_rate": 2.0, "bias": 0.0,
              "event_rates": {}},
    "cohort": {"index_codes": [], "outcome_codes": [], "observation_months": 12,
               "holdoff_months": 6, "monitor_months": 12, "min_lead_months": 18},
    "sgl": {"alpha": 0.7, "lambda": 0.0005, "tol": 1e-8, "max_outer": 1000,
            "max_inner": 100, "fit_intercept": False},
    "ensemble": {"B": 20, "member_mode": "sgl"},
    "miner": {"min_support": 0.2, "max_length": 3},
    "eval": {"repeats": 50, "threshold": 0.5, "split": [0.6, 0.2, 0.2]},
    "tune": {"enabled": False, "alphas": [0.7], "n_lambdas": 10, "ratio": 0.01,
             "criterion": "nll", "rule": "1se"},
}


class ConfigError(ValueError):
    pass


class NumericalFailure(RuntimeError):
    pass


class VocabularyMismatch(ValueError):
    pass


def _merge(base: dict, over: dict, where: str = "") -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if k not in base:
            raise ConfigError(f"unknown config key {where}{k!r}")
        if isinstance(base[k], dict) and base[k] and k != "event_rates":
            if not isinstance(v, dict):
                raise ConfigError(f"config key {where}{k!r} must be a table")
            out[k] = _merge(base[k], v, f"{where}{k}.")
        else:
            out[k] = v
    return out


@dataclass
class PipelineConfig:
    """Validated, fully merged configuration."""
    raw: dict
    run: RunConfig = None
    synth: synth.GeneratorConfig = None
    cohort: cohort.CohortSpec | None = None
    repeats: int = 50

    @classmethod
    def from_dict(cls, raw: dict) -> "PipelineConfig":
        try:
            s = raw["sgl"]
            if raw["representation"] not in experiment.REPRESENTATIONS:
                raise ValueError(f"unknown representation {raw['representation']!r}; "
                                 f"choose from {experiment.REPRESENTATIONS}")
            ens, tune, ev = raw["ensemble"], raw["tune"], raw["eval"]
            if ens["member_mode"] not in ("sgl", "refit"):
                raise ValueError(f"unknown member_mode {ens['member_mode']!r}")
            if int(ev["repeats"]) < 2:
                raise ValueError("eval.repeats must be >= 2")
            if int(raw["threads"]) < 1:
                raise ValueError("threads must be >= 1")
            run = RunConfig(
                representation=raw["representation"],
                window_days=int(raw["window_days"]),
                sgl=sgl.SglConfig.from_dict(s),
                B=int(ens["B"]), member_mode=ens["member_mode"],
                miner=seqmine.MinerConfig(**raw["miner"]),
                split=tuple(float(f) for f in ev["split"]),
                threshold=float(ev["threshold"]),
                tune=bool(tune["enabled"]), tune_alphas=tuple(float(a) for a in tune["alphas"]),
                tune_lambdas=int(tune["n_lambdas"]), tune_ratio=float(tune["ratio"]),
                tune_criterion=tune["criterion"], tune_rule=tune["rule"],
                threads=int(raw["threads"]))
            if run.window_days < 1:
                raise ValueError("window_days must be positive")
            fr = np.asarray(run.split)
            if fr.size != 3 or np.any(fr < 0) or abs(fr.sum() - 1) > 1e-9:
                raise ValueError(f"eval.split must be 3 fractions summing to 1, got {run.split}")
            gen = synth.GeneratorConfig.from_dict(dict(raw["synth"], seed=int(raw["seed"])))
            c = raw["cohort"]
            spec = None
            if c["index_codes"] or c["outcome_codes"]:
                spec = cohort.CohortSpec(frozenset(map(str, c["index_codes"])),
                                         frozenset(map(str, c["outcome_codes"])),
                                         c["observation_months"], c["holdoff_months"],
                                         c["monitor_months"], c["min_lead_months"])
        except (TypeError, ValueError, KeyError) as exc:
            raise ConfigError(f"invalid config: {exc}") from exc
        return cls(raw, run, gen, spec, int(ev["repeats"]))

    @property
    def seed(self) -> int:
        return int(self.raw["seed"])


def load_config(path: str | None, overrides: dict) -> PipelineConfig:
    raw = {}
    if path:
        try:
            raw = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse config {path}: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError(f"config {path} must hold a mapping at top level")
    merged = _merge(DEFAULTS, raw)
    for dotted, value in overrides.items():
        node = merged
        *parents, leaf = dotted.split(".")
        for p in parents:
            node = node[p]
        node[leaf] = value
    return PipelineConfig.from_dict(merged)


# -- artifact plumbing -------------------------------------------------------

def write_atomic(path: Path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        os.chmod(tmp, 0o644)
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _json(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True) + "\n"


@dataclass
class RunManifest:
    command: str
    config: dict
    seeds: dict = field(default_factory=dict)
    inputs: dict = field(default_factory=dict)
    artifacts: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)

    def add(self, name: str, path: Path, text: str):
        write_atomic(path, text)
        self.artifacts[name] = {"path": str(path),
                                "sha256": hashlib.sha256(text.encode()).hexdigest()}

    def to_dict(self) -> dict:
        return {"tool": "wbslr", "version": __version__, "command": self.command,
                "config": self.config, "seeds": self.seeds, "inputs": self.inputs,
                "artifacts": self.artifacts, "timings": self.timings}

    def write(self, out: Path):
        write_atomic(out / "manifest.json", _json(self.to_dict()))


class _Timer:
    def __init__(self, manifest: RunManifest, name: str):
        self.m, self.name = manifest, name

    def __enter__(self):
        self.t0 = time.perf_counter()

    def __exit__(self, *exc):
        self.m.timings[self.name] = round(time.perf_counter() - self.t0, 3)


def _existing(path: str | None, what: str) -> Path:
    if not path:
        raise ConfigError(f"missing required {what} path")
    p = Path(path)
    if not p.exists():
        raise DataError(f"{what} file not found: {p}")
    return p


# -- model files --------------------------------------------------------------

def _model_text(model) -> str:
    if isinstance(model, ensemble.WbSlrModel):
        return ensemble.save_model(model)
    return sgl.save_model(model)


def load_any_model(path: Path):
    """Load an SLR or WB-SLR model file plus its representation sidecar."""
    path = Path(path)
    if path.is_dir():
        path = path / "model.json"
    if not path.exists():
        raise DataError(f"model file not found: {path}")
    try:
        d = json.loads(path.read_text(encoding="utf-8"))
        model = (ensemble.WbSlrModel.from_dict(d) if "members" in d
                 else sgl.SglModel.from_dict(d))
    except (ValueError, KeyError, TypeError) as exc:
        raise DataError(f"cannot read model {path}: {exc}") from exc
    rep_path = path.with_name("representation.json")
    rep = None
    if rep_path.exists():
        rep = experiment.Representation.from_dict(json.loads(rep_path.read_text()))
    return model, rep, path


def _model_vocab(model):
    m = model.members[0].model if isinstance(model, ensemble.WbSlrModel) else model
    return m.vocab


def _check_finite(model):
    ms = ([m.model for m in model.members] if isinstance(model, ensemble.WbSlrModel)
          else [model])
    for m in ms:
        if not (np.all(np.isfinite(m.omega)) and np.isfinite(m.intercept)):
            raise NumericalFailure("fitted coefficients are not finite")


# -- inspection ---------------------------------------------------------------

INSPECT_COLUMNS = ("window_index", "window_range", "code", "coefficient", "sign",
                   "member_frequency")


def inspect_rows(model) -> list:
    """Selected ``(window, event)`` pairs sorted by ``|coefficient|`` descending.

    For an ensemble the largest-weight member is reported and
    ``member_frequency`` is the fraction of members selecting the pair.
    """
    if isinstance(model, ensemble.WbSlrModel):
        focus = model.best_member().model
        sets = [m.model.selected for m in model.members]
    else:
        focus, sets = model, [model.selected]
    rows = []
    for j, p, s in sgl.selected_events(focus):
        coef = float(focus.omega[j * focus.P + p])
        lo, hi = focus.grid.window_range(j)
        freq = sum((j, p) in st for st in sets) / len(sets)
        rows.append({"window_index": j, "window_range": f"[{lo},{hi})",
                     "code": focus.vocab.codes[p], "coefficient": coef, "sign": s,
                     "member_frequency": freq})
    rows.sort(key=lambda r: (-abs(r["coefficient"]), r["window_index"], r["code"]))
    return rows


def inspect_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(INSPECT_COLUMNS)
    for r in rows:
        w.writerow([r["window_index"], r["window_range"], r["code"], repr(r["coefficient"]),
                    r["sign"], repr(r["member_frequency"])])
    return buf.getvalue()


def inspect_text(rows) -> str:
    if not rows:
        return "no features selected: every coefficient is zero (lambda may be too large)\n"
    head = (f"{'window_index':>12} {'window_range':>14} {'code':<16} {'coefficient':>12} "
            f"{'sign':>4} {'member_frequency':>16}")
    out = [head]
    for r in rows:
        out.append(f"{r['window_index']:>12} {r['window_range']:>14} {r['code']:<16} "
                   f"{r['coefficient']:>12.5f} {r['sign']:>4} {r['member_frequency']:>16.3f}")
    return "\n".join(out) + "\n"


# -- commands -----------------------------------------------------------------

def _read_seqs(path) -> list:
    seqs = cohort.read_sequences(_existing(path, "labeled-sequence"))
    if not seqs:
        raise DataError(f"{path} holds no labeled sequences")
    return seqs


def cmd_synth(args, cfg: PipelineConfig, man: RunManifest):
    man.seeds["synth"] = cfg.synth.seed
    with _Timer(man, "generate"):
        seqs, truth = synth.generate(cfg.synth)
    out = Path(args.out)
    man.add("sequences", out / "sequences.jsonl", cohort.dumps_sequences(seqs))
    man.add("truth", out / "truth.json", synth.truth_json(truth, cfg.synth))
    log.info("wrote %d synthetic sequences to %s", len(seqs), out)


def cmd_cohort(args, cfg: PipelineConfig, man: RunManifest):
    if cfg.cohort is None:
        raise ConfigError("cohort.index_codes and cohort.outcome_codes are required")
    events_path = _existing(args.events, "events")
    man.inputs["events"] = str(events_path)
    grouping = None
    if args.grouping:
        man.inputs["grouping"] = args.grouping
        grouping = cohort.read_grouping(_existing(args.grouping, "grouping"))
    with _Timer(man, "build"):
        records = cohort.group_into_visits(cohort.read_events(events_path, grouping))
        summary = cohort.CohortSummary()
        seqs = cohort.build_cohort(records, cfg.cohort, summary)
    out = Path(args.out)
    man.add("sequences", out / "sequences.jsonl", cohort.dumps_sequences(seqs))
    man.add("summary", out / "cohort_summary.json", _json(summary.to_dict()))
    log.info("cohort: %d positives, %d negatives, %d excluded",
             summary.positives, summary.negatives, summary.n_excluded)


def cmd_featurize(args, cfg: PipelineConfig, man: RunManifest):
    seqs = _read_seqs(args.data)
    man.inputs["data"] = args.data
    rc = cfg.run
    with _Timer(man, "featurize"):
        rep = experiment.make_representation(rc.representation, experiment._span(seqs),
                                             rc.window_days, rc.miner).fit(seqs)
        X = rep.transform(seqs)
    if rc.representation in ("slr", "wbslr", "bagged-slr"):
        names = [f"t{j}|{c}" for j in range(rep.grid.T) for c in rep.codes.codes]
    else:
        names = list(rep.vocab.codes)
    out = Path(args.out)
    text = featurize.matrix_to_csv([s.patient_id for s in seqs], [s.label for s in seqs],
                                   X, names)
    man.add("matrix", out / "features.csv", text)
    if rc.representation == "bps":
        man.add("patterns", out / "patterns.txt", seqmine.format_patterns(rep.patterns))
    man.add("representation", out / "representation.json", _json(rep.to_dict()))


def cmd_mine(args, cfg: PipelineConfig, man: RunManifest):
    seqs = _read_seqs(args.data)
    man.inputs["data"] = args.data
    with _Timer(man, "mine"):
        pats = seqmine.mine_frequent([s.itemsets for s in seqs], cfg.run.miner)
    man.add("patterns", Path(args.out) / "patterns.txt", seqmine.format_patterns(pats))
    log.info("mined %d frequent patterns", len(pats))


def _write_fit(man: RunManifest, out: Path, fitted: experiment.FittedPipeline):
    _check_finite(fitted.model)
    man.add("model", out / "model.json", _model_text(fitted.model))
    man.add("representation", out / "representation.json",
            _json(fitted.representation.to_dict()))
    if fitted.tuning:
        man.add("tuning", out / "tuning.json", _json(fitted.tuning))


def cmd_train(args, cfg: PipelineConfig, man: RunManifest):
    seqs = _read_seqs(args.data)
    man.inputs["data"] = args.data
    rc, seed = cfg.run, cfg.seed
    man.seeds.update(split=seed, ensemble=seed)
    y = np.array([s.label for s in seqs])
    tr, va, te = experiment.stratified_split(y, rc.split, seed)
    with _Timer(man, "fit"):
        fitted = experiment.fit_pipeline([seqs[i] for i in tr], [seqs[i] for i in va],
                                         rc, seed)
    out = Path(args.out)
    _write_fit(man, out, fitted)
    man.add("heldout", out / "heldout.jsonl", cohort.dumps_sequences(seqs[i] for i in te))


def _check_vocab(model, rep, seqs, strict: bool):
    vocab = _model_vocab(model)
    if rep is None:
        rep = experiment.Representation("slr", model.members[0].model.grid
                                        if isinstance(model, ensemble.WbSlrModel)
                                        else model.grid, 0, vocab, vocab)
    if rep.vocab != vocab:
        raise VocabularyMismatch("model vocabulary differs from its representation file")
    seen = {c for s in seqs for v in s.visits for c in v.codes}
    unknown = seen - set(rep.codes.codes)
    if unknown and strict:
        shown = ", ".join(sorted(unknown)[:5])
        raise VocabularyMismatch(
            f"{len(unknown)} codes in the data are not in the model vocabulary (e.g. {shown})")
    if not seen & set(rep.codes.codes):
        raise VocabularyMismatch("the data shares no codes with the model vocabulary")
    return rep


def _scores(model, rep, X):
    if rep.name == "bagged-slr":
        return ensemble.vote_fraction(model.members, X)
    return model.predict_proba(X)


def evaluate_fixed(labels, scores, repeats: int, seed: int, threshold: float):
    """Metrics over ``repeats`` stratified bootstrap resamples of a held-out set."""
    labels = np.asarray(labels).astype(int)
    scores = np.asarray(scores, dtype=float)
    pos, neg = np.flatnonzero(labels == 1), np.flatnonzero(labels == 0)
    if pos.size == 0 or neg.size == 0:
        raise DataError("held-out data must contain both classes")

    def run(r):
        rng = np.random.default_rng([seed, r])
        idx = np.concatenate([rng.choice(pos, pos.size), rng.choice(neg, neg.size)])
        return metrics.evaluate(labels[idx], scores[idx], threshold)

    return metrics.repeated_eval(run, repeats, 0, threshold)


def cmd_evaluate(args, cfg: PipelineConfig, man: RunManifest):
    model, rep, mpath = load_any_model(Path(_existing(args.model, "model")))
    data = args.data or str(mpath.with_name("heldout.jsonl"))
    seqs = _read_seqs(data)
    man.inputs.update(model=str(mpath), data=data)
    rep = _check_vocab(model, rep, seqs, args.strict_vocab)
    man.seeds["resample"] = cfg.seed
    with _Timer(man, "evaluate"):
        s = _scores(model, rep, rep.transform(seqs))
        report = evaluate_fixed([q.label for q in seqs], s, cfg.repeats, cfg.seed,
                                cfg.run.threshold)
    out = Path(args.out)
    man.add("report_json", out / "report.json", _json(report.to_dict()))
    man.add("report_text", out / "report.txt", report.to_text())
    if not args.quiet:
        sys.stdout.write(report.to_text())


def cmd_inspect(args, cfg: PipelineConfig, man: RunManifest):
    model, _, mpath = load_any_model(Path(_existing(args.model, "model")))
    man.inputs["model"] = str(mpath)
    rows = inspect_rows(model)
    man.add("inspect", Path(args.out) / "inspect.csv", inspect_csv(rows))
    sys.stdout.write(inspect_text(rows))


def cmd_pipeline(args, cfg: PipelineConfig, man: RunManifest):
    out = Path(args.out)
    if args.data:
        seqs = _read_seqs(args.data)
        man.inputs["data"] = args.data
    else:
        man.seeds["synth"] = cfg.synth.seed
        with _Timer(man, "generate"):
            seqs, truth = synth.generate(cfg.synth)
        man.add("sequences", out / "sequences.jsonl", cohort.dumps_sequences(seqs))
        man.add("truth", out / "truth.json", synth.truth_json(truth, cfg.synth))
    rc, base = cfg.run, cfg.seed
    seeds = list(range(base, base + cfg.repeats))
    man.seeds["repeats"] = seeds
    first = []

    def run(seed):
        res, fitted = experiment.run_once(seqs, rc, seed)
        if not first:
            first.append(fitted)
        log.info("repeat seed=%d auc=%.4f", seed, res["auc"])
        return res

    with _Timer(man, "repeats"):
        report = metrics.repeated_eval(run, cfg.repeats, base, rc.threshold)
    _write_fit(man, out, first[0])
    if rc.representation in ("slr", "wbslr", "bagged-slr"):
        man.add("inspect", out / "inspect.csv", inspect_csv(inspect_rows(first[0].model)))
    runs = [{k: r[k] for k in metrics.METRICS} for r in report.runs]
    man.add("report_json", out / "report.json", _json(dict(report.to_dict(), runs=runs)))
    man.add("report_text", out / "report.txt", report.to_text())
    if not args.quiet:
        sys.stdout.write(report.to_text())


COMMANDS = {"synth": cmd_synth, "cohort": cmd_cohort, "featurize": cmd_featurize,
            "mine": cmd_mine, "train": cmd_train, "evaluate": cmd_evaluate,
            "inspect": cmd_inspect, "pipeline": cmd_pipeline}


# -- argument parsing ---------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _global_flags(p, suppress: bool):
    d = argparse.SUPPRESS if suppress else None
    p.add_argument("--config", default=d, help="YAML config file")
    p.add_argument("--seed", type=int, default=d, help="base seed (overrides config)")
    p.add_argument("--out", default=d if suppress else ".", help="output directory")
    p.add_argument("--threads", type=int, default=d, help="worker threads for member fits")
    p.add_argument("--quiet", action="store_true", default=d if suppress else False,
                   help="only log warnings")


# flag name -> dotted config key
_MODEL_FLAGS = {"representation": "representation", "window_days": "window_days",
                "alpha": "sgl.alpha", "lam": "sgl.lambda", "B": "ensemble.B",
                "repeats": "eval.repeats", "threshold": "eval.threshold",
                "n_patients": "synth.n_patients"}


def _model_flags(p):
    p.add_argument("--representation", choices=experiment.REPRESENTATIONS)
    p.add_argument("--window-days", dest="window_days", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--B", type=int, help="ensemble size")
    p.add_argument("--repeats", type=int)
    p.add_argument("--threshold", type=float)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="wbslr", description="Sparse longitudinal representations and "
                                           "weighted bagging for risk prediction.")
    _global_flags(ap, suppress=False)
    ap.add_argument("--version", action="version", version=f"wbslr {__version__}")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, help_):
        p = sub.add_parser(name, help=help_)
        _global_flags(p, suppress=True)
        return p

    p = add("synth", "generate a synthetic labeled cohort")
    p.add_argument("--n-patients", dest="n_patients", type=int)
    p = add("cohort", "build labeled sequences from raw events")
    p.add_argument("--events", required=True, help="events file (.csv or .jsonl)")
    p.add_argument("--grouping", help="raw_code,group_code mapping file")
    p = add("featurize", "export a feature matrix")
    p.add_argument("--data", required=True, help="labeled-sequence JSONL")
    _model_flags(p)
    p = add("mine", "mine frequent sequential patterns")
    p.add_argument("--data", required=True)
    p = add("train", "fit a model on the train split")
    p.add_argument("--data", required=True)
    _model_flags(p)
    p = add("evaluate", "score a fitted model on held-out data")
    p.add_argument("--model", required=True, help="model file or training output dir")
    p.add_argument("--data", help="held-out JSONL (default: heldout.jsonl beside the model)")
    p.add_argument("--strict-vocab", action="store_true",
                   help="fail on codes absent from the model vocabulary instead of dropping them")
    _model_flags(p)
    p = add("inspect", "report the selected features of a fitted model")
    p.add_argument("--model", required=True)
    p = add("pipeline", "repeated split / fit / test protocol end to end")
    p.add_argument("--data", help="labeled-sequence JSONL (default: synthesize from config)")
    p.add_argument("--n-patients", dest="n_patients", type=int)
    _model_flags(p)
    return ap


def _overrides(args) -> dict:
    o = {}
    if args.seed is not None:
        o["seed"] = args.seed
    if args.threads is not None:
        o["threads"] = args.threads
    for flag, key in _MODEL_FLAGS.items():
        v = getattr(args, flag, None)
        if v is not None:
            o[key] = v
    return o


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = load_config(args.config, _overrides(args))
        man = RunManifest(args.command, cfg.raw)
        if args.config:
            man.inputs["config"] = args.config
        COMMANDS[args.command](args, cfg, man)
        man.write(Path(args.out))
        return EXIT_OK
    except ConfigError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    except metrics.RunFailed as exc:
        code = _code_for(exc.__cause__)
        if code is None:
            raise
        log.error("%s", exc)
        return code
    except Exception as exc:  # noqa: BLE001 - mapped to an exit code
        code = _code_for(exc)
        if code is None:
            raise
        log.error("%s", exc)
        return code


def _code_for(exc):
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, (NumericalFailure, ensemble.EnsembleError, FloatingPointError,
                        np.linalg.LinAlgError, OverflowError)):
        return EXIT_NUMERIC
    if isinstance(exc, (cohort.IngestionError, DataError, sgl.DegenerateLabels,
                        metrics.UndefinedMetric, VocabularyMismatch, OSError, ValueError)):
        return EXIT_DATA
    return None


if __name__ == "__main__":
    sys.exit(main())
