"""Seeded experiment runner and report writer behind the command line."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .constants import DEFAULTS, Constants
from .instances import InstanceSpec
from .oracles import MODELS, OracleSession, QueryLog
from .testers import TESTERS, ToleranceParams

SCHEMA = "v1"
KINDS = [f.name for f in fields(QueryLog)]
CSV_COLUMNS = ["trial", "seed", "decision", *KINDS, "total", "step", "wall_time"]


class ConfigError(ValueError):
    pass


class ReportError(OSError):
    pass


@dataclass
class ExperimentConfig:
    tester: str
    family: str
    n: int
    eps: float | None = None
    eps1: float | None = None
    eps2: float | None = None
    gamma: float | None = None
    trials: int = 1
    seed: int = 0
    model: str | None = None
    params: dict = field(default_factory=dict)
    constants: dict = field(default_factory=dict)
    timing: bool = False  # wall times break byte-identical reports, so opt-in

    def __post_init__(self):
        if self.tester not in TESTERS:
            raise ConfigError(f"unknown tester {self.tester!r}; choose from {sorted(TESTERS)}")
        _, model, tolerant = TESTERS[self.tester]
        if self.model is None:
            self.model = model
        if self.model not in MODELS:
            raise ConfigError(f"unknown model {self.model!r}")
        if self.model != model:
            raise ConfigError(f"tester {self.tester} runs in the {model} model, not {self.model}")
        if self.trials < 1:
            raise ConfigError("trials must be at least 1")
        if not (0 <= self.seed < 2**64):
            raise ConfigError("seed must be a 64-bit unsigned integer")
        if tolerant:
            if None in (self.eps1, self.eps2, self.gamma):
                raise ConfigError(f"{self.tester} needs eps1, eps2 and gamma")
            try:
                self.tolerance()
            except ValueError as e:
                raise ConfigError(str(e)) from None
        elif self.eps is None or not (0 < self.eps < 1):
            raise ConfigError(f"{self.tester} needs eps in (0, 1)")
        try:
            self.resolved_constants()
            self.instance()
        except (KeyError, ValueError) as e:
            raise ConfigError(str(e)) from None

    def tolerance(self) -> ToleranceParams:
        return ToleranceParams(self.eps1, self.eps2, self.gamma)

    def resolved_constants(self) -> Constants:
        return DEFAULTS.override(**self.constants)

    def instance(self) -> InstanceSpec:
        return InstanceSpec(self.family, self.n, dict(self.params))

    def to_json(self) -> dict:
        d = asdict(self)
        d["params"] = dict(sorted(d["params"].items()))
        d["constants"] = dict(sorted(d["constants"].items()))
        return d

    @classmethod
    def from_json(cls, obj: dict) -> "ExperimentConfig":
        return cls(**obj)


@dataclass
class ReportRow:
    trial: int
    seed: int
    decision: str
    queries: dict
    step: str | None
    wall_time: float | None = None

    @property
    def total(self) -> int:
        return sum(self.queries.values())

    def to_json(self) -> dict:
        return {"trial": self.trial, "seed": self.seed, "decision": self.decision,
                "queries": {k: self.queries[k] for k in KINDS}, "step": self.step,
                "wall_time": self.wall_time}

    @classmethod
    def from_json(cls, obj: dict) -> "ReportRow":
        return cls(obj["trial"], obj["seed"], obj["decision"], dict(obj["queries"]),
                   obj["step"], obj.get("wall_time"))


@dataclass
class Report:
    config: dict
    rows: list
    instance: dict | None = None

    @property
    def aggregates(self) -> dict:
        k = len(self.rows)
        agg: dict = {"trials": k}
        if k == 0:
            agg["accept_fraction"] = None
            return agg
        agg["accept_fraction"] = sum(r.decision == "accept" for r in self.rows) / k
        agg["mean_queries"] = {q: sum(r.queries[q] for r in self.rows) / k for q in KINDS}
        agg["max_queries"] = {q: max(r.queries[q] for r in self.rows) for q in KINDS}
        agg["max_total"] = max(r.total for r in self.rows)
        steps: dict = {}
        for r in self.rows:
            if r.step is not None:
                steps[r.step] = steps.get(r.step, 0) + 1
        agg["rejecting_steps"] = dict(sorted(steps.items()))
        return agg

    def to_json(self) -> dict:
        return {"schema": SCHEMA, "config": self.config, "instance": self.instance,
                "rows": [r.to_json() for r in self.rows], "aggregates": self.aggregates}

    @classmethod
    def from_json(cls, obj: dict) -> "Report":
        if obj.get("schema") != SCHEMA:
            raise ValueError(f"unsupported report schema {obj.get('schema')!r}")
        return cls(obj["config"], [ReportRow.from_json(r) for r in obj["rows"]], obj.get("instance"))

    def __eq__(self, other):
        return isinstance(other, Report) and self.to_json() == other.to_json()


def trial_seed(master: int, trial: int) -> int:
    """64-bit seed depending only on (master seed, trial index)."""
    h = hashlib.blake2b(f"{master}:{trial}".encode(), digest_size=8)
    return int.from_bytes(h.digest(), "little")


def _run_one(cfg: ExperimentConfig, hidden, trial: int) -> ReportRow:
    fn, model, tolerant = TESTERS[cfg.tester]
    seed = trial_seed(cfg.seed, trial)
    session = OracleSession.create(hidden, seed, model)
    consts = cfg.resolved_constants()
    t0 = time.perf_counter()
    verdict = fn(session, cfg.tolerance() if tolerant else cfg.eps, consts)
    elapsed = time.perf_counter() - t0
    # model discipline: nothing outside the tester's model was used
    assert verdict.log.used_kinds() <= MODELS[model]
    return ReportRow(trial, seed, verdict.decision, verdict.log.as_dict(), verdict.step,
                     round(elapsed, 6) if cfg.timing else None)


def _run_chunk(args):
    cfg, hidden, trials = args
    return [_run_one(cfg, hidden, t) for t in trials]


def pool_size(trials: int) -> int:
    cap = os.environ.get("MONOTEST_THREADS")
    workers = os.cpu_count() or 1
    if cap:
        workers = min(workers, max(1, int(cap)))
    return max(1, min(workers, trials))


def run_experiment(cfg: ExperimentConfig, certify: bool = False, workers: int | None = None) -> Report:
    spec = cfg.instance()
    hidden = spec.build()
    if certify:
        spec = spec.certify(hidden)
    workers = pool_size(cfg.trials) if workers is None else max(1, workers)
    trials = list(range(cfg.trials))
    if workers == 1:
        rows = _run_chunk((cfg, hidden, trials))
    else:
        chunks = [trials[i::workers] for i in range(workers)]
        with ProcessPoolExecutor(max_workers=workers) as ex:
            rows = [r for part in ex.map(_run_chunk, [(cfg, hidden, ch) for ch in chunks]) for r in part]
    rows.sort(key=lambda r: r.trial)
    return Report(cfg.to_json(), rows, spec.to_json())


def render(report: Report, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(report.to_json(), sort_keys=True, indent=2) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in report.rows:
            w.writerow([r.trial, r.seed, r.decision, *(r.queries[k] for k in KINDS), r.total,
                        "" if r.step is None else r.step,
                        "" if r.wall_time is None else repr(r.wall_time)])
        return buf.getvalue()
    raise ValueError(f"unknown format {fmt!r}; use json or csv")


def write_report(report: Report, path, fmt: str = "json") -> Path:
    """Write atomically: a temp file in the target directory, then rename."""
    path = Path(path)
    text = render(report, fmt)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except OSError as e:
        raise ReportError(f"cannot write report to {path}: {e}") from e
    return path


def read_report(path) -> Report:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ReportError(f"cannot read report {path}: {e}") from e
    return Report.from_json(json.loads(text))


def read_csv_rows(path) -> list[ReportRow]:
    with open(path, newline="", encoding="utf-8") as fh:
        out = []
        for rec in csv.DictReader(fh):
            out.append(ReportRow(int(rec["trial"]), int(rec["seed"]), rec["decision"],
                                 {k: int(rec[k]) for k in KINDS}, rec["step"] or None,
                                 float(rec["wall_time"]) if rec["wall_time"] else None))
        return out
