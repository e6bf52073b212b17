"""Command line: ``monotest run | certify | sweep``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .harness import ConfigError, ExperimentConfig, ReportError, run_experiment, write_report, render
from .instances import FAMILIES, InstanceSpec
from .testers import TESTERS


def _pairs(items: list[str] | None, what: str) -> dict:
    out = {}
    for item in items or []:
        if "=" not in item:
            raise ConfigError(f"{what} expects KEY=VAL, got {item!r}")
        k, v = item.split("=", 1)
        out[k] = _scalar(v)
    return out


def _scalar(v: str):
    for cast in (int, float):
        try:
            return cast(v)
        except ValueError:
            pass
    return v


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--tester", required=True, choices=sorted(TESTERS))
    p.add_argument("--model", default=None)
    p.add_argument("--family", required=True, choices=sorted(FAMILIES))
    p.add_argument("--param", action="append", metavar="KEY=VAL", help="family parameter")
    p.add_argument("--eps1", type=float)
    p.add_argument("--eps2", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--set", action="append", metavar="KEY=VAL", help="override a constant")
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.add_argument("--timing", action="store_true", help="record wall time per trial")
    p.add_argument("--certify", action="store_true", help="attach the LP distance of the instance")


def _config(a, n: int, eps: float | None) -> ExperimentConfig:
    return ExperimentConfig(
        tester=a.tester, family=a.family, n=n, eps=eps, eps1=a.eps1, eps2=a.eps2,
        gamma=a.gamma, trials=a.trials, seed=a.seed, model=a.model,
        params=_pairs(a.param, "--param"), constants=_pairs(a.set, "--set"), timing=a.timing)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="monotest", description="Monotonicity tester experiments")
    sub = ap.add_subparsers(dest="cmd", required=True)

    run = sub.add_parser("run", help="run seeded trials of one tester on one instance")
    _add_common(run)
    run.add_argument("--n", type=int, required=True)
    run.add_argument("--eps", type=float)
    run.add_argument("--out", help="report path (stdout when omitted)")

    cert = sub.add_parser("certify", help="LP-certify an instance's distance to monotone")
    cert.add_argument("--family", required=True, choices=sorted(FAMILIES))
    cert.add_argument("--n", type=int, required=True)
    cert.add_argument("--param", action="append", metavar="KEY=VAL")

    sw = sub.add_parser("sweep", help="one report per (n, eps) grid cell")
    _add_common(sw)
    sw.add_argument("--n", type=int, nargs="+", required=True)
    sw.add_argument("--eps", type=float, nargs="+")
    sw.add_argument("--out", required=True, help="output directory")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    a = ap.parse_args(argv)
    try:
        if a.cmd == "certify":
            spec = InstanceSpec(a.family, a.n, _pairs(a.param, "--param"))
            if a.n > 2**12:
                raise ConfigError("certification is limited to n <= 4096")
            print(json.dumps(spec.certify().to_json(), sort_keys=True))
            return 0
        if a.cmd == "run":
            report = run_experiment(_config(a, a.n, a.eps), certify=a.certify)
            if a.out:
                write_report(report, a.out, a.format)
                agg = report.aggregates
                print(f"{a.tester} on {a.family} n={a.n}: accept {agg['accept_fraction']:.3f} "
                      f"over {agg['trials']} trials, max total queries {agg['max_total']}")
            else:
                sys.stdout.write(render(report, a.format))
            return 0
        # sweep: validate every cell before running any
        epss = a.eps if a.eps else [None]
        cells = [(n, e, _config(a, n, e)) for n in a.n for e in epss]
        out = Path(a.out)
        for n, e, cfg in cells:
            report = run_experiment(cfg, certify=a.certify)
            tag = f"eps{e}" if e is not None else f"eps1{a.eps1}_eps2{a.eps2}"
            path = write_report(report, out / f"{a.tester}_{a.family}_n{n}_{tag}.{a.format}", a.format)
            print(f"{path}: accept {report.aggregates['accept_fraction']:.3f}")
        return 0
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except ReportError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
