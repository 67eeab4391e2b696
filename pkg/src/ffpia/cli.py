"""``ffpia`` command line: run scenarios, validate configs, sweep seeds."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import scenarios as sc

log = logging.getLogger("ffpia")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _load(args) -> sc.ScenarioConfig:
    text = Path(args.config).read_text() if args.config else "{}"
    overrides = {"seed": args.seed, "engine": args.engine, "out": args.out,
                 "shots": args.shots, "scenario": getattr(args, "scenario", None)}
    return sc.parse_config(text, overrides)


def cmd_list(args) -> int:
    width = max(len(n) for n in sc.CATALOG)
    for name, s in sc.CATALOG.items():
        print(f"{name:<{width}}  {s.description}")
    return EXIT_OK


def cmd_validate(args) -> int:
    try:
        text = Path(args.config).read_text()
        raw = json.loads(text)
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except json.JSONDecodeError as e:
        print(f"{args.config}: line {e.lineno}, column {e.colno}: {e.msg}", file=sys.stderr)
        return EXIT_FAIL
    if not isinstance(raw, dict):
        print(f"{args.config}: config must be a JSON object", file=sys.stderr)
        return EXIT_FAIL
    problems = sc.validate_dict(raw)
    for p in problems:
        print(f"{args.config}: {p}", file=sys.stderr)
    if not problems:
        print(f"{args.config}: ok")
    return EXIT_FAIL if problems else EXIT_OK


def cmd_run(args) -> int:
    cfg = _load(args)
    rep = sc.run(cfg)
    out = rep.write(cfg.out)
    n_fail = sum(not r.passed for r in rep.rows)
    print(f"{cfg.scenario}: {len(rep.rows)} rows, {n_fail} failed -> {out / 'report.csv'}")
    for r in rep.rows:
        if not r.passed:
            print(f"  FAIL {r.case}/{r.quantity}: analytic={r.analytic} mc={r.montecarlo} "
                  f"se={r.mc_stderr} ref={r.reference}", file=sys.stderr)
    return EXIT_OK if rep.passed else EXIT_FAIL


def cmd_sweep(args) -> int:
    cfg = _load(args)
    seeds = list(range(cfg.seed, cfg.seed + args.seeds))
    agg, summary = sc.seed_sweep(cfg, seeds)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "sweep.csv").write_text(sc.sweep_to_csv(agg))
    (out / "sweep.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    print(f"{cfg.scenario}: {len(seeds)} seeds, {summary['quantities']} quantities, "
          f"min CI coverage {summary['min_coverage']:.2f} -> {out / 'sweep.csv'}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ffpia", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="verb", required=True)

    def common(p, need_config=False):
        p.add_argument("--config", required=need_config, help="JSON config file")
        p.add_argument("--scenario", choices=sorted(sc.CATALOG))
        p.add_argument("--seed", type=int)
        p.add_argument("--engine", choices=sc.ENGINES)
        p.add_argument("--out")
        p.add_argument("--shots", type=int)

    p = sub.add_parser("run", help="run one scenario and write report.csv/summary.json")
    common(p)
    p.set_defaults(fn=cmd_run)
    p = sub.add_parser("seed-sweep", help="repeat a scenario over consecutive seeds")
    common(p)
    p.add_argument("--seeds", type=int, default=20)
    p.set_defaults(fn=cmd_sweep)
    p = sub.add_parser("validate", help="check a config file")
    p.add_argument("--config", required=True)
    p.set_defaults(fn=cmd_validate)
    p = sub.add_parser("list-scenarios", help="print the scenario catalog")
    p.set_defaults(fn=cmd_list)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.fn(args)
    except (sc.ConfigError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
