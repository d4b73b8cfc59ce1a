"""Command-line entry point.

Exit codes: 0 success, 1 usage or runtime error, 2 a bound that fails
verification or sampling validation.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

from . import experiments as ex
from . import fileio, selftest, synth
from .analysis import Estimator
from .errors import QmiError
from .synth import Block

log = logging.getLogger("qmifilter")

EXIT_OK, EXIT_ERROR, EXIT_REFUTED = 0, 1, 2


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="scenario config file (dotted key = value)")
    p.add_argument("--example", type=int, choices=(1, 2), help="start from a built-in example scenario")
    p.add_argument("--seed", type=int, help="data seed (overrides data.seed)")
    p.add_argument("--out", type=Path, default=Path("out"), help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qmifilter", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="simulate and write the dataset")
    _common(p)
    p = sub.add_parser("build-sets", help="write every prior and derived QMI")
    _common(p)
    p = sub.add_parser("synth", help="synthesize the estimator for one table cell")
    _common(p)
    p.add_argument("--prior", default="Sigma0_C", type=ex.prior_label, help=f"one of {', '.join(ex.PRIORS)} or {', '.join(ex.PRIOR_NAMES)}")
    p.add_argument("--constraints", default="Sigma_C", choices=ex.ROWS)
    p = sub.add_parser("validate", help="re-check a stored synthesis result")
    _common(p)
    p.add_argument("--result", type=Path, help="result directory (default OUT/result)")
    p.add_argument("--samples", type=int, default=100)
    p = sub.add_parser("reproduce", help="compute the full prior x constraint-set table")
    _common(p)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--samples", type=int, help="validation samples per cell")
    p = sub.add_parser("selftest", help="run quick randomized property checks")
    _common(p)
    return parser


def load_scenario(args) -> ex.ScenarioConfig:
    entries = fileio.read_config(args.config) if args.config else {}
    example = args.example
    if example is None and "example" not in entries and not args.config:
        example = 2
    cfg = ex.scenario_from_entries(entries, example)
    if args.seed is not None:
        cfg = cfg.replace(seed=args.seed)
    return cfg


def write_dataset(out: Path, data: ex.Dataset) -> None:
    for name in ("x", "x_next", "y", "wp"):
        fileio.write_matrix(out / "data" / f"{name}.csv", getattr(data, name))


def cmd_gen_data(args) -> int:
    cfg = load_scenario(args)
    data = ex.generate_data(cfg)
    write_dataset(args.out, data)
    fileio.write_text(args.out / "scenario.cfg", fileio.format_config(ex.scenario_to_entries(cfg)))
    print(f"wrote {data.N} samples to {args.out / 'data'}")
    return EXIT_OK


def cmd_build_sets(args) -> int:
    cfg = load_scenario(args)
    bundle = ex.build_sets(cfg, ex.generate_data(cfg))
    index = ["name,block,p,n,file"]
    for label in bundle.priors:
        groups = (("prior", bundle.priors[label]), ("sigma_d", bundle.sigma_d[label]), ("sigma_p", bundle.sigma_p[label]))
        for kind, by_block in groups:
            for b in Block:
                for i, q in enumerate(by_block[b]):
                    rel = f"sets/{label}/{kind}_{b.value}_{i:03d}.csv"
                    fileio.write_matrix(args.out / rel, q.pi)
                    index.append(f"{label}/{kind}/{i},{b.value},{q.p},{q.n},{rel}")
    fileio.write_text(args.out / "sets" / "index.csv", "\n".join(index) + "\n")
    print(f"wrote {len(index) - 1} QMIs to {args.out / 'sets'}")
    return EXIT_OK


def _write_result(out: Path, cfg: ex.ScenarioConfig, prior: str, row: str, res: synth.SynthesisResult) -> None:
    est = res.estimator
    for name in ("A_E", "B_E", "C_E", "D_E"):
        fileio.write_matrix(out / f"{name}.csv", getattr(est, name))
    fileio.write_matrix(out / "lyapunov.csv", res.lyapunov_certificate)
    meta = {"prior": prior, "constraints": row, "gamma": float(res.gamma), "multipliers": list(res.multipliers.all())}
    fileio.write_text(out / "result.cfg", fileio.format_config(meta))
    fileio.write_text(out / "scenario.cfg", fileio.format_config(ex.scenario_to_entries(cfg)))


def cmd_synth(args) -> int:
    cfg = load_scenario(args)
    bundle = ex.build_sets(cfg, ex.generate_data(cfg), priors=(args.prior,))
    plant = bundle.plant(cfg, args.prior, args.constraints)
    res = synth.synthesize(plant)
    _write_result(args.out / "result", cfg, args.prior, args.constraints, res)
    print(f"gamma = {res.gamma:.10g} ({args.constraints} / {args.prior})")
    return EXIT_OK


def cmd_validate(args) -> int:
    rdir = args.result or args.out / "result"
    meta = fileio.read_config(rdir / "result.cfg")
    cfg = ex.scenario_from_entries(fileio.read_config(rdir / "scenario.cfg"))
    if args.seed is not None:
        cfg = cfg.replace(seed=args.seed)
    est = Estimator(*(fileio.read_matrix(rdir / f"{n}.csv") for n in ("A_E", "B_E", "C_E", "D_E")))
    gamma = float(meta["gamma"])
    prior, row = meta["prior"], meta["constraints"]
    bundle = ex.build_sets(cfg, ex.generate_data(cfg), priors=(prior,))
    plant = bundle.plant(cfg, prior, row)
    ver = synth.verify_robust_bound(plant, est, gamma)
    if not ver.certified:
        print(f"REFUTED: {ver.message}")
        return EXIT_REFUTED
    mult = ver.multipliers
    res = synth.SynthesisResult(est, gamma, mult, ver.lyapunov, None)
    val = synth.validate_by_sampling(plant, res, args.samples, cfg.seed)
    print(f"certified gamma = {gamma:.10g} (margin {ver.margin:.3e}); sampled max ratio {val.max_ratio:.6f}")
    if not val.passed:
        print(f"REFUTED: {val.unstable} unstable samples, max ratio {val.max_ratio:.6f}")
        return EXIT_REFUTED
    return EXIT_OK


def cmd_reproduce(args) -> int:
    cfg = load_scenario(args)
    t0 = time.perf_counter()
    table = ex.run_scenario(cfg, workers=args.workers, validate_samples=args.samples)
    fileio.write_text(args.out / "table.csv", table.to_csv())
    fileio.write_text(args.out / "table.md", table.to_markdown())
    print(table.to_markdown(), end="")
    log.info("table computed in %.1fs", time.perf_counter() - t0)
    if not table.sound():
        bad = [f"{r}/{c}" for (r, c), cell in table.cells.items() if cell.gamma is not None and not (cell.certified and cell.validated)]
        print(f"UNSOUND cells: {', '.join(bad)}")
        return EXIT_REFUTED
    return EXIT_OK


def cmd_selftest(args) -> int:
    ok = selftest.run(seed=args.seed or 0)
    return EXIT_OK if ok else EXIT_ERROR


COMMANDS = {
    "gen-data": cmd_gen_data,
    "build-sets": cmd_build_sets,
    "synth": cmd_synth,
    "validate": cmd_validate,
    "reproduce": cmd_reproduce,
    "selftest": cmd_selftest,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (QmiError, ValueError, OSError, KeyError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
