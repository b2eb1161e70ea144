"""Command-line interface.

    topoms topo INPUT.pgm --out DIR [--alpha A --beta B --epsilon E ...]
    topoms at INPUT.pgm --out DIR [--alpha A --beta B --eps-at E --threshold T ...]
    topoms validate --out DIR

Exit codes: 0 success, 2 configuration/input error, 3 solver failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import synthetic
from .at import ATConfig, run_at, threshold_edges
from .cover import write_cover_csv
from .errors import ConfigError, SolverError
from .grid import load_pgm, save_pgm, to_pixels, write_pgm_array
from .oracle import (descent_audit, expansion_probe, manufactured_convergence,
                     write_convergence_csv)
from .topo import TopoConfig, run

log = logging.getLogger("topoms")

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 2, 3

# validation settings
CONVERGENCE_LEVELS = (32, 64, 128)
CONVERGENCE_ALPHA = 1.0
PROBE_GRID = 512
PROBE_EPSILONS = (0.08, 0.04, 0.02)
PROBE_CFG = dict(alpha=0.05, beta=1.0, kappa=0.01, cg_tol=1e-9)
# step-image regime where eps is well inside the smoothing length sqrt(alpha)
DESCENT_CFG = dict(alpha=0.02, beta=0.01, epsilon=0.05, kappa=0.01, batch_size=1)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", default="out", help="output directory (default: ./out)")
    p.add_argument("--cg-tol", type=float, default=1e-9)
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="topoms", description="Mumford-Shah segmentation by topological ball insertion.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("topo", help="greedy ball insertion")
    p.add_argument("input", help="8-bit PGM image")
    p.add_argument("--alpha", type=float, default=20.0)
    p.add_argument("--beta", type=float, default=200.0)
    p.add_argument("--epsilon", type=float, default=0.05)
    p.add_argument("--kappa", type=float, default=None, help="default: min(0.01, epsilon)")
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--separation", type=float, default=None, help="default: epsilon")
    p.add_argument("--max-iters", type=int, default=500)
    _add_common(p)

    p = sub.add_parser("at", help="Ambrosio-Tortorelli baseline")
    p.add_argument("input", help="8-bit PGM image")
    p.add_argument("--alpha", type=float, default=20.0)
    p.add_argument("--beta", type=float, default=200.0)
    p.add_argument("--eps-at", type=float, default=0.05)
    p.add_argument("--threshold", type=float, default=0.8)
    p.add_argument("--max-iters", type=int, default=30, help="number of alternating sweeps")
    _add_common(p)

    p = sub.add_parser("validate", help="run the oracle suite on synthetic images")
    _add_common(p)
    return parser


def _write_config(out: Path, command: str, cfg) -> None:
    lines = [f"command={command}"] + [f"{k}={v!r}" for k, v in asdict(cfg).items()]
    (out / "config.txt").write_text("\n".join(lines) + "\n")


def _cmd_topo(args, out: Path) -> int:
    cfg = TopoConfig(alpha=args.alpha, beta=args.beta, epsilon=args.epsilon, kappa=args.kappa,
                     batch_size=args.batch_size, separation=args.separation,
                     max_iters=args.max_iters, cg_tol=args.cg_tol)
    grid = load_pgm(args.input)
    cfg.check_grid(grid)
    _write_config(out, "topo", cfg)
    res = run(grid, cfg)
    save_pgm(res.u, out / "u.pgm")
    write_pgm_array(to_pixels(res.v.values), out / "v.pgm")
    write_cover_csv(res.cover, out / "edges.csv")
    res.trace.write_csv(out / "trace.csv")
    log.info("stopped by %s after %d iterations, %d balls", res.stopped_by, len(res.trace) - 1, len(res.cover))
    return EXIT_OK


def _cmd_at(args, out: Path) -> int:
    cfg = ATConfig(alpha=args.alpha, beta=args.beta, eps_at=args.eps_at,
                   outer_iters=args.max_iters, cg_tol=args.cg_tol, threshold=args.threshold)
    grid = load_pgm(args.input)
    _write_config(out, "at", cfg)
    u, v, trace = run_at(grid, cfg)
    save_pgm(u, out / "u.pgm")
    save_pgm(v, out / "v.pgm")
    edges = threshold_edges(v, cfg.threshold).values
    write_pgm_array((255 * edges).astype(np.uint8), out / "edges.pgm")
    trace.write_csv(out / "trace.csv")
    return EXIT_OK


def validation_suite(out: Path) -> list[tuple[str, bool, str]]:
    """Run every oracle check; returns ``(name, passed, detail)`` triples."""
    checks = []

    rows = manufactured_convergence(CONVERGENCE_LEVELS, CONVERGENCE_ALPHA)
    write_convergence_csv(rows, out / "convergence.csv")
    ratios = [a[1] / b[1] for a, b in zip(rows, rows[1:])]
    checks.append(("fem_convergence", all(3.5 <= r <= 4.5 for r in ratios),
                   "ratios " + ", ".join(f"{r:.3f}" for r in ratios)))

    cfg = TopoConfig(epsilon=PROBE_EPSILONS[0], **PROBE_CFG)
    probe = expansion_probe(synthetic.gaussian_bump(PROBE_GRID), (0.5, 0.5), PROBE_EPSILONS, cfg)
    probe.write_csv(out / "probe.csv")
    errs = probe.rel_errors
    ok = (not probe.degenerate and all(b < a for a, b in zip(errs, errs[1:])) and errs[-1] < 0.5)
    checks.append(("expansion_probe", ok, "rel_errors " + ", ".join(f"{e:.4f}" for e in errs)))

    res = run(synthetic.step_image(128), TopoConfig(**DESCENT_CFG))
    res.trace.write_csv(out / "descent_trace.csv")
    ok = descent_audit(res.trace) and len(res.trace) > 1
    checks.append(("descent_audit", ok, f"{len(res.cover)} balls, stopped by {res.stopped_by}"))

    const = synthetic.constant_image(64)
    res = run(const, TopoConfig(alpha=20.0, beta=200.0, epsilon=0.05))
    ok = (res.stopped_by == "threshold" and len(res.cover) == 0
          and float(np.max(np.abs(res.u.values - const.f))) <= 1e-9)
    checks.append(("stop_on_constant", ok, f"stopped by {res.stopped_by}"))
    return checks


def _cmd_validate(args, out: Path) -> int:
    (out / "config.txt").write_text(
        "command=validate\n"
        f"convergence_levels={CONVERGENCE_LEVELS!r}\nconvergence_alpha={CONVERGENCE_ALPHA!r}\n"
        f"probe_grid={PROBE_GRID!r}\nprobe_epsilons={PROBE_EPSILONS!r}\nprobe_cfg={PROBE_CFG!r}\n"
        f"descent_cfg={DESCENT_CFG!r}\n"
    )
    checks = validation_suite(out)
    lines = [f"{'PASS' if ok else 'FAIL'} {name}: {detail}" for name, ok, detail in checks]
    (out / "validate.txt").write_text("\n".join(lines) + "\n")
    print("\n".join(lines))
    return EXIT_OK if all(ok for _, ok, _ in checks) else 1


def _thread_limit():
    raw = os.environ.get("TOPOMS_THREADS")
    if raw is None:
        return None
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"TOPOMS_THREADS must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError(f"TOPOMS_THREADS must be a positive integer, got {raw!r}")
    from threadpoolctl import threadpool_limits
    return threadpool_limits(limits=n)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    out = Path(args.out)
    commands = {"topo": _cmd_topo, "at": _cmd_at, "validate": _cmd_validate}
    try:
        limiter = _thread_limit()
        out.mkdir(parents=True, exist_ok=True)
        t0 = time.perf_counter()
        try:
            code = commands[args.command](args, out)
        finally:
            if limiter is not None:
                limiter.unregister()
        log.info("%s finished in %.2fs", args.command, time.perf_counter() - t0)
        return code
    except SolverError as err:
        print(f"topoms: solver failure: {err}", file=sys.stderr)
        return EXIT_SOLVER
    except (ValueError, OSError) as err:
        print(f"topoms: error: {err}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
