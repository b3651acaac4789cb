"""Command-line front end: ``dsc-rd <command> --config <path> [options]``.

Exit codes: 0 success, 1 model or input error, 2 infeasible distortion
target, 3 Monte Carlo mismatch beyond five standard errors.
"""

from __future__ import annotations

import argparse
import logging
import sys
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import report
from .coding_scheme import design_scheme
from .config import load_config
from .errors import DscError, ModelError, MonteCarloMismatch
from .gauss_core import LOEWNER_TOL
from .mc_oracle import SimConfig, SimInstance, compare_closed_forms, export_batch, simulate
from .network import evaluate, sweep, walk
from .rate_distortion import MATCH_TOL, Validity, rd_rate

log = logging.getLogger("dsc_rd")

COMMANDS = ("validate", "rate", "sweep", "simulate", "compare")
DEFAULT_ALPHAS = (0.25, 0.5, 0.75, 1.0)
MIN_SIM_SAMPLES = 100


@dataclass(frozen=True)
class RunConfig:
    command: str
    config_path: Path
    output_path: Path | None = None
    format: str = "json"
    seed: int = 42
    sample_count: int = 1_000_000
    alpha_grid: tuple[float, ...] = DEFAULT_ALPHAS
    node: str | None = None
    loewner_tol: float = LOEWNER_TOL
    match_tol: float = MATCH_TOL
    workers: int = 1
    export_dir: Path | None = None

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ModelError(f"unknown command {self.command!r}")
        if self.format not in ("json", "csv"):
            raise ModelError(f"unknown format {self.format!r}")
        if self.command == "simulate" and self.sample_count < MIN_SIM_SAMPLES:
            raise ModelError(f"--samples must be at least {MIN_SIM_SAMPLES}")
        if not self.config_path.is_file():
            raise ModelError(f"config file {self.config_path} does not exist")
        if self.output_path is not None and not self.output_path.parent.exists():
            raise ModelError(f"output directory {self.output_path.parent} does not exist")


def _alphas(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad alpha list {text!r}") from None


class _Parser(argparse.ArgumentParser):
    # usage errors are input errors; exit status 2 is reserved for infeasible targets
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(
        prog="dsc-rd",
        description="Rate-distortion evaluation for multi-hop Gaussian source coding over a "
                    "sensor-network tree.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, type=Path, help="network configuration (JSON)")
    p.add_argument("--out", type=Path, help="report path (default: stdout)")
    p.add_argument("--format", choices=("json", "csv"), default=None,
                   help="report format (default json; csv for sweep)")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--samples", type=int, default=1_000_000)
    p.add_argument("--alphas", type=_alphas, default=DEFAULT_ALPHAS,
                   help="comma-separated alpha grid for sweep")
    p.add_argument("--node", help="node to sweep (default: every node)")
    p.add_argument("--loewner-tol", type=float, default=LOEWNER_TOL)
    p.add_argument("--match-tol", type=float, default=MATCH_TOL,
                   help="agreement tolerance between independent computations")
    p.add_argument("--workers", type=int, default=1, help="threads for simulate")
    p.add_argument("--export-samples", type=Path, default=None,
                   help="directory for binary sample dumps (simulate)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _summary(net) -> str:
    lines = [f"source dimension: {net.source_cov.shape[0]}",
             f"base measurement: {'yes' if net.base is not None else 'no'}",
             f"nodes ({len(net.nodes)}), leaves first:"]
    for nid in net.order:
        n = net.node(nid)
        target = f"alpha={n.alpha!r}" if n.alpha is not None else "explicit D"
        lines.append(f"  {nid} -> {n.parent}  [{target}]")
    return "\n".join(lines) + "\n"


def _node_seed(seed: int, node_id: str) -> int:
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(zlib.crc32(node_id.encode()),))
    return int(ss.generate_state(1, np.uint64)[0])


def _simulate(cfg: RunConfig, net):
    per_node = []
    for st in walk(net, cfg.loewner_tol):
        scheme = None
        rate = None
        if st.validity is Validity.STRICT:
            scheme = design_scheme(st.ctx, st.D, tol=cfg.loewner_tol, match_tol=cfg.match_tol)
            rate = rd_rate(st.ctx, st.D, cfg.loewner_tol)
        inst = SimInstance(net.source_cov, (st.node.measurement().relabel("y"),), st.channels,
                           st.ctx.side, scheme)
        seed = _node_seed(cfg.seed, st.node.id)
        batch = simulate(SimConfig(seed, cfg.sample_count, inst), workers=cfg.workers)
        if cfg.export_dir is not None:
            cfg.export_dir.mkdir(parents=True, exist_ok=True)
            export_batch(batch, cfg.export_dir / f"{st.node.id}.bin")
        comps = compare_closed_forms(batch, st.ctx, scheme, rate)
        for c in comps:
            log.info("%s %s z=%.2f %s", st.node.id, c.quantity, c.z, c.status)
        per_node.append((st.node.id, seed, comps))
    return per_node


def run(cfg: RunConfig) -> int:
    net = load_config(cfg.config_path)
    fail = False
    if cfg.command == "validate":
        text = _summary(net)
    elif cfg.command in ("rate", "compare"):
        result = evaluate(net, tol=cfg.loewner_tol, match_tol=cfg.match_tol,
                          with_baseline=cfg.command == "compare")
        text = (report.rate_csv(result, cfg.command) if cfg.format == "csv"
                else report.rate_json(result, cfg.command))
    elif cfg.command == "sweep":
        nodes = [cfg.node] if cfg.node else list(net.order)
        rows = [row for nid in nodes
                for row in sweep(net, nid, cfg.alpha_grid, cfg.loewner_tol)]
        text = report.sweep_json(rows) if cfg.format == "json" else report.sweep_csv(rows)
    else:
        per_node = _simulate(cfg, net)
        text = (report.simulate_csv(per_node) if cfg.format == "csv"
                else report.simulate_json(cfg.seed, cfg.sample_count, per_node))
        fail = any(c.status == "fail" for _, _, cs in per_node for c in cs)

    if cfg.output_path is None:
        sys.stdout.write(text)
    else:
        cfg.output_path.write_text(text, encoding="utf-8")
    if fail:
        raise MonteCarloMismatch("Monte Carlo estimate beyond 5 standard errors of closed form")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    fmt = args.format or ("csv" if args.command == "sweep" else "json")
    try:
        cfg = RunConfig(
            command=args.command, config_path=args.config, output_path=args.out, format=fmt,
            seed=args.seed, sample_count=args.samples, alpha_grid=args.alphas, node=args.node,
            loewner_tol=args.loewner_tol, match_tol=args.match_tol, workers=args.workers,
            export_dir=args.export_samples)
        return run(cfg)
    except DscError as exc:
        print(f"dsc-rd: error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
