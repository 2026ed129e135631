"""Command line front end.

Subcommands map one-to-one onto the experiment runners, plus two
utilities (`matrix` prints a transition matrix, `topology-export` dumps
adjacency lists).  Experiment parameters come from a key=value config
file, from flags, or both; a flag always beats the file.

Exit codes: 0 success, 2 usage error, 3 config file unreadable or
malformed, 4 parameter values invalid.
"""

from __future__ import annotations

import argparse
import random
import sys
from collections.abc import Iterable, Sequence
from pathlib import Path

from .experiment import (
    ExperimentConfig,
    P_DROP_MODES,
    run_comparison_experiment,
    run_dissemination_experiment,
    run_model_experiment,
    run_occupancy_experiment,
)
from .metrics import RunEnsemble
from .pairwise import GossipParams, PairState, ProtocolVariant, build_matrix
from .protocols import Protocol
from .topology import (
    TopologyKind,
    build_clique,
    build_grid,
    build_random_outdegree,
    export_adjacency,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_PARAMS = 4

ENSEMBLE_HEADER = (
    "round",
    "mean_replication",
    "std_replication",
    "mean_coverage",
    "std_coverage",
    "successful_runs",
)
COMPARISON_HEADER = ("round", "protocol_mean", "protocol_std", "model_mean", "model_std")
DIFF_HEADER = (
    "round",
    "abs_diff_replication",
    "protocol_std_replication",
    "abs_diff_coverage",
    "protocol_std_coverage",
)


class ConfigError(Exception):
    """Config file missing, unreadable, or structurally malformed."""


# key -> converter for config file values; also the set of legal keys
_PARSERS = {
    "topology": str,
    "protocol": str,
    "p_drop_mode": str,
    "grid_side": int,
    "outdegree": int,
    "n": int,
    "c": int,
    "s": int,
    "startup_rounds": int,
    "measure_rounds": int,
    "runs": int,
    "seed": int,
    "p_loss": float,
    "p_inx": float,
}


def load_config_file(path: str | Path) -> dict[str, str]:
    """Parse a key=value file ('#' starts a comment).  Unknown, duplicate,
    or malformed keys are structural errors, not value errors."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not sep or not key or not value:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {raw.strip()!r}")
        if key not in _PARSERS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
        values[key] = value
    return values


def build_config(ns: argparse.Namespace) -> ExperimentConfig:
    """Merge config file and flags (flags win) into an ExperimentConfig."""
    merged: dict[str, object] = {}
    if ns.config:
        for key, raw in load_config_file(ns.config).items():
            try:
                merged[key] = _PARSERS[key](raw)
            except ValueError as exc:
                raise ValueError(f"config key {key}: cannot parse {raw!r}") from exc
    for key in _PARSERS:
        flag = getattr(ns, key, None)
        if flag is not None:
            merged[key] = flag
    if "seed" not in merged:
        raise ValueError("seed is required (pass --seed or set seed= in the config)")
    params = GossipParams(
        n=merged.get("n", 500),
        c=merged.get("c", 100),
        s=merged.get("s", 50),
    )
    return ExperimentConfig(
        params=params,
        seed=merged["seed"],
        protocol=Protocol(merged.get("protocol", "shuffle")),
        topology=TopologyKind(merged.get("topology", "clique")),
        grid_side=merged.get("grid_side"),
        outdegree=merged.get("outdegree", 4),
        p_loss=merged.get("p_loss", 0.0),
        startup_rounds=merged.get("startup_rounds", 1000),
        measure_rounds=merged.get("measure_rounds", 1000),
        runs=merged.get("runs", 100),
        p_drop_mode=merged.get("p_drop_mode", "analytic"),
        p_inx=merged.get("p_inx"),
    )


def _fmt(value: float) -> str:
    return format(float(value), ".6g")


def _cell(value: object) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, int):
        return str(value)
    return _fmt(value)


def write_csv(
    path: Path, header: Sequence[str], rows: Iterable[Sequence[object]]
) -> None:
    """Plain CSV, LF line endings, floats at six significant digits."""
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_cell(cell) for cell in row))
    path.write_text("\n".join(lines) + "\n", newline="")


def _ensemble_rows(ens: RunEnsemble) -> Iterable[Sequence[object]]:
    for r in range(ens.rounds):
        yield (
            r,
            ens.mean_replication[r],
            ens.std_replication[r],
            ens.mean_coverage[r],
            ens.std_coverage[r],
            ens.successful_runs,
        )


def _out_dir(ns: argparse.Namespace) -> Path | None:
    if not ns.out:
        return None
    out = Path(ns.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_occupancy(ns: argparse.Namespace) -> int:
    config = build_config(ns)
    report = run_occupancy_experiment(config)
    out = _out_dir(ns)
    if out is not None:
        write_csv(
            out / "occupancy.csv",
            ("round", "p11", "p10", "p01"),
            ((i + 1, p.p11, p.p10, p.p01) for i, p in enumerate(report.per_round)),
        )
    pooled = report.pooled
    flag = " (low confidence)" if pooled.low_confidence else ""
    print(
        f"pooled p11={_fmt(pooled.p11)} p10={_fmt(pooled.p10)} "
        f"p01={_fmt(pooled.p01)} observations={pooled.observations}{flag}"
    )
    print(f"P_inx={_fmt(report.p_inx)} P_drop={_fmt(report.p_drop)}")
    return EXIT_OK


def _print_ensemble_summary(ens: RunEnsemble) -> None:
    print(
        f"runs={ens.total_runs} successful={ens.successful_runs} "
        f"extinct_fraction={_fmt(ens.extinction_fraction)}"
    )
    if ens.rounds:
        print(
            f"final mean replication={_fmt(ens.mean_replication[-1])} "
            f"coverage={_fmt(ens.mean_coverage[-1])}"
        )


def cmd_disseminate(ns: argparse.Namespace) -> int:
    config = build_config(ns)
    report = run_dissemination_experiment(config, jobs=ns.jobs)
    ens = report.ensemble
    out = _out_dir(ns)
    if out is not None and ens.rounds:
        write_csv(out / "dissemination.csv", ENSEMBLE_HEADER, _ensemble_rows(ens))
    _print_ensemble_summary(ens)
    return EXIT_OK


def cmd_model(ns: argparse.Namespace) -> int:
    config = build_config(ns)
    report = run_model_experiment(config, jobs=ns.jobs)
    ens = report.ensemble
    out = _out_dir(ns)
    if out is not None and ens.rounds:
        write_csv(out / "model.csv", ENSEMBLE_HEADER, _ensemble_rows(ens))
    print(
        f"variant={report.variant.value} p_select={_fmt(report.p_select)} "
        f"p_drop={_fmt(report.p_drop)}"
    )
    _print_ensemble_summary(ens)
    return EXIT_OK


def cmd_compare(ns: argparse.Namespace) -> int:
    config = build_config(ns)
    report = run_comparison_experiment(config, jobs=ns.jobs)
    out = _out_dir(ns)
    proto, model, diff = report.protocol_ensemble, report.model_ensemble, report.diff
    write_csv(
        out / "replication.csv",
        COMPARISON_HEADER,
        (
            (
                r,
                proto.mean_replication[r],
                proto.std_replication[r],
                model.mean_replication[r],
                model.std_replication[r],
            )
            for r in range(proto.rounds)
        ),
    )
    write_csv(
        out / "coverage.csv",
        COMPARISON_HEADER,
        (
            (
                r,
                proto.mean_coverage[r],
                proto.std_coverage[r],
                model.mean_coverage[r],
                model.std_coverage[r],
            )
            for r in range(proto.rounds)
        ),
    )
    write_csv(
        out / "diff.csv",
        DIFF_HEADER,
        (
            (
                r,
                diff.abs_diff_replication[r],
                diff.protocol_std_replication[r],
                diff.abs_diff_coverage[r],
                diff.protocol_std_coverage[r],
            )
            for r in range(diff.rounds)
        ),
    )
    # agreement score: share of rounds past the transient where the gap
    # sits inside one protocol-side std
    tail = slice(11, None)
    rep_ok = diff.abs_diff_replication[tail] <= diff.protocol_std_replication[tail]
    cov_ok = diff.abs_diff_coverage[tail] <= diff.protocol_std_coverage[tail]
    if report.p_inx_used is not None:
        print(f"measured P_inx={_fmt(report.p_inx_used)}")
    print(f"P_drop={_fmt(report.p_drop_used)}")
    if len(rep_ok):
        print(
            f"within-std fraction after round 10: "
            f"replication={_fmt(rep_ok.mean())} coverage={_fmt(cov_ok.mean())}"
        )
    return EXIT_OK


def cmd_matrix(ns: argparse.Namespace) -> int:
    variant = ProtocolVariant(ns.protocol)
    matrix = build_matrix(variant, ns.p_select, ns.p_drop, p_loss=ns.p_loss)
    labels = ("00", "01", "10", "11")
    print(
        f"variant={variant.value} p_select={_fmt(ns.p_select)} "
        f"p_drop={_fmt(ns.p_drop)} p_loss={_fmt(ns.p_loss)}"
    )
    print("pre\\post" + "".join(f"{label:>11}" for label in labels) + f"{'row sum':>11}")
    for pre in PairState:
        row = matrix.row(pre)
        cells = "".join(f"{v:>11.6f}" for v in row)
        print(f"{labels[pre]:>8}{cells}{row.sum():>11.6f}")
    return EXIT_OK


def cmd_topology_export(ns: argparse.Namespace) -> int:
    kind = TopologyKind(ns.topology)
    if kind is TopologyKind.CLIQUE:
        if ns.nodes is None:
            raise ValueError("clique export needs --nodes")
        topo = build_clique(ns.nodes)
    elif kind is TopologyKind.GRID:
        if ns.grid_side is None:
            raise ValueError("grid export needs --grid-side")
        topo = build_grid(ns.grid_side)
    else:
        if ns.nodes is None:
            raise ValueError("outdegree export needs --nodes")
        if ns.seed is None:
            raise ValueError("outdegree export needs --seed")
        topo = build_random_outdegree(ns.nodes, ns.outdegree, random.Random(ns.seed))
    text = "\n".join(export_adjacency(topo)) + "\n"
    if ns.out:
        Path(ns.out).write_text(text, newline="")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _positive_int(raw: str) -> int:
    value = int(raw)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def _experiment_flags(sub: argparse.ArgumentParser, jobs: bool) -> None:
    sub.add_argument("--config", help="key=value config file")
    sub.add_argument("--topology", choices=[k.value for k in TopologyKind])
    sub.add_argument("--grid-side", type=int, dest="grid_side")
    sub.add_argument("--outdegree", type=int)
    sub.add_argument("--protocol", choices=[p.value for p in Protocol])
    sub.add_argument("--n", type=int, help="distinct items")
    sub.add_argument("--c", type=int, help="cache capacity")
    sub.add_argument("--s", type=int, help="exchange size")
    sub.add_argument("--p-loss", type=float, dest="p_loss")
    sub.add_argument("--startup-rounds", type=int, dest="startup_rounds")
    sub.add_argument("--measure-rounds", type=int, dest="measure_rounds")
    sub.add_argument("--runs", type=int)
    sub.add_argument("--seed", type=int)
    sub.add_argument("--p-drop-mode", choices=list(P_DROP_MODES), dest="p_drop_mode")
    sub.add_argument("--p-inx", type=float, dest="p_inx")
    if jobs:
        sub.add_argument("--jobs", type=_positive_int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gossiplab",
        description="Gossip cache simulators and their pairwise interaction model.",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    occ = subs.add_parser("occupancy", help="measure pair occupancy under shuffle")
    _experiment_flags(occ, jobs=False)
    occ.add_argument("--out", help="directory for occupancy.csv")
    occ.set_defaults(handler=cmd_occupancy)

    dis = subs.add_parser("disseminate", help="track one inserted item over runs")
    _experiment_flags(dis, jobs=True)
    dis.add_argument("--out", help="directory for dissemination.csv")
    dis.set_defaults(handler=cmd_disseminate)

    mod = subs.add_parser("model", help="run the pairwise interaction model")
    _experiment_flags(mod, jobs=True)
    mod.add_argument("--out", help="directory for model.csv")
    mod.set_defaults(handler=cmd_model)

    cmp_ = subs.add_parser("compare", help="protocol ensemble vs model ensemble")
    _experiment_flags(cmp_, jobs=True)
    cmp_.add_argument(
        "--out",
        required=True,
        help="directory for replication.csv, coverage.csv, diff.csv",
    )
    cmp_.set_defaults(handler=cmd_compare)

    mat = subs.add_parser("matrix", help="print a 4x4 transition matrix")
    mat.add_argument(
        "--protocol",
        required=True,
        choices=[v.value for v in ProtocolVariant],
    )
    mat.add_argument("--p-select", type=float, required=True, dest="p_select")
    mat.add_argument("--p-drop", type=float, required=True, dest="p_drop")
    mat.add_argument("--p-loss", type=float, default=0.0, dest="p_loss")
    mat.set_defaults(handler=cmd_matrix)

    topo = subs.add_parser("topology-export", help="print adjacency lists")
    topo.add_argument(
        "--topology", required=True, choices=[k.value for k in TopologyKind]
    )
    topo.add_argument("--nodes", type=int)
    topo.add_argument("--grid-side", type=int, dest="grid_side")
    topo.add_argument("--outdegree", type=int, default=4)
    topo.add_argument("--seed", type=int)
    topo.add_argument("--out", help="write to this file instead of stdout")
    topo.set_defaults(handler=cmd_topology_export)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return ns.handler(ns)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"invalid parameters: {exc}", file=sys.stderr)
        return EXIT_PARAMS


def entry() -> None:
    sys.exit(main())
