#!/usr/bin/env python3
"""Sweep message loss over several topologies and tabulate the measured
interaction probability P_inx and the derived displacement probability
P_drop.

On a clique P_inx should sit at c/n regardless of loss; on sparse
overlays loss concentrates the surviving exchanges on well-connected
pairs, pushing P_inx up and P_drop down.
"""

import argparse

from gossiplab.experiment import ExperimentConfig, run_occupancy_experiment
from gossiplab.pairwise import GossipParams
from gossiplab.topology import TopologyKind


def parse_args():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, default=100)
    parser.add_argument("--c", type=int, default=20)
    parser.add_argument("--s", type=int, default=10)
    parser.add_argument("--grid-side", type=int, default=22)
    parser.add_argument("--outdegree", type=int, default=4)
    parser.add_argument("--startup-rounds", type=int, default=200)
    parser.add_argument("--measure-rounds", type=int, default=200)
    parser.add_argument("--seed", type=int, default=1)
    parser.add_argument(
        "--p-loss", type=float, nargs="+", default=[0.0, 0.1, 0.2, 0.3, 0.4]
    )
    return parser.parse_args()


def main():
    args = parse_args()
    params = GossipParams(n=args.n, c=args.c, s=args.s)
    topologies = (
        ("clique", dict(topology=TopologyKind.CLIQUE)),
        ("grid", dict(topology=TopologyKind.GRID, grid_side=args.grid_side)),
        (
            f"outdegree-{args.outdegree}",
            dict(topology=TopologyKind.RANDOM_OUTDEGREE, outdegree=args.outdegree),
        ),
    )
    print(f"{'topology':>14} {'p_loss':>7} {'P_inx':>8} {'P_drop':>8} {'p11':>8}")
    for name, topo_kw in topologies:
        for p_loss in args.p_loss:
            report = run_occupancy_experiment(
                ExperimentConfig(
                    params=params,
                    seed=args.seed,
                    p_loss=p_loss,
                    startup_rounds=args.startup_rounds,
                    measure_rounds=args.measure_rounds,
                    **topo_kw,
                )
            )
            print(
                f"{name:>14} {p_loss:>7.2f} {report.p_inx:>8.4f} "
                f"{report.p_drop:>8.4f} {report.pooled.p11:>8.4f}"
            )


if __name__ == "__main__":
    main()
