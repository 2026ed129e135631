#!/usr/bin/env python3
"""Estimate how often a freshly inserted item dies out, protocol vs
model, for newscast push-pull (the variant with a real extinction risk
even on a lossless channel).

The pairwise model predicts extinction from a single copy as the
absorption probability of the 4x4 chain; at p_select=0.5 and
p_drop=2/7 roughly 72% of insertions should vanish.
"""

import argparse

from gossiplab.experiment import (
    ExperimentConfig,
    run_dissemination_experiment,
    run_model_experiment,
)
from gossiplab.pairwise import GossipParams
from gossiplab.protocols import Protocol


def parse_args():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, default=100)
    parser.add_argument("--c", type=int, default=20)
    parser.add_argument("--s", type=int, default=10)
    parser.add_argument("--startup-rounds", type=int, default=60)
    parser.add_argument("--measure-rounds", type=int, default=150)
    parser.add_argument("--runs", type=int, default=500)
    parser.add_argument("--seed", type=int, default=1)
    parser.add_argument("--jobs", type=int, default=1)
    parser.add_argument(
        "--skip-protocol", action="store_true",
        help="only run the model side (the protocol side is the slow one)",
    )
    return parser.parse_args()


def main():
    args = parse_args()
    params = GossipParams(n=args.n, c=args.c, s=args.s)

    model_cfg = ExperimentConfig(
        params=params,
        seed=args.seed,
        protocol=Protocol.NEWSCAST_PUSHPULL,
        startup_rounds=0,
        measure_rounds=args.measure_rounds,
        runs=args.runs,
    )
    model = run_model_experiment(model_cfg, jobs=args.jobs)
    print(
        f"model    (p_select={model.p_select:.3f}, p_drop={model.p_drop:.4f}): "
        f"extinction {model.ensemble.extinction_fraction:.3f} "
        f"over {model.ensemble.total_runs} runs"
    )

    if args.skip_protocol:
        return
    proto_cfg = ExperimentConfig(
        params=params,
        seed=args.seed,
        protocol=Protocol.NEWSCAST_PUSHPULL,
        startup_rounds=args.startup_rounds,
        measure_rounds=args.measure_rounds,
        runs=args.runs,
    )
    proto = run_dissemination_experiment(proto_cfg, jobs=args.jobs)
    print(
        f"protocol (cache level, {proto_cfg.node_count} nodes): "
        f"extinction {proto.ensemble.extinction_fraction:.3f} "
        f"over {proto.ensemble.total_runs} runs"
    )


if __name__ == "__main__":
    main()
