#!/usr/bin/env python3
"""Script to run both efficiency studies and print their medians side by side."""
import argparse
import logging
import sys
from pathlib import Path

# Add project root to path
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from src.services.efficiency_study import EfficiencyStudy


def main():
    parser = argparse.ArgumentParser(description="ESS and PSRF convergence for sampler settings")
    parser.add_argument("--replicates", type=int, default=20)
    parser.add_argument("--K", type=int, default=5000)
    parser.add_argument("--n", type=int, default=500)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default="outputs/efficiency")
    args = parser.parse_args()
    logging.basicConfig(level=logging.INFO)

    for study in EfficiencyStudy.STUDIES:
        runner = EfficiencyStudy(
            n=args.n, replicates=args.replicates, K=args.K, seed=args.seed,
            output_dir=str(Path(args.out) / study),
        )
        frame = runner.run(study)
        print(f"\n== {study} ==")
        print(EfficiencyStudy.summarize(frame).to_string())


if __name__ == '__main__':
    main()
