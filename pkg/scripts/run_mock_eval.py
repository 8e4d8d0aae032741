#!/usr/bin/env python3
"""Offline benchmark harness: run every inference strategy over a synthetic
dataset with a scripted backend and print a metrics table.

The backend answers with the gold label, optionally flipped with probability
--noise so the metrics are not trivially perfect.

Usage:
    python scripts/run_mock_eval.py --n 200 --noise 0.1 --seed 0
"""

import argparse
import random
import sys

from prodmap.backends import OracleBackend
from prodmap.dataset import SynthesisSpec, synthesize_dataset
from prodmap.parsing import parse_bare_label, parse_structured_output, render_structured_output
from prodmap.pipelines import STRATEGIES, run_eval


class NoisyOracle:
    """Oracle backend whose final label is flipped with a fixed probability."""

    def __init__(self, data, noise: float, seed: int):
        self.inner = OracleBackend(data)
        self.noise = noise
        self.rng = random.Random(seed)

    def complete(self, prompt, *, temperature=None):
        answer = self.inner.complete(prompt, temperature=temperature)
        if self.rng.random() >= self.noise:
            return answer
        parsed = parse_structured_output(answer)
        if parsed.format_ok:
            return render_structured_output(parsed.reasoning, 1 - parsed.label)
        return str(1 - parse_bare_label(answer))


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, default=200)
    parser.add_argument("--pos-frac", type=float, default=0.706)
    parser.add_argument("--brands", type=int, default=20)
    parser.add_argument("--noise", type=float, default=0.1,
                        help="probability of flipping the backend's answer")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    data = synthesize_dataset(SynthesisSpec(
        n=args.n, positive_fraction=args.pos_frac, brand_count=args.brands, seed=args.seed))

    header = f"{'strategy':<14}{'acc':>8}{'prec':>8}{'rec':>8}{'f1':>8}{'fail':>6}"
    print(header)
    print("-" * len(header))
    for strategy in STRATEGIES:
        backend = NoisyOracle(data, noise=args.noise, seed=args.seed + 1)
        run = run_eval(data, strategy, backend)
        r = run.report
        print(f"{strategy:<14}{r.accuracy:>8.4f}{r.precision:>8.4f}"
              f"{r.recall:>8.4f}{r.f1:>8.4f}{len(run.failures):>6}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
