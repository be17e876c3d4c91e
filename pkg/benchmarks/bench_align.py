#!/usr/bin/env python3
"""Benchmark the compiled alignment kernel against the pure-Python one.

Times the two hot kernel entry points (full alignment with backtrace,
and cost-only distance as used by the shift search) on an identical
synthetic corpus, then reports per-kernel throughput and the speedup.

    python3 benchmarks/bench_align.py --lines 2000 --length 30
"""

import argparse
import random
import time
from array import array

from levqe import _dp

try:
    from levqe import _dp_cy
except ImportError:
    _dp_cy = None


def make_pairs(rng, lines, length, vocab_size, edit_rate):
    pairs = []
    for _ in range(lines):
        hyp = [rng.randrange(vocab_size) for _ in range(length)]
        ref = list(hyp)
        for i in range(len(ref)):
            if rng.random() < edit_rate:
                ref[i] = rng.randrange(vocab_size)
        if rng.random() < 0.5:
            ref.insert(rng.randrange(len(ref) + 1), rng.randrange(vocab_size))
        pairs.append((array("i", hyp), array("i", ref)))
    return pairs


def bench(fn, pairs, repeat):
    best = float("inf")
    for _ in range(repeat):
        start = time.perf_counter()
        for hyp, ref in pairs:
            fn(hyp, ref)
        best = min(best, time.perf_counter() - start)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--lines", type=int, default=2000)
    parser.add_argument("--length", type=int, default=30)
    parser.add_argument("--vocab", type=int, default=500)
    parser.add_argument("--edit-rate", type=float, default=0.2)
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    rng = random.Random(args.seed)
    pairs = make_pairs(rng, args.lines, args.length, args.vocab, args.edit_rate)

    kernels = [("python", _dp)]
    if _dp_cy is not None:
        kernels.append(("cython", _dp_cy))
    else:
        print("compiled kernel not built; benchmarking pure Python only")

    print(f"{args.lines} lines x {args.length} tokens, best of {args.repeat} runs\n")
    print(f"{'kernel':<8} {'entry point':<14} {'seconds':>9} {'lines/s':>12}")
    baselines = {}
    for name, module in kernels:
        for label, fn in (("align_ids", module.align_ids), ("lev_cost_ids", module.lev_cost_ids)):
            seconds = bench(fn, pairs, args.repeat)
            print(f"{name:<8} {label:<14} {seconds:>9.4f} {args.lines / seconds:>12.0f}")
            if name == "python":
                baselines[label] = seconds
            else:
                speedup = baselines[label] / seconds
                print(f"{'':<8} {'':<14} {'':>9} {'speedup x%.1f' % speedup:>12}")

    if _dp_cy is not None:
        sample = pairs[: min(200, len(pairs))]
        mismatches = sum(
            1 for hyp, ref in sample if _dp.align_ids(hyp, ref) != _dp_cy.align_ids(hyp, ref)
        )
        print(f"\nkernel agreement on {len(sample)} sampled pairs: "
              f"{'OK' if mismatches == 0 else f'{mismatches} MISMATCHES'}")


if __name__ == "__main__":
    main()
