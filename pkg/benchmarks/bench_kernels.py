"""
Time the numba kernels against their numpy fallbacks.

    python3 benchmarks/bench_kernels.py [--docs 20000] [--vocab 5000] [--repeat 20]

Numba compile time is excluded by one warm-up call per kernel.
"""

import argparse
import time

import numpy as np

from cqarank import Corpus, _accel, make_question


def build_corpus(n_docs, vocab, seed):
    rng = np.random.default_rng(seed)
    # Zipf-ish term distribution, questions of 4-20 tokens
    weights = 1.0 / np.arange(1, vocab + 1)
    weights /= weights.sum()
    words = np.array([f'w{i}' for i in range(vocab)])
    qs = []
    for i in range(n_docs):
        toks = words[rng.choice(vocab, size=int(rng.integers(4, 21)), p=weights)]
        qs.append(make_question(f'd{i:06d}', ' '.join(toks)))
    return Corpus(qs)


def timeit(fn, args, repeat):
    fn(*args)
    best = float('inf')
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.strip().splitlines()[0])
    ap.add_argument('--docs', type=int, default=20000)
    ap.add_argument('--vocab', type=int, default=5000)
    ap.add_argument('--query-terms', type=int, default=30)
    ap.add_argument('--repeat', type=int, default=20)
    ap.add_argument('--seed', type=int, default=0)
    args = ap.parse_args(argv)

    if not _accel._HAVE_NUMBA:
        raise SystemExit('numba is not installed; nothing to compare')

    c = build_corpus(args.docs, args.vocab, args.seed)
    rng = np.random.default_rng(args.seed + 1)
    tids = np.sort(rng.choice(len(c.vocab), size=min(args.query_terms, len(c.vocab)), replace=False))
    w = rng.random(len(tids))
    w /= w.sum()
    counts = rng.integers(1, 20, 2000).astype(np.float64)
    pc = rng.random(2000)
    pc /= pc.sum()

    cases = [
        ('kl_accumulate', _accel.kl_accumulate_jit, _accel.kl_accumulate_np,
         (c.indptr, c.post_docs, c.post_counts, tids, w, c.coll_prob[tids], 1000.0, c.doc_len)),
        ('bm25_accumulate', _accel.bm25_accumulate_jit, _accel.bm25_accumulate_np,
         (c.indptr, c.post_docs, c.post_counts, tids, w, 1.2, 0.75, c.doc_len, float(c.stats.avg_len))),
        ('smm_em', _accel.smm_em_jit, _accel.smm_em_np, (counts, pc, 0.5, 50)),
    ]
    print(f'corpus: {len(c.ids)} questions, {len(c.vocab)} terms; best of {args.repeat}')
    print(f'{"kernel":<18}{"numba ms":>10}{"numpy ms":>10}{"speedup":>9}')
    for name, jit, npf, a in cases:
        tj, tn = timeit(jit, a, args.repeat), timeit(npf, a, args.repeat)
        print(f'{name:<18}{tj * 1e3:>10.3f}{tn * 1e3:>10.3f}{tn / tj:>8.1f}x')


if __name__ == '__main__':
    main()
