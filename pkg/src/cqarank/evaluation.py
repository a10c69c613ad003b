"""
Run evaluation: average precision, MAP, dev/test splits and paired t-tests.
"""

import logging
import math
import random
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np
from scipy.special import betainc

from .errors import DataError

log = logging.getLogger(__name__)


class Judgments:
    """Binary relevance labels keyed by ``(query id, question id)``."""

    def __init__(self, rels):
        for key, label in rels.items():
            if label not in (0, 1):
                raise DataError(f'non-binary relevance label {label!r} for {key}')
        self.rels = dict(rels)
        self._relevant = defaultdict(set)
        self._queries = set()
        for (q, d), label in self.rels.items():
            self._queries.add(q)
            if label:
                self._relevant[q].add(d)

    @property
    def queries(self):
        return sorted(self._queries)

    def relevant_for(self, query_id):
        return self._relevant.get(query_id, set())

    def subset(self, query_ids):
        keep = set(query_ids)
        return Judgments({k: v for k, v in self.rels.items() if k[0] in keep})

    def write(self, path):
        with open(path, 'w', encoding='utf-8', newline='\n') as f:
            for (q, d), label in sorted(self.rels.items()):
                f.write(f'{q} 0 {d} {label}\n')


def read_qrels(path):
    """Parse a TREC qrels file (``"<query> 0 <question> <0|1>"``)."""
    path = Path(path)
    if not path.exists():
        raise DataError(f'qrels file not found: {path}')
    rels = {}
    with open(path, encoding='utf-8') as f:
        for lineno, line in enumerate(f, 1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 4:
                raise DataError(f'{path}:{lineno}: expected 4 columns, got {len(parts)}')
            q, _, d, label = parts
            if label not in ('0', '1'):
                raise DataError(f'{path}:{lineno}: relevance must be 0 or 1, got {label!r}')
            if (q, d) in rels:
                raise DataError(f'{path}:{lineno}: duplicate judgment for ({q}, {d})')
            rels[q, d] = int(label)
    return Judgments(rels)


def average_precision(ranked, judgments):
    """
    AP of one ranked list; unjudged questions count as non-relevant.

    Returns ``None`` when the query has no relevant judgments, so callers can
    exclude it instead of scoring it zero.
    """
    relevant = judgments.relevant_for(ranked.query_id)
    if not relevant:
        return None
    hits = 0
    total = 0.0
    for i, (qid, _) in enumerate(ranked.entries, 1):
        if qid in relevant:
            hits += 1
            total += hits / i
    return total / len(relevant)


@dataclass
class EvalReport:
    per_query_ap: dict
    map: float
    n_queries: int
    excluded: list = field(default_factory=list)


def mean_average_precision(runs, judgments):
    """
    MAP over the run's queries that have at least one relevant judgment.
    ``runs`` is an iterable of :class:`RankedList` or a ``{query: RankedList}`` dict.
    """
    if isinstance(runs, dict):
        runs = runs.values()
    per_query = {}
    excluded = []
    for rl in runs:
        ap = average_precision(rl, judgments)
        if ap is None:
            excluded.append(rl.query_id)
        else:
            per_query[rl.query_id] = ap
    if not per_query:
        raise DataError('no evaluable queries: none of the run queries has a relevant judgment')
    per_query = dict(sorted(per_query.items()))
    return EvalReport(per_query, math.fsum(per_query.values()) / len(per_query), len(per_query),
                      sorted(excluded))


def split_dev_test(query_ids, seed=0):
    """Seeded shuffle, then first half (rounded up) dev and the rest test."""
    ids = list(query_ids)
    if len(ids) < 2:
        raise ValueError('need at least two queries to split')
    random.Random(seed).shuffle(ids)
    half = (len(ids) + 1) // 2
    return ids[:half], ids[half:]


class TTestResult(NamedTuple):
    t: float
    p: float
    significant: bool


def paired_t_test(ap_a, ap_b, alpha=0.05):
    """
    Two-sided paired t-test on aligned per-query scores.

    Zero variance of the differences gives ``t = +-inf, p = 0`` for a nonzero
    mean difference and ``t = 0, p = 1`` otherwise.
    """
    a = np.asarray(ap_a, dtype=np.float64)
    b = np.asarray(ap_b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f'paired samples must be equal-length vectors, got {a.shape} and {b.shape}')
    n = a.shape[0]
    if n < 2:
        raise ValueError('paired t-test needs at least two pairs')
    d = a - b
    mean = d.mean()
    sd = d.std(ddof=1)
    if sd == 0.0:
        if mean == 0.0:
            return TTestResult(0.0, 1.0, False)
        return TTestResult(math.copysign(math.inf, mean), 0.0, True)
    t = float(mean / (sd / math.sqrt(n)))
    df = n - 1
    # two-sided tail of Student's t via the regularised incomplete beta function
    p = float(betainc(df / 2.0, 0.5, df / (df + t * t)))
    return TTestResult(t, p, p < alpha)


def compare_runs(reports, alpha=0.05):
    """
    Pairwise paired t-tests between named :class:`EvalReport` objects over the
    union of their evaluated queries (a query missing from a run counts AP 0).
    Returns ``{(name_a, name_b): TTestResult}``.
    """
    names = list(reports)
    queries = sorted(set().union(*(r.per_query_ap for r in reports.values())))
    vectors = {n: [reports[n].per_query_ap.get(q, 0.0) for q in queries] for n in names}
    out = {}
    for i, na in enumerate(names):
        for nb in names[i + 1:]:
            out[na, nb] = paired_t_test(vectors[na], vectors[nb], alpha)
    return out


def format_report(reports, alpha=0.05):
    """Tab-separated per-query table followed by a summary block."""
    names = list(reports)
    queries = sorted(set().union(*(r.per_query_ap for r in reports.values())))
    lines = ['query\t' + '\t'.join(names)]
    for q in queries:
        cells = []
        for n in names:
            ap = reports[n].per_query_ap.get(q)
            cells.append('-' if ap is None else f'{ap:.6f}')
        lines.append(q + '\t' + '\t'.join(cells))
    lines.append('')
    lines.append('# summary')
    lines.append('run\tMAP\tn')
    for n in names:
        lines.append(f'{n}\t{reports[n].map:.6f}\t{reports[n].n_queries}')
    if len(names) > 1:
        tests = compare_runs(reports, alpha)
        lines.append('')
        lines.append(f'# paired t-test p-values (two-sided, * = p < {alpha})')
        lines.append('run\t' + '\t'.join(names))
        for na in names:
            cells = []
            for nb in names:
                if na == nb:
                    cells.append('-')
                    continue
                r = tests.get((na, nb)) or tests[nb, na]
                cells.append(f'{r.p:.4f}' + ('*' if r.significant else ''))
            lines.append(na + '\t' + '\t'.join(cells))
    return '\n'.join(lines) + '\n'
