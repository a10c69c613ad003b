"""
Question collection: tokenisation, ingestion and collection statistics.

A :class:`Corpus` is built once and never mutated afterwards.  Questions are
stored in ascending id order, so the postings layout and every statistic are
independent of the order records arrived in.
"""

import json
import logging
import math
import re
import sys
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DataError

log = logging.getLogger(__name__)

_NON_ALNUM = re.compile(r'[\W_]+', re.UNICODE)

# Short English function-word list; only used when stopword removal is enabled.
STOPWORDS = frozenset('''
a about above after again against all am an and any are as at be because been
before being below between both but by can could did do does doing down during
each few for from further had has have having he her here hers herself him
himself his how i if in into is it its itself just me more most my myself no nor
not now of off on once only or other our ours ourselves out over own same she
should so some such than that the their theirs them themselves then there these
they this those through to too under until up very was we were what when where
which while who whom why will with would you your yours yourself yourselves
'''.split())

FIELDS = ('title', 'body', 'answers')


@dataclass(frozen=True)
class TokenizerConfig:
    stopwords: bool = False
    stem: bool = False


def _s_stem(term):
    # Harman's S-stemmer: plural stripping only.
    if len(term) > 3 and term.endswith('ies') and not term.endswith(('eies', 'aies')):
        return term[:-3] + 'y'
    if len(term) > 3 and term.endswith('es') and not term.endswith(('aes', 'ees', 'oes')):
        return term[:-1]
    if len(term) > 2 and term.endswith('s') and not term.endswith(('us', 'ss')):
        return term[:-1]
    return term


def tokenize(text, config=TokenizerConfig()):
    """
    Lowercase ``text``, replace every run of non-alphanumerics with a space and
    split on whitespace.  Stopword removal and plural stemming are off unless
    enabled in ``config``.
    """
    if not text:
        return []
    tokens = _NON_ALNUM.sub(' ', text.lower()).split()
    if config.stopwords:
        tokens = [t for t in tokens if t not in STOPWORDS]
    if config.stem:
        tokens = [_s_stem(t) for t in tokens]
    return tokens


@dataclass(frozen=True)
class Question:
    id: str
    title: str
    body: str = ''
    answers: tuple = ()
    tokens: tuple = ()

    def __len__(self):
        return len(self.tokens)

    def term_counts(self):
        return Counter(self.tokens)


def make_question(qid, title, body='', answers=(), fields=('title',), tokenizer=TokenizerConfig()):
    """Build a :class:`Question`, tokenising the selected ``fields`` in order."""
    tokens = []
    for f in fields:
        if f == 'title':
            tokens.extend(tokenize(title, tokenizer))
        elif f == 'body':
            tokens.extend(tokenize(body, tokenizer))
        elif f == 'answers':
            for a in answers:
                tokens.extend(tokenize(a, tokenizer))
        else:
            raise ValueError(f'unknown field {f!r}; expected one of {FIELDS}')
    return Question(str(qid), title, body or '', tuple(answers or ()), tuple(tokens))


@dataclass(frozen=True)
class CollectionStats:
    total_tokens: int
    doc_count: int
    collection_count: Mapping[str, int]
    doc_freq: Mapping[str, int]

    def p_c(self, term):
        """Collection language model p(term|C); 0 for unseen terms."""
        return self.collection_count.get(term, 0) / self.total_tokens

    @property
    def avg_len(self):
        return self.total_tokens / self.doc_count

    @property
    def vocabulary(self):
        return self.collection_count.keys()


def idf(term, stats):
    """Smoothed idf: ``ln((N + 1) / (df + 0.5))``; unseen terms use df = 0."""
    df = stats.doc_freq.get(term, 0)
    return math.log((stats.doc_count + 1) / (df + 0.5))


@dataclass
class IngestReport:
    accepted: int = 0
    skipped_empty: int = 0
    skipped_ids: list = field(default_factory=list)

    def summary(self):
        return f'ingest: accepted={self.accepted} skipped_empty={self.skipped_empty}'


class Corpus:
    """
    Immutable, indexed question collection.

    Besides the dict-based ``postings`` view (term -> [(question id, count)]),
    the corpus keeps a CSC-style array layout used by the scoring kernels:
    ``indptr[t]:indptr[t+1]`` slices ``post_docs`` / ``post_counts`` for term id
    ``t``.  Term ids follow sorted term order, document indices follow sorted id
    order.
    """

    def __init__(self, questions: Iterable[Question], report: IngestReport | None = None):
        qs = sorted(questions, key=lambda q: q.id)
        seen = set()
        for q in qs:
            if q.id in seen:
                raise DataError(f'duplicate question id {q.id!r}')
            if not q.tokens:
                raise DataError(f'question {q.id!r} has no tokens')
            seen.add(q.id)
        if not qs:
            raise DataError('corpus is empty')
        self.report = report if report is not None else IngestReport(accepted=len(qs))
        self.questions = {q.id: q for q in qs}
        self.ids = [q.id for q in qs]
        self.doc_index = {qid: i for i, qid in enumerate(self.ids)}

        per_doc = [q.term_counts() for q in qs]
        coll = Counter()
        df = Counter()
        for tc in per_doc:
            coll.update(tc)
            df.update(tc.keys())
        self.vocab = sorted(coll)
        self.term_index = {t: i for i, t in enumerate(self.vocab)}

        buckets = [[] for _ in self.vocab]
        for d, tc in enumerate(per_doc):
            for t, c in tc.items():
                buckets[self.term_index[t]].append((d, c))
        self.indptr = np.zeros(len(self.vocab) + 1, dtype=np.int64)
        self.indptr[1:] = np.cumsum([len(b) for b in buckets])
        self.post_docs = np.fromiter((d for b in buckets for d, _ in b), dtype=np.int64,
                                     count=int(self.indptr[-1]))
        self.post_counts = np.fromiter((c for b in buckets for _, c in b), dtype=np.float64,
                                       count=int(self.indptr[-1]))
        self.postings = {t: [(self.ids[d], c) for d, c in b] for t, b in zip(self.vocab, buckets)}

        self.doc_len = np.array([len(q.tokens) for q in qs], dtype=np.float64)
        total = int(self.doc_len.sum())
        self.stats = CollectionStats(total, len(qs), dict(coll), dict(df))
        self.coll_prob = np.array([coll[t] for t in self.vocab], dtype=np.float64) / total

    def __len__(self):
        return len(self.ids)

    def __contains__(self, qid):
        return qid in self.questions

    def __getitem__(self, qid):
        return self.questions[qid]

    def __iter__(self):
        return iter(self.questions.values())

    def term_id(self, term):
        return self.term_index.get(term)

    def docs_with(self, term):
        """Document indices whose tokens contain ``term`` (empty if unseen)."""
        t = self.term_index.get(term)
        if t is None:
            return np.zeros(0, dtype=np.int64)
        return self.post_docs[self.indptr[t]:self.indptr[t + 1]]

    # -- persistence ------------------------------------------------------

    def write_index(self, out_dir):
        """Persist tokens and postings to ``out_dir``; output is byte-stable."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / 'questions.jsonl', 'w', encoding='utf-8', newline='\n') as f:
            for q in self.questions.values():
                rec = {'id': q.id, 'title': q.title, 'tokens': list(q.tokens)}
                if q.body:
                    rec['body'] = q.body
                if q.answers:
                    rec['answers'] = list(q.answers)
                f.write(json.dumps(rec, ensure_ascii=False, sort_keys=True) + '\n')
        with open(out / 'postings.tsv', 'w', encoding='utf-8', newline='\n') as f:
            for t in self.vocab:
                plist = ' '.join(f'{qid}:{c}' for qid, c in self.postings[t])
                f.write(f'{t}\t{self.stats.collection_count[t]}\t{self.stats.doc_freq[t]}\t{plist}\n')
        with open(out / 'stats.json', 'w', encoding='utf-8', newline='\n') as f:
            json.dump({'total_tokens': self.stats.total_tokens,
                       'doc_count': self.stats.doc_count,
                       'vocab_size': len(self.vocab),
                       'avg_len': self.stats.avg_len}, f, sort_keys=True, indent=1)
            f.write('\n')

    @classmethod
    def read_index(cls, index_dir):
        path = Path(index_dir) / 'questions.jsonl'
        if not path.exists():
            raise DataError(f'no index found at {index_dir} (missing {path.name})')
        qs = []
        with open(path, encoding='utf-8') as f:
            for line in f:
                rec = json.loads(line)
                qs.append(Question(rec['id'], rec['title'], rec.get('body', ''),
                                   tuple(rec.get('answers', ())), tuple(rec['tokens'])))
        return cls(qs)


def _parse_record(line, lineno, source):
    try:
        rec = json.loads(line)
    except json.JSONDecodeError as exc:
        raise DataError(f'{source}:{lineno}: malformed record ({exc.msg})') from None
    if not isinstance(rec, dict):
        raise DataError(f'{source}:{lineno}: malformed record (expected an object)')
    qid, title = rec.get('id'), rec.get('title')
    if not isinstance(qid, str) or not qid:
        raise DataError(f'{source}:{lineno}: malformed record (missing string field "id")')
    if not isinstance(title, str):
        raise DataError(f'{source}:{lineno}: malformed record (missing string field "title")')
    body = rec.get('body', '') or ''
    answers = rec.get('answers', []) or []
    if not isinstance(body, str):
        raise DataError(f'{source}:{lineno}: malformed record ("body" must be a string)')
    if not isinstance(answers, list) or not all(isinstance(a, str) for a in answers):
        raise DataError(f'{source}:{lineno}: malformed record ("answers" must be a list of strings)')
    return qid, title, body, answers


def read_questions(path, fields=('title',), tokenizer=TokenizerConfig()):
    """
    Parse a newline-delimited question file.

    Returns ``(questions, report)``.  Records that tokenise to nothing are
    skipped and counted in the report; malformed lines and duplicate ids raise
    :class:`DataError`.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f'corpus file not found: {path}')
    report = IngestReport()
    questions = []
    ids = set()
    with open(path, encoding='utf-8') as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            qid, title, body, answers = _parse_record(line, lineno, path)
            if qid in ids:
                raise DataError(f'{path}:{lineno}: duplicate question id {qid!r}')
            ids.add(qid)
            q = make_question(qid, title, body, answers, fields, tokenizer)
            if not q.tokens:
                report.skipped_empty += 1
                report.skipped_ids.append(qid)
                continue
            questions.append(q)
            report.accepted += 1
    return questions, report


def ingest_corpus(path, fields=('title',), tokenizer=TokenizerConfig(), report_stream=sys.stderr):
    """Read and index a corpus file.  The ingest report goes to ``report_stream``."""
    questions, report = read_questions(path, fields, tokenizer)
    if report.skipped_empty:
        log.warning('%d record(s) skipped: empty after tokenisation', report.skipped_empty)
    if report_stream is not None:
        print(report.summary(), file=report_stream)
    return Corpus(questions, report)


def write_questions(path, questions: Sequence[Question]):
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        for q in questions:
            rec = {'id': q.id, 'title': q.title}
            if q.body:
                rec['body'] = q.body
            if q.answers:
                rec['answers'] = list(q.answers)
            f.write(json.dumps(rec, ensure_ascii=False, sort_keys=True) + '\n')
