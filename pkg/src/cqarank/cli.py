"""
Command-line interface.

    cqarank index     --corpus FILE --out DIR
    cqarank retrieve  --corpus FILE --queries FILE --method M --out RUN
    cqarank expand    --corpus FILE --queries FILE --method M --out FILE
    cqarank central   --corpus FILE --queries FILE
    cqarank eval      --qrels FILE RUN [RUN ...]
    cqarank tune      --corpus FILE --queries FILE --qrels FILE --method M --grid NAME=V1,V2
    cqarank synth     --out DIR

Parameters may also come from a ``key = value`` file given with ``--config``;
command-line flags override it.  Exit codes: 0 success, 1 usage or
configuration error, 2 data error.
"""

import argparse
import dataclasses
import hashlib
import itertools
import json
import logging
import os
import sys
from pathlib import Path

from .centrality import CentralitySpec, central_words
from .corpus import Corpus, TokenizerConfig, ingest_corpus, read_questions, write_questions
from .embeddings import load_contextual_store, load_static_embeddings
from .errors import ConfigError, DataError
from .evaluation import (
    format_report,
    mean_average_precision,
    read_qrels,
    split_dev_test,
)
from .expansion import ExpansionParams
from .pipeline import METHODS, Resources, Settings, expand_query, parse_method, run_all
from .retrieval import ScoringParams, build_translation_table, format_run, read_run
from .synth import SynthSpec, generate

log = logging.getLogger('cqarank')

# config key -> (dataclass, field name)
_PARAM_FIELDS = {}
for _cls in (ScoringParams, ExpansionParams, CentralitySpec):
    for _f in dataclasses.fields(_cls):
        _PARAM_FIELDS[_f.name] = (_cls, _f)
_SYNTH_FIELDS = {f.name: f for f in dataclasses.fields(SynthSpec)}

_PATH_KEYS = ('corpus', 'index', 'queries', 'embeddings', 'ctx_store', 'qrels', 'out')
_OTHER_KEYS = ('method', 'seed', 'workers', 'fields', 'stopwords', 'stem', 'depth', 'min_count')


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(f'{self.prog}: {message}')


def _flag(name):
    return '--' + name.replace('_', '-')


def _add_common(p):
    g = p.add_argument_group('inputs and outputs')
    g.add_argument('--config', help='key = value parameter file; flags override it')
    g.add_argument('--corpus', help='question corpus (one JSON object per line)')
    g.add_argument('--index', help='index directory written by "index" (alternative to --corpus)')
    g.add_argument('--queries', help='input questions, same format as the corpus')
    g.add_argument('--embeddings', help='static word vectors, word2vec text format')
    g.add_argument('--ctx-store', dest='ctx_store', help='contextual token vectors (JSON lines)')
    g.add_argument('--qrels', help='relevance judgments, TREC qrels format')
    g.add_argument('--out', help='output file or directory')
    g.add_argument('--method', help='retrieval method: ' + ', '.join(METHODS))
    g.add_argument('--seed', type=int, help='random seed (default 0)')
    g.add_argument('--workers', type=int, help='worker threads (default: available processors)')
    g.add_argument('--fields', help='comma-separated fields to index (default: title)')
    g.add_argument('--stopwords', action='store_const', const=True, help='remove stopwords')
    g.add_argument('--stem', action='store_const', const=True, help='strip plural suffixes')
    g.add_argument('--depth', type=int, help='ranked-list depth in run files (default: all)')
    g.add_argument('--min-count', dest='min_count', type=int,
                   help='minimum unit frequency for translation-table terms (default 1)')
    pg = p.add_argument_group('model parameters')
    for name, (_, f) in _PARAM_FIELDS.items():
        pg.add_argument(_flag(name), dest=name, type=_field_type(f))


def _field_type(f):
    t = f.type if isinstance(f.type, str) else getattr(f.type, '__name__', '')
    return {'int': int, 'float': float}.get(t, str)


def _build_parser():
    parser = _Parser(prog='cqarank', description='Question retrieval with query expansion for CQA archives.')
    parser.add_argument('-v', '--verbose', action='store_true', help='debug logging')
    sub = parser.add_subparsers(dest='command', parser_class=_Parser)
    sub.required = True
    for name, help_ in [('index', 'ingest and index a corpus'),
                        ('retrieve', 'rank the corpus for every input question'),
                        ('expand', 'dump expanded query language models'),
                        ('central', 'print term centrality and central words'),
                        ('tune', 'grid-search parameters on the dev half')]:
        p = sub.add_parser(name, help=help_)
        _add_common(p)
        if name == 'tune':
            p.add_argument('--grid', action='append', default=[],
                           help='NAME=V1,V2,... (repeatable; combinations are crossed)')
    p = sub.add_parser('eval', help='MAP per run plus pairwise paired t-tests')
    _add_common(p)
    p.add_argument('runs', nargs='+', help='run files')
    p = sub.add_parser('synth', help='write a synthetic lexical-gap dataset')
    _add_common(p)
    for name, f in _SYNTH_FIELDS.items():
        if name != 'seed':
            p.add_argument(_flag(name), dest='synth_' + name, type=_field_type(f))
    return parser


def read_config_file(path):
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f'config file not found: {path}')
    out = {}
    with open(path, encoding='utf-8') as f:
        for lineno, line in enumerate(f, 1):
            line = line.split('#', 1)[0].strip()
            if not line:
                continue
            if '=' not in line:
                raise ConfigError(f'{path}:{lineno}: expected "key = value"')
            key, value = (s.strip() for s in line.split('=', 1))
            key = key.replace('-', '_')
            if key not in _PARAM_FIELDS and key not in _PATH_KEYS + _OTHER_KEYS \
                    and not (key.startswith('synth_') and key[6:] in _SYNTH_FIELDS):
                raise ConfigError(f'{path}:{lineno}: unknown key {key!r}')
            out[key] = value
    return out


def _coerce(key, value):
    if key in _PARAM_FIELDS:
        return _field_type(_PARAM_FIELDS[key][1])(value)
    if key.startswith('synth_'):
        return _field_type(_SYNTH_FIELDS[key[6:]])(value)
    if key in ('seed', 'workers', 'depth', 'min_count'):
        return int(value)
    if key in ('stopwords', 'stem'):
        return str(value).lower() in ('1', 'true', 'yes', 'on')
    return value


def resolve_config(args):
    """Merge defaults, the ``--config`` file and explicit flags (flags win)."""
    cfg = {}
    if args.config:
        try:
            cfg = {k: _coerce(k, v) for k, v in read_config_file(args.config).items()}
        except ValueError as exc:
            raise ConfigError(f'{args.config}: {exc}') from None
    for k, v in vars(args).items():
        if v is not None and k not in ('config', 'command', 'verbose', 'runs', 'grid'):
            cfg[k] = v
    return cfg


def _settings(cfg, overrides=None):
    merged = dict(cfg)
    merged.update(overrides or {})
    parts = {}
    for cls in (ScoringParams, ExpansionParams, CentralitySpec):
        kw = {f.name: merged[f.name] for f in dataclasses.fields(cls) if f.name in merged}
        parts[cls] = cls(**kw)
    return Settings(parts[ScoringParams], parts[ExpansionParams], parts[CentralitySpec],
                    merged.get('depth', 0) or 0)


def _tokenizer(cfg):
    return TokenizerConfig(stopwords=bool(cfg.get('stopwords')), stem=bool(cfg.get('stem')))


def _fields(cfg):
    return tuple(f.strip() for f in cfg.get('fields', 'title').split(',') if f.strip())


def _load_corpus(cfg):
    if cfg.get('index'):
        return Corpus.read_index(cfg['index'])
    if not cfg.get('corpus'):
        raise ConfigError('pass --corpus (or --index)')
    return ingest_corpus(cfg['corpus'], _fields(cfg), _tokenizer(cfg))


def _load_queries(cfg):
    if not cfg.get('queries'):
        raise ConfigError('pass --queries with the input questions')
    qs, report = read_questions(cfg['queries'], ('title',), _tokenizer(cfg))
    if report.skipped_empty:
        log.warning('%d input question(s) skipped: empty after tokenisation', report.skipped_empty)
    return qs


def _load_resources(cfg, method, corpus, queries):
    base, _ = parse_method(method)
    table = store = translation = None
    if cfg.get('embeddings'):
        table = load_static_embeddings(cfg['embeddings'])
    if cfg.get('ctx_store'):
        known = dict(corpus.questions)
        known.update({q.id: q for q in queries})
        store = load_contextual_store(cfg['ctx_store'], known)
    if base == 'trlm':
        translation = build_translation_table(corpus, cfg.get('min_count', 1),
                                              cfg.get('translation_self_prob', 0.5), _tokenizer(cfg))
    return Resources(corpus, table, store, translation)


def _run_tag(method, settings):
    snap = {'method': method, 'scoring': dataclasses.asdict(settings.scoring),
            'expansion': dataclasses.asdict(settings.expansion),
            'centrality': dataclasses.asdict(settings.centrality)}
    digest = hashlib.sha1(json.dumps(snap, sort_keys=True).encode()).hexdigest()[:8]
    return f'{method}-{digest}'


def _workers(cfg):
    return cfg.get('workers') or os.cpu_count() or 1


def _write_text(path, text):
    if path in (None, '-'):
        sys.stdout.write(text)
        return
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        f.write(text)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_index(cfg):
    if not cfg.get('out'):
        raise ConfigError('index needs --out DIR')
    corpus = _load_corpus(cfg)
    corpus.write_index(cfg['out'])
    return 0


def cmd_retrieve(cfg):
    method = cfg.get('method') or 'lmir'
    parse_method(method)
    settings = _settings(cfg)
    corpus = _load_corpus(cfg)
    queries = _load_queries(cfg)
    res = _load_resources(cfg, method, corpus, queries)
    runs, diag = run_all(queries, method, res, settings, _workers(cfg))
    _write_text(cfg.get('out'), format_run(runs, _run_tag(method, settings)))
    if cfg.get('out') and cfg['out'] != '-':
        lines = []
        for qid in sorted(diag):
            d = diag[qid]
            lines.append(f'{qid}\t{",".join(d.get("central", [])) or "-"}\t{",".join(d.get("flags", [])) or "-"}\n')
        _write_text(cfg['out'] + '.diag', 'query\tcentral\tflags\n' + ''.join(lines))
    return 0


def cmd_expand(cfg):
    method = cfg.get('method') or 'expAL'
    settings = _settings(cfg)
    corpus = _load_corpus(cfg)
    queries = sorted(_load_queries(cfg), key=lambda q: q.id)
    res = _load_resources(cfg, method, corpus, queries)
    out = []
    for q in queries:
        eq, cw = expand_query(q, method, res, settings)
        rec = {'query_id': q.id, 'method': method,
               'params': dataclasses.asdict(settings.expansion),
               'terms': [[t, round(p, 10), o] for t, p, o in eq.table()]}
        if cw is not None:
            rec['central'] = list(cw.terms)
        if eq.flags:
            rec['flags'] = list(eq.flags)
        out.append(json.dumps(rec, sort_keys=True) + '\n')
    _write_text(cfg.get('out'), ''.join(out))
    return 0


def cmd_central(cfg):
    settings = _settings(cfg)
    corpus = _load_corpus(cfg)
    queries = sorted(_load_queries(cfg), key=lambda q: q.id)
    lines = ['query\tterm\tA\tdidf\tI\tcentral\n']
    for q in queries:
        cw = central_words(q, corpus, settings.centrality, settings.scoring)
        for t, a, d, i in cw.rows:
            mark = []
            if t == cw.pre_idf:
                mark.append('pre')
            if t == cw.post_idf:
                mark.append('post')
            lines.append(f'{q.id}\t{t}\t{a:.6f}\t{d:.6f}\t{i:.6f}\t{"+".join(mark) or "-"}\n')
    _write_text(cfg.get('out'), ''.join(lines))
    return 0


def cmd_eval(cfg, run_paths):
    if not cfg.get('qrels'):
        raise ConfigError('eval needs --qrels')
    judgments = read_qrels(cfg['qrels'])
    reports = {}
    for path in run_paths:
        runs, _ = read_run(path)
        name = Path(path).name
        orphans_run = sorted(set(runs) - set(judgments.queries))
        orphans_qrels = sorted(set(judgments.queries) - set(runs))
        if orphans_run:
            log.warning('%s: %d run queries have no judgments: %s', name, len(orphans_run),
                        ' '.join(orphans_run[:10]))
        if orphans_qrels:
            log.warning('%s: %d judged queries missing from the run: %s', name, len(orphans_qrels),
                        ' '.join(orphans_qrels[:10]))
        if name in reports:
            raise ConfigError(f'run file name {name!r} given twice')
        reports[name] = mean_average_precision(runs, judgments)
    _write_text(cfg.get('out'), format_report(reports))
    return 0


def parse_grid(specs):
    """``['a=1,2', 'b=x']`` -> list of override dicts (cartesian product)."""
    if not specs:
        raise ConfigError('tune needs at least one --grid NAME=V1,V2,...')
    axes = []
    for spec in specs:
        if '=' not in spec:
            raise ConfigError(f'bad grid {spec!r}; expected NAME=V1,V2,...')
        name, values = spec.split('=', 1)
        name = name.strip().replace('-', '_')
        if name not in _PARAM_FIELDS:
            raise ConfigError(f'grid names unknown parameter {name!r}')
        try:
            vals = [_coerce(name, v.strip()) for v in values.split(',') if v.strip()]
        except ValueError as exc:
            raise ConfigError(f'grid {spec!r}: {exc}') from None
        if not vals:
            raise ConfigError(f'grid {spec!r} has no values')
        axes.append([(name, v) for v in vals])
    return [dict(combo) for combo in itertools.product(*axes)]


def tune(queries, judgments, method, res, base_cfg, grid, seed=0, workers=1):
    """
    Evaluate every grid point on the dev half of the query set.  Only dev-half
    judgments are consulted.  Returns ``(rows, best_index, dev_ids)`` where rows
    are ``(overrides, dev MAP)``.
    """
    dev_ids, _ = split_dev_test(sorted(q.id for q in queries), seed)
    dev = set(dev_ids)
    dev_queries = [q for q in queries if q.id in dev]
    dev_judgments = judgments.subset(dev)
    rows = []
    for overrides in grid:
        settings = _settings(base_cfg, overrides)
        runs, _ = run_all(dev_queries, method, res, settings, workers)
        rows.append((overrides, mean_average_precision(runs, dev_judgments).map))
    best = max(range(len(rows)), key=lambda i: (rows[i][1], -i))
    return rows, best, sorted(dev_ids)


def cmd_tune(cfg, grid_specs):
    method = cfg.get('method') or 'lmir'
    parse_method(method)
    grid = parse_grid(grid_specs)
    if not cfg.get('qrels'):
        raise ConfigError('tune needs --qrels')
    for overrides in grid:
        _settings(cfg, overrides)  # validate every grid point up front
    corpus = _load_corpus(cfg)
    queries = _load_queries(cfg)
    judgments = read_qrels(cfg['qrels'])
    res = _load_resources(cfg, method, corpus, queries)
    rows, best, dev_ids = tune(queries, judgments, method, res, cfg, grid, cfg.get('seed', 0), _workers(cfg))
    names = list(grid[0])
    lines = [f'# method={method} dev_queries={len(dev_ids)} seed={cfg.get("seed", 0)}\n',
             '\t'.join(names) + '\tdev_MAP\n']
    for overrides, m in rows:
        lines.append('\t'.join(str(overrides[n]) for n in names) + f'\t{m:.6f}\n')
    lines.append('best\t' + '\t'.join(f'{n}={rows[best][0][n]}' for n in names) + f'\t{rows[best][1]:.6f}\n')
    _write_text(cfg.get('out'), ''.join(lines))
    return 0


def cmd_synth(cfg):
    if not cfg.get('out'):
        raise ConfigError('synth needs --out DIR')
    kw = {name: cfg['synth_' + name] for name in _SYNTH_FIELDS if 'synth_' + name in cfg}
    kw['seed'] = cfg.get('seed', 0)
    data = generate(SynthSpec(**kw))
    out = Path(cfg['out'])
    out.mkdir(parents=True, exist_ok=True)
    write_questions(out / 'corpus.jsonl', list(data.corpus))
    write_questions(out / 'queries.jsonl', data.queries)
    data.judgments.write(out / 'qrels.txt')
    data.table.write(out / 'embeddings.txt')
    data.store.write(out / 'ctx.jsonl', list(data.corpus.ids) + [q.id for q in data.queries])
    return 0


def main(argv=None):
    logging.basicConfig(level=logging.WARNING, format='%(levelname)s: %(message)s', stream=sys.stderr)
    try:
        args = _build_parser().parse_args(argv)
        if args.verbose:
            logging.getLogger().setLevel(logging.DEBUG)
        cfg = resolve_config(args)
        cmd = args.command
        if cmd == 'index':
            return cmd_index(cfg)
        if cmd == 'retrieve':
            return cmd_retrieve(cfg)
        if cmd == 'expand':
            return cmd_expand(cfg)
        if cmd == 'central':
            return cmd_central(cfg)
        if cmd == 'eval':
            return cmd_eval(cfg, args.runs)
        if cmd == 'tune':
            return cmd_tune(cfg, args.grid)
        return cmd_synth(cfg)
    except ConfigError as exc:
        print(f'error: {exc}', file=sys.stderr)
        return 1
    except DataError as exc:
        print(f'data error: {exc}', file=sys.stderr)
        return 2
    except OSError as exc:
        print(f'data error: {exc}', file=sys.stderr)
        return 2


if __name__ == '__main__':
    sys.exit(main())
