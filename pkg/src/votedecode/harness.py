"""Experiment orchestration: decode grids, elections, reports.

Every intermediate artifact (candidates, voters, vote results, selections)
is materialized under the output directory, so fixed candidate files can be
re-voted against swapped voter files.  Given a seed, all output bytes are
deterministic; rows may be processed by a worker pool but outputs are
written in input order.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Callable, Iterable, Sequence as TySequence

from .config import ConfigError, DecodeSpec, ExperimentConfig, ModelSpec, SelectSpec
from .decode import BeamParams, CandidateSet, ScoredSequence, beam_search, sample_sequences, with_copy_filter
from .formats import (
    CandidateRecord,
    DatasetRow,
    VoteRecord,
    read_corpus_lines,
    read_dataset,
    read_tabular_entries,
    read_vector_file,
    vectors_for_vocab,
    write_candidates,
    write_report_json,
    write_report_tsv,
    write_votes,
)
from .metrics import EvalRow, evaluate_system
from .models import SequenceModel, TabularModel, load_model, tabular_model, train_ngram_lm
from .sequences import RESERVED_MARKS, Sequence, Vocabulary, build_vocabulary, tokenize
from .voting import SimilaritySpec, VoteResult, VoterSpec, generate_voters, range_vote

WORKERS_ENV = "VOTEDECODE_WORKERS"

_MASK = (1 << 64) - 1


def derive_seed(*parts: int) -> int:
    """Stable 64-bit mix of integer parts for per-row sampling streams."""
    h = 0xCBF29CE484222325
    for p in parts:
        h = ((h ^ (p & _MASK)) * 0x100000001B3) & _MASK
    return h


def resolve_workers(explicit: int | None = None, configured: int | None = None) -> int:
    if explicit is not None:
        return max(1, explicit)
    if configured is not None:
        return max(1, configured)
    return max(1, int(os.environ.get(WORKERS_ENV, "1")))


def _pmap(fn: Callable, items: TySequence, workers: int) -> list:
    """Apply ``fn`` over ``items``, preserving input order."""
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def tabular_model_from_text(entries: Iterable[tuple[str, float]], lowercase: bool = False) -> TabularModel:
    """Build a tabular model (and its vocabulary) from (text, probability) pairs."""
    entries = list(entries)
    vocab = build_vocabulary((text for text, _ in entries), lowercase=lowercase)
    return tabular_model([(tokenize(t, vocab, lowercase), p) for t, p in entries], vocab)


def build_model(spec: ModelSpec, base: ExperimentConfig) -> SequenceModel:
    if spec.kind == "train":
        lines = read_corpus_lines(base.resolve(spec.corpus))
        vocab = build_vocabulary(lines, lowercase=base.lowercase, max_size=spec.max_vocab)
        corpus = [tokenize(line, vocab, base.lowercase) for line in lines]
        return train_ngram_lm(corpus, order=spec.order, add_k=spec.add_k, vocab=vocab)
    if spec.kind == "load":
        with open(base.resolve(spec.path), encoding="utf-8") as fp:
            return load_model(fp)
    entries = spec.entries
    if entries is None:
        entries = read_tabular_entries(base.resolve(spec.path))
    return tabular_model_from_text(entries, lowercase=base.lowercase)


def surface_tokens(seq: Sequence, vocab: Vocabulary) -> tuple[str, ...]:
    return tuple(vocab.token_of(t) for t in seq)


def adhoc_vocab(token_seqs: Iterable[Iterable[str]]) -> Vocabulary:
    """Vocabulary over observed file tokens (reserved markers map back to their ids)."""
    tokens = sorted({tok for seq in token_seqs for tok in seq} - RESERVED_MARKS)
    return Vocabulary(tokens=tuple(tokens))


def candidate_record(row_id, source: str | None, cands: CandidateSet, vocab: Vocabulary) -> CandidateRecord:
    return CandidateRecord(
        id=row_id,
        source=source,
        candidates=tuple((surface_tokens(c.tokens, vocab), c.logprob) for c in cands.items),
    )


def vote_record(row_id, result: VoteResult, vocab: Vocabulary, keep_contributions: bool) -> VoteRecord:
    return VoteRecord(
        id=row_id,
        ranked=tuple(
            (surface_tokens(c.tokens, vocab), c.logprob, score)
            for c, score in zip(result.ranking, result.scores)
        ),
        contributions=result.contributions if keep_contributions else None,
    )


def decode_row(
    model: SequenceModel,
    spec: DecodeSpec,
    context: Sequence | None,
    seed: int,
) -> CandidateSet:
    """Run one decode setting on one input (beam or sampling)."""
    if spec.kind == "beam":
        params = spec.beam_params()
        if spec.filter_copies is not None and context:
            params = with_copy_filter(params, context, spec.filter_copies)
        return beam_search(model, context, params)
    return sample_sequences(
        model,
        context,
        count=spec.count,
        strategy=spec.strategy,
        top_k=spec.top_k,
        top_p=spec.top_p,
        seed=seed,
        max_len=spec.max_len,
    )


def _resolve_sim(sim: SimilaritySpec, config: ExperimentConfig, vocab: Vocabulary) -> SimilaritySpec:
    if sim.kind != "embed_cosine" or sim.vectors is not None:
        return sim
    if sim.vector_path is None:
        raise ConfigError("embed_cosine similarity needs a 'vectors' file path")
    table = read_vector_file(config.resolve(sim.vector_path))
    return replace(sim, vectors=vectors_for_vocab(table, vocab))


def run_experiment(
    config: ExperimentConfig,
    *,
    output_dir: str | Path | None = None,
    workers: int | None = None,
) -> tuple[list[EvalRow], Path]:
    """Run the full grid: decode x select per input, then one report row per system."""
    model = build_model(config.model, config)
    vocab = model.vocab
    rows = read_dataset(config.resolve(config.dataset))
    n_workers = resolve_workers(workers, config.workers)
    out = Path(output_dir) if output_dir is not None else config.resolve(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)

    contexts = [
        tokenize(row.source, vocab, config.lowercase) if row.source is not None else None
        for row in rows
    ]
    refs = [
        tuple(tuple((r.lower() if config.lowercase else r).split()) for r in row.references)
        for row in rows
    ]
    sources = None
    if all(row.source is not None for row in rows):
        sources = [tuple((row.source.lower() if config.lowercase else row.source).split()) for row in rows]

    report: list[EvalRow] = []
    for di, dspec in enumerate(config.decode):
        cand_sets: list[CandidateSet] = _pmap(
            lambda ri: decode_row(model, dspec, contexts[ri], derive_seed(config.seed, 1, di, ri)),
            range(len(rows)),
            n_workers,
        )
        _write_jsonl(
            out / "candidates" / f"{dspec.name}.jsonl",
            write_candidates,
            [candidate_record(rows[ri].id, rows[ri].source, cand_sets[ri], vocab) for ri in range(len(rows))],
        )
        for ri, cands in enumerate(cand_sets):
            if not cands.items:
                raise ValueError(
                    f"decode {dspec.name!r} left no candidates for input {rows[ri].id!r} "
                    "(support empty or everything copy-filtered)"
                )
        for si, sspec in enumerate(config.select):
            system = f"{dspec.name}+{sspec.name}"
            if sspec.kind == "map":
                winners = [cands.items[0] for cands in cand_sets]
            else:
                sim = _resolve_sim(sspec.sim, config, vocab)
                base_params = dspec.beam_params() if dspec.kind == "beam" else BeamParams(
                    beam_size=1, max_len=dspec.max_len
                )

                def vote_one(ri: int) -> tuple[VoteResult, CandidateSet]:
                    vspec = sspec.voters
                    if vspec.kind == "sample":
                        vspec = replace(vspec, seed=derive_seed(config.seed, 2, di, si, ri))
                    params = base_params
                    if dspec.kind == "beam" and dspec.filter_copies is not None and contexts[ri]:
                        params = with_copy_filter(params, contexts[ri], dspec.filter_copies)
                    voters = generate_voters(model, contexts[ri], params, vspec, cand_sets[ri])
                    result = range_vote(cand_sets[ri], voters, sim, with_contributions=sspec.contributions)
                    return result, voters

                outcomes = _pmap(vote_one, range(len(rows)), n_workers)
                if sspec.voters.kind != "same":
                    _write_jsonl(
                        out / "voters" / f"{system}.jsonl",
                        write_candidates,
                        [
                            candidate_record(rows[ri].id, rows[ri].source, outcomes[ri][1], vocab)
                            for ri in range(len(rows))
                        ],
                    )
                _write_jsonl(
                    out / "votes" / f"{system}.jsonl",
                    write_votes,
                    [
                        vote_record(rows[ri].id, outcomes[ri][0], vocab, sspec.contributions)
                        for ri in range(len(rows))
                    ],
                )
                winners = [res.winner for res, _ in outcomes]
            _write_jsonl(
                out / "selections" / f"{system}.jsonl",
                write_candidates,
                [
                    CandidateRecord(
                        id=rows[ri].id,
                        source=rows[ri].source,
                        candidates=((surface_tokens(winners[ri].tokens, vocab), winners[ri].logprob),),
                    )
                    for ri in range(len(rows))
                ],
            )
            hyps = [surface_tokens(w.tokens, vocab) for w in winners]
            report.append(
                evaluate_system(
                    system,
                    hyps,
                    refs,
                    sources,
                    max_n=config.bleu_max_n,
                    copy_threshold=config.copy_threshold,
                )
            )

    with open(out / "report.tsv", "w", encoding="utf-8") as fp:
        write_report_tsv(report, config.bleu_max_n, fp)
    with open(out / "report.json", "w", encoding="utf-8") as fp:
        write_report_json(report, config.bleu_max_n, fp)
    return report, out


def _write_jsonl(path: Path, writer: Callable, records) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fp:
        writer(records, fp)
