"""Command-line surface: train / decode / vote / eval / oracle / run.

Every flag has a config-file equivalent: pass ``--config FILE`` with a JSON
object whose keys match the flag names (underscores for dashes); explicit
flags override the file.  Exit codes: 0 success, 1 usage, 2 I/O,
3 validation, 4 oracle budget exceeded.
"""

from __future__ import annotations

import io
import json
import math
import sys
from dataclasses import replace
from pathlib import Path

import click

from . import __version__
from .config import ConfigError, load_config, parse_voter_spec
from .decode import BeamParams, CandidateSet, ScoredSequence, beam_search, sample_sequences, with_copy_filter
from .formats import (
    CandidateRecord,
    FileFormatError,
    read_candidates,
    read_corpus_lines,
    read_dataset,
    read_hypotheses,
    read_tabular_entries,
    read_vector_file,
    report_filter_columns,
    vectors_for_vocab,
    write_candidates,
    write_enumeration,
    write_report_json,
    write_report_tsv,
    write_votes,
)
from .harness import (
    adhoc_vocab,
    candidate_record,
    derive_seed,
    run_experiment,
    tabular_model_from_text,
    vote_record,
)
from .metrics import evaluate_system, paired_bootstrap, sign_test
from .models import ModelFormatError, load_model, save_model, train_ngram_lm
from .oracle import (
    BudgetExceededError,
    enumerate_distribution,
    euclidean_vote,
    exact_map,
    exact_vote,
    weighted_mean,
    weighted_median_interval,
)
from .sequences import Vocabulary, build_vocabulary, detokenize, tokenize
from .voting import SimilaritySpec, generate_voters, range_vote


def _file_config(path: str | None) -> dict:
    if not path:
        return {}
    with open(path, encoding="utf-8") as fp:
        try:
            data = json.load(fp)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: flag config must be a JSON object")
    return data


def _opt(cli_value, cfg: dict, key: str, default=None):
    if cli_value is not None:
        return cli_value
    return cfg.get(key, default)


def _load_cli_model(model_path: str | None, tabular_path: str | None, lowercase: bool):
    if (model_path is None) == (tabular_path is None):
        raise click.UsageError("provide exactly one of --model / --tabular")
    if model_path is not None:
        with open(model_path, encoding="utf-8") as fp:
            return load_model(fp)
    return tabular_model_from_text(read_tabular_entries(tabular_path), lowercase=lowercase)


def _sim_spec(kind: str | None, n: int | None, max_n: int | None, vectors: str | None, vocab: Vocabulary) -> SimilaritySpec:
    if kind is None:
        raise click.UsageError("--sim is required")
    spec = SimilaritySpec(kind=kind, n=n, max_n=max_n, vector_path=vectors)
    if spec.kind == "embed_cosine":
        if vectors is None:
            raise click.UsageError("--sim embed_cosine needs --vectors FILE")
        spec = replace(spec, vectors=vectors_for_vocab(read_vector_file(vectors), vocab))
    return spec


@click.group()
@click.version_option(version=__version__, prog_name="votedecode")
def cli():
    """Pick representative sequence-model outputs by range voting."""


# --- train ------------------------------------------------------------------

@cli.command()
@click.option("--corpus", type=click.Path(), default=None, help="Training corpus, one sentence per line.")
@click.option("--out", type=click.Path(), default=None, help="Where to write the model file.")
@click.option("--order", type=int, default=None, help="N-gram order (default 2).")
@click.option("--add-k", type=float, default=None, help="Add-k smoothing constant (default 0 = MLE).")
@click.option("--max-vocab", type=int, default=None, help="Keep only the most common words.")
@click.option("--lowercase/--no-lowercase", default=None, help="Lowercase before vocabulary lookup.")
@click.option("--config", "config_path", type=click.Path(), default=None, help="JSON file with flag defaults.")
def train(corpus, out, order, add_k, max_vocab, lowercase, config_path):
    """Train an add-k n-gram model and save it."""
    cfg = _file_config(config_path)
    corpus = _opt(corpus, cfg, "corpus")
    out = _opt(out, cfg, "out")
    if corpus is None or out is None:
        raise click.UsageError("--corpus and --out are required")
    order = int(_opt(order, cfg, "order", 2))
    add_k = float(_opt(add_k, cfg, "add_k", 0.0))
    max_vocab = _opt(max_vocab, cfg, "max_vocab")
    lowercase = bool(_opt(lowercase, cfg, "lowercase", False))
    lines = read_corpus_lines(corpus)
    vocab = build_vocabulary(lines, lowercase=lowercase, max_size=max_vocab)
    model = train_ngram_lm(
        [tokenize(line, vocab, lowercase) for line in lines],
        order=order,
        add_k=add_k,
        vocab=vocab,
    )
    with open(out, "w", encoding="utf-8") as fp:
        save_model(model, fp)
    click.echo(f"trained order-{order} model on {len(lines)} lines ({vocab.size} word vocabulary) -> {out}")


# --- decode -------------------------------------------------------------------

@cli.command()
@click.option("--model", "model_path", type=click.Path(), default=None, help="N-gram model file.")
@click.option("--tabular", "tabular_path", type=click.Path(), default=None, help="Tabular distribution file.")
@click.option("--dataset", type=click.Path(), default=None, help="Inputs (line-delimited JSON).")
@click.option("--out", type=click.Path(), default=None, help="Candidates file to write.")
@click.option("--strategy", type=click.Choice(["beam", "ancestral", "top_k", "nucleus"]), default=None)
@click.option("--beam-size", type=int, default=None)
@click.option("--max-len", type=int, default=None)
@click.option("--scoring", type=click.Choice(["logprob", "length_normalized"]), default=None)
@click.option("--diverse-gamma", type=float, default=None, help="Sibling rank penalty (0 disables).")
@click.option("--filter-copies", type=float, default=None, help="Copy-filter threshold in [0,1].")
@click.option("--count", type=int, default=None, help="Number of samples (sampling strategies).")
@click.option("--top-k", type=int, default=None)
@click.option("--top-p", type=float, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--lowercase/--no-lowercase", default=None)
@click.option("--config", "config_path", type=click.Path(), default=None, help="JSON file with flag defaults.")
def decode(model_path, tabular_path, dataset, out, strategy, beam_size, max_len, scoring,
           diverse_gamma, filter_copies, count, top_k, top_p, seed, lowercase, config_path):
    """Generate candidates per input by beam search or sampling."""
    cfg = _file_config(config_path)
    model_path = _opt(model_path, cfg, "model")
    tabular_path = _opt(tabular_path, cfg, "tabular")
    dataset = _opt(dataset, cfg, "dataset")
    out = _opt(out, cfg, "out")
    if dataset is None or out is None:
        raise click.UsageError("--dataset and --out are required")
    strategy = _opt(strategy, cfg, "strategy", "beam")
    lowercase = bool(_opt(lowercase, cfg, "lowercase", False))
    seed = int(_opt(seed, cfg, "seed", 0))
    model = _load_cli_model(model_path, tabular_path, lowercase)
    rows = read_dataset(dataset)
    records = []
    for ri, row in enumerate(rows):
        context = tokenize(row.source, model.vocab, lowercase) if row.source is not None else None
        if strategy == "beam":
            params = BeamParams(
                beam_size=int(_opt(beam_size, cfg, "beam_size", 1)),
                max_len=int(_opt(max_len, cfg, "max_len", 50)),
                scoring=_opt(scoring, cfg, "scoring", "logprob"),
                diverse_gamma=float(_opt(diverse_gamma, cfg, "diverse_gamma", 0.0)),
            )
            threshold = _opt(filter_copies, cfg, "filter_copies")
            if threshold is not None and context:
                params = with_copy_filter(params, context, float(threshold))
            cands = beam_search(model, context, params)
        else:
            cands = sample_sequences(
                model,
                context,
                count=int(_opt(count, cfg, "count", 1)),
                strategy=strategy,
                top_k=_opt(top_k, cfg, "top_k"),
                top_p=_opt(top_p, cfg, "top_p"),
                seed=derive_seed(seed, 1, 0, ri),
                max_len=int(_opt(max_len, cfg, "max_len", 50)),
            )
        records.append(candidate_record(row.id, row.source, cands, model.vocab))
    with open(out, "w", encoding="utf-8") as fp:
        write_candidates(records, fp)
    click.echo(f"decoded {len(records)} inputs -> {out}")


# --- vote ---------------------------------------------------------------------

@cli.command()
@click.option("--candidates", "candidates_path", type=click.Path(), default=None, help="Candidates file (decode output).")
@click.option("--voters", "voters_flag", type=str, default=None,
              help="same | file:PATH | beam:K | sample:N[:strategy] (default same).")
@click.option("--sim", "sim_kind", type=click.Choice(["prec", "overl", "bleu", "smoothed_bleu", "embed_cosine"]), default=None)
@click.option("--n", type=int, default=None, help="N-gram order for prec/overl.")
@click.option("--max-n", type=int, default=None, help="Highest n-gram order for BLEU kinds.")
@click.option("--vectors", type=click.Path(), default=None, help="Token vector table for embed_cosine.")
@click.option("--out", type=click.Path(), default=None, help="Vote results file to write.")
@click.option("--contributions/--no-contributions", default=None, help="Keep the per-voter contribution matrix.")
@click.option("--model", "model_path", type=click.Path(), default=None, help="Model for beam:/sample: voters.")
@click.option("--tabular", "tabular_path", type=click.Path(), default=None)
@click.option("--max-len", type=int, default=None, help="Decode length for regenerated voters (default 50).")
@click.option("--seed", type=int, default=None)
@click.option("--lowercase/--no-lowercase", default=None)
@click.option("--config", "config_path", type=click.Path(), default=None, help="JSON file with flag defaults.")
def vote(candidates_path, voters_flag, sim_kind, n, max_n, vectors, out, contributions,
         model_path, tabular_path, max_len, seed, lowercase, config_path):
    """Run the range-voting election over decoded candidates."""
    cfg = _file_config(config_path)
    candidates_path = _opt(candidates_path, cfg, "candidates")
    out = _opt(out, cfg, "out")
    if candidates_path is None or out is None:
        raise click.UsageError("--candidates and --out are required")
    voters_flag = _opt(voters_flag, cfg, "voters", "same")
    sim_kind = _opt(sim_kind, cfg, "sim")
    n = _opt(n, cfg, "n")
    max_n = _opt(max_n, cfg, "max_n")
    vectors = _opt(vectors, cfg, "vectors")
    contributions = bool(_opt(contributions, cfg, "contributions", False))
    lowercase = bool(_opt(lowercase, cfg, "lowercase", False))
    seed = int(_opt(seed, cfg, "seed", 0))
    max_len = int(_opt(max_len, cfg, "max_len", 50))
    model_path = _opt(model_path, cfg, "model")
    tabular_path = _opt(tabular_path, cfg, "tabular")

    cand_records = read_candidates(candidates_path)
    voter_records = None
    voter_spec = None
    model = None
    if voters_flag.startswith("file:"):
        voter_records = {rec.id: rec for rec in read_candidates(voters_flag[len("file:"):])}
    elif voters_flag != "same":
        voter_spec = parse_voter_spec(voters_flag)
        model = _load_cli_model(model_path, tabular_path, lowercase)

    if model is not None:
        vocab = model.vocab
    else:
        token_seqs = [tokens for rec in cand_records for tokens, _ in rec.candidates]
        if voter_records is not None:
            token_seqs += [tokens for rec in voter_records.values() for tokens, _ in rec.candidates]
        vocab = adhoc_vocab(token_seqs)
    sim = _sim_spec(sim_kind, n, max_n, vectors, vocab)

    def to_set(record: CandidateRecord) -> CandidateSet:
        items = tuple(
            ScoredSequence(tokens=tuple(vocab.id_of(t) for t in tokens), logprob=lp)
            for tokens, lp in record.candidates
        )
        return CandidateSet(items=items, provenance=f"file:{candidates_path}")

    results = []
    for ri, rec in enumerate(cand_records):
        cands = to_set(rec)
        if voter_records is not None:
            if rec.id not in voter_records:
                raise FileFormatError(f"voter file has no record for input {rec.id!r}")
            voters = to_set(voter_records[rec.id])
        elif voter_spec is not None:
            context = tokenize(rec.source, vocab, lowercase) if rec.source is not None else None
            vspec = voter_spec
            if vspec.kind == "sample":
                vspec = replace(vspec, seed=derive_seed(seed, 2, 0, ri))
            voters = generate_voters(model, context, BeamParams(beam_size=1, max_len=max_len), vspec, cands)
        else:
            voters = cands
        result = range_vote(cands, voters, sim, with_contributions=contributions)
        results.append(vote_record(rec.id, result, vocab, contributions))
    with open(out, "w", encoding="utf-8") as fp:
        write_votes(results, fp)
    click.echo(f"voted on {len(results)} inputs with {sim.name} -> {out}")


# --- eval ---------------------------------------------------------------------

@cli.command(name="eval")
@click.option("--hyps", "hyps_path", type=click.Path(), default=None,
              help="Candidates or votes file; the top entry per input is scored.")
@click.option("--dataset", type=click.Path(), default=None, help="References (and sources) by input id.")
@click.option("--system", type=str, default=None, help="Label for the report row.")
@click.option("--metric", type=click.Choice(["all", "bleu", "length", "distinct", "copies"]), default=None)
@click.option("--max-n", type=int, default=None, help="Highest BLEU order (default 4).")
@click.option("--copy-threshold", type=float, default=None)
@click.option("--lowercase/--no-lowercase", default=None, help="Lowercase references/sources.")
@click.option("--out-tsv", type=click.Path(), default=None, help="Report TSV (default stdout).")
@click.option("--out-json", type=click.Path(), default=None, help="Also write the report as JSON.")
@click.option("--compare", "compare_path", type=click.Path(), default=None,
              help="Second system for a paired bootstrap test.")
@click.option("--n-bootstrap", type=int, default=None, help="Bootstrap resamples (default 1000).")
@click.option("--seed", type=int, default=None)
@click.option("--sign-test", "sign_counts", type=int, nargs=2, default=None,
              help="Two win counts (ties discarded): print the two-tailed sign-test p-value.")
@click.option("--config", "config_path", type=click.Path(), default=None, help="JSON file with flag defaults.")
def eval_cmd(hyps_path, dataset, system, metric, max_n, copy_threshold, lowercase,
             out_tsv, out_json, compare_path, n_bootstrap, seed, sign_counts, config_path):
    """Score selected outputs against references."""
    cfg = _file_config(config_path)
    sign_counts = _opt(sign_counts, cfg, "sign_test")
    if sign_counts is not None:
        wins_a, wins_b = sign_counts
        click.echo(repr(sign_test(int(wins_a), int(wins_b))))
        return
    hyps_path = _opt(hyps_path, cfg, "hyps")
    dataset = _opt(dataset, cfg, "dataset")
    if hyps_path is None or dataset is None:
        raise click.UsageError("--hyps and --dataset are required")
    metric = _opt(metric, cfg, "metric", "all")
    max_n = int(_opt(max_n, cfg, "max_n", 4))
    copy_threshold = float(_opt(copy_threshold, cfg, "copy_threshold", 0.5))
    lowercase = bool(_opt(lowercase, cfg, "lowercase", False))
    system = _opt(system, cfg, "system") or Path(hyps_path).stem

    rows = {row.id: row for row in read_dataset(dataset)}
    hyps = read_hypotheses(hyps_path)
    aligned_refs = []
    sources = []
    for rec_id, _ in hyps:
        if rec_id not in rows:
            raise FileFormatError(f"dataset has no row for input {rec_id!r}")
        row = rows[rec_id]
        aligned_refs.append(tuple(tokenize_plain(r, lowercase) for r in row.references))
        sources.append(None if row.source is None else tokenize_plain(row.source, lowercase))
    hyp_tokens = [tokens for _, tokens in hyps]
    have_sources = all(s is not None for s in sources)

    compare_path = _opt(compare_path, cfg, "compare")
    if compare_path is not None:
        hyps_b = dict(read_hypotheses(compare_path))
        try:
            aligned_b = [hyps_b[rec_id] for rec_id, _ in hyps]
        except KeyError as exc:
            raise FileFormatError(f"--compare file has no record for input {exc.args[0]!r}") from exc
        p = paired_bootstrap(
            hyp_tokens,
            aligned_b,
            aligned_refs,
            max_n=max_n,
            n_bootstrap=int(_opt(n_bootstrap, cfg, "n_bootstrap", 1000)),
            seed=int(_opt(seed, cfg, "seed", 0)),
        )
        click.echo(repr(p))
        return

    row = evaluate_system(
        system,
        hyp_tokens,
        aligned_refs,
        sources if have_sources else None,
        max_n=max_n,
        copy_threshold=copy_threshold,
    )
    buf = io.StringIO()
    write_report_tsv([row], max_n, buf)
    text = report_filter_columns(buf.getvalue(), metric, max_n)
    if out_tsv:
        with open(out_tsv, "w", encoding="utf-8") as fp:
            fp.write(text)
    else:
        click.echo(text, nl=False)
    if out_json:
        with open(out_json, "w", encoding="utf-8") as fp:
            write_report_json([row], max_n, fp)


def tokenize_plain(text: str, lowercase: bool) -> tuple[str, ...]:
    return tuple((text.lower() if lowercase else text).split())


# --- oracle ---------------------------------------------------------------------

@cli.group()
def oracle():
    """Exact brute-force references for small models."""


_oracle_model_opts = [
    click.option("--model", "model_path", type=click.Path(), default=None, help="N-gram model file."),
    click.option("--tabular", "tabular_path", type=click.Path(), default=None, help="Tabular distribution file."),
    click.option("--lowercase/--no-lowercase", default=False),
    click.option("--max-len", type=int, required=True, help="Longest sequence to enumerate."),
    click.option("--budget", type=int, default=10**6, show_default=True, help="Node expansion budget."),
]


def _with_opts(opts):
    def wrap(fn):
        for opt in reversed(opts):
            fn = opt(fn)
        return fn
    return wrap


@oracle.command(name="enumerate")
@_with_opts(_oracle_model_opts)
@click.option("--floor", type=float, default=0.0, show_default=True, help="Prune prefixes below this mass.")
@click.option("--out", type=click.Path(), default=None, help="Enumeration file (default stdout).")
def enumerate_cmd(model_path, tabular_path, lowercase, max_len, budget, floor, out):
    """List all sequences up to --max-len with their probabilities."""
    model = _load_cli_model(model_path, tabular_path, lowercase)
    dist = enumerate_distribution(model, max_len, prob_floor=floor, node_budget=budget)
    pairs = [(detokenize(e.tokens, model.vocab), math.exp(e.logprob)) for e in dist.entries]
    if out:
        with open(out, "w", encoding="utf-8") as fp:
            write_enumeration(pairs, fp)
        click.echo(f"enumerated {len(pairs)} sequences (mass {dist.total_mass!r}) -> {out}")
    else:
        buf = io.StringIO()
        write_enumeration(pairs, buf)
        click.echo(buf.getvalue(), nl=False)


@oracle.command(name="map")
@_with_opts(_oracle_model_opts)
def map_cmd(model_path, tabular_path, lowercase, max_len, budget):
    """Print the most likely sequence by exhaustive enumeration."""
    model = _load_cli_model(model_path, tabular_path, lowercase)
    best = exact_map(model, max_len, node_budget=budget)
    click.echo(json.dumps({"sequence": detokenize(best.tokens, model.vocab), "logprob": best.logprob}, sort_keys=True))


@oracle.command(name="vote-winner")
@_with_opts(_oracle_model_opts)
@click.option("--sim", "sim_kind", type=click.Choice(["prec", "overl", "bleu", "smoothed_bleu", "embed_cosine"]), required=True)
@click.option("--n", type=int, default=None)
@click.option("--max-n", type=int, default=None)
@click.option("--vectors", type=click.Path(), default=None)
def vote_winner(model_path, tabular_path, lowercase, max_len, budget, sim_kind, n, max_n, vectors):
    """Print the range-voting winner over the full enumerated support."""
    model = _load_cli_model(model_path, tabular_path, lowercase)
    sim = _sim_spec(sim_kind, n, max_n, vectors, model.vocab)
    result = exact_vote(model, sim, max_len, node_budget=budget)
    click.echo(json.dumps(
        {
            "sequence": detokenize(result.winner.tokens, model.vocab),
            "logprob": result.winner.logprob,
            "score": result.winner_score,
        },
        sort_keys=True,
    ))


@oracle.command()
@click.option("--points", required=True, help="Comma-separated value:weight pairs, e.g. 0:0.6,1:0.2,2:0.2")
@click.option("--kind", type=click.Choice(["quadratic", "linear"]), required=True)
@click.option("--kappa", type=float, default=1.0, show_default=True)
@click.option("--grid-min", type=float, required=True)
@click.option("--grid-max", type=float, required=True)
@click.option("--grid-step", type=float, default=0.01, show_default=True)
def euclidean(points, kind, kappa, grid_min, grid_max, grid_step):
    """Grid-argmax demonstration that mean/median are votes with quadratic/linear similarity."""
    try:
        parsed = [(float(v), float(w)) for v, w in (p.split(":") for p in points.split(","))]
    except ValueError as exc:
        raise click.UsageError(f"cannot parse --points: {exc}") from exc
    if grid_step <= 0 or grid_max < grid_min:
        raise click.UsageError("need grid_step > 0 and grid_max >= grid_min")
    grid = []
    value = grid_min
    while value <= grid_max + 1e-12:
        grid.append(round(value, 12))
        value += grid_step
    winner = euclidean_vote(parsed, kind, kappa, grid)
    lo, hi = weighted_median_interval(parsed)
    click.echo(json.dumps(
        {
            "winner": winner,
            "weighted_mean": weighted_mean(parsed),
            "weighted_median_interval": [lo, hi],
        },
        sort_keys=True,
    ))


# --- run ---------------------------------------------------------------------

@cli.command()
@click.option("--config", "config_path", type=click.Path(), required=True, help="Experiment config (JSON).")
@click.option("--output-dir", type=click.Path(), default=None, help="Override the config's output directory.")
@click.option("--seed", type=int, default=None, help="Override the config's seed.")
@click.option("--workers", type=int, default=None, help="Worker count (default: VOTEDECODE_WORKERS env var, else 1).")
def run(config_path, output_dir, seed, workers):
    """Run a full experiment grid and write the evaluation report."""
    config = load_config(config_path)
    if seed is not None:
        config = replace(config, seed=seed)
    report, out = run_experiment(config, output_dir=output_dir, workers=workers)
    click.echo(f"wrote {len(report)} system rows -> {out / 'report.tsv'}")


def main(argv: list[str] | None = None) -> int:
    """Entry point with the documented exit-code mapping."""
    try:
        cli.main(args=sys.argv[1:] if argv is None else argv, standalone_mode=False)
        return 0
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.UsageError as exc:
        exc.show()
        return 1
    except click.Abort:
        click.echo("aborted", err=True)
        return 1
    except BudgetExceededError as exc:
        click.echo(f"budget error: {exc}", err=True)
        return 4
    except (ConfigError, FileFormatError, ModelFormatError, ValueError) as exc:
        click.echo(f"validation error: {exc}", err=True)
        return 3
    except OSError as exc:
        click.echo(f"i/o error: {exc}", err=True)
        return 2


if __name__ == "__main__":
    sys.exit(main())
