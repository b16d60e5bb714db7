"""Exact brute-force references: enumeration, exact argmax, exact election.

Enumeration works in log space, summing the same per-step conditionals beam
search sums, so the two routes agree bitwise on enumerable models and
near-ties sort identically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .decode import CandidateSet, ScoredSequence
from .models import NEG_INF, SequenceModel, TabularModel, tabular_model
from .sequences import BOS_ID, EOS_ID, Sequence, Vocabulary
from .voting import SimilaritySpec, VoteResult, range_vote

DEFAULT_NODE_BUDGET = 10**6


class BudgetExceededError(RuntimeError):
    """Raised when enumeration would expand more nodes than the budget allows."""


@dataclass(frozen=True)
class EnumeratedDistribution:
    """All sequences up to max_len with probability at or above the floor."""

    entries: tuple[ScoredSequence, ...]  # sorted by descending probability
    total_mass: float

    def as_candidate_set(self) -> CandidateSet:
        return CandidateSet(items=self.entries, provenance="enumeration")

    def pairs(self) -> list[tuple[Sequence, float]]:
        return [(e.tokens, math.exp(e.logprob)) for e in self.entries]


def enumerate_distribution(
    model: SequenceModel,
    max_len: int,
    prob_floor: float = 0.0,
    node_budget: int = DEFAULT_NODE_BUDGET,
) -> EnumeratedDistribution:
    """Depth-first expansion pruning prefixes with mass below ``prob_floor``.

    Exact on tabular models with a zero floor.  Zero-mass continuations are
    never followed; expansion beyond ``node_budget`` nodes aborts with
    :class:`BudgetExceededError`.
    """
    if max_len < 1:
        raise ValueError(f"max_len must be >= 1, got {max_len}")
    if prob_floor < 0:
        raise ValueError(f"prob_floor must be >= 0, got {prob_floor}")
    found: list[ScoredSequence] = []
    nodes = 0
    stack: list[tuple[Sequence, float]] = [((), 0.0)]
    while stack:
        prefix, prefix_lp = stack.pop()
        nodes += 1
        if nodes > node_budget:
            raise BudgetExceededError(f"enumeration exceeded node budget of {node_budget}")
        logprobs = model.next_token_logprobs(prefix)
        seq_lp = prefix_lp + float(logprobs[EOS_ID])
        if seq_lp > NEG_INF and math.exp(seq_lp) >= prob_floor:
            found.append(ScoredSequence(tokens=prefix, logprob=seq_lp))
        if len(prefix) >= max_len:
            continue
        for token in range(len(logprobs)):
            if token in (BOS_ID, EOS_ID) or logprobs[token] == NEG_INF:
                continue
            child_lp = prefix_lp + float(logprobs[token])
            if child_lp > NEG_INF and math.exp(child_lp) >= prob_floor:
                stack.append((prefix + (token,), child_lp))
    found.sort(key=lambda s: (-s.logprob, s.tokens))
    return EnumeratedDistribution(
        entries=tuple(found),
        total_mass=math.fsum(math.exp(s.logprob) for s in found),
    )


def exact_map(model: SequenceModel, max_len: int, node_budget: int = DEFAULT_NODE_BUDGET) -> ScoredSequence:
    """Most likely sequence by exhaustive enumeration."""
    dist = enumerate_distribution(model, max_len, prob_floor=0.0, node_budget=node_budget)
    if not dist.entries:
        raise ValueError("model has no sequence with positive probability within max_len")
    return dist.entries[0]


def exact_vote_winner(
    model: SequenceModel,
    sim: SimilaritySpec,
    max_len: int,
    node_budget: int = DEFAULT_NODE_BUDGET,
) -> ScoredSequence:
    """Range-voting winner with candidates = voters = the full enumeration."""
    return exact_vote(model, sim, max_len, node_budget=node_budget).winner


def exact_vote(
    model: SequenceModel,
    sim: SimilaritySpec,
    max_len: int,
    node_budget: int = DEFAULT_NODE_BUDGET,
    with_contributions: bool = False,
) -> VoteResult:
    """Full election over the enumerated support, with audit data."""
    support = enumerate_distribution(model, max_len, prob_floor=0.0, node_budget=node_budget).as_candidate_set()
    if not support.items:
        raise ValueError("model has no sequence with positive probability within max_len")
    return range_vote(support, support, sim, with_contributions=with_contributions)


def weighted_mean(points: list[tuple[float, float]]) -> float:
    total = math.fsum(w for _, w in points)
    return math.fsum(x * w for x, w in points) / total


def weighted_median_interval(points: list[tuple[float, float]]) -> tuple[float, float]:
    """The closed interval of weighted medians (degenerate unless the mass splits evenly)."""
    total = math.fsum(w for _, w in points)
    ordered = sorted(points)
    half = total / 2.0
    cum = 0.0
    lo = hi = ordered[-1][0]
    for i, (x, w) in enumerate(ordered):
        cum += w
        if cum >= half - 1e-12 * total:
            lo = x
            hi = ordered[i + 1][0] if cum <= half + 1e-12 * total and i + 1 < len(ordered) else x
            break
    return lo, hi


def euclidean_vote(
    points: list[tuple[float, float]],
    kind: str,
    kappa: float,
    grid: list[float],
) -> float:
    """Grid argmax of total weighted similarity for real-valued voters.

    With quadratic similarity 1 - kappa*(x - c)^2 the winner tracks the
    weighted mean; with linear similarity 1 - kappa*|x - c| it tracks a
    weighted median.  Similarity values may leave [0, 1]; this is a
    mathematical demonstration, not an election.
    """
    if kind not in ("quadratic", "linear"):
        raise ValueError(f"kind must be quadratic|linear, got {kind!r}")
    if kappa <= 0:
        raise ValueError(f"kappa must be positive, got {kappa}")
    if not grid:
        raise ValueError("grid must be non-empty")
    if not points or any(w <= 0 for _, w in points):
        raise ValueError("points must be non-empty with positive weights")
    best_value = None
    best_score = -math.inf
    for cand in grid:
        if kind == "quadratic":
            score = math.fsum(w * (1.0 - kappa * (x - cand) ** 2) for x, w in points)
        else:
            score = math.fsum(w * (1.0 - kappa * abs(x - cand)) for x, w in points)
        if score > best_score:
            best_score = score
            best_value = cand
    return best_value


# Generator tokens: one pool for the short generic sequence, one for the
# long families, so short/long similarities are exactly zero.
_SHORT_POOL = tuple(f"s{i}" for i in range(3))
_LONG_POOL = tuple(f"w{i:02d}" for i in range(20))
GENERATOR_VOCAB = Vocabulary(tokens=_SHORT_POOL + _LONG_POOL)


def make_vote_split_model(
    seed: int,
    *,
    families: tuple[int, int] = (1, 3),
    members: tuple[int, int] = (3, 6),
    stem_len: tuple[int, int] = (5, 9),
) -> TabularModel:
    """Seeded nested-prefix tabular model exhibiting vote splitting.

    One short generic sequence holds the largest single mass; families of
    long near-duplicates (a shared stem plus one distinguishing token each)
    hold more total mass, with the main family heavy enough that n-gram
    voting reliably prefers a long member while the short sequence stays
    the exact argmax.
    """
    rng = np.random.default_rng(seed)
    vocab = GENERATOR_VOCAB
    short_ids = [vocab.id_of(t) for t in _SHORT_POOL]
    long_ids = [vocab.id_of(t) for t in _LONG_POOL]

    short_len = int(rng.integers(1, 3))
    short = tuple(rng.choice(short_ids, size=short_len, replace=False).tolist())
    p_short = float(rng.uniform(0.26, 0.34))

    n_fam = int(rng.integers(families[0], families[1] + 1))
    # Main family keeps >= 2/3 of the long mass so its members' mutual
    # support beats the short sequence's self-vote in every draw.
    shares = np.concatenate(([1.0], rng.uniform(0.05, 0.25, size=n_fam - 1)))
    shares = shares / shares.sum() * (1.0 - p_short)

    pairs: list[tuple[Sequence, float]] = [(short, p_short)]
    for share in shares:
        length = int(rng.integers(stem_len[0], stem_len[1] + 1))
        stem = tuple(rng.choice(long_ids, size=length, replace=False).tolist())
        leftover = [t for t in long_ids if t not in stem]
        m = int(rng.integers(members[0], members[1] + 1))
        variants = rng.choice(leftover, size=m, replace=False).tolist()
        # Near-uniform member weights: max share stays below the short mass.
        raw = rng.uniform(1.0, 1.1, size=m)
        raw = raw / raw.sum() * share
        for token, weight in zip(variants, raw):
            pairs.append((stem + (int(token),), float(weight)))
    return tabular_model(pairs, vocab)
