"""Sequence models: the next-token contract plus two exact realizations.

``TabularModel`` wraps a finite distribution over whole sequences, giving the
oracles something they can enumerate exactly.  ``NGramLM`` is a trainable
add-k n-gram model.  Both are unconditional: the optional ``context``
argument is accepted for interface compatibility and ignored.

All probability arithmetic is in log space; a next-token query returns a
dense float64 vector over the full id space (BOS stays at -inf).
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import IO, Iterable, Protocol, runtime_checkable

import numpy as np

from .sequences import BOS_ID, EOS_ID, UNK_ID, Sequence, Vocabulary

NEG_INF = float("-inf")

MODEL_FORMAT = "votedecode-ngram-lm"
MODEL_VERSION = 1


class ModelFormatError(ValueError):
    """Raised when a model file is malformed or has the wrong version."""


class ZeroMassPrefixError(ValueError):
    """Raised when a tabular model is queried with a prefix of zero mass."""


@runtime_checkable
class SequenceModel(Protocol):
    """Anything exposing next-token conditional log-probabilities.

    Contract: for every reachable prefix the returned vector exponentiates
    and sums to 1 within 1e-9, and equal queries give identical output.
    """

    @property
    def vocab(self) -> Vocabulary: ...

    def next_token_logprobs(self, prefix: Sequence, context: Sequence | None = None) -> np.ndarray: ...


def sequence_logprob(model: SequenceModel, seq: Sequence, context: Sequence | None = None) -> float:
    """Log-probability of the full sequence, terminal EOS step included."""
    total = 0.0
    for i, token in enumerate(seq):
        total += float(model.next_token_logprobs(seq[:i], context)[token])
        if total == NEG_INF:
            return NEG_INF
    total += float(model.next_token_logprobs(seq, context)[EOS_ID])
    return total


@dataclass(frozen=True)
class TabularModel:
    """Exact distribution over a finite set of sequences.

    Conditionals come from prefix masses: P(t | prefix) is
    mass(prefix + t) / mass(prefix), and the EOS mass of a prefix is the
    probability of the prefix as a complete sequence.
    """

    vocab: Vocabulary
    entries: dict[Sequence, float]
    _mass: dict[Sequence, float] = field(repr=False)
    _children: dict[Sequence, tuple[int, ...]] = field(repr=False)

    def next_token_logprobs(self, prefix: Sequence, context: Sequence | None = None) -> np.ndarray:
        prefix = tuple(prefix)
        mass = self._mass.get(prefix)
        if mass is None:
            raise ZeroMassPrefixError(f"prefix has zero probability mass: {prefix}")
        out = np.full(self.vocab.num_ids, NEG_INF)
        log_mass = math.log(mass)
        exact = self.entries.get(prefix)
        if exact is not None:
            out[EOS_ID] = math.log(exact) - log_mass
        for token in self._children.get(prefix, ()):
            out[token] = math.log(self._mass[prefix + (token,)]) - log_mass
        return out

    @property
    def max_len(self) -> int:
        return max((len(s) for s in self.entries), default=0)


def tabular_model(pairs: Iterable[tuple[Sequence, float]], vocab: Vocabulary) -> TabularModel:
    """Build a TabularModel from (sequence, probability) pairs.

    Probabilities must be positive; duplicate sequences are merged by
    summation and the result is normalized to total mass 1.
    """
    merged: dict[Sequence, float] = {}
    for seq, prob in pairs:
        seq = tuple(seq)
        if prob <= 0 or not math.isfinite(prob):
            raise ValueError(f"sequence probability must be positive and finite, got {prob}")
        for token in seq:
            if token in (BOS_ID, EOS_ID):
                raise ValueError("sequences may not contain BOS/EOS ids")
            if not (token == UNK_ID or token in vocab.surface_ids):
                raise ValueError(f"token id {token} not in vocabulary")
        merged[seq] = merged.get(seq, 0.0) + prob
    if not merged:
        raise ValueError("tabular model needs at least one entry")
    total = math.fsum(merged.values())
    entries = {seq: p / total for seq, p in merged.items()}

    # Prefix masses via fsum: exact rounding makes them order-independent.
    contributions: dict[Sequence, list[float]] = {}
    child_sets: dict[Sequence, set[int]] = {}
    for seq, p in entries.items():
        for cut in range(len(seq) + 1):
            contributions.setdefault(seq[:cut], []).append(p)
            if cut < len(seq):
                child_sets.setdefault(seq[:cut], set()).add(seq[cut])
    mass = {prefix: math.fsum(parts) for prefix, parts in contributions.items()}
    children = {prefix: tuple(sorted(ids)) for prefix, ids in child_sets.items()}
    return TabularModel(vocab=vocab, entries=entries, _mass=mass, _children=children)


@dataclass(frozen=True)
class NGramLM:
    """Add-k smoothed n-gram model with EOS as an ordinary outcome.

    P(token | history) = (count + k) / (total + k * (V + 1)) where V + 1
    counts the surface vocabulary plus EOS.  UNK is scored from observed
    counts only (no pseudo-count), which keeps the distribution normalized
    when the training corpus contained out-of-vocabulary tokens.  Histories
    never seen in training fall back to the uniform smoothed distribution.
    """

    vocab: Vocabulary
    order: int
    add_k: float
    counts: dict[tuple[int, ...], dict[int, int]]

    def _history(self, prefix: Sequence) -> tuple[int, ...]:
        need = self.order - 1
        tail = tuple(prefix[-need:]) if need else ()
        return (BOS_ID,) * (need - len(tail)) + tail

    def next_token_logprobs(self, prefix: Sequence, context: Sequence | None = None) -> np.ndarray:
        hist_counts = self.counts.get(self._history(prefix), {})
        total = sum(hist_counts.values())
        smoothed_outcomes = self.vocab.size + 1  # surface tokens + EOS
        denom = total + self.add_k * smoothed_outcomes
        out = np.full(self.vocab.num_ids, NEG_INF)
        if denom == 0.0:
            # Unseen history under MLE: unreachable by search, but keep the
            # conditional well defined (uniform over smoothed outcomes).
            uniform = -math.log(smoothed_outcomes)
            out[EOS_ID] = uniform
            for token in self.vocab.surface_ids:
                out[token] = uniform
            return out
        log_denom = math.log(denom)
        for token in (EOS_ID, *self.vocab.surface_ids):
            num = hist_counts.get(token, 0) + self.add_k
            if num > 0:
                out[token] = math.log(num) - log_denom
        unk = hist_counts.get(UNK_ID, 0)
        if unk > 0:
            out[UNK_ID] = math.log(unk) - log_denom
        return out


def train_ngram_lm(corpus: Iterable[Sequence], order: int, add_k: float, vocab: Vocabulary) -> NGramLM:
    """Collect (history, event) counts with BOS padding and a terminal EOS per line."""
    if order < 1:
        raise ValueError(f"order must be >= 1, got {order}")
    if add_k < 0:
        raise ValueError(f"add_k must be >= 0, got {add_k}")
    counts: dict[tuple[int, ...], Counter[int]] = {}
    n_lines = 0
    need = order - 1
    for seq in corpus:
        n_lines += 1
        padded = (BOS_ID,) * need + tuple(seq)
        events = tuple(seq) + (EOS_ID,)
        for i, event in enumerate(events):
            history = padded[i : i + need]
            counts.setdefault(history, Counter())[event] += 1
    if n_lines == 0:
        raise ValueError("training corpus is empty")
    frozen = {hist: dict(ctr) for hist, ctr in counts.items()}
    return NGramLM(vocab=vocab, order=order, add_k=add_k, counts=frozen)


def save_model(model: NGramLM, fp: IO[str]) -> None:
    """Serialize an NGramLM as versioned JSON; saves are byte-deterministic."""
    payload = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "order": model.order,
        "add_k": model.add_k,
        "vocab": list(model.vocab.tokens),
        "counts": [
            [list(hist), [[event, count] for event, count in sorted(events.items())]]
            for hist, events in sorted(model.counts.items())
        ],
    }
    json.dump(payload, fp, sort_keys=True, separators=(",", ":"))
    fp.write("\n")


def load_model(fp: IO[str]) -> NGramLM:
    """Parse a model file written by :func:`save_model`."""
    try:
        payload = json.load(fp)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"model file is not valid JSON: {exc}") from exc
    if not isinstance(payload, dict) or payload.get("format") != MODEL_FORMAT:
        raise ModelFormatError("not a votedecode n-gram model file")
    if payload.get("version") != MODEL_VERSION:
        raise ModelFormatError(f"unsupported model file version: {payload.get('version')!r}")
    try:
        vocab = Vocabulary(tokens=tuple(payload["vocab"]))
        order = int(payload["order"])
        add_k = float(payload["add_k"])
        counts = {
            tuple(int(t) for t in hist): {int(e): int(c) for e, c in events}
            for hist, events in payload["counts"]
        }
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"malformed model file: {exc}") from exc
    return NGramLM(vocab=vocab, order=order, add_k=add_k, counts=counts)
