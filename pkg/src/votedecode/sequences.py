"""Token, sequence, and n-gram primitives shared by the rest of the package.

A sequence is a plain tuple of vocabulary ids.  Begin/end markers are
model-side bookkeeping and never stored in a sequence, so n-gram statistics
are always over surface tokens only.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Iterable

Sequence = tuple[int, ...]
NGram = tuple[int, ...]

BOS_ID = 0
EOS_ID = 1
UNK_ID = 2
NUM_RESERVED = 3

# Surface forms used when serializing reserved ids; real tokens may not
# collide with these.
BOS_MARK = "<bos>"
EOS_MARK = "<eos>"
UNK_MARK = "<unk>"
RESERVED_MARKS = frozenset({BOS_MARK, EOS_MARK, UNK_MARK})


@dataclass(frozen=True)
class Vocabulary:
    """Closed word-level vocabulary with three reserved ids.

    Ids 0, 1, 2 are BOS, EOS, UNK; surface tokens occupy ids 3 onward in
    the order given.  The id <-> string mapping is a bijection.
    """

    tokens: tuple[str, ...]

    def __post_init__(self):
        index: dict[str, int] = {}
        for offset, token in enumerate(self.tokens):
            if not token or token.split() != [token]:
                raise ValueError(f"vocabulary token may not contain whitespace: {token!r}")
            if token in RESERVED_MARKS:
                raise ValueError(f"vocabulary token collides with a reserved marker: {token!r}")
            if token in index:
                raise ValueError(f"duplicate vocabulary token: {token!r}")
            index[token] = NUM_RESERVED + offset
        object.__setattr__(self, "_index", index)

    @property
    def size(self) -> int:
        """Number of surface tokens (reserved ids excluded)."""
        return len(self.tokens)

    @property
    def num_ids(self) -> int:
        """Total id space: reserved ids plus surface tokens."""
        return NUM_RESERVED + len(self.tokens)

    @property
    def surface_ids(self) -> range:
        return range(NUM_RESERVED, self.num_ids)

    def id_of(self, token: str) -> int:
        """Id for a surface string; unknown strings map to UNK."""
        return self._index.get(token, UNK_ID)

    def token_of(self, token_id: int) -> str:
        if token_id == BOS_ID:
            return BOS_MARK
        if token_id == EOS_ID:
            return EOS_MARK
        if token_id == UNK_ID:
            return UNK_MARK
        if NUM_RESERVED <= token_id < self.num_ids:
            return self.tokens[token_id - NUM_RESERVED]
        raise KeyError(f"id {token_id} not in vocabulary")

    def __contains__(self, token: str) -> bool:
        return token in self._index


def tokenize(text: str, vocab: Vocabulary, lowercase: bool = False) -> Sequence:
    """Whitespace-split ``text`` and map each token to its vocabulary id.

    Out-of-vocabulary tokens map to UNK; this is a total function.  When
    ``lowercase`` is set, lowercasing happens before lookup.
    """
    words = text.split()
    if lowercase:
        words = [w.lower() for w in words]
    return tuple(vocab.id_of(w) for w in words)


def detokenize(seq: Iterable[int], vocab: Vocabulary) -> str:
    """Join surface strings with single spaces (UNK renders as its marker)."""
    return " ".join(vocab.token_of(t) for t in seq)


def ngram_bag(seq: Sequence, n: int) -> Counter[NGram]:
    """Multiset of all contiguous n-grams of ``seq``; empty when len(seq) < n."""
    if n < 1:
        raise ValueError(f"n-gram order must be >= 1, got {n}")
    return Counter(tuple(seq[i : i + n]) for i in range(len(seq) - n + 1))


def ngram_set(seq: Sequence, n: int) -> frozenset[NGram]:
    """Set of distinct contiguous n-grams of ``seq``."""
    if n < 1:
        raise ValueError(f"n-gram order must be >= 1, got {n}")
    return frozenset(tuple(seq[i : i + n]) for i in range(len(seq) - n + 1))


def build_vocabulary(lines: Iterable[str], lowercase: bool = False, max_size: int | None = None) -> Vocabulary:
    """Build a vocabulary from raw text lines.

    Tokens are ordered most-frequent first (ties broken alphabetically) so an
    optional ``max_size`` keeps the most common words.
    """
    counts: Counter[str] = Counter()
    for line in lines:
        words = line.split()
        if lowercase:
            words = [w.lower() for w in words]
        counts.update(w for w in words if w not in RESERVED_MARKS)
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    if max_size is not None:
        ranked = ranked[:max_size]
    return Vocabulary(tokens=tuple(tok for tok, _ in ranked))
