import numpy as np
import pytest

from votedecode import SimilaritySpec, Vocabulary, tabular_model, tokenize

# Tabular toy distribution used across modules: support {"a b", "a c", "d"}.
ABD_ENTRIES = [("a b", 0.5), ("a c", 0.3), ("d", 0.2)]

# Five-sequence vote-splitting fixture: one short generic output holding the
# largest single mass against a family of near-duplicate long outputs.
FIXTURE5 = [
    ("ok", 0.30),
    ("the tall man runs fast", 0.18),
    ("the tall man runs quickly", 0.18),
    ("the tall man is running fast", 0.17),
    ("the tall man sprints", 0.17),
]

# Ten-caption fixture: beam outputs with probabilities for one image.
CAPTIONS10 = [
    ("a couple of people that are sitting on a bench", 0.00230),
    ("a man sitting on a bench next to a dog", 0.00132),
    ("a black and white photo of a man sitting on a bench", 0.00079),
    ("a couple of people sitting on a bench", 0.00075),
    ("a man sitting on a bench with a dog", 0.00066),
    ("a man and a woman sitting on a bench", 0.00064),
    ("a man and a woman sitting on a park bench", 0.00048),
    ("a black and white photo of a man and a horse", 0.00046),
    ("a black and white photo of a man and a dog", 0.00033),
    ("a black and white photo of a man on a horse", 0.00025),
]


def vocab_over(texts):
    tokens = sorted({tok for text in texts for tok in text.split()})
    return Vocabulary(tokens=tuple(tokens))


def model_from_texts(entries):
    vocab = vocab_over([text for text, _ in entries])
    return tabular_model([(tokenize(t, vocab), p) for t, p in entries], vocab), vocab


def toy_vectors(vocab, dim=4, seed=0):
    """Deterministic dense vectors for every surface id (embed_cosine tests)."""
    rng = np.random.default_rng(seed)
    return {i: rng.normal(size=dim) for i in vocab.surface_ids}


def all_similarity_specs(vocab, vector_seed=0):
    """One spec per implemented similarity kind, n-gram orders 1 and 2."""
    return [
        SimilaritySpec(kind="prec", n=1),
        SimilaritySpec(kind="prec", n=2),
        SimilaritySpec(kind="overl", n=1),
        SimilaritySpec(kind="overl", n=2),
        SimilaritySpec(kind="bleu", max_n=4),
        SimilaritySpec(kind="smoothed_bleu", max_n=4),
        SimilaritySpec(kind="embed_cosine", vectors=toy_vectors(vocab, seed=vector_seed)),
    ]


@pytest.fixture
def abd():
    """(model, vocab) for the three-sequence toy distribution."""
    return model_from_texts(ABD_ENTRIES)


@pytest.fixture
def fixture5():
    """(model, vocab) for the vote-splitting fixture."""
    return model_from_texts(FIXTURE5)


@pytest.fixture
def captions10():
    """(model, vocab) for the ten-caption fixture."""
    return model_from_texts(CAPTIONS10)
