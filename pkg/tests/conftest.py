import pytest

from dlgkit import bpe, synth
from dlgkit.entities import CharTrigramEmbedder


@pytest.fixture(scope="session")
def kb():
    return synth.make_kb(6, seed=11)


@pytest.fixture(scope="session")
def corpus_and_truth(kb):
    return synth.generate_corpus(kb, 18, seed=11)


@pytest.fixture(scope="session")
def small_corpus(corpus_and_truth):
    return corpus_and_truth[0]


@pytest.fixture(scope="session")
def small_truth(corpus_and_truth):
    return corpus_and_truth[1]


@pytest.fixture(scope="session")
def embedder():
    return CharTrigramEmbedder()


@pytest.fixture(scope="session")
def tokenizer(small_corpus):
    text = "\n".join(u.text for d in small_corpus.dialogues
                     for u in d.utterances)
    tok = bpe.BPETokenizer()
    tok.train(text[:60_000], 150)
    return tok


@pytest.fixture(scope="session")
def full_scale():
    """The expensive headline-scale corpus, generated once per session."""
    return synth.full_scale_corpus()
