import pytest

from ssdpsem import corpus, sentiment
from ssdpsem.corpus import Instance, Token


@pytest.fixture(scope="session")
def lexicon():
    return sentiment.load_lexicon()


@pytest.fixture(scope="session")
def small_manifest():
    return corpus.default_manifest(seed=5, train=80, dev=24, test=24)


@pytest.fixture(scope="session")
def small_splits(small_manifest):
    return corpus.synthesize_corpus(small_manifest, 0.9)


def chain_instance(n, relation="profit_of", subj=(0, 0), obj=None, sentiment=None):
    """A left-to-right chain tree: token i+1 headed by token i, root at 0."""
    obj = obj if obj is not None else (n - 1, n - 1)
    tokens = [Token(i, f"w{i}", i - 1, "dep" if i else "root") for i in range(n)]
    return Instance(
        id=f"chain{n}", tokens=tokens, subj=subj, obj=obj,
        relation=relation, sentiment=sentiment,
    )
