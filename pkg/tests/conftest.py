"""Shared fixtures: hand-annotated sentences and small embedding stores."""

import numpy as np
import pytest

from soundkb.corpus import parse_block
from soundkb.embeddings import EmbeddingStore

# "The park was filled with the sound of children playing", with its
# eight dependencies.  The collapsed prepositions carry no edge.
PARK_BLOCK = """\
1\tThe\tDT\t2\tdet
2\tpark\tNN\t4\tnsubjpass
3\twas\tVBD\t4\tauxpass
4\tfilled\tVBN\t0\troot
5\twith\tIN\t_\t_
6\tthe\tDT\t7\tdet
7\tsound\tNN\t10\tnsubj
8\tof\tIN\t_\t_
9\tchildren\tNNS\t7\tprep_of
10\tplaying\tVBG\t4\tprepc_with"""

PARK_EDGES = {
    ("det", 2, 1),
    ("nsubjpass", 4, 2),
    ("auxpass", 4, 3),
    ("root", 0, 4),
    ("det", 7, 6),
    ("nsubj", 10, 7),
    ("prep_of", 7, 9),
    ("prepc_with", 4, 10),
}

# One sentence per valid pattern plus one rejected "sound of JJ" sentence.
PATTERN_EXAMPLES_CORPUS = """\
# pattern fixture corpus
1\tThe\tDT\t2\tdet
2\tsound\tNN\t6\tnsubj
3\tof\tIN\t_\t_
4\thonking\tVBG\t5\tamod
5\tcars\tNNS\t2\tprep_of
6\tfilled\tVBD\t0\troot
7\tthe\tDT\t8\tdet
8\tstreet\tNN\t6\tdobj
9\t.\t.\t6\tpunct

1\tWe\tPRP\t2\tnsubj
2\theard\tVBD\t0\troot
3\tthe\tDT\t4\tdet
4\tsound\tNN\t2\tdobj
5\tof\tIN\t_\t_
6\tyelling\tVBG\t4\tprep_of
7\t.\t.\t2\tpunct

1\tThe\tDT\t2\tdet
2\tsound\tNN\t6\tnsubj
3\tof\tIN\t_\t_
4\tdogs\tNNS\t2\tprep_of
5\tbarking\tVBG\t4\tpartmod
6\twoke\tVBD\t0\troot
7\thim\tPRP\t6\tdobj
8\t.\t.\t6\tpunct

1\tThey\tPRP\t2\tnsubj
2\theard\tVBD\t0\troot
3\tthe\tDT\t4\tdet
4\tsounds\tNNS\t2\tdobj
5\tof\tIN\t_\t_
6\tgunshots\tNNS\t4\tprep_of
7\t.\t.\t2\tpunct

1\tThe\tDT\t2\tdet
2\tsound\tNN\t7\tnsubj
3\tof\tIN\t_\t_
4\ta\tDT\t6\tdet
5\tstring\tNN\t6\tnn
6\tquartet\tNN\t2\tprep_of
7\tdrifted\tVBD\t0\troot
8\tby\tIN\t7\tprep
9\t.\t.\t7\tpunct

1\tShe\tPRP\t2\tnsubj
2\tloves\tVBZ\t0\troot
3\tthe\tDT\t4\tdet
4\tsound\tNN\t2\tdobj
5\tof\tIN\t_\t_
6\tclassical\tJJ\t7\tamod
7\tmusic\tNN\t4\tprep_of
8\t.\t.\t2\tpunct

1\tHe\tPRP\t2\tnsubj
2\tspoke\tVBD\t0\troot
3\tof\tIN\t_\t_
4\tthe\tDT\t5\tdet
5\tsound\tNN\t2\tprep_of
6\tof\tIN\t_\t_
7\tbeautiful\tJJ\t5\tprep_of
8\t.\t.\t2\tpunct
"""

CANONICAL_CONCEPTS = {
    "honking cars": "P1",
    "yelling": "P2",
    "dogs barking": "P3",
    "gunshots": "P4",
    "string quartet": "P5",
    "classical music": "P6",
}


def block_to_sentence(block: str, sent_id: str = "test"):
    lines = list(enumerate(block.splitlines(), 1))
    return parse_block(lines, sent_id=sent_id)


@pytest.fixture
def park_sentence():
    return block_to_sentence(PARK_BLOCK, sent_id="park:1")


@pytest.fixture
def pattern_corpus_file(tmp_path):
    path = tmp_path / "table1.ann"
    path.write_text(PATTERN_EXAMPLES_CORPUS, encoding="utf-8")
    return path


def make_store(vectors: dict[str, list[float]]) -> EmbeddingStore:
    arrays = {w: np.asarray(v, dtype=np.float64) for w, v in vectors.items()}
    dims = {a.shape[0] for a in arrays.values()}
    assert len(dims) == 1
    return EmbeddingStore(dims.pop(), arrays)


def separable_phrase_data(n_per_class: int, dim: int, seed: int, margin: float = 2.0):
    """Bigram dataset that a known hyperplane separates with the given margin.

    Word vectors are placed at +/- (margin + noise) along the first axis,
    so every AWV feature satisfies y * u.x >= margin for u = e_1.  The
    caller should re-verify the margin exhaustively before relying on it.
    """
    rng = np.random.default_rng(seed)
    vectors = {}
    labeled = []
    for i in range(n_per_class):
        for sign, label in ((1.0, +1), (-1.0, -1)):
            tag = "p" if label > 0 else "n"
            w1, w2 = f"{tag}{i}a", f"{tag}{i}b"
            for w in (w1, w2):
                vec = rng.normal(0.0, 0.25, size=dim)
                vec[0] = sign * (margin + abs(rng.normal(0.0, 0.5)))
                vectors[w] = vec
            labeled.append(((w1, w2), label))
    return make_store(vectors), labeled
