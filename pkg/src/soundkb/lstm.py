"""Recurrent encoder for rendered dependency paths and relation classifier.

The encoder embeds each path token (words and edge-label tokens such as
``amod()`` alike), runs a single-layer LSTM left to right, and decodes
the final hidden state through a linear layer and a softmax into
probabilities for the two relation labels (positive first).  Everything
is plain numpy with hand-written backpropagation through time so the
gradients can be checked against finite differences.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import IO, Iterable, Sequence

import numpy as np

from .embeddings import EmbeddingStore
from .paths import POSITIVE, RelationExample

PRETRAINED = "pretrained"
LEARNED = "learned"
UNK_TOKEN = "<unk>"


def is_edge_label(token: str) -> bool:
    return token.endswith("()")


def tokenize_path(path: str) -> list[str]:
    return path.split()


class PathVocab:
    """Dense token ids over path tokens, each flagged pretrained or learned."""

    def __init__(self, tokens: Sequence[str], flags: Sequence[str]):
        if len(tokens) != len(flags):
            raise ValueError("tokens and flags differ in length")
        self.tokens = list(tokens)
        self.flags = list(flags)
        self.ids = {tok: i for i, tok in enumerate(self.tokens)}
        if len(self.ids) != len(self.tokens):
            raise ValueError("duplicate vocabulary token")
        if UNK_TOKEN not in self.ids:
            raise ValueError("vocabulary must contain the unknown token")
        for token, flag in zip(self.tokens, self.flags):
            if flag not in (PRETRAINED, LEARNED):
                raise ValueError(f"bad flag {flag!r}")
            if is_edge_label(token) and flag != LEARNED:
                raise ValueError(f"edge label {token!r} must be learned")

    def __len__(self) -> int:
        return len(self.tokens)

    def id_of(self, token: str) -> int:
        """Id of a token; unseen tokens map to the learned unknown row."""
        return self.ids.get(token, self.ids[UNK_TOKEN])

    def is_learned(self, token_id: int) -> bool:
        return self.flags[token_id] == LEARNED

    @property
    def learned_ids(self) -> list[int]:
        return [i for i, flag in enumerate(self.flags) if flag == LEARNED]


def build_vocab(
    paths: Iterable[Sequence[str]], store: EmbeddingStore | None = None
) -> PathVocab:
    """Vocabulary over all tokens of the given paths, in first-seen order.

    A token is flagged pretrained when it is a word found in the
    embedding store; edge labels and out-of-store words are learned.
    """
    tokens = [UNK_TOKEN]
    flags = [LEARNED]
    seen = {UNK_TOKEN}
    for path in paths:
        for token in path:
            if token in seen:
                continue
            seen.add(token)
            tokens.append(token)
            if not is_edge_label(token) and store is not None and token in store:
                flags.append(PRETRAINED)
            else:
                flags.append(LEARNED)
    return PathVocab(tokens, flags)


_GATE_FIELDS = ("W_xi", "W_xf", "W_xo", "W_xu")
_RECUR_FIELDS = ("U_hi", "U_hf", "U_ho", "U_hu")
_BIAS_FIELDS = ("b_i", "b_f", "b_o", "b_u")
ARRAY_FIELDS = ("E",) + _GATE_FIELDS + _RECUR_FIELDS + _BIAS_FIELDS + ("W_r",)


@dataclass
class LstmParams:
    E: np.ndarray
    W_xi: np.ndarray
    W_xf: np.ndarray
    W_xo: np.ndarray
    W_xu: np.ndarray
    U_hi: np.ndarray
    U_hf: np.ndarray
    U_ho: np.ndarray
    U_hu: np.ndarray
    b_i: np.ndarray
    b_f: np.ndarray
    b_o: np.ndarray
    b_u: np.ndarray
    W_r: np.ndarray

    @property
    def d(self) -> int:
        return self.E.shape[1]

    @property
    def h(self) -> int:
        return self.W_xi.shape[0]

    def arrays(self) -> list[np.ndarray]:
        return [getattr(self, name) for name in ARRAY_FIELDS]


LstmGrads = LstmParams  # same structure, holds d(loss)/d(parameter)


@dataclass
class TrainConfig:
    learning_rate: float = 0.05
    epochs: int = 50
    seed: int = 0
    init_scale: float = 0.1
    clip: float = 5.0
    fine_tune_words: bool = False

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError("learning rate must be >= 0")
        if self.epochs < 1:
            raise ValueError("epochs must be positive")
        if self.init_scale <= 0:
            raise ValueError("init scale must be positive")
        if self.clip <= 0:
            raise ValueError("clip threshold must be positive")


def init_params(
    vocab: PathVocab,
    d: int,
    h: int,
    store: EmbeddingStore | None = None,
    seed: int = 0,
    init_scale: float = 0.1,
) -> LstmParams:
    """Seeded parameter initialization.

    Pretrained word rows are copied from the store verbatim; learned rows
    (edge labels, unknown words) are uniform in [-init_scale, init_scale].
    Gate weights are uniform in [-1/sqrt(h), 1/sqrt(h)] and the forget
    gate bias starts at 1 so early cell states survive.
    """
    if store is not None and store.dimension != d:
        raise ValueError(
            f"embedding store dimension {store.dimension} != requested d={d}"
        )
    rng = np.random.default_rng(seed)
    E = rng.uniform(-init_scale, init_scale, size=(len(vocab), d))
    for token_id, token in enumerate(vocab.tokens):
        if vocab.flags[token_id] == PRETRAINED:
            vector = store.get(token) if store is not None else None
            if vector is None:
                raise ValueError(f"token {token!r} flagged pretrained but not in store")
            E[token_id] = vector
    scale = 1.0 / np.sqrt(h)
    def gate(rows, cols):
        return rng.uniform(-scale, scale, size=(rows, cols))

    return LstmParams(
        E=E,
        W_xi=gate(h, d), W_xf=gate(h, d), W_xo=gate(h, d), W_xu=gate(h, d),
        U_hi=gate(h, h), U_hf=gate(h, h), U_ho=gate(h, h), U_hu=gate(h, h),
        b_i=np.zeros(h), b_f=np.ones(h), b_o=np.zeros(h), b_u=np.zeros(h),
        W_r=gate(2, h),
    )


def zero_params(vocab_size: int, d: int, h: int) -> LstmParams:
    """All-zero parameters, handy for analytic checks."""
    return LstmParams(
        E=np.zeros((vocab_size, d)),
        W_xi=np.zeros((h, d)), W_xf=np.zeros((h, d)),
        W_xo=np.zeros((h, d)), W_xu=np.zeros((h, d)),
        U_hi=np.zeros((h, h)), U_hf=np.zeros((h, h)),
        U_ho=np.zeros((h, h)), U_hu=np.zeros((h, h)),
        b_i=np.zeros(h), b_f=np.zeros(h), b_o=np.zeros(h), b_u=np.zeros(h),
        W_r=np.zeros((2, h)),
    )


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def softmax(z: np.ndarray) -> np.ndarray:
    shifted = np.exp(z - np.max(z))
    return shifted / shifted.sum()


def _step(params: LstmParams, x, h_prev, c_prev):
    i = _sigmoid(params.W_xi @ x + params.U_hi @ h_prev + params.b_i)
    f = _sigmoid(params.W_xf @ x + params.U_hf @ h_prev + params.b_f)
    o = _sigmoid(params.W_xo @ x + params.U_ho @ h_prev + params.b_o)
    u = np.tanh(params.W_xu @ x + params.U_hu @ h_prev + params.b_u)
    c = i * u + f * c_prev
    tanh_c = np.tanh(c)
    h = o * tanh_c
    return i, f, o, u, c, tanh_c, h


def lstm_cell(
    params: LstmParams, x: np.ndarray, h_prev: np.ndarray, c_prev: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """One gated memory-cell update; returns (h_t, c_t)."""
    x = np.asarray(x, dtype=np.float64)
    h_prev = np.asarray(h_prev, dtype=np.float64)
    c_prev = np.asarray(c_prev, dtype=np.float64)
    d, h = params.d, params.h
    if x.shape != (d,) or h_prev.shape != (h,) or c_prev.shape != (h,):
        raise ValueError(
            f"shape mismatch: x{x.shape}, h{h_prev.shape}, c{c_prev.shape} "
            f"for d={d}, h={h}"
        )
    if not (np.isfinite(x).all() and np.isfinite(h_prev).all() and np.isfinite(c_prev).all()):
        raise ValueError("non-finite input to lstm_cell")
    *_, c, _tanh_c, h_new = _step(params, x, h_prev, c_prev)
    return h_new, c


@dataclass
class PathEncoding:
    hs: np.ndarray
    cs: np.ndarray

    @property
    def v_p(self) -> np.ndarray:
        return self.hs[-1]


def _ids_for(vocab: PathVocab, tokens: Sequence[str]) -> list[int]:
    if not tokens:
        raise ValueError("empty path")
    return [vocab.id_of(t) for t in tokens]


def _forward(params: LstmParams, ids: Sequence[int]):
    h = np.zeros(params.h)
    c = np.zeros(params.h)
    caches = []
    for token_id in ids:
        x = params.E[token_id]
        i, f, o, u, c_new, tanh_c, h_new = _step(params, x, h, c)
        caches.append((token_id, x, h, c, i, f, o, u, c_new, tanh_c))
        h, c = h_new, c_new
    return h, c, caches


def encode_path(
    params: LstmParams, vocab: PathVocab, tokens: Sequence[str]
) -> PathEncoding:
    """Run the cell over the embedded tokens from zero initial state."""
    ids = _ids_for(vocab, tokens)
    hs = []
    cs = []
    h = np.zeros(params.h)
    c = np.zeros(params.h)
    for token_id in ids:
        *_, c, _tanh_c, h = _step(params, params.E[token_id], h, c)
        hs.append(h)
        cs.append(c)
    return PathEncoding(hs=np.array(hs), cs=np.array(cs))


def predict_relation(
    params: LstmParams, vocab: PathVocab, tokens: Sequence[str]
) -> tuple[float, float]:
    """Probabilities (positive, negative) for a path."""
    ids = _ids_for(vocab, tokens)
    h, _c, _caches = _forward(params, ids)
    p = softmax(params.W_r @ h)
    return float(p[0]), float(p[1])


def label_index(label: str) -> int:
    return 0 if label == POSITIVE else 1


def loss_and_gradients(
    params: LstmParams,
    vocab: PathVocab,
    example: RelationExample,
    fine_tune_words: bool = False,
) -> tuple[float, LstmGrads]:
    """Cross-entropy loss and its gradients via backpropagation through time.

    Embedding gradients flow only into learned rows unless word
    fine-tuning is enabled; frozen rows stay exactly zero.
    """
    tokens = tokenize_path(example.path)
    target = label_index(example.label)
    ids = _ids_for(vocab, tokens)
    h_final, _c, caches = _forward(params, ids)
    p = softmax(params.W_r @ h_final)
    loss = -np.log(p[target]) if p[target] > 0 else np.inf
    if not np.isfinite(loss):
        raise ArithmeticError(f"non-finite loss for path {example.path!r}")

    grads = zero_params(len(vocab), params.d, params.h)
    dz = p.copy()
    dz[target] -= 1.0
    grads.W_r += np.outer(dz, h_final)
    dh = params.W_r.T @ dz
    dc = np.zeros(params.h)
    for token_id, x, h_prev, c_prev, i, f, o, u, c_new, tanh_c in reversed(caches):
        do = dh * tanh_c
        dc = dc + dh * o * (1.0 - tanh_c * tanh_c)
        da_i = (dc * u) * i * (1.0 - i)
        da_f = (dc * c_prev) * f * (1.0 - f)
        da_o = do * o * (1.0 - o)
        da_u = (dc * i) * (1.0 - u * u)
        grads.W_xi += np.outer(da_i, x)
        grads.W_xf += np.outer(da_f, x)
        grads.W_xo += np.outer(da_o, x)
        grads.W_xu += np.outer(da_u, x)
        grads.U_hi += np.outer(da_i, h_prev)
        grads.U_hf += np.outer(da_f, h_prev)
        grads.U_ho += np.outer(da_o, h_prev)
        grads.U_hu += np.outer(da_u, h_prev)
        grads.b_i += da_i
        grads.b_f += da_f
        grads.b_o += da_o
        grads.b_u += da_u
        if fine_tune_words or vocab.is_learned(token_id):
            grads.E[token_id] += (
                params.W_xi.T @ da_i
                + params.W_xf.T @ da_f
                + params.W_xo.T @ da_o
                + params.W_xu.T @ da_u
            )
        dh = (
            params.U_hi.T @ da_i
            + params.U_hf.T @ da_f
            + params.U_ho.T @ da_o
            + params.U_hu.T @ da_u
        )
        dc = dc * f
    return float(loss), grads


def _global_norm(grads: LstmGrads) -> float:
    return float(np.sqrt(sum(float((a * a).sum()) for a in grads.arrays())))


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    mean_loss: float
    accuracy: float


def train(
    params: LstmParams,
    vocab: PathVocab,
    examples: Sequence[RelationExample],
    config: TrainConfig,
) -> tuple[LstmParams, list[EpochStats]]:
    """Seeded per-example gradient descent with global-norm clipping.

    Mutates ``params`` in place and returns it with the per-epoch
    loss/accuracy trace.  Identical data, config, and initial parameters
    reproduce the trace bit for bit.
    """
    labels = {ex.label for ex in examples}
    if len(labels) < 2:
        raise ValueError("training data must contain both relation labels")
    rng = np.random.default_rng(config.seed)
    n = len(examples)
    trace = []
    for epoch in range(1, config.epochs + 1):
        total = 0.0
        for idx in rng.permutation(n):
            example = examples[int(idx)]
            try:
                loss, grads = loss_and_gradients(
                    params, vocab, example, fine_tune_words=config.fine_tune_words
                )
            except ArithmeticError as err:
                raise RuntimeError(
                    f"training diverged at epoch {epoch}: {err}"
                ) from err
            total += loss
            norm = _global_norm(grads)
            scale = config.learning_rate
            if norm > config.clip:
                scale *= config.clip / norm
            if scale:
                for target, grad in zip(params.arrays(), grads.arrays()):
                    target -= scale * grad
        accuracy = evaluate(params, vocab, examples)
        trace.append(EpochStats(epoch, total / n, accuracy))
    return params, trace


def evaluate(
    params: LstmParams, vocab: PathVocab, examples: Sequence[RelationExample]
) -> float:
    """Fraction of examples whose higher-probability label is correct."""
    correct = 0
    for example in examples:
        p_pos, p_neg = predict_relation(params, vocab, tokenize_path(example.path))
        predicted = 0 if p_pos > p_neg else 1
        if predicted == label_index(example.label):
            correct += 1
    return correct / len(examples)


def _round9(value: float) -> float:
    return float(f"{value:.9g}")


def _matrix9(array: np.ndarray) -> list:
    if array.ndim == 1:
        return [_round9(v) for v in array]
    return [[_round9(v) for v in row] for row in array]


def save_relation_model(params: LstmParams, vocab: PathVocab, out: IO[str]) -> None:
    doc = {
        "format": "soundkb-relation-model",
        "version": 1,
        "d": params.d,
        "h": params.h,
        "vocab": [[tok, flag] for tok, flag in zip(vocab.tokens, vocab.flags)],
    }
    for name in ARRAY_FIELDS:
        doc[name] = _matrix9(getattr(params, name))
    json.dump(doc, out)
    out.write("\n")


def load_relation_model(source: Iterable[str] | IO[str]) -> tuple[LstmParams, PathVocab]:
    text = source.read() if hasattr(source, "read") else "".join(source)
    doc = json.loads(text)
    if doc.get("format") != "soundkb-relation-model":
        raise ValueError("not a relation model file")
    vocab = PathVocab([t for t, _ in doc["vocab"]], [f for _, f in doc["vocab"]])
    arrays = {name: np.array(doc[name], dtype=np.float64) for name in ARRAY_FIELDS}
    params = LstmParams(**arrays)
    if params.d != doc["d"] or params.h != doc["h"] or params.E.shape[0] != len(vocab):
        raise ValueError("relation model dimensions are inconsistent")
    return params, vocab
