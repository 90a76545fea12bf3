"""Topic modeling over app descriptions.

A collapsed Gibbs sampler estimates a latent-topic model of the description
corpus; each app gets a smoothed topic-probability vector (its functionality
profile) used downstream for similarity and support mining.

Sampling draws come from per-document RNG streams keyed by (seed, doc id) and
documents are swept in canonical id order, so training is invariant to the
order documents are supplied in.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np
from numba import njit

from .stemming import stem
from .util import subseed

_WORD_RE = re.compile(r"[a-z]+")


def load_stopwords() -> frozenset[str]:
    """The English stopword list shipped with the package."""
    text = (resources.files("minperm.data") / "stopwords.txt").read_text("utf-8")
    words = set()
    for line in text.splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            words.add(line)
    return frozenset(words)


def tokenize(text: str, stopwords: frozenset[str]) -> list[str]:
    """Lowercase, split on non-alphabetic runs, drop stopwords and short tokens, stem."""
    words = _WORD_RE.findall(text.lower())
    return [stem(w) for w in words if len(w) >= 3 and w not in stopwords]


@njit(cache=True)
def _train_sweep(tokens, z, ndk_d, nkw, nk, alpha, beta, u):  # pragma: no cover - jit
    n_topics = nk.shape[0]
    vb = nkw.shape[1] * beta
    for j in range(tokens.shape[0]):
        w = tokens[j]
        old = z[j]
        ndk_d[old] -= 1.0
        nkw[old, w] -= 1.0
        nk[old] -= 1.0
        total = 0.0
        for k in range(n_topics):
            total += (ndk_d[k] + alpha) * (nkw[k, w] + beta) / (nk[k] + vb)
        r = u[j] * total
        acc = 0.0
        new = n_topics - 1
        for k in range(n_topics):
            acc += (ndk_d[k] + alpha) * (nkw[k, w] + beta) / (nk[k] + vb)
            if acc > r:
                new = k
                break
        ndk_d[new] += 1.0
        nkw[new, w] += 1.0
        nk[new] += 1.0
        z[j] = new


@njit(cache=True)
def _foldin_sweep(tokens, z, ndk_d, phi, alpha, u):  # pragma: no cover - jit
    n_topics = ndk_d.shape[0]
    for j in range(tokens.shape[0]):
        w = tokens[j]
        old = z[j]
        ndk_d[old] -= 1.0
        total = 0.0
        for k in range(n_topics):
            total += phi[k, w] * (ndk_d[k] + alpha)
        r = u[j] * total
        acc = 0.0
        new = n_topics - 1
        for k in range(n_topics):
            acc += phi[k, w] * (ndk_d[k] + alpha)
            if acc > r:
                new = k
                break
        ndk_d[new] += 1.0
        z[j] = new


@dataclass
class TopicModel:
    """Trained topic model: vocabulary plus a row-stochastic topic-word matrix."""

    k: int
    alpha: float
    beta: float
    vocab: dict[str, int]
    topic_word: np.ndarray
    seed: int

    def __post_init__(self) -> None:
        if self.k < 2:
            raise ValueError(f"topic count must be >= 2, got {self.k}")
        sums = self.topic_word.sum(axis=1)
        if self.topic_word.shape[0] != self.k or not np.allclose(sums, 1.0, atol=1e-9):
            raise ValueError("topic_word must be a k-row row-stochastic matrix")

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "alpha": self.alpha,
            "beta": self.beta,
            "seed": self.seed,
            "vocab": self.vocab,
            "topic_word": [[float(v) for v in row] for row in self.topic_word],
        }

    @property
    def fingerprint(self) -> str:
        """Stable short hash identifying (vocab, hyperparameters, topic_word)."""
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]

    def save(self, path: str | Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f, sort_keys=True, indent=1)
            f.write("\n")

    @classmethod
    def load(cls, path: str | Path) -> "TopicModel":
        with open(path, "r", encoding="utf-8") as f:
            d = json.load(f)
        return cls(
            k=d["k"],
            alpha=d["alpha"],
            beta=d["beta"],
            vocab={str(t): int(i) for t, i in d["vocab"].items()},
            topic_word=np.array(d["topic_word"], dtype=np.float64),
            seed=d["seed"],
        )


def _smoothed_rows(ndk: np.ndarray, alpha: float) -> np.ndarray:
    rows = ndk + alpha
    rows /= rows.sum(axis=1, keepdims=True)
    return rows


def train_lda(
    docs: list[list[str]],
    k: int,
    alpha: float,
    beta: float,
    iterations: int,
    seed: int,
    doc_ids: list[str] | None = None,
) -> tuple[TopicModel, np.ndarray]:
    """Train by collapsed Gibbs sampling.

    Returns the model and the document-topic probability matrix with one row
    per input document, in input order. Rows are smoothed
    (count + alpha) / (len + k * alpha), so every entry lies in (0, 1).
    """
    if k < 2:
        raise ValueError(f"topic count must be >= 2, got {k}")
    if iterations < 1:
        raise ValueError(f"iterations must be >= 1, got {iterations}")
    if not docs:
        raise ValueError("no documents given")
    if doc_ids is None:
        doc_ids = [f"{i:08d}" for i in range(len(docs))]
    if len(doc_ids) != len(docs):
        raise ValueError("doc_ids and docs must have matching lengths")
    if len(set(doc_ids)) != len(doc_ids):
        raise ValueError("doc_ids must be unique")
    for i, doc in enumerate(docs):
        if not doc:
            raise ValueError(f"document {i} (id={doc_ids[i]!r}) is empty after tokenization")

    order = sorted(range(len(docs)), key=lambda i: doc_ids[i])

    vocab: dict[str, int] = {}
    for i in order:
        for tok in docs[i]:
            if tok not in vocab:
                vocab[tok] = len(vocab)
    n_vocab = len(vocab)

    token_arrays = [np.array([vocab[t] for t in doc], dtype=np.int64) for doc in docs]
    rngs = [np.random.default_rng(subseed(seed, "doc", doc_id)) for doc_id in doc_ids]

    ndk = np.zeros((len(docs), k), dtype=np.float64)
    nkw = np.zeros((k, n_vocab), dtype=np.float64)
    nk = np.zeros(k, dtype=np.float64)
    assignments: list[np.ndarray] = [np.empty(0, dtype=np.int64)] * len(docs)
    for i in order:
        toks = token_arrays[i]
        z = np.minimum((rngs[i].random(toks.shape[0]) * k).astype(np.int64), k - 1)
        assignments[i] = z
        for j in range(toks.shape[0]):
            ndk[i, z[j]] += 1.0
            nkw[z[j], toks[j]] += 1.0
            nk[z[j]] += 1.0

    for _ in range(iterations):
        for i in order:
            toks = token_arrays[i]
            u = rngs[i].random(toks.shape[0])
            _train_sweep(toks, assignments[i], ndk[i], nkw, nk, alpha, beta, u)

    topic_word = (nkw + beta) / (nk + n_vocab * beta)[:, None]
    topic_word /= topic_word.sum(axis=1, keepdims=True)
    model = TopicModel(k=k, alpha=alpha, beta=beta, vocab=vocab, topic_word=topic_word, seed=seed)
    return model, _smoothed_rows(ndk, alpha)


def infer(
    model: TopicModel,
    doc: list[str],
    iterations: int,
    seed: int,
    uniform_fallback: bool = False,
) -> np.ndarray:
    """Fold-in inference for one document with the topic-word matrix held fixed.

    Out-of-vocabulary tokens are dropped. A document with no in-vocabulary
    tokens raises, unless uniform_fallback is set, in which case the uniform
    vector 1/k is returned.
    """
    tokens = np.array([model.vocab[t] for t in doc if t in model.vocab], dtype=np.int64)
    if tokens.shape[0] == 0:
        if uniform_fallback:
            return np.full(model.k, 1.0 / model.k)
        raise ValueError("document has no in-vocabulary tokens")
    rng = np.random.default_rng(subseed(seed, "foldin"))
    k = model.k
    ndk = np.zeros((1, k), dtype=np.float64)
    z = np.minimum((rng.random(tokens.shape[0]) * k).astype(np.int64), k - 1)
    for j in range(tokens.shape[0]):
        ndk[0, z[j]] += 1.0
    for _ in range(iterations):
        u = rng.random(tokens.shape[0])
        _foldin_sweep(tokens, z, ndk[0], model.topic_word, model.alpha, u)
    return _smoothed_rows(ndk, model.alpha)[0]


def default_alpha(k: int) -> float:
    """Standard heuristic document-topic concentration: 50 / k."""
    return 50.0 / k
