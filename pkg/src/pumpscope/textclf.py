"""Pump-message classifier.

Messages are tokenized with coin symbols collapsed to one placeholder and
numbers collapsed to ``NUM``, vectorized with unigram+bigram TF-IDF, and
scored with a linear SVM trained by stochastic sub-gradient descent on the
hinge loss.
"""

import json
import math
import re
from collections import Counter
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from nltk.stem.porter import PorterStemmer

from pumpscope.corpus import NOT_PUMP, PUMP, CoinRegistry
from pumpscope.errors import DataError, ValidationError
from pumpscope.seeding import rng_for

MODEL_FORMAT = "pumpscope.classifier"
MODEL_VERSION = 1

NUM_TOKEN = "NUM"
_TOKEN_RE = re.compile(r"\$?\d+(?:[.,]\d+)*|\$?[^\W_]+", re.UNICODE)
_NUMBER_RE = re.compile(r"^\d+(?:[.,]\d+)*$")
_stemmer = PorterStemmer()


@dataclass(frozen=True)
class TokenizerConfig:
    stem: bool = True
    coin_placeholder: str = "OOV"
    ngram_range: tuple = (1, 2)

    def __post_init__(self):
        lo, hi = self.ngram_range
        if not 1 <= lo <= hi:
            raise ValidationError(f"invalid ngram_range {self.ngram_range}")
        # Normal tokens are lowercase, so an uppercase placeholder can never collide.
        if self.coin_placeholder == self.coin_placeholder.lower():
            raise ValidationError("coin_placeholder must contain an uppercase letter")
        object.__setattr__(self, "ngram_range", (int(lo), int(hi)))


def tokenize(text, registry, config=TokenizerConfig()):
    tokens = []
    for raw in _TOKEN_RE.findall(text):
        bare = raw.lstrip("$")
        if _NUMBER_RE.match(bare):
            tokens.append(NUM_TOKEN)
        elif raw.startswith("$") or registry.resolve(bare) is not None:
            tokens.append(config.coin_placeholder)
        else:
            tok = bare.lower()
            tokens.append(_stemmer.stem(tok) if config.stem else tok)
    return tokens


def ngrams(tokens, ngram_range=(1, 2)):
    lo, hi = ngram_range
    out = []
    for n in range(lo, hi + 1):
        for i in range(len(tokens) - n + 1):
            out.append(" ".join(tokens[i:i + n]))
    return out


@dataclass(frozen=True, eq=False)
class TfidfModel:
    vocabulary: dict
    idf: np.ndarray
    doc_count: int
    doc_freq: np.ndarray
    max_df: float = 0.5
    min_df: float = 0.01
    ngram_range: tuple = (1, 2)

    @property
    def size(self):
        return len(self.vocabulary)

    def terms(self):
        inv = [None] * self.size
        for term, j in self.vocabulary.items():
            inv[j] = term
        return inv


def fit_tfidf(corpus, max_df=0.5, min_df=0.01, ngram_range=(1, 2)):
    """Fit vocabulary and idf weights on a list of token lists.

    A term is kept when ``min_df*N <= df <= max_df*N`` and weighted by
    ``idf = ln(1 + N/df)``.
    """
    if not corpus:
        raise ValidationError("cannot fit TF-IDF on an empty corpus")
    n = len(corpus)
    df = Counter()
    for tokens in corpus:
        df.update(set(ngrams(tokens, ngram_range)))
    lo, hi = min_df * n, max_df * n
    eps = 1e-9 * n
    kept = sorted(t for t, c in df.items() if lo - eps <= c <= hi + eps)
    if not kept:
        raise DataError("degenerate corpus: no terms survive document-frequency filtering")
    counts = np.array([df[t] for t in kept], dtype=float)
    return TfidfModel(
        vocabulary={t: j for j, t in enumerate(kept)},
        idf=np.log1p(n / counts),
        doc_count=n,
        doc_freq=counts.astype(np.int64),
        max_df=max_df,
        min_df=min_df,
        ngram_range=tuple(ngram_range),
    )


def transform_many(model, docs):
    """TF-IDF rows (CSR, one per token list), each L2-normalized."""
    indptr, indices, data = [0], [], []
    for tokens in docs:
        tf = Counter(g for g in ngrams(tokens, model.ngram_range) if g in model.vocabulary)
        cols = sorted(model.vocabulary[g] for g in tf)
        inv = {model.vocabulary[g]: c for g, c in tf.items()}
        vals = np.array([inv[j] * model.idf[j] for j in cols], dtype=float)
        norm = math.sqrt(float(vals @ vals)) if len(vals) else 0.0
        if norm > 0:
            vals = vals / norm
        indices.extend(cols)
        data.extend(vals.tolist())
        indptr.append(len(indices))
    return sp.csr_matrix((data, indices, indptr), shape=(len(indptr) - 1, model.size))


def transform(model, tokens):
    return transform_many(model, [tokens])


@dataclass(frozen=True, eq=False)
class LinearSvm:
    weights: np.ndarray
    bias: float
    l2_lambda: float
    epochs: int
    seed: int
    objective_trace: tuple = ()


def _labels_pm1(y):
    y = np.asarray(y)
    if y.dtype.kind in "US":
        return np.where(y == PUMP, 1.0, -1.0)
    y = y.astype(float)
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise ValidationError("labels must be +1/-1")
    return y


def svm_objective(X, y, w, b, l2_lambda):
    margins = y * (X @ w + b)
    return float(np.mean(np.maximum(0.0, 1.0 - margins)) + l2_lambda * (w @ w))


def train_svm(X, y, l2_lambda=1e-4, epochs=20, seed=0):
    """Train a linear SVM by SGD on mean hinge loss + ``l2_lambda * ||w||^2``.

    Step size at update ``t`` is ``1/(l2_lambda * t)``. The bias is carried as
    the weight of a constant feature and shares the shrinkage of ``w``, which
    keeps its scale matched to ``w`` under this schedule.
    """
    X = sp.csr_matrix(X, dtype=float)
    y = _labels_pm1(y)
    if X.shape[0] != len(y):
        raise ValidationError("X and y have different lengths")
    if not (np.any(y > 0) and np.any(y < 0)):
        raise DataError("degenerate labels: need at least one sample of each class")
    if l2_lambda <= 0 or epochs < 1:
        raise ValidationError("l2_lambda must be > 0 and epochs >= 1")
    n, d = X.shape
    rows = [(X.indices[X.indptr[i]:X.indptr[i + 1]], X.data[X.indptr[i]:X.indptr[i + 1]])
            for i in range(n)]
    # w is stored as scale * v so the shrink step is O(1).
    v = np.zeros(d)
    vb = 0.0
    scale = 1.0
    rng = rng_for(seed, "svm")
    trace = []
    t = 0
    for _ in range(epochs):
        for i in rng.permutation(n):
            t += 1
            eta = 1.0 / (l2_lambda * t)
            idx, vals = rows[i]
            margin = y[i] * scale * (vals @ v[idx] + vb)
            shrink = 1.0 - 2.0 * eta * l2_lambda
            if shrink == 0.0:
                v[:] = 0.0
                vb = 0.0
                scale = 1.0
            else:
                scale *= shrink
            if margin < 1.0:
                step = eta * y[i] / scale
                v[idx] += step * vals
                vb += step
            if abs(scale) < 1e-9:
                v *= scale
                vb *= scale
                scale = 1.0
        w = scale * v
        trace.append(svm_objective(X, y, w, scale * vb, l2_lambda))
    return LinearSvm(scale * v, float(scale * vb), l2_lambda, epochs, seed, tuple(trace))


def predict(svm, vector):
    """Return ``(label, margin)`` for one feature vector."""
    if sp.issparse(vector):
        if vector.shape[1] != len(svm.weights):
            raise ValidationError(f"dimension mismatch: {vector.shape[1]} vs {len(svm.weights)}")
        margin = float((vector @ svm.weights)[0]) + svm.bias
    else:
        x = np.asarray(vector, dtype=float).ravel()
        if len(x) != len(svm.weights):
            raise ValidationError(f"dimension mismatch: {len(x)} vs {len(svm.weights)}")
        margin = float(x @ svm.weights) + svm.bias
    return (PUMP if margin >= 0 else NOT_PUMP), margin


def decision_function(svm, X):
    return np.asarray(X @ svm.weights).ravel() + svm.bias


@dataclass(frozen=True)
class ClassifierMetrics:
    base_rate: float
    accuracy: float
    precision: float
    recall: float
    f1: float


def _as_bool(values):
    out = []
    for v in values:
        if isinstance(v, str):
            if v not in (PUMP, NOT_PUMP):
                raise ValidationError(f"unknown label {v!r}")
            out.append(v == PUMP)
        else:
            out.append(bool(v) and v != -1)
    return np.array(out, dtype=bool)


def evaluate(preds, labels):
    """Confusion-matrix metrics with the pump class as positive."""
    if len(preds) != len(labels):
        raise ValidationError("preds and labels have different lengths")
    if len(preds) == 0:
        raise ValidationError("cannot evaluate on empty input")
    p, l = _as_bool(preds), _as_bool(labels)
    tp = int(np.sum(p & l))
    fp = int(np.sum(p & ~l))
    fn = int(np.sum(~p & l))
    tn = int(np.sum(~p & ~l))
    n = len(p)
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return ClassifierMetrics((tp + fn) / n, (tp + tn) / n, precision, recall, f1)


def word_ratio(messages_with_labels):
    """Add-one smoothed ratio P(w|pump)/P(w|not_pump) for every token.

    ``messages_with_labels`` is an iterable of ``(tokens, label)`` pairs.
    Returns ``{token: (ratio, containing_message_count)}``.
    """
    n = {True: 0, False: 0}
    contains = {True: Counter(), False: Counter()}
    for tokens, label in messages_with_labels:
        cls = bool(_as_bool([label])[0])
        n[cls] += 1
        contains[cls].update(set(tokens))
    if not n[True] or not n[False]:
        raise ValidationError("word_ratio needs messages of both classes")
    out = {}
    for tok in sorted(set(contains[True]) | set(contains[False])):
        p_pump = (contains[True][tok] + 1) / (n[True] + 2)
        p_not = (contains[False][tok] + 1) / (n[False] + 2)
        out[tok] = (p_pump / p_not, contains[True][tok] + contains[False][tok])
    return out


@dataclass
class PumpClassifier:
    """Tokenizer + TF-IDF + linear SVM, fitted on labeled messages."""

    registry: CoinRegistry
    config: TokenizerConfig = field(default_factory=TokenizerConfig)
    max_df: float = 0.5
    min_df: float = 0.01
    l2_lambda: float = 1e-4
    epochs: int = 20
    seed: int = 0
    tfidf: TfidfModel = None
    svm: LinearSvm = None

    def tokens(self, text):
        return tokenize(text, self.registry, self.config)

    def fit(self, texts, labels):
        corpus = [self.tokens(t) for t in texts]
        self.tfidf = fit_tfidf(corpus, self.max_df, self.min_df, self.config.ngram_range)
        X = transform_many(self.tfidf, corpus)
        self.svm = train_svm(X, _labels_pm1(np.where(_as_bool(labels), 1.0, -1.0)),
                             self.l2_lambda, self.epochs, self.seed)
        return self

    def margins(self, texts):
        if self.svm is None:
            raise ValidationError("classifier is not fitted")
        X = transform_many(self.tfidf, [self.tokens(t) for t in texts])
        return decision_function(self.svm, X)

    def predict(self, texts):
        return [PUMP if m >= 0 else NOT_PUMP for m in self.margins(texts)]

    def top_features(self, n=20):
        terms = self.tfidf.terms()
        order = np.argsort(-self.svm.weights, kind="stable")
        pos = [terms[j] for j in order[:n]]
        neg = [terms[j] for j in order[::-1][:n]]
        return pos, neg

    def to_json(self):
        return {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "config": {"stem": self.config.stem,
                       "coin_placeholder": self.config.coin_placeholder,
                       "ngram_range": list(self.config.ngram_range),
                       "max_df": self.max_df, "min_df": self.min_df,
                       "l2_lambda": self.l2_lambda, "epochs": self.epochs, "seed": self.seed},
            "registry": {"symbols": sorted(self.registry.symbols),
                         "aliases": dict(sorted(self.registry.aliases.items()))},
            "vocabulary": self.tfidf.terms(),
            "idf": self.tfidf.idf.tolist(),
            "doc_freq": self.tfidf.doc_freq.tolist(),
            "doc_count": self.tfidf.doc_count,
            "weights": self.svm.weights.tolist(),
            "bias": self.svm.bias,
            "objective_trace": list(self.svm.objective_trace),
        }

    @classmethod
    def from_json(cls, obj):
        if obj.get("format") != MODEL_FORMAT:
            raise DataError("not a pump classifier model file")
        if obj.get("version") != MODEL_VERSION:
            raise DataError(f"unsupported model version {obj.get('version')}")
        c = obj["config"]
        config = TokenizerConfig(c["stem"], c["coin_placeholder"], tuple(c["ngram_range"]))
        registry = CoinRegistry(frozenset(obj["registry"]["symbols"]), obj["registry"]["aliases"])
        terms = obj["vocabulary"]
        tfidf = TfidfModel({t: j for j, t in enumerate(terms)}, np.array(obj["idf"], dtype=float),
                           obj["doc_count"], np.array(obj["doc_freq"], dtype=np.int64),
                           c["max_df"], c["min_df"], config.ngram_range)
        svm = LinearSvm(np.array(obj["weights"], dtype=float), float(obj["bias"]),
                        c["l2_lambda"], c["epochs"], c["seed"], tuple(obj["objective_trace"]))
        return cls(registry, config, c["max_df"], c["min_df"], c["l2_lambda"], c["epochs"],
                   c["seed"], tfidf, svm)

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            try:
                obj = json.load(fh)
            except json.JSONDecodeError as exc:
                raise DataError(f"malformed model JSON ({exc.msg})", path) from None
        return cls.from_json(obj)
