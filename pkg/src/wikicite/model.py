"""Three-way citation-type classifier.

Architecture: the citation-text path sums character embeddings and
normalizes the sum to one; the statement path runs token (plus hashed
subword) embeddings through a pooled or LSTM encoder to 64 dims; POS counts,
the section one-hot and the two scalars are appended raw.  The concatenation
feeds four dense hidden layers and a softmax over three classes.

Everything is plain numpy with analytic gradients; embedding-table gradients
are kept sparse internally so training never materializes the full
subword-bucket table gradient.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .features import FeatureVector, UNK_ID, Vocabulary, build_vocabulary, featurize
from .labeling import CLASS_LABELS, LabeledCitation

_EPS_CHAR_SUM = 1e-8


@dataclass
class ModelConfig:
    char_embed_dim: int = 300
    token_embed_dim: int = 300
    statement_encoder_dim: int = 64
    hidden_layers: tuple[int, ...] = (512, 256, 128, 64)
    classes: int = 3
    dropout: float = 0.0
    encoder_kind: str = "pooled"  # or "recurrent"
    activation: str = "relu"  # or "tanh"

    def __post_init__(self):
        if len(self.hidden_layers) != 4:
            raise ValueError("hidden_layers must list exactly four widths")
        dims = (self.char_embed_dim, self.token_embed_dim,
                self.statement_encoder_dim, *self.hidden_layers)
        if any(d <= 0 for d in dims):
            raise ValueError("all dimensions must be positive")
        if self.encoder_kind not in ("pooled", "recurrent"):
            raise ValueError(f"unknown encoder_kind {self.encoder_kind!r}")
        if self.activation not in ("relu", "tanh"):
            raise ValueError(f"unknown activation {self.activation!r}")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")


@dataclass
class TrainConfig:
    epochs: int = 5
    split: float = 0.9
    lr: float = 1e-3
    min_lr: float = 1e-5
    beta1: float = 0.9
    beta2: float = 0.999
    patience: int = 1
    batch_size: int = 32
    seed: int = 0
    freeze_chars: bool = False
    binary_loss: bool = False

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not 0.0 < self.min_lr <= self.lr:
            raise ValueError("need 0 < min_lr <= lr")
        if not 0.0 < self.split < 1.0:
            raise ValueError("split must be a fraction in (0, 1)")


@dataclass
class ModelParams:
    config: ModelConfig
    n_chars: int
    n_tokens: int
    n_subwords: int
    n_pos: int
    n_sections: int
    vocab_hash: str = ""
    tensors: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def input_dim(self) -> int:
        return (self.config.char_embed_dim + self.config.statement_encoder_dim
                + self.n_pos + self.n_sections + 2)


@dataclass
class Prediction:
    probs: np.ndarray
    label: str
    max_prob: float


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=-1, keepdims=True)


def init_model(config: ModelConfig, vocab: Vocabulary, seed: int = 0) -> ModelParams:
    """Deterministic initialization; the draw order is fixed."""
    rng = np.random.default_rng(seed)
    t: dict[str, np.ndarray] = {}
    # positive char init keeps the sum-normalized char path away from the
    # divide-by-zero pole at the start of training
    t["char_emb"] = rng.uniform(0.0, 0.1, (vocab.n_chars, config.char_embed_dim))
    t["tok_emb"] = rng.uniform(-0.05, 0.05, (vocab.n_tokens, config.token_embed_dim))
    t["sub_emb"] = rng.uniform(-0.05, 0.05, (vocab.subword_buckets, config.token_embed_dim))
    enc = config.statement_encoder_dim
    tok = config.token_embed_dim
    if config.encoder_kind == "pooled":
        t["stmt_W"] = rng.normal(0.0, np.sqrt(1.0 / tok), (tok, enc))
        t["stmt_b"] = np.zeros(enc)
    else:
        t["lstm_Wx"] = rng.normal(0.0, np.sqrt(1.0 / tok), (tok, 4 * enc))
        t["lstm_Wh"] = rng.normal(0.0, np.sqrt(1.0 / enc), (enc, 4 * enc))
        b = np.zeros(4 * enc)
        b[enc:2 * enc] = 1.0  # forget-gate bias
        t["lstm_b"] = b

    params = ModelParams(
        config=config,
        n_chars=vocab.n_chars,
        n_tokens=vocab.n_tokens,
        n_subwords=vocab.subword_buckets,
        n_pos=vocab.pos_top,
        n_sections=vocab.sections_top,
        vocab_hash=vocab.content_hash(),
        tensors=t,
    )
    gain = 2.0 if config.activation == "relu" else 1.0
    sizes = (params.input_dim, *config.hidden_layers, config.classes)
    for i in range(len(sizes) - 1):
        fan_in, fan_out = sizes[i], sizes[i + 1]
        t[f"dense{i}_W"] = rng.normal(0.0, np.sqrt(gain / fan_in), (fan_in, fan_out))
        t[f"dense{i}_b"] = np.zeros(fan_out)
    return params


# ---------------------------------------------------------------------------
# Forward pass


def _char_forward(t: dict, fv: FeatureVector, dim: int):
    ids = np.asarray(fv.char_ids, dtype=np.intp)
    if ids.size == 0:
        return np.zeros(dim), (ids, None, None)
    s = t["char_emb"][ids].sum(axis=0)
    total = s.sum()
    if abs(total) < _EPS_CHAR_SUM:
        return np.zeros(dim), (ids, None, None)  # guarded: no gradient
    return s / total, (ids, s, total)


def _stmt_vectors(t: dict, fv: FeatureVector, dim: int):
    vecs = []
    sources = []
    for token_id, subs in zip(fv.token_ids, fv.subword_ids):
        if token_id != UNK_ID or not subs:
            vecs.append(t["tok_emb"][token_id])
            sources.append(("tok", token_id))
        else:
            rows = np.asarray(subs, dtype=np.intp)
            vecs.append(t["sub_emb"][rows].mean(axis=0))
            sources.append(("sub", rows))
    if vecs:
        return np.vstack(vecs), sources
    return np.zeros((0, dim)), sources


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _lstm_forward(t: dict, vecs: np.ndarray, enc: int):
    steps = []
    h = np.zeros(enc)
    c = np.zeros(enc)
    for x in vecs:
        gates = x @ t["lstm_Wx"] + h @ t["lstm_Wh"] + t["lstm_b"]
        i = _sigmoid(gates[:enc])
        f = _sigmoid(gates[enc:2 * enc])
        g = np.tanh(gates[2 * enc:3 * enc])
        o = _sigmoid(gates[3 * enc:])
        c_new = f * c + i * g
        tanh_c = np.tanh(c_new)
        h_new = o * tanh_c
        steps.append((x, h, c, i, f, g, o, c_new, tanh_c))
        h, c = h_new, c_new
    return h, steps


def _encode_example(params: ModelParams, fv: FeatureVector):
    cfg = params.config
    t = params.tensors
    char_r, char_cache = _char_forward(t, fv, cfg.char_embed_dim)
    vecs, sources = _stmt_vectors(t, fv, cfg.token_embed_dim)
    if cfg.encoder_kind == "pooled":
        pooled = vecs.mean(axis=0) if len(vecs) else np.zeros(cfg.token_embed_dim)
        pre = pooled @ t["stmt_W"] + t["stmt_b"]
        stmt_h = np.tanh(pre)
        stmt_cache = ("pooled", pooled, stmt_h, vecs, sources)
    else:
        stmt_h, steps = _lstm_forward(t, vecs, cfg.statement_encoder_dim)
        stmt_cache = ("recurrent", steps, stmt_h, vecs, sources)
    z = np.concatenate([
        char_r, stmt_h,
        fv.pos_counts.astype(float), fv.section_onehot.astype(float),
        [fv.order_scalar, fv.totwords_scalar],
    ])
    return z, char_cache, stmt_cache


def _dense_forward(params: ModelParams, Z: np.ndarray, dropout_rng=None):
    cfg = params.config
    t = params.tensors
    act = np.tanh if cfg.activation == "tanh" else lambda x: np.maximum(x, 0.0)
    activations = [Z]
    pre_list = []
    masks = []
    n_hidden = len(cfg.hidden_layers)
    A = Z
    for i in range(n_hidden):
        pre = A @ t[f"dense{i}_W"] + t[f"dense{i}_b"]
        A = act(pre)
        if dropout_rng is not None and cfg.dropout > 0.0:
            mask = (dropout_rng.random(A.shape) >= cfg.dropout) / (1.0 - cfg.dropout)
            A = A * mask
            masks.append(mask)
        else:
            masks.append(None)
        pre_list.append(pre)
        activations.append(A)
    logits = A @ t[f"dense{n_hidden}_W"] + t[f"dense{n_hidden}_b"]
    return logits, activations, pre_list, masks


def forward(params: ModelParams, fv: FeatureVector) -> Prediction:
    """Probabilities for one feature vector (inference mode, no dropout)."""
    z, _, _ = _encode_example(params, fv)
    if z.shape[0] != params.input_dim:
        raise ValueError(
            f"feature dimension {z.shape[0]} does not match model input {params.input_dim}")
    logits, _, _, _ = _dense_forward(params, z[None, :])
    probs = softmax(logits[0])
    idx = int(np.argmax(probs))
    return Prediction(probs=probs, label=CLASS_LABELS[idx], max_prob=float(probs[idx]))


# ---------------------------------------------------------------------------
# Loss and gradients


class _SparseGrad(dict):
    def add(self, row: int, vec: np.ndarray) -> None:
        got = self.get(row)
        if got is None:
            self[row] = vec.copy()
        else:
            got += vec


def _loss_and_grad_internal(params: ModelParams, batch, dropout_rng=None):
    """Mean loss plus gradients; embedding grads returned sparsely."""
    if not batch:
        raise ValueError("batch must not be empty")
    cfg = params.config
    t = params.tensors
    n = len(batch)
    enc = cfg.statement_encoder_dim
    cdim = cfg.char_embed_dim

    encoded = []
    Z = np.empty((n, params.input_dim))
    for row, (fv, _) in enumerate(batch):
        z, char_cache, stmt_cache = _encode_example(params, fv)
        if z.shape[0] != params.input_dim:
            raise ValueError(
                f"feature dimension {z.shape[0]} does not match model input {params.input_dim}")
        Z[row] = z
        encoded.append((char_cache, stmt_cache))

    logits, activations, pre_list, masks = _dense_forward(params, Z, dropout_rng)
    probs = softmax(logits)
    labels = np.array([y for _, y in batch], dtype=np.intp)
    onehot = np.zeros_like(probs)
    onehot[np.arange(n), labels] = 1.0

    clipped = np.clip(probs, 1e-12, 1.0 - 1e-12)
    if _is_binary(params):
        # one-vs-all binary cross-entropy over the softmax outputs
        loss = float(-np.mean(
            onehot * np.log(clipped) + (1.0 - onehot) * np.log(1.0 - clipped)))
        dprobs = -(onehot / clipped - (1.0 - onehot) / (1.0 - clipped)) / (n * cfg.classes)
        # backprop through softmax: dz_k = p_k * (dp_k - sum_j dp_j p_j)
        dlogits = probs * (dprobs - (dprobs * probs).sum(axis=1, keepdims=True))
    else:
        loss = float(-np.mean(np.log(clipped[np.arange(n), labels])))
        dlogits = (probs - onehot) / n
    if not np.isfinite(loss):
        raise FloatingPointError(
            f"non-finite loss on batch of {n} (labels {labels.tolist()})")

    dense_grads: dict[str, np.ndarray] = {}
    sparse_grads = {"char_emb": _SparseGrad(), "tok_emb": _SparseGrad(),
                    "sub_emb": _SparseGrad()}

    act = cfg.activation
    n_hidden = len(cfg.hidden_layers)
    dA = dlogits
    for i in range(n_hidden, -1, -1):
        A_prev = activations[i] if i <= n_hidden else None
        if i == n_hidden:
            dense_grads[f"dense{i}_W"] = activations[n_hidden].T @ dA
            dense_grads[f"dense{i}_b"] = dA.sum(axis=0)
            dA = dA @ t[f"dense{i}_W"].T
            continue
        if masks[i] is not None:
            dA = dA * masks[i]
        pre = pre_list[i]
        if act == "tanh":
            dpre = dA * (1.0 - np.tanh(pre) ** 2)
        else:
            dpre = dA * (pre > 0.0)
        dense_grads[f"dense{i}_W"] = activations[i].T @ dpre
        dense_grads[f"dense{i}_b"] = dpre.sum(axis=0)
        dA = dpre @ t[f"dense{i}_W"].T

    dZ = dA  # (n, input_dim)
    if cfg.encoder_kind == "pooled":
        dense_grads["stmt_W"] = np.zeros_like(t["stmt_W"])
        dense_grads["stmt_b"] = np.zeros_like(t["stmt_b"])
    else:
        dense_grads["lstm_Wx"] = np.zeros_like(t["lstm_Wx"])
        dense_grads["lstm_Wh"] = np.zeros_like(t["lstm_Wh"])
        dense_grads["lstm_b"] = np.zeros_like(t["lstm_b"])

    for row, (char_cache, stmt_cache) in enumerate(encoded):
        dchar = dZ[row, :cdim]
        dstmt = dZ[row, cdim:cdim + enc]
        _char_backward(sparse_grads["char_emb"], char_cache, dchar)
        if stmt_cache[0] == "pooled":
            _pooled_backward(t, dense_grads, sparse_grads, stmt_cache, dstmt)
        else:
            _lstm_backward(t, dense_grads, sparse_grads, stmt_cache, dstmt, enc)

    return loss, dense_grads, sparse_grads, probs


def _is_binary(params: ModelParams) -> bool:
    return getattr(params, "_binary_loss", False)


def _char_backward(grad: _SparseGrad, cache, dr: np.ndarray) -> None:
    ids, s, total = cache
    if s is None:
        return  # empty text or guarded normalization: zero vector, no grad
    ds = dr / total - (dr @ s) / (total * total)
    unique, counts = np.unique(ids, return_counts=True)
    for uid, count in zip(unique, counts):
        grad.add(int(uid), ds * count)


def _scatter_stmt(sparse_grads, sources, dvecs) -> None:
    for (kind, ref), dvec in zip(sources, dvecs):
        if kind == "tok":
            sparse_grads["tok_emb"].add(int(ref), dvec)
        else:
            share = dvec / len(ref)
            for bucket in ref:
                sparse_grads["sub_emb"].add(int(bucket), share)


def _pooled_backward(t, dense_grads, sparse_grads, cache, dh) -> None:
    _, pooled, stmt_h, vecs, sources = cache
    dpre = dh * (1.0 - stmt_h ** 2)
    dense_grads["stmt_W"] += np.outer(pooled, dpre)
    dense_grads["stmt_b"] += dpre
    if not len(vecs):
        return
    dpooled = t["stmt_W"] @ dpre
    dvec = dpooled / len(vecs)
    _scatter_stmt(sparse_grads, sources, [dvec] * len(sources))


def _lstm_backward(t, dense_grads, sparse_grads, cache, dh_last, enc) -> None:
    _, steps, _, vecs, sources = cache
    if not steps:
        return
    dh = dh_last.copy()
    dc = np.zeros(enc)
    dvecs = [None] * len(steps)
    for idx in range(len(steps) - 1, -1, -1):
        x, h_prev, c_prev, i, f, g, o, c_new, tanh_c = steps[idx]
        do = dh * tanh_c
        dc = dc + dh * o * (1.0 - tanh_c ** 2)
        di = dc * g
        df = dc * c_prev
        dg = dc * i
        dc_prev = dc * f
        dgates = np.concatenate([
            di * i * (1.0 - i),
            df * f * (1.0 - f),
            dg * (1.0 - g ** 2),
            do * o * (1.0 - o),
        ])
        dense_grads["lstm_Wx"] += np.outer(x, dgates)
        dense_grads["lstm_Wh"] += np.outer(h_prev, dgates)
        dense_grads["lstm_b"] += dgates
        dvecs[idx] = t["lstm_Wx"] @ dgates
        dh = t["lstm_Wh"] @ dgates
        dc = dc_prev
    _scatter_stmt(sparse_grads, sources, dvecs)


def loss_and_grad(params: ModelParams, batch) -> tuple[float, dict[str, np.ndarray]]:
    """Mean cross-entropy and dense gradients shaped exactly like the tensors.

    ``batch`` is a list of ``(FeatureVector, class_index)`` pairs.  Intended
    for small models and gradient checks; the trainer uses the sparse
    internal path for the embedding tables.
    """
    loss, dense_grads, sparse_grads, _ = _loss_and_grad_internal(params, batch)
    grads = {name: np.zeros_like(arr) for name, arr in params.tensors.items()}
    for name, arr in dense_grads.items():
        grads[name][...] = arr
    for name, rows in sparse_grads.items():
        for row, vec in rows.items():
            grads[name][row] += vec
    return loss, grads


# ---------------------------------------------------------------------------
# Adam with lazy (per-row) state for the embedding tables


class AdamOptimizer:
    def __init__(self, params: ModelParams, lr: float, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self._m = {}
        self._v = {}
        self._t = {}
        self._row_state: dict[str, dict[int, list]] = {}
        for name, arr in params.tensors.items():
            if name in ("char_emb", "tok_emb", "sub_emb"):
                self._row_state[name] = {}
            else:
                self._m[name] = np.zeros_like(arr)
                self._v[name] = np.zeros_like(arr)
                self._t[name] = 0

    def step(self, params: ModelParams, dense_grads, sparse_grads,
             skip: set[str] = frozenset()) -> None:
        for name, grad in dense_grads.items():
            if name in skip:
                continue
            self._t[name] += 1
            t = self._t[name]
            m, v = self._m[name], self._v[name]
            m *= self.beta1
            m += (1 - self.beta1) * grad
            v *= self.beta2
            v += (1 - self.beta2) * grad * grad
            mhat = m / (1 - self.beta1 ** t)
            vhat = v / (1 - self.beta2 ** t)
            params.tensors[name] -= self.lr * mhat / (np.sqrt(vhat) + self.eps)
        for name, rows in sparse_grads.items():
            if name in skip:
                continue
            table = params.tensors[name]
            state = self._row_state[name]
            for row, grad in rows.items():
                st = state.get(row)
                if st is None:
                    st = [np.zeros_like(grad), np.zeros_like(grad), 0]
                    state[row] = st
                st[2] += 1
                st[0] = self.beta1 * st[0] + (1 - self.beta1) * grad
                st[1] = self.beta2 * st[1] + (1 - self.beta2) * grad * grad
                mhat = st[0] / (1 - self.beta1 ** st[2])
                vhat = st[1] / (1 - self.beta2 ** st[2])
                table[row] -= self.lr * mhat / (np.sqrt(vhat) + self.eps)


# ---------------------------------------------------------------------------
# Training loop


@dataclass
class TrainResult:
    params: ModelParams
    vocab: Vocabulary
    metrics: list[dict]
    test_indices: list[int]
    diverged: bool = False


def stratified_split(labels: list[str], split: float, seed: int):
    """Deterministic class-stratified train/test index split.

    The test partition size is exactly ``round(n * (1 - split))``; per-class
    quotas use largest remainders so the total always comes out exact.
    """
    n = len(labels)
    n_test = int(round(n * (1.0 - split)))
    rng = np.random.default_rng(seed)
    by_class = {label: [] for label in CLASS_LABELS}
    for idx, label in enumerate(labels):
        by_class[label].append(idx)
    quotas = {}
    remainders = []
    assigned = 0
    for label in CLASS_LABELS:
        exact = len(by_class[label]) * (1.0 - split)
        quotas[label] = int(exact)
        assigned += quotas[label]
        remainders.append((-(exact - int(exact)), label))
    for _, label in sorted(remainders):
        if assigned >= n_test:
            break
        if quotas[label] < len(by_class[label]):
            quotas[label] += 1
            assigned += 1
    train_idx, test_idx = [], []
    for label in CLASS_LABELS:
        pool = np.array(by_class[label], dtype=np.intp)
        order = rng.permutation(len(pool))
        take = quotas[label]
        test_idx.extend(pool[order[:take]].tolist())
        train_idx.extend(pool[order[take:]].tolist())
    return sorted(train_idx), sorted(test_idx)


def training_vocabulary(dataset: list[LabeledCitation], train_config: TrainConfig,
                        **vocab_kwargs) -> Vocabulary:
    """The vocabulary :func:`train` will build for this dataset and config.

    Exposed so the optional char-pretraining stage can construct embeddings
    with matching shapes before the main run.
    """
    labels = [item.label for item in dataset]
    train_idx, _ = stratified_split(labels, train_config.split, train_config.seed)
    return build_vocabulary([dataset[i] for i in train_idx], **vocab_kwargs)


def train(dataset: list[LabeledCitation], model_config: ModelConfig,
          train_config: TrainConfig, vocab: Vocabulary | None = None,
          char_init: np.ndarray | None = None) -> TrainResult:
    """Full training run: stratified split, vocabulary, Adam, lr-on-plateau."""
    labels = [item.label for item in dataset]
    for label in CLASS_LABELS:
        if labels.count(label) < 10:
            raise ValueError(f"need at least 10 examples of {label}")
    train_idx, test_idx = stratified_split(labels, train_config.split, train_config.seed)
    train_items = [dataset[i] for i in train_idx]
    test_items = [dataset[i] for i in test_idx]

    if vocab is None:
        vocab = build_vocabulary(train_items)
    class_index = {label: i for i, label in enumerate(CLASS_LABELS)}
    train_set = [(featurize(item, vocab), class_index[item.label]) for item in train_items]
    test_set = [(featurize(item, vocab), class_index[item.label]) for item in test_items]

    params = init_model(model_config, vocab, train_config.seed)
    params._binary_loss = train_config.binary_loss
    if char_init is not None:
        if char_init.shape != params.tensors["char_emb"].shape:
            raise ValueError("char_init shape does not match the vocabulary/config")
        params.tensors["char_emb"] = char_init.astype(float).copy()

    optimizer = AdamOptimizer(params, train_config.lr,
                              train_config.beta1, train_config.beta2)
    skip = {"char_emb"} if train_config.freeze_chars else set()
    rng = np.random.default_rng(train_config.seed + 1)
    dropout_rng = np.random.default_rng(train_config.seed + 2) if model_config.dropout else None

    metrics: list[dict] = []
    best_acc = -1.0
    wait = 0
    lr = train_config.lr
    snapshot = {k: v.copy() for k, v in params.tensors.items()}
    for epoch in range(train_config.epochs):
        order = rng.permutation(len(train_set))
        epoch_loss = 0.0
        batches = 0
        try:
            for start in range(0, len(order), train_config.batch_size):
                batch = [train_set[i] for i in order[start:start + train_config.batch_size]]
                loss, dense_grads, sparse_grads, _ = _loss_and_grad_internal(
                    params, batch, dropout_rng)
                optimizer.lr = lr
                optimizer.step(params, dense_grads, sparse_grads, skip=skip)
                epoch_loss += loss
                batches += 1
        except FloatingPointError:
            params.tensors = snapshot  # restore the last finite checkpoint
            return TrainResult(params, vocab, metrics, test_idx, diverged=True)

        snapshot = {k: v.copy() for k, v in params.tensors.items()}
        acc = _accuracy(params, test_set) if test_set else float("nan")
        metrics.append({
            "epoch": epoch + 1,
            "train_loss": epoch_loss / max(batches, 1),
            "holdout_accuracy": acc,
            "lr": lr,
        })
        if acc > best_acc + 1e-12:
            best_acc = acc
            wait = 0
        else:
            wait += 1
            if wait >= train_config.patience:
                lr = max(lr * 0.5, train_config.min_lr)
                wait = 0
    return TrainResult(params, vocab, metrics, test_idx)


def _accuracy(params: ModelParams, examples) -> float:
    if not examples:
        return float("nan")
    hits = 0
    for fv, label in examples:
        pred = forward(params, fv)
        hits += int(CLASS_LABELS.index(pred.label) == label)
    return hits / len(examples)


# ---------------------------------------------------------------------------
# Evaluation and bulk prediction


@dataclass
class EvalResult:
    confusion: np.ndarray  # rows = true class, cols = predicted
    per_class_recall: dict[str, float]
    accuracy: float

    def to_dict(self) -> dict:
        return {
            "labels": list(CLASS_LABELS),
            "confusion": self.confusion.tolist(),
            "per_class_recall": dict(self.per_class_recall),
            "accuracy": self.accuracy,
        }


def evaluate(params: ModelParams, test_set) -> EvalResult:
    """Confusion matrix over (FeatureVector, class_index) pairs."""
    k = len(CLASS_LABELS)
    confusion = np.zeros((k, k), dtype=np.int64)
    for fv, label in test_set:
        pred = forward(params, fv)
        confusion[label, CLASS_LABELS.index(pred.label)] += 1
    totals = confusion.sum(axis=1)
    recall = {
        CLASS_LABELS[i]: (confusion[i, i] / totals[i] if totals[i] else float("nan"))
        for i in range(k)
    }
    accuracy = confusion.trace() / confusion.sum() if confusion.sum() else float("nan")
    return EvalResult(confusion, recall, float(accuracy))


def predict_batch(params: ModelParams, records, vocab: Vocabulary):
    """Lazily yield one Prediction per record; memory stays bounded."""
    for record in records:
        yield forward(params, featurize(record, vocab))


# ---------------------------------------------------------------------------
# Character-embedding pretraining on the scholarly-vs-web dummy task


def pretrain_char_embeddings(dataset: list[LabeledCitation], config: ModelConfig,
                             vocab: Vocabulary, epochs: int = 5, lr: float = 1e-3,
                             seed: int = 0, batch_size: int = 64):
    """Train char embeddings on binary scholarly-vs-web separation.

    Returns ``(char_emb, holdout_accuracy)``; feed the table to
    :func:`train` via ``char_init`` (optionally with ``freeze_chars``).
    """
    rng = np.random.default_rng(seed)
    emb = rng.uniform(0.0, 0.1, (vocab.n_chars, config.char_embed_dim))
    w = rng.normal(0.0, np.sqrt(1.0 / config.char_embed_dim), config.char_embed_dim)
    b = 0.0
    examples = []
    for item in dataset:
        fv = featurize(item, vocab)
        target = 0.0 if item.label == "WEB_CONTENT" else 1.0
        examples.append((np.asarray(fv.char_ids, dtype=np.intp), target))
    order = rng.permutation(len(examples))
    n_test = max(1, len(examples) // 10)
    test = [examples[i] for i in order[:n_test]]
    trainex = [examples[i] for i in order[n_test:]]

    m_emb: dict[int, list] = {}
    mw = np.zeros_like(w)
    vw = np.zeros_like(w)
    mb = vb = 0.0
    t_dense = 0

    def repr_of(ids):
        if ids.size == 0:
            return np.zeros(config.char_embed_dim), None, None
        s = emb[ids].sum(axis=0)
        total = s.sum()
        if abs(total) < _EPS_CHAR_SUM:
            return np.zeros(config.char_embed_dim), None, None
        return s / total, s, total

    for _ in range(epochs):
        perm = rng.permutation(len(trainex))
        for start in range(0, len(perm), batch_size):
            rows = [trainex[i] for i in perm[start:start + batch_size]]
            gw = np.zeros_like(w)
            gb = 0.0
            emb_grads: dict[int, np.ndarray] = {}
            for ids, target in rows:
                r, s, total = repr_of(ids)
                p = 1.0 / (1.0 + np.exp(-(r @ w + b)))
                dlogit = (p - target) / len(rows)
                gw += dlogit * r
                gb += dlogit
                if s is not None:
                    dr = dlogit * w
                    ds = dr / total - (dr @ s) / (total * total)
                    unique, counts = np.unique(ids, return_counts=True)
                    for uid, count in zip(unique, counts):
                        prev = emb_grads.get(int(uid))
                        if prev is None:
                            emb_grads[int(uid)] = ds * count
                        else:
                            prev += ds * count
            t_dense += 1
            mw = 0.9 * mw + 0.1 * gw
            vw = 0.999 * vw + 0.001 * gw * gw
            w -= lr * (mw / (1 - 0.9 ** t_dense)) / (np.sqrt(vw / (1 - 0.999 ** t_dense)) + 1e-8)
            mb = 0.9 * mb + 0.1 * gb
            vb = 0.999 * vb + 0.001 * gb * gb
            b -= lr * (mb / (1 - 0.9 ** t_dense)) / (np.sqrt(vb / (1 - 0.999 ** t_dense)) + 1e-8)
            for uid, grad in emb_grads.items():
                st = m_emb.get(uid)
                if st is None:
                    st = [np.zeros_like(grad), np.zeros_like(grad), 0]
                    m_emb[uid] = st
                st[2] += 1
                st[0] = 0.9 * st[0] + 0.1 * grad
                st[1] = 0.999 * st[1] + 0.001 * grad * grad
                emb[uid] -= lr * (st[0] / (1 - 0.9 ** st[2])) / (
                    np.sqrt(st[1] / (1 - 0.999 ** st[2])) + 1e-8)

    hits = 0
    for ids, target in test:
        r, _, _ = repr_of(ids)
        p = 1.0 / (1.0 + np.exp(-(r @ w + b)))
        hits += int((p >= 0.5) == bool(target))
    return emb, hits / len(test) if test else float("nan")


# ---------------------------------------------------------------------------
# Checkpoint serialization


def save_checkpoint(params: ModelParams, path, extra: dict | None = None) -> None:
    meta = {
        "version": 1,
        "config": {
            "char_embed_dim": params.config.char_embed_dim,
            "token_embed_dim": params.config.token_embed_dim,
            "statement_encoder_dim": params.config.statement_encoder_dim,
            "hidden_layers": list(params.config.hidden_layers),
            "classes": params.config.classes,
            "dropout": params.config.dropout,
            "encoder_kind": params.config.encoder_kind,
            "activation": params.config.activation,
        },
        "dims": {
            "n_chars": params.n_chars,
            "n_tokens": params.n_tokens,
            "n_subwords": params.n_subwords,
            "n_pos": params.n_pos,
            "n_sections": params.n_sections,
        },
        "vocab_hash": params.vocab_hash,
        "extra": extra or {},
    }
    blob = json.dumps(meta, sort_keys=True).encode("utf-8")
    arrays = dict(params.tensors)
    arrays["_meta"] = np.frombuffer(blob, dtype=np.uint8)
    np.savez_compressed(path, **arrays)


def load_checkpoint(path) -> tuple[ModelParams, dict]:
    with np.load(path) as data:
        meta = json.loads(bytes(data["_meta"]).decode("utf-8"))
        tensors = {name: data[name].copy() for name in data.files if name != "_meta"}
    cfg = meta["config"]
    config = ModelConfig(
        char_embed_dim=cfg["char_embed_dim"],
        token_embed_dim=cfg["token_embed_dim"],
        statement_encoder_dim=cfg["statement_encoder_dim"],
        hidden_layers=tuple(cfg["hidden_layers"]),
        classes=cfg["classes"],
        dropout=cfg["dropout"],
        encoder_kind=cfg["encoder_kind"],
        activation=cfg["activation"],
    )
    dims = meta["dims"]
    params = ModelParams(
        config=config,
        n_chars=dims["n_chars"],
        n_tokens=dims["n_tokens"],
        n_subwords=dims["n_subwords"],
        n_pos=dims["n_pos"],
        n_sections=dims["n_sections"],
        vocab_hash=meta["vocab_hash"],
        tensors=tensors,
    )
    return params, meta["extra"]
