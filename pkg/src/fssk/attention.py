"""Query-over-support cross-attention with mask-consistency masking.

Attention maps have query pixels as rows and support pixels as columns.
Two masking strategies are provided:

``dicm``
    per support column, the single best-matching query cell is masked when
    its query label disagrees with the support label.
``cyctr``
    per support column, a support -> query -> support cycle is followed and
    the whole column is masked when the cycle lands on a support pixel with
    a different label.

Argmax ties resolve to the lowest index throughout.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DimensionError, FsskError, ModeError
from .tensor import REAL, as_tensor, row_softmax

STRATEGIES = ("none", "dicm", "cyctr")


@dataclass(frozen=True)
class ProjectionWeights:
    """Query/key/value projections for one attention block.

    ``cross=False`` turns the block into query self-attention (keys and values
    come from the query stream); such blocks never mask.
    """

    wq: np.ndarray
    wk: np.ndarray
    wv: np.ndarray
    bq: Optional[np.ndarray] = None
    bk: Optional[np.ndarray] = None
    bv: Optional[np.ndarray] = None
    block_index: int = 0
    cross: bool = True

    def __post_init__(self):
        for name in ("wq", "wk", "wv"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=REAL))
        if not (self.wq.shape[0] == self.wk.shape[0] == self.wv.shape[0]):
            raise DimensionError(
                f"projection output dims differ: {self.wq.shape}, {self.wk.shape}, {self.wv.shape}")

    @property
    def d_k(self):
        return self.wq.shape[0]


def init_projection(rng, c_query, c_support=None, d_k=None, block_index=0, cross=True):
    """Seeded uniform(-1/sqrt(c), 1/sqrt(c)) projection weights, no biases."""
    c_support = c_query if c_support is None else c_support
    d_k = c_query if d_k is None else d_k

    def draw(c):
        bound = 1.0 / np.sqrt(c)
        return rng.uniform(-bound, bound, size=(d_k, c)).astype(REAL)

    return ProjectionWeights(wq=draw(c_query), wk=draw(c_support), wv=draw(c_support),
                             block_index=block_index, cross=cross)


@dataclass(frozen=True)
class AttentionMap:
    scores: np.ndarray
    scaled: bool = True

    @property
    def shape(self):
        return self.scores.shape


@dataclass(frozen=True)
class MaskingReport:
    strategy: str
    block_index: int
    total_cells: int
    masked_cells: int
    masked_columns: int
    # set when cyctr would have masked every column and masking was skipped
    skipped: bool = False

    @property
    def ratio(self):
        return self.masked_cells / self.total_cells if self.total_cells else 0.0

    def to_dict(self):
        return {
            "block": self.block_index,
            "strategy": self.strategy,
            "total_cells": self.total_cells,
            "masked_cells": self.masked_cells,
            "masked_columns": self.masked_columns,
            "ratio": self.ratio,
        }


def _flatten(feat):
    x = as_tensor(feat)
    if x.ndim != 3:
        raise DimensionError(f"expected c x h x w features, got {x.shape}")
    return x.reshape(x.shape[0], -1).T.astype(np.float64)


def _project(x, w, b):
    out = x @ w.astype(np.float64).T
    if b is not None:
        out += np.asarray(b, dtype=np.float64)
    return out


def _check_inputs(query_feat, support_feat, weights):
    q = as_tensor(query_feat)
    s = as_tensor(support_feat)
    if q.ndim != 3 or s.ndim != 3:
        raise DimensionError(f"expected 3-D features, got {q.shape} and {s.shape}")
    if weights.wq.shape[1] != q.shape[0]:
        raise DimensionError(f"W_Q {weights.wq.shape} vs query channels {q.shape[0]}")
    if weights.wk.shape[1] != s.shape[0] or weights.wv.shape[1] != s.shape[0]:
        raise DimensionError(
            f"W_K/W_V {weights.wk.shape}/{weights.wv.shape} vs support channels {s.shape[0]}")


def cross_attention_scores(query_feat, support_feat, weights):
    """Scaled dot-product scores ``(Q K^T) / sqrt(d_k)`` of shape (hq*wq, hs*ws)."""
    _check_inputs(query_feat, support_feat, weights)
    q = _project(_flatten(query_feat), weights.wq, weights.bq)
    k = _project(_flatten(support_feat), weights.wk, weights.bk)
    scores = (q @ k.T) / np.sqrt(weights.d_k)
    return AttentionMap(scores.astype(REAL))


def _flat_labels(mask, n, name):
    m = np.asarray(mask).astype(bool).ravel()
    if m.size != n:
        raise DimensionError(f"{name} has {m.size} entries, attention expects {n}")
    return m


def dicm_mask(attn, support_mask, query_mask, block_index=0):
    """Mask at most one cell per support column.

    For column i the best query row j = argmax_j A[j, i] is found; if the
    support label of i differs from the query label of j, A[j, i] becomes -inf.
    """
    a = attn.scores
    n_q, n_s = a.shape
    ms = _flat_labels(support_mask, n_s, "support mask")
    mq = _flat_labels(query_mask, n_q, "query mask")
    best_row = a.argmax(axis=0)
    conflict = ms != mq[best_row]
    cols = np.flatnonzero(conflict)
    out = a.copy()
    out[best_row[cols], cols] = -np.inf
    report = MaskingReport("dicm", block_index, a.size, int(cols.size), int(cols.size))
    return AttentionMap(out, attn.scaled), report


def cyctr_mask(attn, support_mask, block_index=0):
    """Mask whole support columns whose support->query->support cycle is inconsistent.

    If every column would be masked the map is returned unchanged and the
    report's ``skipped`` flag is set, since softmax over an all -inf row is
    undefined.
    """
    a = attn.scores
    n_q, n_s = a.shape
    ms = _flat_labels(support_mask, n_s, "support mask")
    max_q = a.argmax(axis=0)
    max_s = a.argmax(axis=1)[max_q]
    conflict = ms != ms[max_s]
    n_cols = int(conflict.sum())
    if n_cols == n_s:
        return attn, MaskingReport("cyctr", block_index, a.size, 0, 0, skipped=True)
    out = a.copy()
    out[:, conflict] = -np.inf
    report = MaskingReport("cyctr", block_index, a.size, n_cols * n_q, n_cols)
    return AttentionMap(out, attn.scaled), report


def attention_forward(query_feat, support_feat, weights, strategy="none",
                      support_mask=None, query_mask=None):
    """One attention block: scores -> optional masking -> softmax -> weighted values.

    Returns ``(out, report)`` with ``out`` of shape ``d_k x hq x wq``.
    """
    if strategy not in STRATEGIES:
        raise ModeError(f"unknown strategy {strategy!r}; choose from {STRATEGIES}")
    if strategy == "dicm" and (support_mask is None or query_mask is None):
        raise ModeError("dicm masking needs both support and query masks "
                        "(query masks are unavailable at inference; use strategy 'none')")
    if strategy == "cyctr" and support_mask is None:
        raise ModeError("cyctr masking needs the support mask")
    attn = cross_attention_scores(query_feat, support_feat, weights)
    if strategy == "dicm":
        attn, report = dicm_mask(attn, support_mask, query_mask, weights.block_index)
    elif strategy == "cyctr":
        attn, report = cyctr_mask(attn, support_mask, weights.block_index)
    else:
        report = MaskingReport("none", weights.block_index, attn.scores.size, 0, 0)
    probs = row_softmax(attn.scores).astype(np.float64)
    v = _project(_flatten(support_feat), weights.wv, weights.bv)
    out = probs @ v
    _, hq, wq = np.shape(query_feat)
    return out.T.reshape(-1, hq, wq).astype(REAL), report


def decoder_chain(query_feat, support_feat, blocks, strategy="none",
                  support_mask=None, query_mask=None):
    """Apply ``blocks`` in sequence, feeding each output in as the next query.

    Cross-attention blocks attend over ``support_feat`` with the requested
    masking and contribute one report each; self-attention blocks
    (``cross=False``) attend over the current query stream unmasked.
    """
    if not blocks:
        raise ValueError("decoder_chain needs at least one block")
    x = as_tensor(query_feat)
    reports = []
    for i, block in enumerate(blocks):
        try:
            if block.cross:
                x, report = attention_forward(x, support_feat, block, strategy,
                                              support_mask, query_mask)
                reports.append(report)
            else:
                x, _ = attention_forward(x, x, block, "none")
        except FsskError as e:
            raise type(e)(f"block {i}: {e}") from e
    return x, reports
