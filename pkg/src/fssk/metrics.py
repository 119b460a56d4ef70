"""Segmentation metrics: IoU, class-wise mIoU, FB-IoU and prior cross-entropy."""

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DimensionError
from .tensor import as_mask, as_tensor

DEFAULT_EPSILON = 1e-6
CSV_FIELDS = ("fold", "miou", "fb_iou", "ce_mean", "ce_std", "n")


@dataclass(frozen=True)
class ConfusionCounts:
    intersection: int
    union: int
    pred_area: int
    target_area: int

    def __add__(self, other):
        return ConfusionCounts(self.intersection + other.intersection,
                               self.union + other.union,
                               self.pred_area + other.pred_area,
                               self.target_area + other.target_area)


ZERO_COUNTS = ConfusionCounts(0, 0, 0, 0)


def _pair(pred, target):
    p, t = as_mask(pred), as_mask(target)
    if p.shape != t.shape:
        raise DimensionError(f"pred {p.shape} vs target {t.shape}")
    return p, t


def counts(pred, target):
    """Confusion counts for the foreground class of a binary pair."""
    p, t = _pair(pred, target)
    inter = int(np.count_nonzero(p & t))
    pa, ta = int(np.count_nonzero(p)), int(np.count_nonzero(t))
    return ConfusionCounts(inter, pa + ta - inter, pa, ta)


def fg_bg_counts(pred, target):
    """(foreground, background) confusion counts; background is the complement."""
    p, t = _pair(pred, target)
    return counts(p, t), counts(~p, ~t)


def iou(pred, target):
    """Intersection over union; 1.0 when both masks are empty."""
    c = counts(pred, target)
    return 1.0 if c.union == 0 else c.intersection / c.union


def fb_iou(episodes):
    """Pooled foreground-background IoU: summed intersections over summed unions.

    ``episodes`` is an iterable of ``(pred, target)`` mask pairs.
    """
    episodes = list(episodes)
    if not episodes:
        raise ConfigError("fb_iou needs at least one episode")
    inter = union = 0
    for pred, target in episodes:
        for c in fg_bg_counts(pred, target):
            inter += c.intersection
            union += c.union
    return 1.0 if union == 0 else inter / union


def miou(class_ids, pairs):
    """Mean over classes of the class-pooled foreground IoU."""
    pooled = {}
    for cid, (pred, target) in zip(class_ids, pairs, strict=True):
        pooled[cid] = pooled.get(cid, ZERO_COUNTS) + counts(pred, target)
    if not pooled:
        raise ConfigError("miou needs at least one episode")
    return _mean_class_iou(pooled)


def _mean_class_iou(pooled):
    vals = [1.0 if c.union == 0 else c.intersection / c.union
            for _, c in sorted(pooled.items())]
    return math.fsum(vals) / len(vals)


def prior_cross_entropy(prior, target, epsilon=DEFAULT_EPSILON):
    """Mean binary cross-entropy (natural log) of a prior map against a mask."""
    if not 0.0 < epsilon < 0.5:
        raise ConfigError(f"epsilon must lie in (0, 0.5), got {epsilon}")
    p = as_tensor(prior).astype(np.float64)
    if p.ndim == 3 and p.shape[0] == 1:
        p = p[0]
    t = as_mask(target)
    if p.shape != t.shape:
        raise DimensionError(f"prior {p.shape} vs target {t.shape}")
    p = np.clip(p, epsilon, 1.0 - epsilon)
    losses = np.where(t, -np.log(p), -np.log1p(-p))
    return math.fsum(losses.ravel()) / losses.size


@dataclass(frozen=True)
class EpisodeRecord:
    """Per-episode evaluation record consumed by :func:`aggregate`."""

    class_id: int
    fg: ConfusionCounts
    bg: ConfusionCounts
    ce: float

    @classmethod
    def from_masks(cls, class_id, pred, target, prior, epsilon=DEFAULT_EPSILON):
        fg, bg = fg_bg_counts(pred, target)
        return cls(class_id, fg, bg, prior_cross_entropy(prior, target, epsilon))


@dataclass(frozen=True)
class MetricSummary:
    miou: float
    fb_iou: float
    prior_ce_mean: float
    prior_ce_std: float
    episode_count: int
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        return {"miou": self.miou, "fb_iou": self.fb_iou,
                "ce_mean": self.prior_ce_mean, "ce_std": self.prior_ce_std,
                "n": self.episode_count}

    def csv_row(self, fold=0):
        return {"fold": fold, **self.to_dict()}


def aggregate(records):
    """Fold-level summary: class-wise mIoU, pooled FB-IoU, CE mean and population std."""
    records = list(records)
    if not records:
        raise ConfigError("aggregate needs at least one record")
    pooled = {}
    inter = union = 0
    for r in records:
        pooled[r.class_id] = pooled.get(r.class_id, ZERO_COUNTS) + r.fg
        inter += r.fg.intersection + r.bg.intersection
        union += r.fg.union + r.bg.union
    ces = [r.ce for r in records]
    mean = math.fsum(ces) / len(ces)
    std = math.sqrt(math.fsum((x - mean) ** 2 for x in ces) / len(ces))
    return MetricSummary(
        miou=_mean_class_iou(pooled),
        fb_iou=1.0 if union == 0 else inter / union,
        prior_ce_mean=mean,
        prior_ce_std=std,
        episode_count=len(records),
    )


def summaries_to_csv(summaries):
    """Render ``{fold: MetricSummary}`` as CSV text with the documented columns."""
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
    writer.writeheader()
    for fold, s in sorted(summaries.items()):
        writer.writerow(s.csv_row(fold))
    return buf.getvalue()
