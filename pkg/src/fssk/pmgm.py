"""Prior map generation from CAM-partitioned dual prototypes.

Support and query grids are split by a thresholded class activation map into
CAM+ and CAM- regions.  The support foreground is pooled three ways (CAM+
foreground, CAM- foreground, whole foreground), query pixels in each CAM
region are scored by cosine similarity against the matching prototype, and
the two region-normalized maps are merged into a single prior.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigError, DimensionError, InvalidEpisodeError, InvariantError
from .tensor import (REAL, as_mask, as_tensor, channel_concat, conv1x1,
                     masked_minmax_normalize, resize_bilinear)

DEFAULT_DELTA = 0.7


@dataclass(frozen=True)
class CamHeatmap:
    """A class activation heatmap (``h x w``) for one image, clamped to [0, 1]."""

    grid: np.ndarray
    class_id: int = 0

    def __post_init__(self):
        g = as_tensor(self.grid)
        if g.ndim == 3 and g.shape[0] == 1:
            g = g[0]
        if g.ndim != 2:
            raise DimensionError(f"heatmap must be h x w, got {g.shape}")
        object.__setattr__(self, "grid", np.clip(g, 0.0, 1.0).astype(REAL))

    def resized(self, size):
        """Bilinear resize to the feature grid; done before thresholding."""
        return CamHeatmap(resize_bilinear(self.grid, size), self.class_id)


@dataclass(frozen=True)
class RegionMasks:
    cam_pos: np.ndarray
    cam_neg: np.ndarray
    a1: np.ndarray
    a2: np.ndarray


@dataclass(frozen=True)
class PrototypeSet:
    """Support prototypes; ``None`` marks a prototype whose region was empty.

    p1 pools CAM+ foreground, p2 pools CAM- foreground, p the whole foreground.
    """

    p1: Optional[np.ndarray]
    p2: Optional[np.ndarray]
    p: Optional[np.ndarray]

    @property
    def defined(self):
        return (self.p1 is not None, self.p2 is not None, self.p is not None)


def _grid(heatmap):
    return heatmap.grid if isinstance(heatmap, CamHeatmap) else CamHeatmap(heatmap).grid


def threshold_cam(heatmap, delta=DEFAULT_DELTA):
    """Split a heatmap into (cam_pos, cam_neg); a pixel is CAM+ iff value >= delta."""
    if not 0.0 < delta < 1.0:
        raise ConfigError(f"delta must lie in (0, 1), got {delta}")
    pos = _grid(heatmap) >= np.float32(delta)
    return pos, ~pos


def decompose_regions(support_mask, cam_pos, cam_neg):
    m = as_mask(support_mask)
    pos, neg = as_mask(cam_pos), as_mask(cam_neg)
    if not (m.shape == pos.shape == neg.shape):
        raise DimensionError(
            f"extent mismatch: mask {m.shape}, cam+ {pos.shape}, cam- {neg.shape}")
    return RegionMasks(cam_pos=pos, cam_neg=neg, a1=m & pos, a2=m & neg)


def masked_average_pool(features, region):
    """Per-channel mean of ``features`` over ``region``; ``None`` if the region is empty."""
    x = as_tensor(features)
    region = as_mask(region)
    if x.ndim != 3 or x.shape[1:] != region.shape:
        raise DimensionError(f"features {x.shape} vs region {region.shape}")
    n = int(region.sum())
    if n == 0:
        return None
    total = x[:, region].astype(np.float64).sum(axis=1)
    return (total / n).astype(REAL)


def build_prototypes(support_features, regions, support_mask):
    m = as_mask(support_mask)
    if not m.any():
        raise InvalidEpisodeError("support mask has no foreground pixel")
    return PrototypeSet(
        p1=masked_average_pool(support_features, regions.a1),
        p2=masked_average_pool(support_features, regions.a2),
        p=masked_average_pool(support_features, m),
    )


def cosine_map(features, prototype):
    """Per-pixel cosine similarity against ``prototype``; zero-norm vectors score 0."""
    x = as_tensor(features).astype(np.float64)
    p = np.asarray(prototype, dtype=np.float64)
    if x.ndim != 3 or p.shape != (x.shape[0],):
        raise DimensionError(f"features {x.shape} vs prototype {p.shape}")
    dots = np.tensordot(p, x, axes=(0, 0))
    norms = np.linalg.norm(x, axis=0) * np.linalg.norm(p)
    out = np.zeros_like(dots)
    ok = norms > 0
    out[ok] = dots[ok] / norms[ok]
    return out.astype(REAL)


def region_cosine_prior(query_features, prototypes, query_cam_pos, query_cam_neg):
    """Query prior map (1 x h x w) in [0, 1].

    CAM+ pixels are scored against p1 and CAM- pixels against p2, falling
    back to p when a region prototype is undefined.  Each region is min-max
    normalized on its own, then the disjoint maps are summed.
    """
    if prototypes.p is None:
        raise InvalidEpisodeError("foreground prototype is undefined")
    pos, neg = as_mask(query_cam_pos), as_mask(query_cam_neg)
    if (pos & neg).any():
        raise InvariantError("CAM+ and CAM- regions overlap")
    p1 = prototypes.p1 if prototypes.p1 is not None else prototypes.p
    p2 = prototypes.p2 if prototypes.p2 is not None else prototypes.p
    prior_pos = masked_minmax_normalize(cosine_map(query_features, p1), pos)
    prior_neg = masked_minmax_normalize(cosine_map(query_features, p2), neg)
    return (prior_pos + prior_neg)[None].astype(REAL)


def expand_prototypes(prototypes, region_pos, region_neg, c, h, w):
    """Broadcast prototypes to feature maps.

    Returns ``(x_p, x_c)``: ``x_p`` repeats p at every pixel, ``x_c`` holds p1
    on ``region_pos``, p2 on ``region_neg`` and zeros elsewhere.
    """
    pos, neg = as_mask(region_pos), as_mask(region_neg)
    if pos.shape != (h, w) or neg.shape != (h, w):
        raise DimensionError(f"regions {pos.shape}/{neg.shape} vs grid {(h, w)}")
    if (pos & neg).any():
        raise InvariantError("prototype regions overlap")
    x_p = np.zeros((c, h, w), dtype=REAL)
    if prototypes.p is not None:
        x_p[:] = np.asarray(prototypes.p, dtype=REAL)[:, None, None]
    x_c = np.zeros((c, h, w), dtype=REAL)
    if prototypes.p1 is not None:
        x_c[:, pos] = np.asarray(prototypes.p1, dtype=REAL)[:, None]
    if prototypes.p2 is not None:
        x_c[:, neg] = np.asarray(prototypes.p2, dtype=REAL)[:, None]
    return x_p, x_c


def fuse_features(branch_features, x_p, x_c, prior, weights, bias=None):
    """Concatenate [features, x_p, x_c, prior] and project back to c channels."""
    x = as_tensor(branch_features)
    prior = as_tensor(prior)
    if prior.ndim == 2:
        prior = prior[None]
    w = np.asarray(weights)
    c = x.shape[0]
    if w.shape != (c, 3 * c + 1):
        raise DimensionError(f"fusion weights {w.shape} != {(c, 3 * c + 1)}")
    return conv1x1(channel_concat([x, x_p, x_c, prior]), w, bias)


def kshot_average(per_shot_priors, per_shot_prototypes):
    """Average K priors and prototype sets.

    A prototype is averaged over the shots where it is defined.  Sums are
    accumulated in float64 so K identical shots reproduce the 1-shot values.
    """
    if not per_shot_priors or len(per_shot_priors) != len(per_shot_prototypes):
        raise ConfigError("kshot_average needs K >= 1 matching priors and prototypes")
    priors = [as_tensor(p) for p in per_shot_priors]
    if any(p.shape != priors[0].shape for p in priors):
        raise DimensionError(f"prior shapes differ: {[p.shape for p in priors]}")
    prior = (np.sum([p.astype(np.float64) for p in priors], axis=0)
             / len(priors)).astype(REAL)

    def mean_of(vectors):
        vectors = [v for v in vectors if v is not None]
        if not vectors:
            return None
        return (np.sum([np.asarray(v, np.float64) for v in vectors], axis=0)
                / len(vectors)).astype(REAL)

    protos = PrototypeSet(
        p1=mean_of([s.p1 for s in per_shot_prototypes]),
        p2=mean_of([s.p2 for s in per_shot_prototypes]),
        p=mean_of([s.p for s in per_shot_prototypes]),
    )
    return prior, protos


@dataclass(frozen=True)
class PMGMResult:
    """Intermediate products of one support/query pass."""

    regions: RegionMasks
    prototypes: PrototypeSet
    query_cam_pos: np.ndarray
    query_cam_neg: np.ndarray
    query_prior: np.ndarray
    support_prior: np.ndarray


def pmgm_forward(support_features, support_mask, support_cam, query_features,
                 query_cam, delta=DEFAULT_DELTA):
    """Run threshold -> regions -> prototypes -> priors for a single shot.

    Heatmaps whose extents differ from the feature grid are resized first.
    The support prior is computed the same way over the support CAM regions.
    """
    sf, qf = as_tensor(support_features), as_tensor(query_features)
    size = qf.shape[1:]
    if sf.shape[1:] != size:
        raise DimensionError(f"support {sf.shape} vs query {qf.shape}")
    s_cam = support_cam if isinstance(support_cam, CamHeatmap) else CamHeatmap(support_cam)
    q_cam = query_cam if isinstance(query_cam, CamHeatmap) else CamHeatmap(query_cam)
    if s_cam.grid.shape != size:
        s_cam = s_cam.resized(size)
    if q_cam.grid.shape != size:
        q_cam = q_cam.resized(size)
    s_pos, s_neg = threshold_cam(s_cam, delta)
    q_pos, q_neg = threshold_cam(q_cam, delta)
    regions = decompose_regions(support_mask, s_pos, s_neg)
    protos = build_prototypes(sf, regions, support_mask)
    return PMGMResult(
        regions=regions,
        prototypes=protos,
        query_cam_pos=q_pos,
        query_cam_neg=q_neg,
        query_prior=region_cosine_prior(qf, protos, q_pos, q_neg),
        support_prior=region_cosine_prior(sf, protos, s_pos, s_neg),
    )
