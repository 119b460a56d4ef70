"""Episodes: data model, synthetic generation, baseline prior and the full pipeline."""

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.ndimage import binary_dilation, binary_erosion, gaussian_filter

from . import fst
from .attention import decoder_chain, init_projection
from .errors import (ConfigError, DimensionError, FormatError, FsskError,
                     InvalidEpisodeError, ModeError)
from .pmgm import (DEFAULT_DELTA, CamHeatmap, expand_prototypes, fuse_features,
                   kshot_average, pmgm_forward, cosine_map)
from .tensor import REAL, as_mask, as_tensor, masked_minmax_normalize

MANIFEST = "manifest.json"


@dataclass(frozen=True)
class Episode:
    """One support/query task.

    Support arrays are stacked over shots: features ``k x c x h x w``,
    masks ``k x h x w``, heatmaps ``k x h' x w'``.  ``query_mask`` is
    ``None`` in inference mode.
    """

    support_features: np.ndarray
    support_masks: np.ndarray
    support_cams: np.ndarray
    query_features: np.ndarray
    query_cam: np.ndarray
    query_mask: Optional[np.ndarray] = None
    class_id: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        sf = as_tensor(self.support_features)
        if sf.ndim == 3:
            sf = sf[None]
        sm = np.asarray(self.support_masks).astype(bool)
        if sm.ndim == 2:
            sm = sm[None]
        sc = np.clip(as_tensor(self.support_cams), 0.0, 1.0)
        if sc.ndim == 2:
            sc = sc[None]
        qf = as_tensor(self.query_features)
        qc = np.clip(as_tensor(self.query_cam), 0.0, 1.0)
        if qf.ndim != 3 or sf.ndim != 4:
            raise DimensionError(f"bad feature ranks: support {sf.shape}, query {qf.shape}")
        k = sf.shape[0]
        if sf.shape[1:] != qf.shape or sm.shape != (k,) + qf.shape[1:] or sc.shape[0] != k:
            raise DimensionError(
                f"inconsistent extents: support {sf.shape}, masks {sm.shape}, "
                f"cams {sc.shape}, query {qf.shape}")
        for i in range(k):
            if not sm[i].any():
                raise InvalidEpisodeError(f"support mask of shot {i} is empty")
        qm = self.query_mask
        if qm is not None:
            qm = as_mask(qm)
            if qm.shape != qf.shape[1:]:
                raise DimensionError(f"query mask {qm.shape} vs features {qf.shape}")
        for name, val in (("support_features", sf), ("support_masks", sm),
                          ("support_cams", sc), ("query_features", qf),
                          ("query_cam", qc), ("query_mask", qm)):
            object.__setattr__(self, name, val)

    @property
    def k(self):
        return self.support_features.shape[0]

    @property
    def shape(self):
        return self.query_features.shape

    def without_query_mask(self):
        return Episode(self.support_features, self.support_masks, self.support_cams,
                       self.query_features, self.query_cam, None, self.class_id,
                       dict(self.meta))


@dataclass(frozen=True)
class SyntheticConfig:
    """Knobs of the synthetic episode generator.

    ``cam_fidelity`` is the probability that a CAM-activated pixel sits on the
    object; the rest are relocated onto random background pixels.
    ``distractor`` plants a background patch carrying the class's core
    signature in every image.
    """

    seed: int = 0
    c: int = 16
    h: int = 8
    w: int = 8
    signal: float = 1.0
    noise: float = 0.3
    cam_fidelity: float = 1.0
    distractor: bool = False
    k: int = 1
    n_classes: int = 5
    query_mask: bool = True

    def __post_init__(self):
        if self.noise < 0:
            raise ConfigError(f"noise must be >= 0, got {self.noise}")
        if not 0.0 <= self.cam_fidelity <= 1.0:
            raise ConfigError(f"cam_fidelity must lie in [0, 1], got {self.cam_fidelity}")
        if self.c < 2 or self.h < 4 or self.w < 4:
            raise ConfigError(f"extents too small: c={self.c}, h={self.h}, w={self.w}")
        if self.k < 1 or self.n_classes < 1:
            raise ConfigError("k and n_classes must be >= 1")


def episode_seed(master_seed, index):
    """Counter-based child seed so episode i does not depend on episodes < i."""
    return np.random.SeedSequence([int(master_seed), int(index)])


def class_signature(class_id, c):
    """Unit (core, peripheral) directions of a class; orthogonal to each other."""
    rng = np.random.default_rng([0xC1A55, int(class_id), int(c)])
    core = rng.standard_normal(c)
    core /= np.linalg.norm(core)
    part = rng.standard_normal(c)
    part -= part.dot(core) * core
    part /= np.linalg.norm(part)
    return core, part


def _box(rng, h, w, lo, hi, avoid=None):
    for _ in range(100):
        bh = int(rng.integers(lo[0], hi[0] + 1))
        bw = int(rng.integers(lo[1], hi[1] + 1))
        y = int(rng.integers(0, h - bh + 1))
        x = int(rng.integers(0, w - bw + 1))
        m = np.zeros((h, w), dtype=bool)
        m[y:y + bh, x:x + bw] = True
        if avoid is None or not (m & avoid).any():
            return m
    return np.zeros((h, w), dtype=bool)


def _image(rng, cfg, core_dir, part_dir):
    h, w, c = cfg.h, cfg.w, cfg.c
    big = (max(3, (h * 2) // 3), max(3, (w * 2) // 3))
    small = (max(3, h // 2), max(3, w // 2))
    fg = _box(rng, h, w, small, big)
    core = binary_erosion(fg)
    periphery = fg & ~core

    feats = cfg.noise * rng.standard_normal((c, h, w))
    feats[:, core] += cfg.signal * core_dir[:, None]
    feats[:, periphery] += cfg.signal * part_dir[:, None]
    distractor = np.zeros((h, w), dtype=bool)
    if cfg.distractor:
        grown = binary_dilation(fg)
        distractor = _box(rng, h, w, (2, 2), (max(2, h // 3), max(2, w // 3)), avoid=grown)
        feats[:, distractor] += cfg.signal * core_dir[:, None]

    cam = 0.55 * core + 0.45 * gaussian_filter(fg.astype(np.float64), sigma=1.0)
    # each core activation spawns, with probability 1 - fidelity, a false
    # activation on a random background pixel, so about `fidelity` of the
    # CAM+ area lies on the object
    n_false = int((rng.random(int(core.sum())) >= cfg.cam_fidelity).sum())
    pool = np.flatnonzero(~fg.ravel())
    if n_false and pool.size:
        dest = rng.choice(pool, size=min(n_false, pool.size), replace=False)
        cam.ravel()[dest] = 0.8 + 0.2 * rng.random(dest.size)
    cam = np.clip(cam + 0.05 * rng.random((h, w)), 0.0, 1.0)
    return feats.astype(REAL), fg, cam.astype(REAL), distractor


def generate_synthetic_episode(config, index=None):
    """Deterministically build an episode from ``config``.

    With ``index`` given, the seed is derived from ``(config.seed, index)``.
    """
    seed = config.seed if index is None else episode_seed(config.seed, index)
    rng = np.random.default_rng(seed)
    class_id = int(rng.integers(0, config.n_classes))
    core_dir, part_dir = class_signature(class_id, config.c)
    shots = [_image(rng, config, core_dir, part_dir) for _ in range(config.k)]
    qf, qm, qc, qd = _image(rng, config, core_dir, part_dir)
    meta = {"seed": config.seed, "index": index, "distractor": config.distractor,
            "cam_fidelity": config.cam_fidelity, "noise": config.noise,
            "signal": config.signal, "query_distractor": qd}
    return Episode(
        support_features=np.stack([s[0] for s in shots]),
        support_masks=np.stack([s[1] for s in shots]),
        support_cams=np.stack([s[2] for s in shots]),
        query_features=qf,
        query_cam=qc,
        query_mask=qm if config.query_mask else None,
        class_id=class_id,
        meta=meta,
    )


def baseline_prior(query_features, support_prototype):
    """Single-prototype prior: cosine against p, min-max normalized over the image."""
    if support_prototype is None:
        raise InvalidEpisodeError("baseline prior needs a defined prototype")
    p = np.asarray(support_prototype, dtype=np.float64)
    if not np.any(p):
        raise InvalidEpisodeError("baseline prior prototype is the zero vector")
    cos = cosine_map(query_features, p)
    return masked_minmax_normalize(cos[None], np.ones(cos.shape, dtype=bool))


@dataclass(frozen=True)
class PipelineWeights:
    fusion_w: np.ndarray
    fusion_b: np.ndarray
    blocks: list


def make_weights(seed, c, blocks=5, cab=4):
    """Seeded fusion and decoder weights; the first ``cab`` decoders are cross-attention."""
    if blocks < 1 or not 0 <= cab <= blocks:
        raise ConfigError(f"need blocks >= 1 and 0 <= cab <= blocks (got {blocks}, {cab})")
    rng = np.random.default_rng([int(seed), 0xF05E])
    bound = 1.0 / np.sqrt(3 * c + 1)
    fw = rng.uniform(-bound, bound, size=(c, 3 * c + 1)).astype(REAL)
    fb = rng.uniform(-bound, bound, size=c).astype(REAL)
    decs = [init_projection(rng, c, block_index=i, cross=i < cab) for i in range(blocks)]
    return PipelineWeights(fw, fb, decs)


@dataclass(frozen=True)
class PipelineResult:
    prior: np.ndarray
    prototypes: object
    fused_query: np.ndarray
    fused_support: np.ndarray
    support_mask: np.ndarray
    decoder_output: np.ndarray
    reports: list
    shots: list


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except FsskError as e:
        raise type(e)(f"stage {name}: {e}") from e


def _mean64(arrays):
    return (np.sum([np.asarray(a, np.float64) for a in arrays], axis=0)
            / len(arrays)).astype(REAL)


def run_pipeline(episode, weights, strategy="none", delta=DEFAULT_DELTA):
    """Prior generation, feature fusion for both branches, then the decoder chain.

    K-shot episodes average priors and prototypes before fusion; fused
    support features are averaged across shots and the support mask is the
    per-pixel majority, giving one shared support branch.
    """
    if strategy == "dicm" and episode.query_mask is None:
        raise ModeError("dicm needs the query mask, which is absent (inference mode); "
                        "use strategy 'none'")
    qf = episode.query_features
    c, h, w = qf.shape
    shots = [
        _stage("pmgm", pmgm_forward, episode.support_features[i], episode.support_masks[i],
               CamHeatmap(episode.support_cams[i], episode.class_id), qf,
               CamHeatmap(episode.query_cam, episode.class_id), delta)
        for i in range(episode.k)
    ]
    prior, protos = _stage("kshot_average", kshot_average,
                           [s.query_prior for s in shots], [s.prototypes for s in shots])
    q_pos, q_neg = shots[0].query_cam_pos, shots[0].query_cam_neg
    x_p, x_c = _stage("expand_prototypes", expand_prototypes, protos, q_pos, q_neg, c, h, w)
    fused_q = _stage("fuse_query", fuse_features, qf, x_p, x_c, prior,
                     weights.fusion_w, weights.fusion_b)
    fused_s = []
    for i, s in enumerate(shots):
        sx_p, sx_c = _stage("expand_prototypes", expand_prototypes, protos,
                            s.regions.a1, s.regions.a2, c, h, w)
        fused_s.append(_stage("fuse_support", fuse_features, episode.support_features[i],
                              sx_p, sx_c, s.support_prior, weights.fusion_w,
                              weights.fusion_b))
    support = _mean64(fused_s)
    s_mask = episode.support_masks.mean(axis=0) >= 0.5
    out, reports = _stage("decoder", decoder_chain, fused_q, support, weights.blocks,
                          strategy, s_mask, episode.query_mask)
    return PipelineResult(prior=prior, prototypes=protos, fused_query=fused_q,
                          fused_support=support, support_mask=s_mask,
                          decoder_output=out, reports=reports, shots=shots)


def save_episode(episode, directory):
    """Write an episode as FST files plus ``manifest.json``."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    files = {"support_features": [], "support_mask": [], "support_cam": []}
    for i in range(episode.k):
        for key, arr in (("support_features", episode.support_features[i]),
                         ("support_mask", episode.support_masks[i]),
                         ("support_cam", episode.support_cams[i])):
            name = f"{key}_{i}.fst"
            fst.save(d / name, arr)
            files[key].append(name)
    fst.save(d / "query_features.fst", episode.query_features)
    fst.save(d / "query_cam.fst", episode.query_cam)
    files["query_features"] = "query_features.fst"
    files["query_cam"] = "query_cam.fst"
    if episode.query_mask is not None:
        fst.save(d / "query_mask.fst", episode.query_mask)
        files["query_mask"] = "query_mask.fst"
    meta = {k: v for k, v in episode.meta.items() if k != "query_distractor"}
    manifest = {"class_id": episode.class_id, "k": episode.k,
                "distractor": bool(meta.pop("distractor", False)),
                "meta": meta, "files": files}
    (d / MANIFEST).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def load_episode(directory):
    d = Path(directory)
    try:
        manifest = json.loads((d / MANIFEST).read_text())
        files = manifest["files"]
        k = int(manifest["k"])
        if len(files["support_features"]) != k:
            raise FormatError(f"{d / MANIFEST}: k={k} but "
                              f"{len(files['support_features'])} support files")
    except (KeyError, TypeError, ValueError) as e:
        raise FormatError(f"{d / MANIFEST}: malformed manifest ({e})") from e

    def stack(key):
        return np.stack([fst.load(d / name) for name in files[key]])

    qm = files.get("query_mask")
    meta = dict(manifest.get("meta", {}))
    meta["distractor"] = manifest.get("distractor", False)
    return Episode(
        support_features=stack("support_features"),
        support_masks=stack("support_mask"),
        support_cams=stack("support_cam"),
        query_features=fst.load(d / files["query_features"]),
        query_cam=fst.load(d / files["query_cam"]),
        query_mask=None if qm is None else fst.load(d / qm),
        class_id=int(manifest["class_id"]),
        meta=meta,
    )


def config_dict(config):
    return asdict(config)
