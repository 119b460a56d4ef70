"""Brute-force reference implementations and the oracle suite runner.

Every oracle here is written as explicit Python loops over pixels and
channels with float64 ``math`` arithmetic, sharing no code with the
vectorized kernels.  :func:`run_suites` compares each kernel against its
oracle on seeded random cases and reports the largest deviation.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import attention, episode, metrics, pmgm, tensor

NEG_INF = float("-inf")


# ---------------------------------------------------------------- tensor core

def naive_elementwise_mul(a, mask):
    c, h, w = len(a), len(a[0]), len(a[0][0])
    return [[[float(a[k][y][x]) * float(mask[y][x]) for x in range(w)]
             for y in range(h)] for k in range(c)]


def naive_conv1x1(x, weights, bias):
    c_in, h, w = len(x), len(x[0]), len(x[0][0])
    out = []
    for o in range(len(weights)):
        plane = []
        for y in range(h):
            row = []
            for xx in range(w):
                acc = float(bias[o])
                for i in range(c_in):
                    acc += float(weights[o][i]) * float(x[i][y][xx])
                row.append(acc)
            plane.append(row)
        out.append(plane)
    return out


def naive_concat(parts):
    out = []
    for p in parts:
        for plane in p:
            out.append([list(map(float, row)) for row in plane])
    return out


def naive_softmax_row(row):
    finite = [v for v in row if v != NEG_INF]
    m = max(finite)
    exps = [0.0 if v == NEG_INF else math.exp(v - m) for v in row]
    s = sum(exps)
    return [e / s for e in exps]


def naive_resize_bilinear(img, out_h, out_w):
    in_h, in_w = len(img), len(img[0])
    out = []
    for y in range(out_h):
        sy = min(max((y + 0.5) * in_h / out_h - 0.5, 0.0), in_h - 1)
        y0 = int(math.floor(sy))
        y1 = min(y0 + 1, in_h - 1)
        wy = sy - y0
        row = []
        for x in range(out_w):
            sx = min(max((x + 0.5) * in_w / out_w - 0.5, 0.0), in_w - 1)
            x0 = int(math.floor(sx))
            x1 = min(x0 + 1, in_w - 1)
            wx = sx - x0
            v = ((1 - wy) * (1 - wx) * img[y0][x0] + (1 - wy) * wx * img[y0][x1]
                 + wy * (1 - wx) * img[y1][x0] + wy * wx * img[y1][x1])
            row.append(float(v))
        out.append(row)
    return out


def naive_minmax(values, region):
    h, w = len(values), len(values[0])
    lo, hi, n = math.inf, -math.inf, 0
    for y in range(h):
        for x in range(w):
            if region[y][x]:
                v = float(values[y][x])
                lo, hi, n = min(lo, v), max(hi, v), n + 1
    out = [[0.0] * w for _ in range(h)]
    for y in range(h):
        for x in range(w):
            if region[y][x]:
                out[y][x] = 0.5 if hi == lo else (float(values[y][x]) - lo) / (hi - lo)
    return out


# ---------------------------------------------------------------------- pmgm

def naive_map(features, region):
    c, h, w = len(features), len(features[0]), len(features[0][0])
    acc, n = [0.0] * c, 0
    for y in range(h):
        for x in range(w):
            if region[y][x]:
                n += 1
                for k in range(c):
                    acc[k] += float(features[k][y][x])
    return None if n == 0 else [a / n for a in acc]


def naive_cosine(u, v):
    dot = sum(a * b for a, b in zip(u, v))
    nu = math.sqrt(sum(a * a for a in u))
    nv = math.sqrt(sum(b * b for b in v))
    return 0.0 if nu == 0 or nv == 0 else dot / (nu * nv)


def naive_pmgm_prior(sf, s_mask, s_cam, qf, q_cam, delta):
    """Query prior computed pixel by pixel from raw lists."""
    c, h, w = len(qf), len(qf[0]), len(qf[0][0])
    s_pos = [[float(s_cam[y][x]) >= delta for x in range(w)] for y in range(h)]
    q_pos = [[float(q_cam[y][x]) >= delta for x in range(w)] for y in range(h)]
    a1 = [[bool(s_mask[y][x]) and s_pos[y][x] for x in range(w)] for y in range(h)]
    a2 = [[bool(s_mask[y][x]) and not s_pos[y][x] for x in range(w)] for y in range(h)]
    p = naive_map(sf, s_mask)
    p1 = naive_map(sf, a1) or p
    p2 = naive_map(sf, a2) or p
    raw = [[0.0] * w for _ in range(h)]
    for y in range(h):
        for x in range(w):
            vec = [float(qf[k][y][x]) for k in range(c)]
            raw[y][x] = naive_cosine(vec, p1 if q_pos[y][x] else p2)
    q_neg = [[not v for v in row] for row in q_pos]
    pos_map = naive_minmax(raw, q_pos)
    neg_map = naive_minmax(raw, q_neg)
    return [[pos_map[y][x] + neg_map[y][x] for x in range(w)] for y in range(h)]


def naive_baseline_prior(qf, proto):
    c, h, w = len(qf), len(qf[0]), len(qf[0][0])
    raw = [[naive_cosine([float(qf[k][y][x]) for k in range(c)], proto)
            for x in range(w)] for y in range(h)]
    return naive_minmax(raw, [[True] * w for _ in range(h)])


# ----------------------------------------------------------------- attention

def naive_scores(qf, sf, wq, wk):
    c_q, hq, wq_ = len(qf), len(qf[0]), len(qf[0][0])
    c_s, hs, ws = len(sf), len(sf[0]), len(sf[0][0])
    d_k = len(wq)
    qs = [[sum(float(wq[d][k]) * float(qf[k][y][x]) for k in range(c_q)) for d in range(d_k)]
          for y in range(hq) for x in range(wq_)]
    ks = [[sum(float(wk[d][k]) * float(sf[k][y][x]) for k in range(c_s)) for d in range(d_k)]
          for y in range(hs) for x in range(ws)]
    scale = math.sqrt(d_k)
    return [[sum(a * b for a, b in zip(q, k)) / scale for k in ks] for q in qs]


def _argmax(values):
    best, idx = values[0], 0
    for i, v in enumerate(values):
        if v > best:
            best, idx = v, i
    return idx


def naive_dicm(a, ms, mq):
    """Returns the set of masked (row, col) cells."""
    n_q, n_s = len(a), len(a[0])
    cells = set()
    for i in range(n_s):
        j = _argmax([a[r][i] for r in range(n_q)])
        if bool(ms[i]) != bool(mq[j]):
            cells.add((j, i))
    return cells


def naive_cyctr(a, ms):
    """Returns the set of masked columns (before the all-columns guard)."""
    n_q, n_s = len(a), len(a[0])
    cols = set()
    for j in range(n_s):
        max_q = _argmax([a[r][j] for r in range(n_q)])
        max_s = _argmax(list(a[max_q]))
        if bool(ms[j]) != bool(ms[max_s]):
            cols.add(j)
    return cols


# ------------------------------------------------------------------- metrics

def naive_fb_iou(pairs):
    inter = union = 0
    for pred, target in pairs:
        for y in range(len(pred)):
            for x in range(len(pred[0])):
                p, t = bool(pred[y][x]), bool(target[y][x])
                # foreground class, then background class
                inter += (p and t) + ((not p) and (not t))
                union += (p or t) + ((not p) or (not t))
    return 1.0 if union == 0 else inter / union


def naive_ce_stats(values):
    n = len(values)
    mean = sum(values) / n
    return mean, math.sqrt(sum((v - mean) ** 2 for v in values) / n)


# -------------------------------------------------------------------- runner

@dataclass
class SuiteResult:
    name: str
    cases: int
    max_abs_diff: float
    tolerance: float
    failure: dict = field(default=None)

    @property
    def passed(self):
        return self.failure is None

    def to_dict(self):
        return {"suite": self.name, "cases": self.cases, "max_abs_diff": self.max_abs_diff,
                "tolerance": self.tolerance, "passed": self.passed, "failure": self.failure}


class _Suite:
    def __init__(self, name, tolerance):
        self.result = SuiteResult(name, 0, 0.0, tolerance)

    def check(self, got, want, case):
        got = np.asarray(got, dtype=np.float64)
        want = np.asarray(want, dtype=np.float64)
        self.result.cases += 1
        if got.shape != want.shape:
            diff = math.inf
        else:
            both_inf = np.isinf(got) & np.isinf(want) & (np.sign(got) == np.sign(want))
            d = np.where(both_inf, 0.0, np.abs(got - want))
            diff = float(np.nanmax(d, initial=0.0)) if not np.isnan(d).any() else math.inf
        self.result.max_abs_diff = max(self.result.max_abs_diff, diff)
        if diff > self.result.tolerance and self.result.failure is None:
            self.result.failure = {"case": case, "abs_diff": diff}


def _suite_tensor(rng, n):
    mul, conv, soft, resize, norm = (_Suite("elementwise_mul", 1e-6), _Suite("conv1x1", 1e-6),
                                     _Suite("row_softmax", 1e-6), _Suite("resize_bilinear", 1e-6),
                                     _Suite("masked_minmax_normalize", 0.0))
    for i in range(n):
        a = rng.standard_normal((3, 4, 4)).astype(np.float32)
        m = rng.random((4, 4)) < 0.5
        mul.check(tensor.elementwise_mul(a, m), naive_elementwise_mul(a.tolist(), m.tolist()),
                  {"kind": "elementwise_mul", "index": i})
        x = rng.standard_normal((4, 3, 5)).astype(np.float32)
        wgt = rng.standard_normal((2, 4)).astype(np.float32)
        b = rng.standard_normal(2).astype(np.float32)
        conv.check(tensor.conv1x1(x, wgt, b),
                   naive_conv1x1(x.tolist(), wgt.tolist(), b.tolist()),
                   {"kind": "conv1x1", "index": i})
        row = rng.standard_normal((3, 6)).astype(np.float32)
        row[rng.random((3, 6)) < 0.3] = -np.inf
        row[:, 0] = rng.standard_normal(3).astype(np.float32)
        soft.check(tensor.row_softmax(row),
                   [naive_softmax_row(r) for r in row.astype(np.float64).tolist()],
                   {"kind": "row_softmax", "index": i})
        img = rng.random((int(rng.integers(1, 5)), int(rng.integers(1, 5)))).astype(np.float32)
        oh, ow = int(rng.integers(1, 9)), int(rng.integers(1, 9))
        resize.check(tensor.resize_bilinear(img, (oh, ow)),
                     naive_resize_bilinear(img.astype(np.float64).tolist(), oh, ow),
                     {"kind": "resize_bilinear", "index": i, "size": [oh, ow]})
        vals = rng.random((8, 8)).astype(np.float32)
        reg = rng.random((8, 8)) < 0.4
        norm.check(tensor.masked_minmax_normalize(vals, reg),
                   np.asarray(naive_minmax(vals.tolist(), reg.tolist()), dtype=np.float32),
                   {"kind": "masked_minmax_normalize", "index": i})
    return [s.result for s in (mul, conv, soft, resize, norm)]


def _random_episode(rng, c=16, h=8, w=8):
    sf = rng.standard_normal((c, h, w)).astype(np.float32)
    qf = rng.standard_normal((c, h, w)).astype(np.float32)
    sm = rng.random((h, w)) < 0.5
    sm[int(rng.integers(h)), int(rng.integers(w))] = True
    s_cam = rng.random((h, w)).astype(np.float32)
    q_cam = rng.random((h, w)).astype(np.float32)
    return sf, sm, s_cam, qf, q_cam


def _suite_pmgm(rng, n):
    regions, mapool, prior, base, fuse = (_Suite("decompose_regions", 0.0),
                                          _Suite("masked_average_pool", 1e-5),
                                          _Suite("pmgm_prior", 1e-5),
                                          _Suite("baseline_prior", 1e-5),
                                          _Suite("fuse_features", 1e-5))
    for i in range(n):
        sf, sm, s_cam, qf, q_cam = _random_episode(rng)
        case = {"kind": "pmgm", "index": i}
        pos, neg = pmgm.threshold_cam(s_cam, 0.7)
        r = pmgm.decompose_regions(sm, pos, neg)
        want_a1 = [[bool(sm[y, x]) and float(s_cam[y, x]) >= 0.7 for x in range(8)]
                   for y in range(8)]
        want_a2 = [[bool(sm[y, x]) and float(s_cam[y, x]) < 0.7 for x in range(8)]
                   for y in range(8)]
        regions.check(np.stack([r.a1, r.a2]), [want_a1, want_a2], case)
        got = pmgm.masked_average_pool(sf, sm)
        mapool.check(got, naive_map(sf.tolist(), sm.tolist()), case)
        res = pmgm.pmgm_forward(sf, sm, s_cam, qf, q_cam, 0.7)
        want = naive_pmgm_prior(sf.tolist(), sm.tolist(), s_cam.tolist(), qf.tolist(),
                                q_cam.tolist(), float(np.float32(0.7)))
        prior.check(res.query_prior[0], want, case)
        p = naive_map(sf.tolist(), sm.tolist())
        base.check(episode.baseline_prior(qf, res.prototypes.p)[0],
                   naive_baseline_prior(qf.tolist(), p), case)
        c = 4
        x = rng.standard_normal((c, 3, 3)).astype(np.float32)
        xp = rng.standard_normal((c, 3, 3)).astype(np.float32)
        xc = rng.standard_normal((c, 3, 3)).astype(np.float32)
        pr = rng.random((1, 3, 3)).astype(np.float32)
        wgt = rng.standard_normal((c, 3 * c + 1)).astype(np.float32)
        b = rng.standard_normal(c).astype(np.float32)
        want = naive_conv1x1(naive_concat([x.tolist(), xp.tolist(), xc.tolist(), pr.tolist()]),
                             wgt.tolist(), b.tolist())
        fuse.check(pmgm.fuse_features(x, xp, xc, pr, wgt, b), want, case)
    return [s.result for s in (regions, mapool, prior, base, fuse)]


def _suite_attention(rng, n):
    scores, dicm, cyctr = (_Suite("cross_attention_scores", 1e-5),
                           _Suite("dicm_mask", 0.0), _Suite("cyctr_mask", 0.0))
    for i in range(n):
        c = 6
        qf = rng.standard_normal((c, 2, 3)).astype(np.float32)
        sf = rng.standard_normal((c, 3, 2)).astype(np.float32)
        wts = attention.init_projection(rng, c, d_k=4)
        amap = attention.cross_attention_scores(qf, sf, wts)
        a = amap.scores.astype(np.float64).tolist()
        case = {"kind": "attention", "index": i}
        scores.check(amap.scores, naive_scores(qf.tolist(), sf.tolist(),
                                               wts.wq.tolist(), wts.wk.tolist()), case)
        ms = rng.random(6) < 0.5
        mq = rng.random(6) < 0.5
        masked, _ = attention.dicm_mask(amap, ms, mq)
        got = {tuple(map(int, ij)) for ij in np.argwhere(np.isneginf(masked.scores))}
        want = naive_dicm(a, ms.tolist(), mq.tolist())
        dicm.check(float(got != want), 0.0, {**case, "got": sorted(got), "want": sorted(want)})
        masked, report = attention.cyctr_mask(amap, ms)
        got_cols = {int(j) for j in np.flatnonzero(np.isneginf(masked.scores).all(axis=0))}
        want_cols = naive_cyctr(a, ms.tolist())
        if len(want_cols) == len(a[0]):
            want_cols = set()
        cyctr.check(float(got_cols != want_cols), 0.0,
                    {**case, "got": sorted(got_cols), "want": sorted(want_cols)})
    return [s.result for s in (scores, dicm, cyctr)]


def _suite_metrics(rng, n):
    fb, agg = _Suite("fb_iou", 0.0), _Suite("aggregate", 1e-9)
    for i in range(n):
        pairs = [(rng.random((5, 5)) < 0.5, rng.random((5, 5)) < 0.5)
                 for _ in range(int(rng.integers(1, 6)))]
        fb.check(metrics.fb_iou(pairs),
                 naive_fb_iou([(p.tolist(), t.tolist()) for p, t in pairs]),
                 {"kind": "fb_iou", "index": i})
        ces = rng.random(int(rng.integers(1, 10))).tolist()
        zero = metrics.ZERO_COUNTS
        s = metrics.aggregate([metrics.EpisodeRecord(0, zero, zero, v) for v in ces])
        agg.check([s.prior_ce_mean, s.prior_ce_std], naive_ce_stats(ces),
                  {"kind": "aggregate", "index": i})
    return [fb.result, agg.result]


def run_suites(seed=0, cases=50):
    """Run every oracle suite; returns a list of :class:`SuiteResult`."""
    rng = np.random.default_rng(seed)
    results = []
    for suite, n in ((_suite_tensor, 2 * cases), (_suite_pmgm, cases),
                     (_suite_attention, cases), (_suite_metrics, cases)):
        results.extend(suite(rng, n))
    return results
