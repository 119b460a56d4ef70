"""
Segmentation metrics
====================

IoU per class is pooled over episodes before averaging (mIoU); FB-IoU pools
foreground and background counts together.  The prior cross-entropy of an
uninformative constant 0.5 map is exactly ln 2.
"""

import math

import numpy as np

from fssk.metrics import EpisodeRecord, aggregate, fb_iou, miou, prior_cross_entropy, summaries_to_csv

rng = np.random.default_rng(0)
pairs = [(rng.random((6, 6)) < 0.5, rng.random((6, 6)) < 0.5) for _ in range(6)]
classes = [0, 0, 1, 1, 2, 2]
print("mIoU  ", miou(classes, pairs))
print("FB-IoU", fb_iou(pairs))

flat = np.full((6, 6), 0.5)
print("CE(0.5) =", prior_cross_entropy(flat, pairs[0][1]), "ln 2 =", math.log(2))

###############################################################################
# Fold summaries render as CSV.

recs = [EpisodeRecord.from_masks(c, p, t, rng.random((6, 6))) for c, (p, t) in zip(classes, pairs)]
print(summaries_to_csv({0: aggregate(recs)}))
