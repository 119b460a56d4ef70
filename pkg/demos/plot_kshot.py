"""
K-shot averaging
================

With several support shots the priors and prototypes are averaged before
fusion.  Feeding the same shot k times must reproduce the one-shot run bit
for bit, which this script checks.
"""

import numpy as np

from fssk.episode import Episode, SyntheticConfig, generate_synthetic_episode, make_weights, run_pipeline

ep = generate_synthetic_episode(SyntheticConfig(seed=5, distractor=True), 0)
weights = make_weights(0, ep.shape[0])
one = run_pipeline(ep, weights, "cyctr")

for k in (2, 4):
    rep = Episode(np.repeat(ep.support_features, k, 0), np.repeat(ep.support_masks, k, 0),
                  np.repeat(ep.support_cams, k, 0), ep.query_features, ep.query_cam,
                  ep.query_mask, ep.class_id)
    res = run_pipeline(rep, weights, "cyctr")
    print(k, "shots identical:", np.array_equal(res.decoder_output, one.decoder_output))

###############################################################################
# Distinct shots give a genuinely averaged prior.

three = generate_synthetic_episode(SyntheticConfig(seed=5, k=3, distractor=True), 0)
res = run_pipeline(three, weights, "none")
print("3-shot prior range:", float(res.prior.min()), float(res.prior.max()))
