"""
Masking cross-attention with support and query labels
=====================================================

Two ways of suppressing attention between pixels of different classes:
one masks the single best-matching query cell per support column, the
other masks whole support columns whose support -> query -> support cycle
ends on the wrong label.  The second throws away far more of the map.
"""

import numpy as np

from fssk.attention import AttentionMap, cross_attention_scores, cyctr_mask, dicm_mask, init_projection
from fssk.episode import SyntheticConfig, generate_synthetic_episode

###############################################################################
# A 2x2 example small enough to trace by hand.

a = AttentionMap(np.array([[0.1, 0.9], [0.8, 0.2]], np.float32))
out, rep = dicm_mask(a, support_mask=[0, 1], query_mask=[0, 1])
print(out.scores, rep.to_dict())

b = AttentionMap(np.array([[0.9, 0.8], [0.1, 0.2]], np.float32))
out, rep = cyctr_mask(b, support_mask=[0, 1])
print(out.scores, rep.to_dict())

###############################################################################
# On a 30x30 episode with a distractor the difference is orders of magnitude.

ep = generate_synthetic_episode(SyntheticConfig(seed=1, c=16, h=30, w=30, distractor=True), 0)
w = init_projection(np.random.default_rng(0), 16)
attn = cross_attention_scores(ep.query_features, ep.support_features[0], w)
_, rd = dicm_mask(attn, ep.support_masks[0], ep.query_mask)
_, rc = cyctr_mask(attn, ep.support_masks[0])
print(f"dicm masks {rd.masked_cells} cells ({100 * rd.ratio:.4f}%)")
print(f"cyctr masks {rc.masked_columns} columns = {rc.masked_cells} cells ({100 * rc.ratio:.2f}%)")
