"""Pain-related action units, their combinations and the cluster layout.

All vector and matrix layouts use the ascending AU order in ``AU_IDS``.
"""

import numpy as np

AU_IDS = (4, 6, 7, 9, 10, 20, 26, 43)
N_AUS = len(AU_IDS)
AU_INDEX = {au: i for i, au in enumerate(AU_IDS)}

# Entries of the compact vector, in order. A 1-tuple is a single AU, a
# 2-tuple a co-occurrence scored by the min rule.
COMPACT_LAYOUT = (
    (6,),
    (7,),
    (20,),
    (4, 6),
    (4, 7),
    (4, 43),
    (4, 9),
    (4, 10),
    (4, 26),
    (9, 26),
    (10, 26),
)
N_COMPACT = len(COMPACT_LAYOUT)

CLUSTER_NAMES = ("6/7", "20", "4+6/7/43", "4+9/10", "4+26", "9/10+26")
N_CLUSTERS = len(CLUSTER_NAMES)

# Compact entry -> cluster column it belongs to.
COMBINATION_CLUSTER = (0, 0, 1, 2, 2, 2, 3, 3, 4, 5, 5)

CLUSTER_COMBINATIONS = tuple(
    tuple(combo for combo, k in zip(COMPACT_LAYOUT, COMBINATION_CLUSTER) if k == c)
    for c in range(N_CLUSTERS)
)

CLUSTER_AUS = tuple(
    tuple(sorted({au for combo in combos for au in combo}))
    for combos in CLUSTER_COMBINATIONS
)


def _build_mask():
    mask = np.zeros((N_AUS, N_CLUSTERS), dtype=bool)
    for k, aus in enumerate(CLUSTER_AUS):
        for au in aus:
            mask[AU_INDEX[au], k] = True
    mask.setflags(write=False)
    return mask


CLUSTER_MASK = _build_mask()

# AUs that never form a pain combination on their own; the synthetic
# generator uses them as single-AU distractors.
LONE_AUS = (4, 9, 10, 26, 43)
