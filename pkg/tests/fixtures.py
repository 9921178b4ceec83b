"""Frozen reference data shared by unit and acceptance tests.

The 4x4 transition-matrix walkthrough and the 32-token scoring vectors
are small enough to check by hand; they are pinned here so regressions
surface as exact diffs rather than silent drift.
"""

from fractions import Fraction

import numpy as np

# --- 4x4 transition-matrix walkthrough (v=4, b=3, tau=1) ----------------

# Wrap-around banded mask with 3 ones per row, before shuffling.
BANDED_4x4 = np.array(
    [
        [1, 1, 0, 1],
        [1, 1, 1, 0],
        [0, 1, 1, 1],
        [1, 0, 1, 1],
    ],
    dtype=bool,
)

# Row permutation applied to the banded mask, then diagonal forced true.
PERMUTATION_4x4 = np.array([3, 1, 0, 2])
MASK_4x4 = np.array(
    [
        [1, 0, 1, 1],
        [1, 1, 1, 0],
        [1, 1, 1, 1],
        [0, 1, 1, 1],
    ],
    dtype=bool,
)

# Standard-normal draw feeding the masked softmax (2-decimal precision).
Z_4x4 = np.array(
    [
        [+1.41, +1.67, -1.52, +0.63],
        [-0.35, +0.45, +0.86, -0.49],
        [+1.42, -1.31, -0.31, +1.43],
        [-0.02, +1.55, -0.26, +1.13],
    ]
)

# Expected renormalized transition entries, rounded to 2 decimals.
A_4x4 = np.array(
    [
        [0.66, 0.00, 0.04, 0.30],
        [0.15, 0.34, 0.51, 0.00],
        [0.44, 0.03, 0.08, 0.45],
        [0.00, 0.55, 0.09, 0.36],
    ]
)

# Every row of A^10 has converged to this distribution (2 decimals).
A10_ROW = np.array([0.33, 0.23, 0.17, 0.27])

# --- Motif chunking / optimum construction walkthrough ------------------

# v=4, L=8, c=2, k=2: one 4-token DMP draw chunked into two motifs.
CHUNK_DRAW = np.array([0, 3, 1, 2])
CHUNK_MOTIFS = np.array([[0, 3], [1, 2]])
CHUNK_OFFSETS = np.array([[0, 3], [0, 3]])
CHUNK_OPTIMUM = np.array([0, 0, 0, 3, 1, 1, 1, 2])

# --- 32-token scoring vectors (v=32, L=32, c=4, k=4, q=4) ---------------

SCORING_MOTIFS = np.array(
    [
        [3, 16, 15, 11],
        [24, 3, 16, 15],
        [11, 14, 8, 10],
        [22, 27, 7, 20],
    ]
)
SCORING_OFFSETS = np.array(
    [
        [0, 2, 4, 5],
        [0, 3, 5, 6],
        [0, 1, 4, 6],
        [0, 2, 4, 15],
    ]
)

X1 = np.array(
    [12, 31, 2, 4, 15, 7, 14, 15, 12, 31, 11, 29, 25, 1, 15, 11,
     19, 24, 22, 5, 17, 27, 1, 14, 31, 28, 16, 15, 11, 14, 16, 10]
)
X3 = np.array([3, 16, 15, 11, 24, 24, 24, 24, 15, 11] + [22] * 22)
X4 = np.array([3, 3, 16, 16, 15, 11, 24, 24, 24, 24, 15, 11] + [22] * 20)

# Stated product values for the three vectors. X3 and X4 reproduce
# exactly. X1's stated value is inconsistent with the max-over-windows
# formula: the vector contains in-bounds two-match windows at starts 23
# (motif 1, tail tokens 15,11) and 21 (motif 2, tail tokens 16,15), so
# motifs 1 and 2 both score 1/2 under any boundary convention and the
# faithful product is 1/32. X1_PRODUCT_FAITHFUL pins what the
# implementation (and hand computation) actually yields.
X1_PRODUCT_STATED = Fraction(1, 64)
X1_PRODUCT_FAITHFUL = Fraction(1, 32)
X3_PRODUCT = Fraction(1, 128)
X4_PRODUCT = Fraction(1, 64)
