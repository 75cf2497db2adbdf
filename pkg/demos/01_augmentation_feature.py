"""
Augmentation features on a toy domain
=====================================

Two natural samples, three augmented outcomes.  Each natural sample is
described by the row of probabilities it assigns to the outcomes; the
normalized feature rescales every column by the square root of its mass.
"""

import numpy as np

from augca.domain import AugmentationMatrix, marginals, normalize
from augca.spectral import hellinger_distance_sq, posterior_distance_sq, weighted_aug_distance_sq

# sample 0 lands on outcomes 0 or 1, sample 1 on outcomes 1 or 2
a = AugmentationMatrix([[0.5, 0.5, 0.0],
                        [0.0, 0.5, 0.5]])
print("A =\n", a.probs)

# column sums d and the augmented marginal d / N
w = marginals(a)
print("d =", w.d, " p_A =", w.marginal)

feat = normalize(a, w)
print("A D^-1/2 =\n", np.round(feat.matrix, 4))

# the top singular value of the normalized feature is always exactly one
print("singular values:", np.linalg.svd(feat.matrix, compute_uv=False))

# outcome 1 is shared, so its posterior sits halfway between the two samples
print("posterior distance^2 (0, 1):", posterior_distance_sq(a, 0, 1))
print("posterior distance^2 (0, 2):", posterior_distance_sq(a, 0, 2))

# distances between the natural samples themselves
print("weighted augmentation distance^2:", weighted_aug_distance_sq(a, 0, 1))
print("Hellinger distance^2:", hellinger_distance_sq(a, 0, 1))
