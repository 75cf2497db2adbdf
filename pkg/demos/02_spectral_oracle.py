"""
Exact embeddings and the almost-isometry bounds
===============================================

On a small random instance the optimal k-dimensional embeddings come
straight from the SVD of the normalized feature.  Their pairwise distances
never exceed the exact ones and fall short by at most a slack set by the
first discarded singular value.
"""

import numpy as np

from augca.domain import normalize
from augca.spectral import decompose, natural_bound_check, oracle_embeddings, posterior_bound_check
from augca.synthetic import gen_random_instance

a = gen_random_instance(8, 24, sparsity=4, seed=3)
feat = normalize(a)
dec = decompose(feat)
print("singular values:", np.round(dec.singular_values, 4))

for k in range(1, dec.rank + 1):
    post = posterior_bound_check(dec, feat, k)
    nat = natural_bound_check(dec, feat, k)
    # the largest shortfall against the exact distance, next to the allowed slack
    s_next = dec.singular_values[k] if k < len(dec.singular_values) else 0.0
    print(f"k={k}: posterior shortfall {post.upper_gaps.max():.4f} "
          f"(slack {2 * s_next**2 / feat.d.min():.4f}), "
          f"violations {post.violations} / {nat.violations}")

# with every component kept the embeddings reproduce the exact distances
print("equality error at full rank:", posterior_bound_check(dec, feat, dec.rank).max_equality_error)

# natural embeddings are the augmentation-weighted average of augmented ones
emb = oracle_embeddings(dec, feat, 3)
print("||A f_aug - f_nat|| =", np.linalg.norm(feat.probs @ emb.f_aug - emb.f_nat))
