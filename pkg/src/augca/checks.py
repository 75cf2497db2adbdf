"""Property suite over exact instances: spectral bounds, projection identity, loss equivalence.

``run_oracle_suite`` is what ``augca oracle`` executes.  Each instance is
decomposed once and every embedding size ``k = 1..rank`` is checked.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .domain import AugmentationMatrix, NormalizedFeature, normalize
from .losses import aca_pc_population_loss, mf_loss
from .spectral import BOUND_SLACK, decompose, natural_bound_check, oracle_embeddings, posterior_bound_check
from .synthetic import gen_random_instance

EQUALITY_TOL = 1e-7
SIGMA_TOL = 1e-8
LOSS_GAP_TOL = 1e-8


def factorization_gap(feature: NormalizedFeature, emb: np.ndarray) -> float:
    """``mf_loss(Ahat, sqrt(d) E) / N - L_pc(E)`` with the uniformity weight ``K = N``.

    The matrix-factorization loss and the ACA-PC loss agree up to this
    additive constant (``||Ahat^T Ahat||^2 / N``) for every embedding table ``E``.
    """
    a = feature.source
    f = np.sqrt(feature.d)[:, None] * emb[feature.columns]
    return mf_loss(feature.matrix, f) / a.n - aca_pc_population_loss(a, emb)


def loss_gap_spread(feature: NormalizedFeature, probes: int, k: int, rng) -> tuple[float, float]:
    """Relative spread of ``factorization_gap`` over random embeddings, and the expected constant."""
    a = feature.source
    gaps = []
    for _ in range(probes):
        scale = 10.0 ** rng.uniform(-2, 1)
        gaps.append(factorization_gap(feature, scale * rng.normal(size=(a.l, k))))
    gaps = np.array(gaps)
    const = float(np.sum((feature.matrix.T @ feature.matrix) ** 2)) / a.n
    spread = float(np.ptp(gaps)) / max(abs(const), 1e-12)
    return spread, float(np.max(np.abs(gaps - const))) / max(abs(const), 1e-12)


@dataclass
class InstanceReport:
    name: str
    n: int
    l: int
    rank: int
    singular_values: list
    sigma1_error: float
    posterior_max_violation: float
    natural_max_violation: float
    posterior_equality_error: float
    natural_equality_error: float
    projection_error: float
    loss_gap_spread: float
    failures: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures


def check_instance(a: AugmentationMatrix, name: str = "", probes: int = 20, rng=None,
                   corrupt: float = 0.0, tol: float = BOUND_SLACK) -> InstanceReport:
    """Run every exact check on one instance.

    ``corrupt > 0`` adds that much uniform noise to ``Ahat`` before the SVD, a
    negative control: the bounds are still judged against the clean model.
    """
    rng = np.random.default_rng(rng)
    feat = normalize(a)
    mat = feat.matrix
    if corrupt:
        mat = mat + corrupt * rng.random(mat.shape)
    dec = decompose(mat)
    s = dec.singular_values
    post_v, nat_v, proj = 0.0, 0.0, 0.0
    for k in range(1, dec.rank + 1):
        post_v = max(post_v, posterior_bound_check(dec, feat, k, tol).max_violation)
        nat_v = max(nat_v, natural_bound_check(dec, feat, k, tol).max_violation)
        emb = oracle_embeddings(dec, feat, k, atol=np.inf)
        proj = max(proj, float(np.linalg.norm(feat.probs @ emb.f_aug - emb.f_nat)))
    post_eq = posterior_bound_check(dec, feat, dec.rank, tol).max_equality_error
    nat_eq = natural_bound_check(dec, feat, dec.rank, tol).max_equality_error
    spread, _ = loss_gap_spread(feat, probes, max(1, min(3, dec.rank)), rng)
    rep = InstanceReport(
        name=name, n=a.n, l=a.l, rank=dec.rank, singular_values=[float(v) for v in s],
        sigma1_error=abs(float(s[0]) - 1.0), posterior_max_violation=post_v, natural_max_violation=nat_v,
        posterior_equality_error=post_eq, natural_equality_error=nat_eq, projection_error=proj,
        loss_gap_spread=spread,
    )
    checks = [
        ("sigma1", rep.sigma1_error <= SIGMA_TOL),
        ("posterior_bound", post_v <= tol),
        ("natural_bound", nat_v <= tol),
        ("posterior_equality_at_rank", post_eq <= EQUALITY_TOL),
        ("natural_equality_at_rank", nat_eq <= EQUALITY_TOL),
        ("projection_identity", proj <= EQUALITY_TOL),
        ("loss_gap_constant", spread <= LOSS_GAP_TOL),
    ]
    rep.failures = [name for name, ok in checks if not ok]
    return rep


def random_instances(count: int, n_max: int, l_max: int, seed=0, sparsity_max: int = 6):
    """Seeded random instances with ``2 <= N <= n_max`` and ``N < L <= l_max``."""
    rng = np.random.default_rng(seed)
    for i in range(count):
        n = int(rng.integers(2, n_max + 1))
        l = int(rng.integers(n + 1, max(n + 1, l_max) + 1))
        s = int(rng.integers(1, sparsity_max + 1))
        yield f"random-{i}", gen_random_instance(n, l, s, int(rng.integers(2**31)))


DEFAULT_SUITE = {"count": 20, "n_max": 12, "l_max": 36, "seed": 0, "probes": 20, "corrupt": 0.0,
                 "tol": BOUND_SLACK}


def run_oracle_suite(cfg: dict, extra_instances=()) -> dict:
    """Check the random instance set plus ``extra_instances`` (``(name, matrix)`` pairs)."""
    cfg = {**DEFAULT_SUITE, **cfg}
    rng = np.random.default_rng(cfg["seed"])
    reports = []
    instances = list(random_instances(cfg["count"], cfg["n_max"], cfg["l_max"], cfg["seed"]))
    for name, a in [*instances, *extra_instances]:
        reports.append(check_instance(a, name, cfg["probes"], rng, cfg["corrupt"], cfg["tol"]))
    worst = lambda attr: max((getattr(r, attr) for r in reports), default=0.0)
    return {
        "pass": all(r.ok for r in reports),
        "instances": len(reports),
        "posterior_bound_max_violation": worst("posterior_max_violation"),
        "natural_bound_max_violation": worst("natural_max_violation"),
        "projection_max_error": worst("projection_error"),
        "loss_gap_max_spread": worst("loss_gap_spread"),
        "sigma1_max_error": worst("sigma1_error"),
        "reports": [
            {**{k: v for k, v in vars(r).items()}, "k": list(range(1, r.rank + 1)), "pass": r.ok}
            for r in reports
        ],
    }
