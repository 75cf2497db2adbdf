"""Augmentation component analysis on small, exactly enumerable domains."""
from .domain import (
    AugmentationMatrix, DiscreteDomain, DomainError, NormalizedFeature, build_empirical_matrix,
    build_exact_matrix, load_descriptor, marginals, normalize, save_descriptor,
)
from .encoder import Encoder, EncoderSpec, load_checkpoint, make_encoder, save_checkpoint
from .evaluation import distance_histogram, evaluate, knn_classify, linear_probe
from .losses import (
    LossBreakdown, aca_pc_population_loss, batch_aca_loss, infonce_batch_loss, mf_loss,
    projection_population_loss, spectral_batch_loss,
)
from .spectral import (
    OracleError, decompose, hellinger_distance_sq, natural_bound_check, oracle_embeddings,
    posterior_bound_check, posterior_distance_sq, weighted_aug_distance_sq,
)
from .synthetic import MixtureConfig, gen_mixture, gen_random_instance, make_pilot_data
from .trainer import TrainConfig, adam_step, sample_batch, train, train_population

__version__ = "0.1.0"
