"""Gradient interpretability versus adversarial robustness, on a small numpy autodiff."""
from .adversary import AttackConfig, AttackResult, attack_success_filter, pgd_attack
from .advtrain import AdvTrainConfig, adversarial_train, epsilon_sweep
from .attribution import Attribution, attr_grad_times_input, attr_gradient, attr_random, attribute, rank_pixels
from .autodiff import NonFiniteError, ShapeError, Tape, Tensor, backward, grad_check
from .data import Dataset, ToySpec, gen_toy, load_digits_dataset, load_idx
from .manifold import AllAttacksFailedError, Projector, d_pi, fit_pca, project, train_autoencoder
from .models import ModelSpec, TrainConfig, TrainedModel, build, evaluate, predict, train
from .occlusion import (EvalCurve, OcclusionSpec, aoc, auc, mu_score, occlude_dataset, pearson,
                        roar_kar_curve, spearman)

__version__ = "0.1.0"
