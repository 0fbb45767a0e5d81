"""Query-only adversarial perturbations of a controller's observations."""
from .config import AttackConfig, ManipulationTarget, parse_norm
from .episode import ATTACK_KINDS, EpisodeRecord, StepRecord, attack_episode
from .gradient import estimate_gradient
from .objectives import (
    DIVERGED_DISTANCE,
    distortion_loss,
    distortion_loss_batch,
    manipulation_loss,
    manipulation_loss_batch,
)
from .pgd import (
    AttackTrace,
    craft_perturbation,
    perturbation_norm,
    pgd_step,
    project,
    random_perturbation,
    within_budget,
)

__all__ = ["AttackConfig", "ManipulationTarget", "parse_norm", "ATTACK_KINDS", "EpisodeRecord", "StepRecord",
           "attack_episode", "estimate_gradient", "DIVERGED_DISTANCE", "distortion_loss", "distortion_loss_batch",
           "manipulation_loss", "manipulation_loss_batch", "AttackTrace", "craft_perturbation",
           "perturbation_norm", "pgd_step", "project", "random_perturbation", "within_budget"]
