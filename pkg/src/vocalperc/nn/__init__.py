"""From-scratch neural network engine: layers, losses, training protocol."""

from .gradcheck import gradient_check, format_report, numeric_gradient
from .layers import BatchNorm, Conv2d, Dense, Flatten, MaxPool2d, Param, ReLU
from .losses import (
    MINING_STRATEGIES,
    cross_entropy_loss,
    mine_triplets,
    softmax,
    triplet_batch_loss,
    triplet_loss,
)
from .networks import (
    EMBEDDING_CHOICES,
    Network,
    NetworkConfig,
    build_network,
    mlp_hidden_choices,
    pool_positions,
)
from .train import (
    LEARNING_RATE_GRID,
    AdamState,
    ScalarNormalizer,
    TrainConfig,
    TrainedNetwork,
    TrainingProtocol,
    adam_step,
    checkpoint_dict,
    embed_and_classify,
    family_defaults,
    fit_embedding_head,
    load_checkpoint,
    save_checkpoint,
    stratified_split,
    train_network,
    trained_from_dict,
)

__all__ = [
    "AdamState",
    "BatchNorm",
    "Conv2d",
    "Dense",
    "EMBEDDING_CHOICES",
    "Flatten",
    "LEARNING_RATE_GRID",
    "MINING_STRATEGIES",
    "MaxPool2d",
    "Network",
    "NetworkConfig",
    "Param",
    "ReLU",
    "ScalarNormalizer",
    "TrainConfig",
    "TrainedNetwork",
    "TrainingProtocol",
    "adam_step",
    "build_network",
    "checkpoint_dict",
    "cross_entropy_loss",
    "embed_and_classify",
    "family_defaults",
    "fit_embedding_head",
    "format_report",
    "gradient_check",
    "load_checkpoint",
    "trained_from_dict",
    "mine_triplets",
    "mlp_hidden_choices",
    "numeric_gradient",
    "pool_positions",
    "save_checkpoint",
    "softmax",
    "stratified_split",
    "train_network",
    "triplet_batch_loss",
    "triplet_loss",
]
