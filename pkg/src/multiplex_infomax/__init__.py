"""Unsupervised node embeddings for attributed multiplex networks.

Per relation type, a one-layer graph convolution produces patch embeddings
whose mutual information with a graph-level summary is maximized through a
shared bilinear discriminator; a consensus embedding ties the relations
together. Includes a synthetic benchmark generator, a deterministic
trainer, and an evaluation harness (clustering NMI, Sim@k, F1).
"""

__version__ = "0.1.0"

from .autodiff import SparseMatrix, Tensor, backward, finite_difference_oracle
from .config import TrainConfig
from .errors import (ContractError, DegenerateDegreeError, DivergenceError,
                     NetworkFormatError, NonFiniteError, ShapeMismatchError)
from .evaluation import (EvalReport, evaluate_embeddings, kmeans_cluster,
                         logistic_regression_classify,
                         normalized_mutual_information, similarity_at_k)
from .graphs import (AttributedMultiplexNetwork, SplitMasks,
                     corrupt_attributes, generate_synthetic_multiplex,
                     normalize_adjacency)
from .model import (ModelParameters, aggregate, build_objective, discriminate,
                    emit_embedding, encode_relation, prepare_network, readout,
                    relation_infomax_loss)
from .netio import read_network, write_network
from .training import Adam, fit, initialize_parameters

__all__ = [
    "__version__",
    "Adam",
    "AttributedMultiplexNetwork",
    "ContractError",
    "DegenerateDegreeError",
    "DivergenceError",
    "EvalReport",
    "ModelParameters",
    "NetworkFormatError",
    "NonFiniteError",
    "ShapeMismatchError",
    "SparseMatrix",
    "SplitMasks",
    "Tensor",
    "TrainConfig",
    "aggregate",
    "backward",
    "build_objective",
    "corrupt_attributes",
    "discriminate",
    "emit_embedding",
    "encode_relation",
    "evaluate_embeddings",
    "finite_difference_oracle",
    "fit",
    "generate_synthetic_multiplex",
    "initialize_parameters",
    "kmeans_cluster",
    "logistic_regression_classify",
    "normalize_adjacency",
    "normalized_mutual_information",
    "prepare_network",
    "read_network",
    "readout",
    "relation_infomax_loss",
    "similarity_at_k",
    "write_network",
]
