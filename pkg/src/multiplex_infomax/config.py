"""Training configuration shared by the model builder and the trainer."""

from __future__ import annotations

from dataclasses import asdict, dataclass

from .errors import ContractError

READOUT_KINDS = ("average", "maxpool")
CORRUPTION_KINDS = ("attributes", "adjacency")
EMIT_KINDS = ("consensus", "aggregated")


@dataclass
class TrainConfig:
    embed_dim: int = 64
    self_weight: float = 3.0
    alpha: float = 0.001            # consensus regularization coefficient
    beta: float = 0.001             # l2 coefficient on trainable parameters
    gamma: float = 0.001            # semi-supervised coefficient
    learning_rate: float = 5e-4
    max_epochs: int = 2000
    patience: int = 50
    seed: int = 0
    attention: bool = False         # per-node softmax over relations instead of averaging
    semi_supervised: bool = False
    untied_scoring: bool = False    # one scoring matrix per relation instead of a shared one
    consensus_negative_term: bool = True
    corruption: str = "attributes"
    readout: str = "average"
    emit: str = "consensus"
    regularize_all_trainables: bool = True

    def validate(self) -> None:
        if self.embed_dim < 1:
            raise ContractError("embed_dim must be at least 1")
        if self.self_weight < 0:
            raise ContractError("self_weight must be nonnegative")
        if min(self.alpha, self.beta, self.gamma) < 0:
            raise ContractError("loss coefficients must be nonnegative")
        if self.learning_rate <= 0:
            raise ContractError("learning rate must be positive")
        if self.max_epochs < 0:
            raise ContractError("max_epochs must be nonnegative")
        if self.patience < 1:
            raise ContractError("patience must be at least 1")
        if self.readout not in READOUT_KINDS:
            raise ContractError(f"readout must be one of {READOUT_KINDS}")
        if self.corruption not in CORRUPTION_KINDS:
            raise ContractError(f"corruption must be one of {CORRUPTION_KINDS}")
        if self.emit not in EMIT_KINDS:
            raise ContractError(f"emit must be one of {EMIT_KINDS}")

    def as_dict(self) -> dict:
        return asdict(self)
