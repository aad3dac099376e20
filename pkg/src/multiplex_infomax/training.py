"""Parameter initialization, Adam, and the training loop."""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .config import TrainConfig
from .errors import ContractError, DivergenceError, NonFiniteError
from .graphs import AttributedMultiplexNetwork
from .model import (ModelParameters, PreparedNetwork, build_objective,
                    prepare_network)

DIVERGENCE_FLOOR = -1e6


def _seed_streams(seed: int) -> tuple[np.random.Generator, np.random.Generator]:
    init_seq, corrupt_seq = np.random.SeedSequence(seed).spawn(2)
    return (np.random.Generator(np.random.PCG64(init_seq)),
            np.random.Generator(np.random.PCG64(corrupt_seq)))


def _xavier(rng: np.random.Generator, fan_in: int, fan_out: int,
            shape: tuple[int, int], name: str) -> Tensor:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return ad.parameter(rng.uniform(-bound, bound, size=shape), name)


def initialize_parameters(n: int, num_attributes: int, num_relations: int,
                          config: TrainConfig, classes: int = 0) -> ModelParameters:
    """Xavier-uniform draws for every trainable, in a fixed order so that a
    seed fully determines the parameters."""
    config.validate()
    rng, _ = _seed_streams(config.seed)
    d = config.embed_dim
    encoder_weights = [_xavier(rng, num_attributes, d, (num_attributes, d), f"encoder[{r}]")
                       for r in range(num_relations)]
    num_scoring = num_relations if config.untied_scoring else 1
    scoring = [_xavier(rng, d, d, (d, d), f"scoring[{r}]") for r in range(num_scoring)]
    consensus = _xavier(rng, n, d, (n, d), "consensus")
    attention = None
    if config.attention:
        attention = [_xavier(rng, 1, d, (1, d), f"attention[{r}]")
                     for r in range(num_relations)]
    classifier_weight = classifier_bias = None
    if config.semi_supervised:
        if classes < 1:
            raise ContractError("semi-supervised mode needs a class count")
        classifier_weight = _xavier(rng, d, classes, (d, classes), "classifier_weight")
        classifier_bias = _xavier(rng, d, classes, (1, classes), "classifier_bias")
    return ModelParameters(encoder_weights=encoder_weights, scoring=scoring,
                           consensus=consensus, attention=attention,
                           classifier_weight=classifier_weight,
                           classifier_bias=classifier_bias)


class Adam:
    """Adam with bias correction, operating on a fixed parameter list."""

    def __init__(self, params: list[Tensor], lr: float,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.first_moment = [np.zeros_like(p.value) for p in params]
        self.second_moment = [np.zeros_like(p.value) for p in params]

    def step(self, gradients: list[np.ndarray]) -> None:
        if len(gradients) != len(self.params):
            raise ContractError("one gradient per parameter required")
        for p, g in zip(self.params, gradients):
            if g.shape != p.value.shape:
                raise ContractError(f"gradient shape {g.shape} does not match "
                                    f"parameter shape {p.value.shape}")
            if not np.isfinite(g).all():
                raise DivergenceError("non-finite gradient")
        self.step_count += 1
        t = self.step_count
        for i, (p, g) in enumerate(zip(self.params, gradients)):
            self.first_moment[i] = self.beta1 * self.first_moment[i] + (1 - self.beta1) * g
            self.second_moment[i] = (self.beta2 * self.second_moment[i]
                                     + (1 - self.beta2) * g * g)
            m_hat = self.first_moment[i] / (1 - self.beta1 ** t)
            v_hat = self.second_moment[i] / (1 - self.beta2 ** t)
            p.value = p.value - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def _validation_cross_entropy(params: ModelParameters, prepared: PreparedNetwork) -> float:
    """Forward-only cross entropy of the classifier head on the val split."""
    idx = prepared.val_idx
    if idx is None or len(idx) == 0:
        raise ContractError("semi-supervised early stopping needs a validation split")
    logits = (params.consensus.value @ params.classifier_weight.value
              + params.classifier_bias.value)
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    return float(-log_probs[idx, prepared.labels[idx]].mean())


def fit(network: AttributedMultiplexNetwork,
        config: TrainConfig) -> tuple[ModelParameters, list[dict]]:
    """Full-batch training with early stopping on the objective.

    Each epoch draws fresh corruption permutations (one per relation, from
    the seeded stream), rebuilds the objective graph, backpropagates, and
    takes one Adam step. The parameters achieving the best stopping
    criterion are returned; in unsupervised mode the criterion is the
    training objective, in semi-supervised mode the validation cross
    entropy. The log holds one record per evaluated epoch.
    """
    config.validate()
    if config.semi_supervised:
        if network.labels is None:
            raise ContractError("semi-supervised training needs labels")
        if len(network.split_indices("train")) == 0:
            raise ContractError("semi-supervised training needs a nonempty train split")
    prepared = prepare_network(network, config)
    params = initialize_parameters(network.n, network.num_attributes,
                                   network.num_relations, config,
                                   classes=network.classes)
    _, corrupt_rng = _seed_streams(config.seed)
    optimizer = Adam(params.all_tensors(), config.learning_rate)

    log: list[dict] = []
    best_criterion = np.inf
    best_values = params.snapshot()
    epochs_since_improvement = 0

    for epoch in range(config.max_epochs):
        permutations = [corrupt_rng.permutation(network.n)
                        for _ in range(network.num_relations)]
        try:
            parts = build_objective(params, prepared, permutations, config)
        except NonFiniteError as exc:
            raise DivergenceError(f"{exc} at epoch {epoch}", epoch=epoch) from None
        objective = float(parts.total.value[0, 0])
        if not np.isfinite(objective):
            raise DivergenceError(f"non-finite objective at epoch {epoch}", epoch=epoch)
        if objective < DIVERGENCE_FLOOR:
            raise DivergenceError(
                f"objective fell below {DIVERGENCE_FLOOR:g} at epoch {epoch}", epoch=epoch)

        record = {
            "epoch": epoch,
            "objective": objective,
            "relation_losses": parts.relation_losses,
            "consensus": parts.consensus,
            "l2": parts.l2,
            "supervised": parts.supervised,
            "attention_mean": parts.attention_mean,
        }
        criterion = objective
        if config.semi_supervised:
            criterion = _validation_cross_entropy(params, prepared)
            record["val_cross_entropy"] = criterion
        log.append(record)

        if criterion < best_criterion:
            best_criterion = criterion
            best_values = params.snapshot()
            epochs_since_improvement = 0
        else:
            epochs_since_improvement += 1
            if epochs_since_improvement >= config.patience:
                break

        try:
            gradients = ad.backward(parts.total, params.all_tensors())
            optimizer.step(gradients)
        except DivergenceError as exc:
            raise DivergenceError(f"{exc} at epoch {epoch}", epoch=epoch) from None

    params.restore(best_values)
    return params, log
