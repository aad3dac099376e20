"""Forward computation and losses of the multiplex infomax model.

Per relation, a one-layer graph convolution encodes attributes into patch
embeddings; a sigmoid readout summarizes each relation's graph; a bilinear
discriminator (shared across relations by default) scores patch/summary
pairs. Relation losses are binary cross entropies over true pairs versus
pairs built from corrupted attributes. A free consensus embedding is pulled
toward the aggregate of true patches and pushed from the aggregate of
corrupted ones; aggregation is plain averaging or a per-node softmax over
relations.

Everything here is a pure function from parameters + prepared data to graph
nodes; the trainer rebuilds the objective every step.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import SparseMatrix, Tensor
from .config import TrainConfig
from .errors import ContractError
from .graphs import AttributedMultiplexNetwork, corrupt_attributes, normalize_adjacency


@dataclass
class ModelParameters:
    """All trainable state, as autodiff parameter tensors.

    ``scoring`` holds one matrix when the discriminator is shared across
    relations (the default) and one per relation under the untied ablation.
    """

    encoder_weights: list[Tensor]
    scoring: list[Tensor]
    consensus: Tensor
    attention: list[Tensor] | None = None
    classifier_weight: Tensor | None = None
    classifier_bias: Tensor | None = None

    def scoring_for(self, relation: int) -> Tensor:
        return self.scoring[0] if len(self.scoring) == 1 else self.scoring[relation]

    def all_tensors(self) -> list[Tensor]:
        out = [*self.encoder_weights, *self.scoring, self.consensus]
        if self.attention is not None:
            out.extend(self.attention)
        if self.classifier_weight is not None:
            out.append(self.classifier_weight)
            out.append(self.classifier_bias)
        return out

    def count(self) -> int:
        return sum(t.value.size for t in self.all_tensors())

    def snapshot(self) -> list[np.ndarray]:
        return [t.value.copy() for t in self.all_tensors()]

    def restore(self, values: list[np.ndarray]) -> None:
        for t, v in zip(self.all_tensors(), values):
            t.value = v.copy()

    def check_finite(self) -> None:
        for t in self.all_tensors():
            if not np.isfinite(t.value).all():
                raise ContractError(f"parameter {t.name or '?'} left the finite domain")


@dataclass
class PreparedNetwork:
    """Per-run constants: attribute tensor and normalized adjacencies."""

    attributes: Tensor
    adjacencies: list[SparseMatrix]
    num_relations: int
    labels: np.ndarray | None = None
    train_idx: np.ndarray | None = None
    val_idx: np.ndarray | None = None
    classes: int = 0

    @property
    def n(self) -> int:
        return self.attributes.shape[0]


@dataclass
class ForwardOutputs:
    positive: list[Tensor]
    negative: list[Tensor]
    summaries: list[Tensor]
    aggregated_positive: Tensor | None = None
    aggregated_negative: Tensor | None = None
    attention_weights: Tensor | None = None


@dataclass
class ObjectiveParts:
    total: Tensor
    relation_losses: list[float]
    consensus: float
    l2: float
    supervised: float
    attention_mean: list[float] | None
    outputs: ForwardOutputs


def prepare_network(network: AttributedMultiplexNetwork, config: TrainConfig) -> PreparedNetwork:
    adjacencies = [normalize_adjacency(a, config.self_weight) for a in network.adjacencies]
    labels = network.labels
    return PreparedNetwork(
        attributes=ad.constant(network.attributes, "attributes"),
        adjacencies=adjacencies,
        num_relations=network.num_relations,
        labels=labels,
        train_idx=network.split_indices("train") if labels is not None else None,
        val_idx=network.split_indices("val") if labels is not None else None,
        classes=network.classes,
    )


def encode_relation(attributes: Tensor, adjacency: SparseMatrix, weight: Tensor) -> Tensor:
    """One-layer graph convolution: relu(A_hat (X W))."""
    return ad.relu(ad.spmm(adjacency, ad.matmul(attributes, weight)))


def readout(patches: Tensor, kind: str = "average") -> Tensor:
    """Graph-level summary: sigmoid of the column means (or columnwise max)."""
    if kind == "average":
        return ad.sigmoid(ad.mean_rows(patches))
    if kind == "maxpool":
        return ad.sigmoid(ad.max_rows(patches))
    raise ContractError(f"unknown readout kind {kind!r}")


def pair_logits(patches: Tensor, summary: Tensor, scoring: Tensor) -> Tensor:
    """Bilinear scores h_i' M s for every row, kept as logits (n x 1)."""
    return ad.matmul(patches, ad.matmul(scoring, ad.transpose(summary)))


def discriminate(patch: np.ndarray, summary: np.ndarray, scoring: np.ndarray) -> float:
    """Probability that (patch, summary) is a true pair: sigma(h' M s)."""
    h = np.asarray(patch, dtype=np.float64).reshape(-1)
    s = np.asarray(summary, dtype=np.float64).reshape(-1)
    return float(ad._sigmoid(np.array([[h @ np.asarray(scoring) @ s]]))[0, 0])


def relation_infomax_loss(positive: Tensor, negative: Tensor,
                          summary: Tensor, scoring: Tensor) -> Tensor:
    """Binary cross entropy over n true and n corrupted patch/summary pairs.

    Computed from logits through log-sigmoid, never log of a sigmoid
    output, so saturated discriminators cannot cancel catastrophically.
    """
    pos = pair_logits(positive, summary, scoring)
    neg = pair_logits(negative, summary, scoring)
    pos_term = ad.sum_all(ad.log_sigmoid(pos))
    neg_term = ad.sum_all(ad.log_sigmoid(ad.scale(neg, -1.0)))
    return ad.scale(ad.add(pos_term, neg_term), -1.0)


def aggregate(patches: list[Tensor], mode: str,
              attention: list[Tensor] | None = None) -> tuple[Tensor, Tensor | None]:
    """Combine per-relation patch matrices into one n x d matrix.

    ``average`` takes the plain mean. ``attention`` weights each relation
    per node by a softmax over q^(r) . h_i^(r) and returns the n x |R|
    weight matrix alongside the combination.
    """
    if not patches:
        raise ContractError("aggregate needs at least one patch matrix")
    if mode == "average":
        total = patches[0]
        for other in patches[1:]:
            total = ad.add(total, other)
        return ad.scale(total, 1.0 / len(patches)), None
    if mode != "attention":
        raise ContractError(f"unknown aggregation mode {mode!r}")
    if attention is None or len(attention) != len(patches):
        raise ContractError("attention mode needs one feature vector per relation")
    n, d = patches[0].shape
    for q in attention:
        if q.shape != (1, d):
            raise ContractError(f"attention vector shape {q.shape} does not match 1x{d}")
    logits = ad.hconcat([ad.row_dot(h, ad.row_broadcast(q, n))
                         for h, q in zip(patches, attention)])
    weights = ad.row_softmax(logits)
    combined = None
    for r, h in enumerate(patches):
        term = ad.mul(ad.col_broadcast(ad.col_slice(weights, r, r + 1), d), h)
        combined = term if combined is None else ad.add(combined, term)
    return combined, weights


def consensus_regularizer(consensus: Tensor,
                          positive: list[Tensor],
                          negative: list[Tensor],
                          mode: str,
                          attention: list[Tensor] | None = None,
                          include_negative_term: bool = True,
                          ) -> tuple[Tensor, Tensor | None, Tensor, Tensor | None]:
    """Squared-distance pull toward the true aggregate, push from the corrupted one.

    Returns (loss, attention weights of the positive set, positive aggregate,
    negative aggregate). In attention mode the negative aggregate recomputes
    fresh weights from the corrupted patches.
    """
    agg_pos, weights = aggregate(positive, mode, attention)
    loss = ad.sum_all(ad.square(ad.sub(consensus, agg_pos)))
    agg_neg = None
    if include_negative_term:
        agg_neg, _ = aggregate(negative, mode, attention)
        loss = ad.sub(loss, ad.sum_all(ad.square(ad.sub(consensus, agg_neg))))
    return loss, weights, agg_pos, agg_neg


def semi_supervised_loss(consensus: Tensor, classifier_weight: Tensor,
                         classifier_bias: Tensor, labels: np.ndarray,
                         train_idx: np.ndarray) -> Tensor:
    """Mean cross entropy of a linear softmax head over the training nodes."""
    if len(train_idx) == 0:
        raise ContractError("semi-supervised loss needs a nonempty training split")
    n = consensus.shape[0]
    c = classifier_weight.shape[1]
    logits = ad.add(ad.matmul(consensus, classifier_weight),
                    ad.row_broadcast(classifier_bias, n))
    log_probs = ad.row_log_softmax(logits)
    mask = np.zeros((n, c))
    mask[train_idx, labels[train_idx]] = 1.0
    picked = ad.sum_all(ad.mul_const(log_probs, mask))
    return ad.scale(picked, -1.0 / len(train_idx))


def forward_model(params: ModelParameters, prepared: PreparedNetwork,
                  permutations: list[np.ndarray], config: TrainConfig) -> ForwardOutputs:
    """Positive/negative patches and summaries for every relation.

    One corruption permutation per relation: either the attribute rows are
    shuffled (default) or, under the adjacency ablation, the true attributes
    are pushed through a row/column-permuted adjacency.
    """
    if len(permutations) != prepared.num_relations:
        raise ContractError("need one corruption permutation per relation")
    positive, negative, summaries = [], [], []
    for r in range(prepared.num_relations):
        adjacency = prepared.adjacencies[r]
        weight = params.encoder_weights[r]
        pos = encode_relation(prepared.attributes, adjacency, weight)
        if config.corruption == "attributes":
            shuffled = ad.constant(
                corrupt_attributes(prepared.attributes.value, permutations[r]))
            neg = encode_relation(shuffled, adjacency, weight)
        else:
            neg = encode_relation(prepared.attributes,
                                  adjacency.permuted(permutations[r]), weight)
        positive.append(pos)
        negative.append(neg)
        summaries.append(readout(pos, config.readout))
    return ForwardOutputs(positive=positive, negative=negative, summaries=summaries)


def build_objective(params: ModelParameters, prepared: PreparedNetwork,
                    permutations: list[np.ndarray], config: TrainConfig) -> ObjectiveParts:
    """The scalar training objective and its logged components.

    Sum of per-relation infomax losses, plus alpha times the consensus
    regularizer, beta times the squared l2 norm of the trainables, and
    gamma times the supervised cross entropy when enabled. Terms with a
    zero coefficient are skipped entirely, so they contribute neither
    value nor gradient.
    """
    outputs = forward_model(params, prepared, permutations, config)
    mode = "attention" if config.attention else "average"

    total = None
    relation_losses = []
    for r in range(prepared.num_relations):
        loss_r = relation_infomax_loss(outputs.positive[r], outputs.negative[r],
                                       outputs.summaries[r], params.scoring_for(r))
        relation_losses.append(float(loss_r.value[0, 0]))
        total = loss_r if total is None else ad.add(total, loss_r)

    consensus_value = 0.0
    attention_mean = None
    if config.alpha > 0:
        reg, weights, agg_pos, agg_neg = consensus_regularizer(
            params.consensus, outputs.positive, outputs.negative, mode,
            params.attention, config.consensus_negative_term)
        consensus_value = float(reg.value[0, 0])
        outputs.aggregated_positive = agg_pos
        outputs.aggregated_negative = agg_neg
        outputs.attention_weights = weights
        if weights is not None:
            attention_mean = [float(x) for x in weights.value.mean(axis=0)]
        total = ad.add(total, ad.scale(reg, config.alpha))
    if config.attention and attention_mean is None:
        attention_mean = [float(x) for x in attention_weights_numpy(
            [h.value for h in outputs.positive],
            [q.value for q in params.attention]).mean(axis=0)]

    l2_value = 0.0
    if config.beta > 0:
        regularized = [*params.encoder_weights, *params.scoring, params.consensus]
        if config.regularize_all_trainables:
            regularized = params.all_tensors()
        l2 = None
        for t in regularized:
            term = ad.sum_all(ad.square(t))
            l2 = term if l2 is None else ad.add(l2, term)
        l2_value = float(l2.value[0, 0])
        total = ad.add(total, ad.scale(l2, config.beta))

    supervised_value = 0.0
    if config.semi_supervised and config.gamma > 0:
        if prepared.labels is None or prepared.train_idx is None:
            raise ContractError("semi-supervised mode needs labels and a train split")
        sup = semi_supervised_loss(params.consensus, params.classifier_weight,
                                   params.classifier_bias, prepared.labels,
                                   prepared.train_idx)
        supervised_value = float(sup.value[0, 0])
        total = ad.add(total, ad.scale(sup, config.gamma))

    return ObjectiveParts(total=total, relation_losses=relation_losses,
                          consensus=consensus_value, l2=l2_value,
                          supervised=supervised_value,
                          attention_mean=attention_mean, outputs=outputs)


def attention_weights_numpy(patch_values: list[np.ndarray],
                            q_values: list[np.ndarray]) -> np.ndarray:
    """Per-node relation weights computed outside the graph (for logging)."""
    logits = np.concatenate([h @ q.reshape(-1, 1) for h, q in zip(patch_values, q_values)],
                            axis=1)
    return ad._row_softmax(logits)


def emit_embedding(params: ModelParameters, prepared: PreparedNetwork,
                   config: TrainConfig) -> np.ndarray:
    """The embedding a run reports: the consensus matrix by default, or the
    aggregate of the positive patches when configured."""
    if config.emit == "consensus":
        return params.consensus.value.copy()
    patches = [encode_relation(prepared.attributes, prepared.adjacencies[r],
                               params.encoder_weights[r])
               for r in range(prepared.num_relations)]
    mode = "attention" if config.attention else "average"
    combined, _ = aggregate(patches, mode, params.attention)
    return combined.value.copy()
