"""
Model bundle: encoder, heads, masks and provenance of one trained model.

All parameters live in one WeightStore with network-prefixed names
(encoder.*, classifier.*, projection.*), so pruning, checkpointing and the
optimizer see a single ordered set of tensors.
"""

from dataclasses import dataclass, field
import logging

import numpy as np

from prune_lab.core.numkernel import WeightStore, Network, mlp, init_network, forward
from prune_lab.core.errors import ParameterError

logger = logging.getLogger(__name__)


@dataclass
class Provenance:
    """Where a bundle came from."""

    method: str = "Sup"
    seed: int = 0
    sparsity: float = 0.0
    pruning: str = "None"

    def to_dict(self) -> dict:
        return {"method": self.method, "seed": int(self.seed),
                "sparsity": float(self.sparsity), "pruning": self.pruning}

    @classmethod
    def from_dict(cls, d: dict) -> "Provenance":
        return cls(d["method"], int(d["seed"]), float(d["sparsity"]), d["pruning"])


@dataclass
class ModelBundle:
    """Encoder + classifier head (+ projection head while SCL stage 1 runs)."""

    encoder: Network
    classifier: Network
    store: WeightStore
    projection: Network = None
    provenance: Provenance = field(default_factory=Provenance)

    @property
    def representation_dim(self) -> int:
        return self.encoder.out_dim

    @property
    def class_count(self) -> int:
        return self.classifier.out_dim

    def networks(self) -> list:
        nets = [self.encoder, self.classifier]
        if self.projection is not None:
            nets.append(self.projection)
        return nets

    def prunable_names(self) -> list:
        """Weights of the inference networks; the projection head is never pruned."""
        return self.store.prunable_names(prefixes=(f"{self.encoder.name}.", f"{self.classifier.name}."))

    def sparsity(self) -> float:
        return self.store.sparsity(self.prunable_names())

    def drop_projection(self):
        """Discard the projection head after contrastive training."""
        if self.projection is not None:
            self.store.remove(f"{self.projection.name}.")
            self.projection = None

    def copy(self) -> "ModelBundle":
        return ModelBundle(
            encoder=Network(self.encoder.name, list(self.encoder.layers)),
            classifier=Network(self.classifier.name, list(self.classifier.layers)),
            store=self.store.copy(),
            projection=None if self.projection is None
            else Network(self.projection.name, list(self.projection.layers)),
            provenance=Provenance(**self.provenance.to_dict()),
        )

    def equals(self, other: "ModelBundle") -> bool:
        return (self.encoder.to_dict() == other.encoder.to_dict()
                and self.classifier.to_dict() == other.classifier.to_dict()
                and (self.projection is None) == (other.projection is None)
                and self.provenance.to_dict() == other.provenance.to_dict()
                and self.store.equals(other.store))

    def encode(self, x) -> list:
        """Encoder activations for every layer."""
        return forward(self.encoder, self.store, x)

    def logits(self, x) -> np.ndarray:
        h = self.encode(x)[-1]
        return forward(self.classifier, self.store, h)[-1]

    def predict(self, x) -> np.ndarray:
        """Predicted class per row (lowest index on exact ties)."""
        return np.argmax(self.logits(x), axis=1)

    def accuracy(self, x, labels) -> float:
        return float(np.mean(self.predict(x) == np.asarray(labels)))

    def probes(self, x) -> list:
        """Probe activations: every encoder layer output followed by the logits."""
        acts = self.encode(x)
        logits = forward(self.classifier, self.store, acts[-1])[-1]
        return acts + [logits]


def build_bundle(in_dim: int, class_count: int, representation_dim: int = 16,
                 hidden_dims=(32, 32), with_projection: bool = False, seed: int = 0,
                 method: str = "Sup", dtype=np.float32) -> ModelBundle:
    """
    Create a freshly initialised bundle.

    Encoder: affine/ReLU stack in_dim -> hidden_dims -> representation_dim with
    a final ReLU. Classifier head: affine l -> C. Projection head (SCL only):
    affine(l->l)-ReLU-affine(l->l/2)-l2norm.

    Args:
        in_dim: Input feature dimension
        class_count: Number of classes C
        representation_dim: Representation size l
        hidden_dims: Hidden widths of the encoder
        with_projection: Add the contrastive projection head
        seed: Initialisation seed
        method: Training method recorded in provenance
        dtype: Parameter dtype

    Returns:
        ModelBundle
    """
    if representation_dim < 2 and with_projection:
        raise ParameterError("representation_dim must be >= 2 for a projection head")
    rng = np.random.default_rng(seed)
    store = WeightStore(dtype)
    encoder = mlp("encoder", [in_dim, *hidden_dims, representation_dim], final_relu=True)
    classifier = mlp("classifier", [representation_dim, class_count])
    init_network(encoder, store, rng)
    init_network(classifier, store, rng)
    projection = None
    if with_projection:
        projection = mlp("projection", [representation_dim, representation_dim,
                                        max(1, representation_dim // 2)], normalize=True)
        init_network(projection, store, rng)
    return ModelBundle(encoder, classifier, store, projection, Provenance(method, seed))
