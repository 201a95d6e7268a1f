"""Joint node-embedding learning on typed graphs.

Embeddings, an order-insensitive multi-group neighborhood aggregator, and an
optional classifier head are trained together by hand-written reverse-mode
gradients under Adam.  Everything is plain numpy/scipy; the only entry points
most callers need are re-exported here.
"""

from .graphdata import (DataSplit, GraphFormatError, HeteroGraph, LabelTable,
                        load_graph, load_labels, make_split,
                        neighbors_by_type, planted_partition)
from .model import (HeadParams, LossBreakdown, ModelState, total_objective)
from .optim import AdamState, NonFiniteGradient, adam_step
from .setfn import (AggParams, backward, elem_encode, forward, init_params,
                    smooth_max, symmetrize)
from .training import (SweepReport, TrainConfig, TrainingDiverged, accuracy,
                       evaluate, export_embeddings, f1_scores, load_model,
                       save_model, sweep, train)

__version__ = "0.1.0"

__all__ = [
    "AdamState", "AggParams", "DataSplit", "GraphFormatError", "HeadParams",
    "HeteroGraph", "LabelTable", "LossBreakdown", "ModelState",
    "NonFiniteGradient", "SweepReport", "TrainConfig", "TrainingDiverged",
    "accuracy", "adam_step", "backward", "elem_encode", "evaluate",
    "export_embeddings", "f1_scores", "forward", "init_params", "load_graph",
    "load_labels", "load_model", "make_split", "neighbors_by_type",
    "planted_partition", "save_model", "smooth_max", "sweep", "symmetrize",
    "total_objective", "train",
]
