"""Multilabel classification over graphs via a joint label-input graph.

Classes become auxiliary nodes of the input graph; message passing with
bidirectional label/input attention learns which substructures drive which
labels, and the attention weights double as explanations.
"""

from .data import (AttributedGraph, DatasetMeta, LabelGraph, LabeledExample,
                   Motif, MotifSpec, MultilabelDataset, contains_subgraph,
                   demo_motif_spec, find_subgraph, generate_synthetic,
                   load_graph_dataset, load_label_graph, load_vector_dataset,
                   save_graph_dataset, save_vector_dataset, split)
from .metrics import PredictionSet, auc, f1, metrics_report
from .model import (AttentionTrace, ModelConfig, ModelParams, forward,
                    forward_vector, init_params, predict_scores, readout)
from .training import (OptimizerState, TrainConfig, TrainResult, adam_step,
                       bce_loss, bce_value, load_checkpoint, lr_schedule_tick,
                       save_checkpoint, train)

__version__ = "0.1.0"
