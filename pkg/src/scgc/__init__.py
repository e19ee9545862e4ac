"""Graph clustering with contrastive structure losses over MLP autoencoder
embeddings and KL-divergence cluster self-supervision."""

from .config import TrainConfig, preset
from .graph import SparseGraph, build_knn_graph, cumulative_influence, normalize_adjacency, sbm_generate
from .inference import ClusterModel, evaluate
from .metrics import MetricReport, clustering_metrics
from .pipeline import pretrain, run, train

__version__ = "0.1.0"
