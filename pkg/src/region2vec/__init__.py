"""Flow-aware node embeddings and contiguity-constrained community detection
on spatial networks, with baselines, metrics and a synthetic generator."""
from .baselines import louvain, modularity
from .clustering import CommunityAssignment, kmeans, ward_constrained
from .data_io import Dataset, SynthConfig, generate_synthetic, load_dataset, standardize, write_dataset
from .embedding import TrainingConfig, compute_gradients, compute_loss, gcn_forward, train
from .errors import InvalidConfig, Region2VecError, ShapeMismatch
from .graph import PairSet, SpatialGraph, all_pairs_hops, extract_pairs, normalize_adjacency
from .metrics import MetricsReport, adjusted_rand, cosine_mean, evaluate, flow_ratio, homogeneity, inequality

__version__ = "0.1.0"
