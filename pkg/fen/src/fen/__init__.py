"""Toy multi-scale feature extraction network with per-stage export."""

from .blocks import FeatureExtractionNetwork, MsfbBlock, hierarchical_fuse
from .config import FenConfig
from .data import build_dataset, identity_texture, make_pair
from .export import export_corpus, export_stage_features
from .losses import DualDomainLoss
from .train import DivergenceError, build_model, load_checkpoint, train_toy

__version__ = "0.1.0"
