"""Gradient attacks on link weight prediction in weighted graphs.

The attack (IGA-LWP) perturbs existing link weights along the gradient of a
self-attention link autoencoder (SEA) used as surrogate.  The package also
ships random and common-neighbour baselines, transfer predictors (DeepWalk,
Node2Vec, GCN) and an experiment harness.
"""
from .attack import AttackConfig, AttackTrace, build_mask, degree_budget, run_iga_lwp, symmetrize
from .baselines import BaselineConfig, rda_attack, sacn_attack
from .errors import AttackError, ParseError, TrainingError, ValidationError
from .graph import (ObservedSplit, WeightedGraph, common_neighbors, load_edge_list, normalize_weights,
                    save_edge_list, second_order, split_train_test)
from .metrics import pcc, rmse
from .sea import SeaConfig, SeaParams, SeaPredictor, init_params, load_checkpoint, save_checkpoint, train

__version__ = "0.1.0"
