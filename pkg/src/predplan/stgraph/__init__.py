"""Spatio-temporal graph trajectory predictor."""

from .corpus import Scene, corpus_arrays, scene_batch, scenes_from_records, synthetic_corpus
from .graph import PEDESTRIAN_RADIUS, RAMP_STEPS, VEHICLE_RADIUS, SceneGraph, build_scene_graph
from .history import DELTA, FUTURE, PAST, AgentHistory, future_velocities, histories_from_snapshots
from .kinematics import constant_velocity, evaluate_mse, integrate
from .model import Batch, PredictionOutput, Predictor, PredictorConfig, encode, make_batch
from .training import cv_baseline_mse, train_predictor, validation_mse, write_eval_csv

__all__ = [
    "Scene",
    "corpus_arrays",
    "scene_batch",
    "scenes_from_records",
    "synthetic_corpus",
    "PEDESTRIAN_RADIUS",
    "RAMP_STEPS",
    "VEHICLE_RADIUS",
    "SceneGraph",
    "build_scene_graph",
    "DELTA",
    "FUTURE",
    "PAST",
    "AgentHistory",
    "future_velocities",
    "histories_from_snapshots",
    "constant_velocity",
    "evaluate_mse",
    "integrate",
    "Batch",
    "PredictionOutput",
    "Predictor",
    "PredictorConfig",
    "encode",
    "make_batch",
    "cv_baseline_mse",
    "train_predictor",
    "validation_mse",
    "write_eval_csv",
]
