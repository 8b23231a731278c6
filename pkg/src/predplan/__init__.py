"""Prediction-aware RL motion planning on a 2-D driving microsimulator."""

__version__ = "0.1.0"
