"""Fairness testing and statistical debugging of ML hyperparameters."""
