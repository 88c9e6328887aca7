"""Synthetic dataset generation and bias injection services."""
