"""Synthetic data configuration settings."""
