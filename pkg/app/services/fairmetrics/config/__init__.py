"""Fairness metric configuration settings."""
