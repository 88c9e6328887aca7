"""Experiment runner services."""
