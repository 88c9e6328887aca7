"""Scoring model training services."""
