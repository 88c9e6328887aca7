"""Learner configuration settings."""
