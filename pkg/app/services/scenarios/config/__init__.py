"""Scenario configuration settings."""
