"""Performative-prediction scenario services."""
