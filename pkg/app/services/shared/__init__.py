"""Shared utilities and services."""