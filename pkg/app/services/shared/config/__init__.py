"""Shared configuration settings."""
