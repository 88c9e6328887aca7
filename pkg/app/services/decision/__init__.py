"""Decision threshold services."""
