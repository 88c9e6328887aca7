"""Decision threshold configuration settings."""
