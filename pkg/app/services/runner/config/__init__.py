"""Runner configuration settings."""
