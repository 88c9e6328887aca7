"""Group fairness metric services."""
