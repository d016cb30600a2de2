"""Time-domain average-model simulation."""
