"""Core infrastructure: configuration, logging, errors, seeded random streams."""
