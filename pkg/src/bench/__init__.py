"""Monte Carlo experiments and their tables."""
