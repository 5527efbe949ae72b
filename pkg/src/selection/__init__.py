"""Variable selection: dense simplex, Dantzig selector, marginal screening."""
