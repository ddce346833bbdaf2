"""Monte Carlo laboratory for random walks in cooling random environment."""

__version__ = "0.1.0"
