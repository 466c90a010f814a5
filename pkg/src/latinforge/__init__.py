"""Critical sets of elementary abelian Latin squares: completion, trades, covering programs."""

__version__ = "0.1.0"
