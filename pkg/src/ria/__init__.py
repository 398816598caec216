"""Real interference alignment: integer constellations sent along irrational directions."""

__version__ = "0.1.0"
