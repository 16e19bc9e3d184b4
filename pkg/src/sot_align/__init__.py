"""Entity alignment with dangling-entity detection via semi-constraint optimal transport."""
__version__ = "0.1.0"
