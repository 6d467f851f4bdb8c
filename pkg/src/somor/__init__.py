"""Structure-preserving model order reduction for second-order mechanical systems."""
__version__ = '0.1.0'
