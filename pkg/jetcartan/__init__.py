"""jetcartan: jet-bundle field theory with numerically checked identities."""

__version__ = '0.1.0'
