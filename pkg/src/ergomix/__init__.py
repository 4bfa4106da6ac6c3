"""Spread-out random walks on homogeneous spaces: exact mixing certificates, recurrence and limit-theorem experiments."""

__version__ = "0.1.0"
