"""Elastic rough-surface scattering: forward solver, direct imaging and
numerical verification of the underlying identities."""

__version__ = "0.1.0"
