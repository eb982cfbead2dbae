"""Backup-CBF safety filters: switched flows, implicit safe sets, and QP filtering."""

__version__ = "0.1.0"
