"""Slot-level simulator of mobile IAB nodes on buses in a Manhattan grid."""

__version__ = "0.1.0"
