"""spinsim: pulse-level simulator for a two-unit-cell spin-qubit processor."""

__version__ = "0.1.0"

from .device import DeviceConfig, paper_default_config  # noqa: F401
