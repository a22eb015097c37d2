"""specvar: length spectra of hyperbolic surfaces and the number variance
of their random covers."""

from __future__ import annotations

__version__ = "0.1.0"
