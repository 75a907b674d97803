"""Lane-change scenario extraction, OpenSCENARIO generation, playback and evaluation."""

from .params import SCHEMA_VERSION

__version__ = "0.1.0"

OPENSCENARIO_VERSION = "1.1"
OPENDRIVE_VERSION = "1.6"

__all__ = ["__version__", "SCHEMA_VERSION", "OPENSCENARIO_VERSION", "OPENDRIVE_VERSION"]
