"""mmWave air-to-ground channel simulator for UAV links plus a PN-sounder model."""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.1.0"
