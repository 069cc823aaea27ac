import importlib.metadata

PACKAGE_NAME = "unic-kit"

try:
    __version__ = importlib.metadata.version(PACKAGE_NAME)
except importlib.metadata.PackageNotFoundError:
    __version__ = "0.0.0+unknown"
