"""cfikit: CFI structures over Z_{2^q}, twist-blurring matrices, and games."""

__version__ = "0.1.0"
