"""Exception types shared across the package."""


class HybridPIError(Exception):
    """Base class for all errors raised by hybridpi."""


class ConfigError(HybridPIError):
    """Invalid parameters, files or flags."""


class RingError(HybridPIError):
    """Bad modulus, ring mismatch, wrong domain or non-invertible residue."""


class NoiseOverflowError(HybridPIError):
    """Ciphertext noise exceeds the decryption budget."""

    def __init__(self, message: str, layer: int | None = None):
        super().__init__(message)
        self.layer = layer

    def __reduce__(self):
        return type(self), (str(self), self.layer)


class PackingError(HybridPIError):
    """Matrix shape does not fit the single-ciphertext coefficient packing."""


class CircuitError(HybridPIError):
    """Malformed boolean circuit or garbled material."""

    def __init__(self, message: str, gate_index: int | None = None):
        super().__init__(message)
        self.gate_index = gate_index

    def __reduce__(self):
        return type(self), (str(self), self.gate_index)


class OTError(HybridPIError):
    """Oblivious transfer failure (bad group element, count mismatch, reuse)."""


class ProtocolAbort(HybridPIError):
    """A session was aborted; the peer should abort as well."""


class ShareError(HybridPIError):
    """Share dimension/role mismatch."""
