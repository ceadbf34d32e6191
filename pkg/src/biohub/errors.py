"""Exception hierarchy shared across the package."""


class BiohubError(Exception):
    """Base class for all package errors."""


class ProtocolError(BiohubError):
    """Malformed bytes on the wire (bad magic, unknown tag, bogus length)."""


class NeedMoreBytes(BiohubError):
    """A frame is cut short; feed more bytes and retry."""


class EncodeError(BiohubError):
    """A value cannot be represented on the wire (e.g. oversized array)."""


class CodecError(BiohubError):
    """A device-level payload (BLE characteristic, strap frame) is invalid."""


class IoError(BiohubError):
    """Socket or file level failure."""


class NodeNotFound(BiohubError):
    """A parameter command targeted a node that is not connected."""


class ParamError(BiohubError):
    """Parameter key/value mismatch or out-of-range value."""


class BackendUnavailable(BiohubError):
    """A real-device or LSL backend could not be reached."""


class FormatError(BiohubError):
    """A bag file (or other on-disk artifact) is corrupt."""


class InsufficientData(BiohubError):
    """Not enough samples/intervals to compute a feature."""


class ConfigError(BiohubError):
    """Invalid configuration (e.g. band above Nyquist)."""


class ConnectionLost(BiohubError):
    """The bus connection dropped mid-operation."""


class BusTimeout(BiohubError):
    """A blocking bus operation hit its deadline."""
