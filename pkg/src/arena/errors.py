"""Exception hierarchy shared by all arena modules."""


class ArenaError(Exception):
    """Base class for all arena-specific errors."""


# --- config / spec parsing ---

class SpecSyntaxError(ArenaError):
    """Match spec or plan file is not well-formed in the config format."""


class ValidationError(ArenaError):
    """A parsed value violates a declared invariant; message names the field."""


class UnsupportedBotTypeError(ArenaError):
    """Bot file extension is not one of dll/exe/jar."""


class MapNotFoundError(ArenaError):
    """Referenced map is not present in the maps directory."""


# --- volumes ---

class SlotOutOfRangeError(ArenaError):
    """Player slot index is outside the match's slot range."""


# --- registry ---

class NetworkError(ArenaError):
    """Registry or blob endpoint unreachable / transport failure."""


class ProtocolError(ArenaError):
    """Payload does not match the declared schema or is internally inconsistent."""


class ChecksumMismatchError(ArenaError):
    """Downloaded bytes hash differently than the advertised digest."""


# --- container runtime ---

class RuntimeUnavailableError(ArenaError):
    """Container runtime daemon is unreachable or refused the operation."""


class NameConflictError(ArenaError):
    """A container with this name already exists."""


class ImageMissingError(ArenaError):
    """Requested image is not resolvable by the runtime."""


class ContainerNotFoundError(ArenaError):
    """Operation on a container the runtime does not know."""


class AlreadyRunningError(ArenaError):
    """start() on a container that is already running."""


class StillRunningError(ArenaError):
    """remove() on a container that is still running."""


# --- lifecycle ---

class ProvisionError(ArenaError):
    """Volume preparation or bot installation failed during launch."""


class HostStartTimeoutError(ArenaError):
    """Slot 0 (the LAN game host) never became ready in time."""


class PortExhaustedError(ArenaError):
    """No free host port available in the requested range."""
