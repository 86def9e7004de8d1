"""Exception hierarchy shared across the package."""


class SelfTeachError(Exception):
    """Base class for all library errors."""


class ConfigError(SelfTeachError):
    """A configuration value violates a documented constraint."""


class InputError(SelfTeachError):
    """An operation received an argument outside its domain."""


class StateError(SelfTeachError):
    """An operation was invoked on a state that does not permit it."""


class DataError(SelfTeachError):
    """External data (detection dumps, trace files) is malformed."""


class CheckpointError(SelfTeachError):
    """A checkpoint is corrupt or carries an unsupported schema version."""
