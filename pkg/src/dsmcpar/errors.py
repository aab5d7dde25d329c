class ParameterError(ValueError):
    """A numeric argument lies outside its admissible range."""


class ConfigError(ValueError):
    """A problem or strategy configuration violates one of its invariants."""


class IndexingFault(RuntimeError):
    """A live particle sits outside the domain when the cell index is rebuilt.

    This always points at a bug in particle motion.
    """


class MergeError(ValueError):
    """Run results with different snapshot schedules cannot be merged."""
