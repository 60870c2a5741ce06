"""Exception hierarchy shared by every stage of the pipeline."""


class Region2VecError(Exception):
    """Base class for all errors raised by this package."""


class ShapeMismatch(Region2VecError, ValueError):
    pass


class InvalidConfig(Region2VecError, ValueError):
    pass
