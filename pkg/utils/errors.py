class DomainError(ValueError):
    """A parameter violates the bound required by the operation."""


class DimensionError(DomainError):
    pass


class PoleError(DomainError):
    pass


class ShapeError(ValueError):
    pass


class KernelAssemblyError(ValueError):
    def __init__(self, message, pair=None):
        super().__init__(message)
        self.pair = pair


class ConvergenceError(ValueError):
    pass
