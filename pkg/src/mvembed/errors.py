"""Exception hierarchy shared by all solvers."""


class MvembedError(Exception):
    """Base class; the CLI maps these to exit status 3."""


class InvalidInput(MvembedError, ValueError):
    pass


class NotPSD(MvembedError, ValueError):
    pass


class NotInvertible(MvembedError, ValueError):
    pass


class TooLargeForExact(MvembedError, ValueError):
    """Raised when the n x n MAXVAR eigenproblem would be too large; use MV-LSA."""


class Diverged(MvembedError, RuntimeError):
    def __init__(self, epoch, message=None):
        self.epoch = epoch
        super().__init__(message or f"training diverged at epoch {epoch}")
