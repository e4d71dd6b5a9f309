"""Exception types raised across the toolkit."""


class SpliceLabError(Exception):
    """Base class for all toolkit errors."""


class InvalidArgument(SpliceLabError, ValueError):
    pass


class EmptySpectrogramError(SpliceLabError, ValueError):
    """Signal is shorter than a single analysis window."""


class TooShortError(SpliceLabError, ValueError):
    pass


class NoSilenceError(SpliceLabError, ValueError):
    """No interior silent region long enough was found in a track."""


class UndefinedSnrError(SpliceLabError, ValueError):
    pass


class CorpusExhaustedError(SpliceLabError, RuntimeError):
    def __init__(self, message, shortfall=0):
        super().__init__(message)
        self.shortfall = shortfall


class WavParseError(SpliceLabError, ValueError):
    def __init__(self, message, chunk=None, path=None):
        where = []
        if path is not None:
            where.append(str(path))
        if chunk is not None:
            where.append(f"chunk {chunk!r}")
        prefix = f"{': '.join(where)}: " if where else ""
        super().__init__(prefix + message)
        self.chunk = chunk
        self.path = path


class LabelValidationError(SpliceLabError, ValueError):
    def __init__(self, message, offenders=()):
        super().__init__(message)
        self.offenders = list(offenders)
