"""Exception hierarchy shared by the simulator modules."""


class CoexError(Exception):
    """Base class for all errors raised by coexqkd."""


class OutOfRangeError(CoexError, ValueError):
    """An argument lies outside the tabulated or physical domain."""


class InfeasibleCalibration(CoexError):
    """A calibration target cannot be met under the model.

    ``step`` names the calibration stage and ``anchor`` the target that
    conflicts with the rest of the configuration.
    """

    def __init__(self, message, step=None, anchor=None):
        super().__init__(message)
        self.step = step
        self.anchor = anchor


class UncoveredRangeError(CoexError):
    """A requested crossing is not bracketed by the sweep grid."""


class UndefinedQBER(CoexError):
    """No sifted clicks (or zero total rate), so the QBER is undefined."""


class InsufficientStatistics(CoexError):
    def __init__(self, count, needed):
        super().__init__(f"only {count} tags available, need at least {needed}")
        self.count = count
        self.needed = needed


class SyncFailure(CoexError):
    def __init__(self, score, offset, floor):
        super().__init__(
            f"frame alignment failed: best score {score:.4f} at offset {offset} "
            f"is below the floor {floor:.4f}"
        )
        self.score = score
        self.offset = offset
        self.floor = floor


class TagFileError(CoexError):
    """Base class for QTAG parse errors."""


class BadMagic(TagFileError):
    pass


class UnsupportedVersion(TagFileError):
    pass


class TruncatedTagFile(TagFileError):
    def __init__(self, message, offset):
        super().__init__(message)
        self.offset = offset


class UnsortedTimestamps(TagFileError):
    def __init__(self, index, previous, current):
        super().__init__(
            f"timestamp regression at record {index}: {current} ps follows {previous} ps"
        )
        self.index = index


class ConfigError(CoexError):
    """Unparseable config, unknown key, or an invalid value."""
