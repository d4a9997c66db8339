"""Exception hierarchy. Each class carries the CLI exit code for its category."""


class AdvVCError(Exception):
    exit_code = 1


class ConfigError(AdvVCError):
    exit_code = 2


class DataError(AdvVCError):
    exit_code = 3


class ManifestError(DataError):
    pass


class NumericError(AdvVCError):
    exit_code = 4


class NonFiniteLossError(NumericError):
    def __init__(self, message, utterance_ids=(), dump_path=None):
        super().__init__(message)
        self.utterance_ids = tuple(utterance_ids)
        self.dump_path = dump_path


class IntegrityError(AdvVCError):
    exit_code = 5


class FingerprintMismatchError(IntegrityError):
    exit_code = 6

    def __init__(self, expected, found, what="architecture"):
        super().__init__(f"{what} fingerprint mismatch: expected {expected}, found {found}")
        self.expected = expected
        self.found = found


class MissingCheckpointError(AdvVCError):
    exit_code = 7
