"""Exception hierarchy shared across the pipeline.

Each class carries the CLI exit code it maps to.
"""


class QOTError(Exception):
    exit_code = 1


class InvalidArgument(QOTError, ValueError):
    exit_code = 2


class MissingData(QOTError, LookupError):
    exit_code = 3

    def __init__(self, message, setting_id=None):
        super().__init__(message)
        self.setting_id = setting_id


class ResourceLimit(QOTError, RuntimeError):
    exit_code = 4
