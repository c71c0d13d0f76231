"""Exception hierarchy shared across the package.

Each class carries a short ``kind`` tag and the exit code used by the CLI.
"""


class CpgError(Exception):
    kind = "runtime"
    exit_code = 3


class DimensionError(CpgError, ValueError):
    kind = "dimension"


class DomainError(CpgError, ValueError):
    kind = "domain"


class NumericError(CpgError, FloatingPointError):
    kind = "numeric"


class ContractError(CpgError, ValueError):
    kind = "contract"


class RegistryError(CpgError, KeyError):
    kind = "registry"
    exit_code = 1

    def __str__(self):
        # KeyError quotes its argument; keep messages single-line and plain
        return str(self.args[0]) if self.args else ""


class ConfigError(CpgError, ValueError):
    kind = "config"
    exit_code = 1


class PathError(CpgError, FileNotFoundError):
    kind = "path"
    exit_code = 2


class DataIntegrityError(CpgError, ValueError):
    kind = "data"
    exit_code = 2


class CheckpointError(CpgError, ValueError):
    kind = "checkpoint"
    exit_code = 2


class CorruptCheckpointError(CheckpointError):
    kind = "corrupt-container"


class CheckpointVersionError(CheckpointError):
    kind = "version"
