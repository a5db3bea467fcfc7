"""Python access to the chanhom simulator core."""

from ._chanhom import (
    NumericalError,
    StudyConfig,
    ValidationError,
    __version__,
    benchmark_b1,
    load_config,
    parse_config,
    rederive_report,
    run_study,
    sha256_file,
    verify_operators,
)

__all__ = [
    "NumericalError",
    "StudyConfig",
    "ValidationError",
    "__version__",
    "benchmark_b1",
    "load_config",
    "parse_config",
    "rederive_report",
    "run_study",
    "sha256_file",
    "verify_operators",
]
