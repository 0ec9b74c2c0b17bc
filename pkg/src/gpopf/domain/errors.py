from __future__ import annotations


class GpopfError(Exception):
    """Base error for gpopf."""


class CaseSyntaxError(GpopfError):
    def __init__(self, message: str, line: int) -> None:
        super().__init__(f"line {line}: {message}")
        self.line = line


class CaseValidationError(GpopfError):
    def __init__(self, message: str, table: str = "", row: int | None = None) -> None:
        where = f"{table} row {row}: " if table and row is not None else ""
        super().__init__(f"{where}{message}")
        self.table = table
        self.row = row


class InputDimensionError(GpopfError):
    """Input vector does not match the experiment's bus roles."""


class PowerFlowError(GpopfError):
    def __init__(self, message: str, residual: float, iterations: int) -> None:
        super().__init__(f"{message} (residual={residual:.3e}, iterations={iterations})")
        self.residual = residual
        self.iterations = iterations


class OracleError(GpopfError):
    def __init__(self, message: str, sample_index: int) -> None:
        super().__init__(f"sample {sample_index}: {message}")
        self.sample_index = sample_index


class GpFitError(GpopfError):
    def __init__(self, message: str, output_name: str = "") -> None:
        super().__init__(f"{output_name}: {message}" if output_name else message)
        self.output_name = output_name


class GpNumericalError(GpopfError):
    """Cholesky failure after maximum jitter, or a negative predictive variance."""


class SampleBudgetError(GpopfError):
    def __init__(self, rejected: int, allowed: int) -> None:
        super().__init__(
            f"{rejected} non-converged OPF samples exceed the retry budget of {allowed}; "
            "the uncertainty box is likely infeasible"
        )
        self.rejected = rejected
        self.allowed = allowed


class UnsupportedDistributionError(GpopfError):
    """Unknown sample distribution kind or unusable parameters."""


class UnpairedSamplesError(GpopfError):
    """GP and Monte-Carlo sample sets were not drawn from the same input stream."""


class SchemaVersionError(GpopfError):
    """Serialized models were written by an incompatible schema."""


class SensitivityError(GpopfError):
    """Invalid input to the subspace-sensitivity computations."""


class ConfigError(GpopfError):
    """Experiment configuration cannot be used."""


class MetricError(GpopfError):
    """Error metric undefined for the given vectors."""


class OracleInvokedError(GpopfError):
    """The surrogate-only prediction path reached the OPF oracle."""

    def __init__(self, calls: int) -> None:
        super().__init__(f"prediction invoked the OPF oracle {calls} times")
        self.calls = calls
