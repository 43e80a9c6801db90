class DCDSRError(Exception):
    pass


class ConfigError(DCDSRError, ValueError):
    pass


class DataError(DCDSRError):
    pass


class EmptyDatasetError(DataError):
    pass


class GraphError(DCDSRError, ValueError):
    pass


class TrainingError(DCDSRError):
    pass


class DenoiseCollapseError(TrainingError):
    """Denoising removed every interaction edge."""


class NumericalError(TrainingError):
    pass
