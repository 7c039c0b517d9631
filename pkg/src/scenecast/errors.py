class PipelineError(ValueError):
    """Base class for data and configuration errors raised by pipeline stages."""


class IngestError(PipelineError):
    pass


class ProfilingError(PipelineError):
    pass


class SceneError(PipelineError):
    pass


class GraphError(PipelineError):
    pass


class ModelError(PipelineError):
    pass


class NonFiniteError(FloatingPointError):
    """Raised when a forward computation produces NaN or infinity."""
