class ExtractorError(Exception):
    """Base class for extraction failures."""


class UnreadableImage(ExtractorError):
    def __init__(self, path, reason=""):
        super().__init__(f"cannot decode image {path}" + (f": {reason}" if reason else ""))
        self.path = path


class UnknownBackbone(ExtractorError):
    pass


class LayerNotFound(ExtractorError):
    pass


class WeightsUnavailable(ExtractorError):
    pass
