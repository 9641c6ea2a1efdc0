"""Exception hierarchy. Every domain error carries a stable machine-readable ``code``."""


class GeometryError(Exception):
    """Base class for domain errors raised by the numerical core."""

    code = "GeometryError"

    def __init__(self, message="", **details):
        super().__init__(message)
        self.details = details

    def to_dict(self):
        return {"code": self.code, "message": str(self), "details": _jsonable(self.details)}

    @staticmethod
    def by_code(code, message="", **details):
        """Instantiate the subclass whose ``code`` matches."""
        stack = [GeometryError]
        while stack:
            cls = stack.pop()
            if cls.code == code:
                return cls(message, **details)
            stack.extend(cls.__subclasses__())
        return GeometryError(message, **details)


class DegenerateConfig(GeometryError):
    """Landmarks too close together, or kernel matrix not positive definite."""

    code = "DegenerateConfig"


class IllConditioned(GeometryError):
    code = "IllConditioned"


class NotDiffeo(GeometryError):
    """A sampled map ``Id + f`` violates ``1 + f' > 0``."""

    code = "NotDiffeo"


class OutOfChart(GeometryError):
    """A flat-coordinate function leaves the chart ``gamma > -2``."""

    code = "OutOfChart"


class OrderTooLow(GeometryError):
    code = "OrderTooLow"


class BlowUp(GeometryError):
    """An evolution left its smooth regime. ``partial`` holds what was computed."""

    code = "BlowUp"

    def __init__(self, message="", partial=None, **details):
        super().__init__(message, **details)
        self.partial = partial


class NotConverged(GeometryError):
    """An optimizer hit its iteration cap; ``result`` holds the best iterate."""

    code = "NotConverged"

    def __init__(self, message="", result=None, **details):
        super().__init__(message, **details)
        self.result = result


class SelftestFailed(GeometryError):
    code = "SelftestFailed"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if hasattr(obj, "tolist"):
        return obj.tolist()
    return obj
