"""Exception hierarchy shared by all modules.

Every error carries a short machine-readable ``code`` so the command line
front end can emit a structured error object.
"""


class ToricVolError(Exception):
    code = "ERROR"

    def __init__(self, message="", **details):
        super().__init__(message)
        self.details = details

    def to_dict(self):
        return {"code": self.code, "message": str(self), **{
            k: v for k, v in self.details.items() if _jsonable(v)}}


def _jsonable(value):
    return isinstance(value, (str, int, float, bool, type(None), list, dict))


class UnboundedPolytopeError(ToricVolError):
    code = "UNBOUNDED"


class OriginNotInteriorError(ToricVolError):
    code = "ORIGIN_NOT_INTERIOR"


class DegeneratePolytopeError(ToricVolError):
    code = "DEGENERATE"


class DimensionTooLargeError(ToricVolError):
    code = "DIM_TOO_LARGE"


class NotReflexiveError(ToricVolError):
    code = "NOT_REFLEXIVE"


class BudgetExceededError(ToricVolError):
    code = "BUDGET_EXCEEDED"


class NonconvexInputError(ToricVolError):
    code = "NONCONVEX_INPUT"


class GridTooCoarseError(ToricVolError):
    code = "GRID_TOO_COARSE"


class DomainMismatchError(ToricVolError):
    code = "DOMAIN_MISMATCH"


class SupportUnboundedError(ToricVolError):
    code = "SUPPORT_UNBOUNDED"


class MassTooLargeError(ToricVolError):
    code = "MASS_TOO_LARGE"


class NonPrimitiveNormalWarning(UserWarning):
    """A facet normal was divided by the gcd of its entries."""
