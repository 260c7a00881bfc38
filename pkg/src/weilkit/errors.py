"""Exception hierarchy.

Every error raised on purpose by the library derives from :class:`WeilkitError`
and carries a stable machine-readable ``code``.  The CLI maps
:class:`InvariantViolation` to exit status 2 and everything else to 1.
"""


class WeilkitError(Exception):
    code = "error"

    def __init__(self, message="", **details):
        super().__init__(message)
        self.details = details

    def to_dict(self):
        out = {"code": self.code, "message": str(self)}
        if self.details:
            out["details"] = self.details
        return out


# algebra
class NonNilpotent(WeilkitError):
    code = "non_nilpotent"


class DimensionGuard(WeilkitError):
    code = "dimension_guard"


class AlgebraMismatch(WeilkitError):
    code = "algebra_mismatch"


class NotNilpotent(WeilkitError):
    code = "not_nilpotent"


# expressions
class ExprSyntaxError(WeilkitError):
    code = "syntax_error"

    def __init__(self, message, position, expected=(), source=""):
        super().__init__(message, position=position, expected=sorted(expected))
        self.position = position
        self.expected = tuple(sorted(expected))
        self.source = source

    def __str__(self):
        base = super().__str__()
        if not self.source:
            return base
        caret = " " * self.position + "^"
        return f"{base}\n  {self.source}\n  {caret}"


class UnknownFunction(ExprSyntaxError):
    code = "unknown_function"


class UnboundVariable(WeilkitError):
    code = "unbound_variable"


class DomainError(WeilkitError):
    code = "domain_error"


class DivisionByZero(DomainError):
    code = "division_by_zero"


# manifolds and points
class UnknownManifold(WeilkitError):
    code = "unknown_manifold"


class InvalidManifold(WeilkitError):
    code = "invalid_manifold"


class ChartDomain(WeilkitError):
    code = "chart_domain"


class ManifoldMismatch(WeilkitError):
    code = "manifold_mismatch"


# metric
class WeightMismatch(WeilkitError):
    code = "weight_mismatch"


class FiberMismatch(WeilkitError):
    code = "fiber_mismatch"


class BoxTooLarge(WeilkitError):
    code = "box_too_large"


class InvalidConfig(WeilkitError):
    code = "invalid_config"


# lifting
class EndpointMismatch(WeilkitError):
    code = "endpoint_mismatch"


class ChartPathUnresolvable(WeilkitError):
    code = "chart_path_unresolvable"


class TargetChartUnresolved(ChartDomain):
    code = "target_chart_unresolved"


# topology
class InvalidComplex(WeilkitError):
    code = "invalid_complex"


class NoTriangulation(WeilkitError):
    code = "no_triangulation"


class InvalidInput(WeilkitError):
    code = "invalid_input"


class InvariantViolation(WeilkitError):
    code = "invariant_violation"
