"""Exception types raised across the package."""


class PotnormalsError(Exception):
    """Base class for every error raised by this package."""


class DimensionMismatch(PotnormalsError, ValueError):
    pass


class JetDomainError(PotnormalsError, ValueError):
    """A primitive was applied outside its real domain (ln(0), x/0, ...)."""


class ExprError(PotnormalsError, ValueError):
    """Lexical or syntax error in an expression; ``pos`` is a 0-based column."""

    def __init__(self, message, pos=None, source=None):
        self.pos = pos
        self.source = source
        if pos is not None:
            message = f"{message} at position {pos}"
        super().__init__(message)


class ComponentError(PotnormalsError, ValueError):
    """Evaluation of one component of a vector function failed."""

    def __init__(self, name, index, cause):
        self.name = name
        self.index = index
        self.cause = cause
        super().__init__(f"{name}[{index}]: {cause}")


class SpecError(PotnormalsError, ValueError):
    """Invalid spec file or spec object; ``field`` names the offending key."""

    def __init__(self, message, field=None):
        self.field = field
        if field is not None:
            message = f"{field}: {message}"
        super().__init__(message)


class DegeneracyError(PotnormalsError, ValueError):
    """A fundamental form is (numerically) degenerate."""

    def __init__(self, which, ratio):
        self.which = which
        self.ratio = ratio
        super().__init__(f"degenerate form {which} (normalized |det| = {ratio:.3e})")


class NonisotropyError(PotnormalsError, ValueError):
    """The tangent+normal frame is singular or too ill-conditioned to solve."""

    def __init__(self, condition):
        self.condition = condition
        super().__init__(f"frame matrix is near-singular (condition {condition:.3e})")


class OrthogonalityError(PotnormalsError, ValueError):
    """The derivatives of the normal potential are not normal to the tangents."""

    def __init__(self, defect):
        self.defect = defect
        super().__init__(f"normal potential is not orthogonal to tangents (defect {defect:.3e})")


class IntegrationError(PotnormalsError, RuntimeError):
    """Frame integration was aborted; ``u`` is where it stopped."""

    def __init__(self, message, u=None, value=None):
        self.u = u
        self.value = value
        super().__init__(message)


class StencilError(PotnormalsError, ValueError):
    """The function failed at one of the finite-difference stencil points."""
