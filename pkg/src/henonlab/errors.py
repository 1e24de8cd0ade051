"""Exception types shared across the package.

Precondition failures derive from ``ValueError`` so that generic callers can
catch them without importing this module. Numerical failures that leave a
question unresolved derive from :class:`NumericalInconclusive`.
"""


class ParameterError(ValueError):
    """Input outside the range where the equations are posed."""


class NoEntireSolution(ParameterError):
    """No entire radial solution exists for the requested dimension."""


class NotApplicable(ParameterError):
    """Operation only defined in a different parameter regime."""


class NumericalInconclusive(RuntimeError):
    """A numerical procedure could not reach a decision."""


class IntegrationStall(NumericalInconclusive):
    """Adaptive step size collapsed before reaching the target radius."""

    def __init__(self, message, r=None, state=None, n_steps=None):
        super().__init__(message)
        self.r = r
        self.state = state
        self.n_steps = n_steps


class InconclusiveBracket(NumericalInconclusive):
    """Shooting could not classify a trajectory even at the largest radius."""

    def __init__(self, message, bracket=None, beta=None, r_max=None):
        super().__init__(message)
        self.bracket = bracket
        self.beta = beta
        self.r_max = r_max


class Inconclusive(NumericalInconclusive):
    """Stability certificates disagree under refinement."""


class BlowUpSignal(ArithmeticError):
    """Raised from a right-hand side when ``u`` exceeds the overflow guard."""

    def __init__(self, r, u):
        super().__init__(f"u={u:.6g} exceeds the overflow guard at r={r:.6g}")
        self.r = r
        self.u = u
