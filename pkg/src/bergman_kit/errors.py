"""Exception hierarchy.  Every error raised by the toolkit derives from
:class:`BergmanKitError` so the CLI can map it to exit code 1."""


class BergmanKitError(Exception):
    pass


class InvalidSpec(BergmanKitError, ValueError):
    pass


class DomainError(BergmanKitError, ValueError):
    pass


class NotInClass(BergmanKitError):
    def __init__(self, condition, detail=""):
        self.condition = condition
        super().__init__(f"weight not in class W: {condition} {detail}".strip())


class InvalidRule(BergmanKitError, ValueError):
    pass


class QuadratureUnderflow(BergmanKitError, ArithmeticError):
    pass


class NonFiniteIntegrand(BergmanKitError, ArithmeticError):
    def __init__(self, node):
        self.node = node
        super().__init__(f"integrand not finite at node {node!r}")


class MomentUnderflow(QuadratureUnderflow):
    pass


class TableInvariantViolation(BergmanKitError):
    pass


class TruncationInsufficient(BergmanKitError):
    def __init__(self, required_n, n_max):
        self.required_n = required_n
        self.n_max = n_max
        super().__init__(
            f"kernel series needs about {required_n} terms, table has {n_max}")


class ParseError(BergmanKitError, SyntaxError):
    def __init__(self, message, position, expected=()):
        self.position = position
        self.expected = tuple(expected)
        exp = f"; expected one of {', '.join(self.expected)}" if self.expected else ""
        super().__init__(f"{message} at offset {position}{exp}")


class PoleAtPoint(BergmanKitError, ZeroDivisionError):
    pass


class NotSelfMap(BergmanKitError):
    def __init__(self, max_modulus, witness):
        self.max_modulus = max_modulus
        self.witness = witness
        super().__init__(f"|phi| reaches {max_modulus:.12g} > 1 at z={witness!r}")


class BoundaryEscape(BergmanKitError):
    pass


class DegenerateFit(BergmanKitError):
    pass


class ResolutionTooCoarse(BergmanKitError):
    pass


class IndeterminateRatio(BergmanKitError, ArithmeticError):
    pass


class InsufficientSamples(BergmanKitError):
    pass
