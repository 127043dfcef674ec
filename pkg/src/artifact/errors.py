"""Exception types raised across the package."""


class ArtifactError(Exception):
    pass


class RuleSyntaxError(ArtifactError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{line}:{column}: {message}")
        self.line = line
        self.column = column


class NonLinearBody(ArtifactError):
    def __init__(self, rule_id: str):
        super().__init__(f"rule {rule_id}: body must contain exactly one atom")
        self.rule_id = rule_id


class UnknownPredicateArityMismatch(ArtifactError):
    pass


class NoMatch(ArtifactError):
    pass


class AddressNotInForest(ArtifactError):
    pass


class MalformedDerivation(ArtifactError):
    pass


class NoBlockingTeam(ArtifactError):
    pass


class UnlabeledAddress(ArtifactError):
    pass


class HorizonTooSmall(ArtifactError):
    pass


class MalformedWitness(ArtifactError):
    pass
