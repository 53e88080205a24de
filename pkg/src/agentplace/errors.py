"""Exception hierarchy shared across the package."""


class AgentPlaceError(Exception):
    pass


class CapacityExceeded(AgentPlaceError):
    def __init__(self, resource: str, server_id: str | None = None):
        self.resource = resource
        self.server_id = server_id
        where = f" on {server_id}" if server_id is not None else ""
        super().__init__(f"insufficient {resource}{where}")


class AgentLimitExceeded(AgentPlaceError):
    pass


class AlreadyHosted(AgentPlaceError):
    pass


class Disconnected(AgentPlaceError):
    pass


class UnassignedAgent(AgentPlaceError):
    pass


class NegativeCost(AgentPlaceError):
    pass


class InfeasiblePlacement(AgentPlaceError):
    pass


class TargetInfeasible(AgentPlaceError):
    pass


class NoFeasibleServer(AgentPlaceError):
    pass


class Infeasible(AgentPlaceError):
    """No legal placement was found for a task."""


class BudgetExceeded(AgentPlaceError):
    pass


class ParseError(AgentPlaceError):
    def __init__(self, message: str, line: int | None = None, field: str | None = None):
        self.line = line
        self.field = field
        loc = []
        if line is not None:
            loc.append(f"line {line}")
        if field is not None:
            loc.append(f"field {field}")
        super().__init__(f"{message} ({', '.join(loc)})" if loc else message)


class ValidationError(AgentPlaceError):
    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))
