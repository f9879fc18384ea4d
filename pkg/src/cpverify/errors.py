"""Exception hierarchy shared by every engine module."""


class VerifyError(Exception):
    """Base class for all engine errors."""

    exit_code = 2


class SchemaError(VerifyError):
    """The network description is not well-formed."""


class ReferenceError_(VerifyError):
    """A device, interface, process or traffic class name does not resolve."""


# Exported under the conventional name; the builtin is shadowed only inside this package.
ReferenceError = ReferenceError_  # noqa: A001


class InvariantError(VerifyError):
    """A structural invariant of the network description is violated."""


class UnknownTrafficClass(VerifyError):
    pass


class UnknownDevice(VerifyError):
    pass


class UnknownPolicyKind(VerifyError):
    pass


class MissingDst(VerifyError):
    pass


class MissingEndpoints(VerifyError):
    pass


class NonConvergence(VerifyError):
    """The path-vector computation did not reach a fixed point within its round budget."""


class IterationLimit(VerifyError):
    """A search budget (branch-and-bound nodes, path enumeration) was exhausted."""


class Infeasible(VerifyError):
    pass
