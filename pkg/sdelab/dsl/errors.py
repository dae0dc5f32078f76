from ..utils.errors import SdelabError


class ExprError(SdelabError):
    """Base class of expression errors."""


class ExprSyntaxError(ExprError):

    def __init__(self, message, offset=None, source=None):
        if offset is not None:
            message = '{} (at byte {})'.format(message, offset)
        super(ExprSyntaxError, self).__init__(message)
        self.offset = offset
        self.source = source


class CoordinateRangeError(ExprSyntaxError):
    pass


class UnknownFunctionError(ExprSyntaxError):
    pass


class DerivativeError(ExprError):
    pass


class ExprDomainError(ExprError):

    def __init__(self, message, node=None, point=None):
        detail = message
        if node is not None:
            detail = '{} in {}'.format(detail, node)
        if point is not None:
            detail = '{} at {}'.format(detail, list(point))
        super(ExprDomainError, self).__init__(detail)
        self.node = node
        self.point = None if point is None else tuple(float(p) for p in point)
