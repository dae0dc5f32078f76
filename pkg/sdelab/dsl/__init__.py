from .errors import (CoordinateRangeError, DerivativeError, ExprDomainError, ExprError,
                     ExprSyntaxError, UnknownFunctionError)
from .nodes import (Add, Const, Coord, Div, Exp, Log, Max, Min, Mul, Neg, Node, Norm2, Pow,
                    Select, Sqrt, Sub, as_node)
from .parser import parse_expr, to_source

import numpy as np


def differentiate(e, axis, piecewise=False, dim=None):
    """Symbolic derivative of ``e`` along coordinate ``x<axis>`` (1-based, like the names).

    ``axis`` must not exceed ``dim``. Without ``dim`` the bound is the highest
    coordinate ``e`` names (at least 1); norm2(x) names only x1, so derivatives of
    it along other axes need ``dim``.
    """
    if axis < 1:
        raise ValueError('axis is 1-based, got {}'.format(axis))
    named = e.max_coordinate() + 1
    if dim is None:
        dim = max(named, 1)
    elif named > dim:
        raise CoordinateRangeError('expression names x{} outside dimension {}'.format(named, dim))
    if axis > dim:
        raise CoordinateRangeError('cannot differentiate along x{} in dimension {}'.format(
            axis, dim))
    return e.diff(axis - 1, piecewise=piecewise)


def eval_expr(e, point):
    """Evaluate ``e`` at a single point; domain errors name the offending node."""
    point = np.asarray(point, dtype=float).reshape(-1)
    return float(e.evaluate(point, strict=True))


__all__ = [
    'parse_expr', 'to_source', 'differentiate', 'eval_expr', 'as_node',
    'Node', 'Const', 'Coord', 'Norm2', 'Add', 'Sub', 'Mul', 'Div', 'Neg', 'Pow',
    'Exp', 'Log', 'Sqrt', 'Max', 'Min', 'Select',
    'ExprError', 'ExprSyntaxError', 'CoordinateRangeError', 'UnknownFunctionError',
    'DerivativeError', 'ExprDomainError',
]
