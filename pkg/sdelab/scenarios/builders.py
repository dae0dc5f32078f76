"""Density expressions that are tedious to write by hand."""
from ..utils import Registry, build_from_cfg
from ..utils.errors import ConfigError

DENSITY_BUILDER = Registry('density_builder')


def _norm_shift(k, dim):
    """Text of ‖x − k e₁‖."""
    parts = ['(x1-{})^2'.format(k)] + ['x{}^2'.format(j) for j in range(2, dim + 1)]
    return 'sqrt({})'.format('+'.join(parts))


def bump_centers(count, dim=2):
    return [tuple([float(k)] + [0.0] * (dim - 1)) for k in range(1, count + 1)]


def bump_train(gamma, count, width, slope, dim=2):
    """1 + Σ_k ψ(x − k e₁) with ψ(y) = max(0, min(‖y‖^γ, s(w − ‖y‖))), k = 1..count.

    Each bump is bounded by w^γ, so the density stays below 2 for w ≤ 1 and
    is kinked (not C¹) at every centre when γ < 1.
    """
    if not gamma > 0 or not width > 0 or not slope > 0 or count < 1:
        raise ValueError('bump_train needs gamma, width, slope > 0 and count >= 1')
    terms = []
    for k in range(1, count + 1):
        r = _norm_shift(k, dim)
        terms.append('max(0, min({r}^({g!r}), {s!r}*({w!r}-{r})))'.format(
            r=r, g=float(gamma), s=float(slope), w=float(width)))
    return '1 + ' + ' + '.join(terms)


@DENSITY_BUILDER.register_module
class BumpTrain(object):
    ID = 'BUMP_TRAIN'

    def __init__(self, GAMMA=0.5, COUNT=4, WIDTH=0.4, SLOPE=2.0, DIM=2):
        self.gamma = float(GAMMA)
        self.count = int(COUNT)
        self.width = float(WIDTH)
        self.slope = float(SLOPE)
        self.dim = int(DIM)

    @property
    def expr(self):
        return bump_train(self.gamma, self.count, self.width, self.slope, self.dim)

    @property
    def singular_points(self):
        return bump_centers(self.count, self.dim)


def density_source(value, dim, path):
    """(expression text, singular points) from a string or a ``{TYPE: ...}`` builder block."""
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return repr(float(value)), []
    if isinstance(value, str):
        return value, []
    if isinstance(value, dict) and 'TYPE' in value:
        if value['TYPE'] not in DENSITY_BUILDER:
            raise ConfigError(path + '.TYPE', 'unknown density builder {!r}'.format(value['TYPE']))
        try:
            builder = build_from_cfg(value, DENSITY_BUILDER, default_args={'DIM': dim})
            return builder.expr, list(builder.singular_points)
        except (TypeError, ValueError) as exc:
            raise ConfigError(path, str(exc))
    raise ConfigError(path, 'expected an expression or a builder block, got {!r}'.format(value))
