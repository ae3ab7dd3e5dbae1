"""The optimal estimation function and the analysis built on it.

A counter scale is fixed by an error parameter ``epsilon`` and a symbol
count ``L``.  Symbol ``l`` decodes to

    A(l) = ((1 + 2 eps^2)^l - 1) / (2 eps^2) * (1 + eps^2)

with ``A(l) = l`` when ``eps == 0``.  Each packet advances the symbol with
probability ``1 / (A(l+1) - A(l))``, which keeps the estimate unbiased with
a relative standard error of exactly ``eps`` for every count.
"""

from dataclasses import dataclass, field
import math

import numpy as np

from . import _kernels
from .errors import CapacityError, DomainError

__all__ = [
    "EstimationScale",
    "BitBounds",
    "EpsilonSquaredBounds",
    "estimation_value",
    "step_size",
    "capacity",
    "epsilon_for_capacity",
    "epsilon_squared_bounds",
    "bits_required",
    "epsilon_from_chebyshev",
    "delta_from_epsilon",
    "upscale_target_symbol",
    "upscale_error_lp",
]


@dataclass(frozen=True)
class EstimationScale:
    """Decoder for one counter scale, with its value table precomputed.

    ``disco=True`` builds the DISCO variant instead, whose values are the
    optimal ones divided by ``1 + eps^2``.
    """

    epsilon: float
    num_symbols: int
    disco: bool = False
    values: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.epsilon < 0 or not math.isfinite(self.epsilon):
            raise DomainError(f"epsilon must be finite and >= 0, got {self.epsilon}")
        if self.num_symbols < 2:
            raise DomainError(f"need at least 2 symbols, got {self.num_symbols}")
        values = _kernels.scale_values(float(self.epsilon), int(self.num_symbols), self.disco)
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @property
    def L(self):
        return self.num_symbols

    @property
    def capacity(self):
        return float(self.values[-1])

    def __len__(self):
        return self.num_symbols


@dataclass(frozen=True)
class BitBounds:
    lower_bits: int
    upper_bits: int
    exact_L: float

    @property
    def bits(self):
        """Bits per symbol actually needed: ceil(log2(ceil(exact_L)))."""
        return math.ceil(math.log2(math.ceil(self.exact_L)))


@dataclass(frozen=True)
class EpsilonSquaredBounds:
    lower: float
    upper: float


def estimation_value(scale, l):
    if not 0 <= l < scale.num_symbols:
        raise IndexError(f"symbol {l} outside [0, {scale.num_symbols})")
    return float(scale.values[l])


def step_size(scale, l):
    """A(l+1) - A(l): packets expected before symbol ``l`` advances."""
    if not 0 <= l < scale.num_symbols:
        raise IndexError(f"symbol {l} outside [0, {scale.num_symbols})")
    if l == scale.num_symbols - 1:
        raise IndexError(f"symbol {l} is the top symbol and has no successor")
    return float(scale.values[l + 1] - scale.values[l])


def _check_L(L):
    if int(L) != L or L < 2:
        raise DomainError(f"L must be an integer >= 2, got {L}")
    return int(L)


def capacity(epsilon, L):
    """Largest representable count, A(L-1), from the closed form."""
    if epsilon < 0:
        raise DomainError(f"epsilon must be >= 0, got {epsilon}")
    return _kernels.capacity(float(epsilon), _check_L(L), False)


def epsilon_for_capacity(M, L):
    """Smallest epsilon whose capacity reaches ``M`` (0 when M <= L-1).

    Bisection runs to adjacent doubles, so the result is the tightest
    representable value with ``capacity(result, L) >= M``.
    """
    if M < 0:
        raise DomainError(f"M must be >= 0, got {M}")
    return _kernels.epsilon_for_capacity(float(M), _check_L(L), False)


def epsilon_squared_bounds(M, L):
    """Closed-form bracket on epsilon_for_capacity(M, L)**2.

    The bracket is guaranteed for M > 2L - 1; below that the upper side
    can be far from the truth.
    """
    L = _check_L(L)
    if M <= L - 1:
        raise DomainError(f"lower bound needs M > L-1, got M={M}, L={L}")
    if 6 * M <= L - 1:
        raise DomainError(f"upper bound needs 6M > L-1, got M={M}, L={L}")
    lower = math.log((2 * M + 1) / (2 * L - 1)) / (2 * (L - 1))
    upper = 3 * math.log(6 * M / (L - 1)) / (L - 1)
    return EpsilonSquaredBounds(lower, upper)


def bits_required(M, epsilon):
    """Bits per symbol to count to ``M`` with error ``epsilon``, plus the
    closed-form lower/upper bounds around it."""
    if not 0 < epsilon < 1:
        raise DomainError(f"epsilon must lie in (0, 1), got {epsilon}")
    if M <= 0:
        raise DomainError(f"M must be > 0, got {M}")
    e2 = epsilon * epsilon
    log_term = math.log((2 * M + 1) * e2 + 1)
    exact_L = 1 + (log_term - math.log1p(e2)) / math.log1p(2 * e2)
    core = math.log2(log_term) + math.log2(1 / e2)
    return BitBounds(math.ceil(core - 1), math.ceil(core + 1), exact_L)


def epsilon_from_chebyshev(beta, rho):
    """Error parameter so that P(relative error >= beta) <= rho."""
    if not (0 < beta <= 1 and 0 < rho <= 1):
        raise DomainError(f"beta and rho must lie in (0, 1], got {beta}, {rho}")
    return math.sqrt(beta * beta * rho)


def delta_from_epsilon(epsilon):
    """Maximal hitting-time CV of the scale; satisfies
    (A(l+1) - A(l)) (1 - delta^2) = 1 + 2 delta^2 A(l)."""
    if epsilon < 0:
        raise DomainError(f"epsilon must be >= 0, got {epsilon}")
    e2 = epsilon * epsilon
    return math.sqrt(e2 / (1 + e2))


def upscale_target_symbol(l, eps_from, eps_to, L):
    """Where symbol ``l`` at ``eps_from`` lands at ``eps_to``.

    Returns ``(l_prime, promote_prob)``: the new symbol is ``l_prime + 1``
    with probability ``promote_prob`` and ``l_prime`` otherwise, which keeps
    the expected estimate unchanged.  Works in both directions; shrinking
    the scale fails with CapacityError if the value no longer fits.
    """
    L = _check_L(L)
    if not 0 <= l < L:
        raise IndexError(f"symbol {l} outside [0, {L})")
    if eps_to == eps_from:
        raise DomainError("eps_to must differ from eps_from")
    if eps_from < 0 or eps_to < 0:
        raise DomainError("epsilons must be >= 0")
    a = _kernels.scale_values(float(eps_from), L, False)[l]
    to_values = _kernels.scale_values(float(eps_to), L, False)
    if eps_to < eps_from and not a < to_values[-1]:
        raise CapacityError(
            f"A_{eps_from}({l}) = {a} does not fit below A_{eps_to}({L - 1}) = {to_values[-1]}"
        )
    lp, p = _kernels.target_symbol(a, to_values, float(eps_to))
    if lp < 0:
        raise CapacityError(f"A_{eps_from}({l}) = {a} exceeds capacity {to_values[-1]}")
    return int(lp), float(p)


def _upscale_constraints(eps_from, eps_to, L):
    """Values A_eps(l) and the variance increments of remapping them, l >= 1."""
    a = _kernels.scale_values(float(eps_from), L, False)
    to_values = _kernels.scale_values(float(eps_to), L, False)
    lp = np.searchsorted(to_values, a, side="right") - 1
    lo = to_values[lp]
    hi = to_values[np.minimum(lp + 1, L - 1)]
    var = np.where(lp < L - 1, (hi - a) * (a - lo), 0.0)
    return a[1:], var[1:]


def upscale_error_lp(eps_from, eps_to, L):
    """Upper bound on the post-upscale MSRE via a two-variable LP.

    Minimises ``eps^2 + alpha (1 + eps^2) + beta`` over ``alpha, beta >= 0``
    subject to ``var_l <= alpha A(l)^2 + beta A(l)`` for every symbol, where
    ``var_l`` is the variance that remapping symbol ``l`` adds.

    Dividing each constraint by ``A(l)`` turns it into a line
    ``beta >= r_l - alpha A(l)``.  The smallest feasible beta for a given
    alpha is the upper envelope of those lines, so the optimum sits at
    alpha = 0, on the beta = 0 axis, or at an envelope vertex; all of them
    are enumerated and the cheapest one is returned.
    """
    L = _check_L(L)
    if not 0 < eps_from < eps_to:
        raise DomainError(f"need 0 < eps_from < eps_to, got {eps_from}, {eps_to}")
    a, var = _upscale_constraints(eps_from, eps_to, L)
    r = var / a
    e2 = eps_from * eps_from

    candidates = [0.0, float(np.max(r / a))]
    candidates.extend(_envelope_vertices(-a, r))
    alphas = np.array([c for c in candidates if c >= 0.0])
    best = np.inf
    for chunk in np.array_split(alphas, max(1, len(alphas) // 256)):
        beta = np.maximum(0.0, np.max(r[None, :] - chunk[:, None] * a[None, :], axis=1))
        best = min(best, float(np.min(chunk * (1 + e2) + beta)))
    if not math.isfinite(best):
        raise ArithmeticError("upscale LP produced no feasible vertex")
    return e2 + best


def _envelope_vertices(slopes, intercepts):
    """x-coordinates where the upper envelope of y = m x + b changes line."""
    order = np.lexsort((intercepts, slopes))
    m = slopes[order]
    b = intercepts[order]
    # equal slopes: keep only the highest intercept (last after the sort)
    keep = np.append(m[1:] != m[:-1], True)
    m, b = m[keep], b[keep]
    hull = []
    for mj, bj in zip(m, b):
        while len(hull) >= 2:
            (m1, b1), (m2, b2) = hull[-2], hull[-1]
            # line 2 is useless if line j overtakes line 1 no later than line 2 does
            if (bj - b1) / (m1 - mj) <= (b2 - b1) / (m1 - m2):
                hull.pop()
            else:
                break
        hull.append((mj, bj))
    return [(b2 - b1) / (m1 - m2) for (m1, b1), (m2, b2) in zip(hull, hull[1:])]
