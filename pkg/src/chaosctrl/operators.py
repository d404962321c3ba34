"""Polynomial eigenoperators of the mixed channel and their eigenvalues.

On polynomials in the unstable quadrature v+, the squeeze acts diagonally,
(v+)^k -> e^{k kappa} (v+)^k, while the reset map is diagonal on the
normal-ordered powers :(v+)^k: with eigenvalue e^{-k gamma}.  The triangular
change of basis between ordinary and normal-ordered powers therefore gives
the mixed channel as a lower-triangular matrix on coefficient vectors, with
eigenvalues lambda_n = (1-p) e^{n kappa} + p e^{-n gamma} on the diagonal.

Monic eigenpolynomials Z_n are built inductively: Z_n = (v+)^n plus a
combination of lower Z's fixed one coefficient at a time by a triangular
solve.  Everything is implemented twice over: in floats for arbitrary
parameters and in exact rationals (with e^kappa and e^-gamma pinned to
rational test values) to certify the combinatorics independently of rounding.

Note on names: the expansion coefficients alpha/beta of the Z polynomials
are unrelated to the order-parameter exponent called beta elsewhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from math import comb

import numpy as np

from .channel import ChannelParams

#: Above this degree the double-factorial growth of the basis-change entries
#: starts to eat double precision; exact mode has no such limit.
MAX_FLOAT_DEGREE = 16


class DegenerateSpectrumError(RuntimeError):
    """Two eigenvalues of the same parity tower coincide; the solve aborts."""


def _double_factorial_odd(l: int) -> int:
    """(2l - 1)!! with the empty product equal to 1."""
    out = 1
    for m in range(1, 2 * l, 2):
        out *= m
    return out


def normal_order_entry(k: int, l: int) -> Fraction:
    """Entry linking (v+)^k to :(v+)^{k-2l}: in the expansion of powers."""
    return Fraction(_double_factorial_odd(l) * comb(k, 2 * l), 2**l)


def normal_order_matrix(n_max: int) -> tuple[list[list[Fraction]], list[list[Fraction]]]:
    """Exact lower-triangular basis change A and its inverse.

    A[k][k-2l] carries (v+)^k onto normal-ordered powers; the inverse has the
    same magnitudes with alternating signs.  Returns dense (n_max+1)^2 lists.
    """
    size = n_max + 1
    A = [[Fraction(0)] * size for _ in range(size)]
    Ainv = [[Fraction(0)] * size for _ in range(size)]
    for k in range(size):
        for l in range(k // 2 + 1):
            e = normal_order_entry(k, l)
            A[k][k - 2 * l] = e
            Ainv[k][k - 2 * l] = (-1) ** l * e
    return A, Ainv


def eigenvalue(n: int, params: ChannelParams) -> float:
    """lambda_n(p) = (1-p) e^{n kappa} + p e^{-n gamma}; lambda_0 = 1."""
    if n < 0:
        raise ValueError("n must be non-negative")
    return (1.0 - params.p) * math.exp(n * params.kappa) + params.p * math.exp(
        -n * params.gamma
    )


def eigenvalue_exact(n: int, p: Fraction, stretch: Fraction, loss: Fraction) -> Fraction:
    """Exact eigenvalue with stretch = e^kappa and loss = e^-gamma rational."""
    return (1 - p) * stretch**n + p * loss**n


# ---------------------------------------------------------------------------
# Generic construction (scalars may be floats or Fractions)


def _channel_rows(n_max, p, stretch, loss, exact: bool):
    """Rows of the channel action: row k expands the image of (v+)^k.

    Float mode sums every cell with ``math.fsum`` so entries are exactly
    rounded; that headroom is what keeps eigen-residuals at the 1e-12 level.
    """
    conv = (lambda f: f) if exact else float
    accumulate = sum if exact else math.fsum
    size = n_max + 1
    lam = [(1 - p) * stretch**k + p * loss**k for k in range(size)]
    rows = []
    for k in range(size):
        cells = [[] for _ in range(size)]
        # squeeze part, diagonal
        cells[k].append((1 - p) * stretch**k)
        # reset part through the normal-ordered basis: A diag(loss^m) A^{-1}
        for l in range(k // 2 + 1):
            m = k - 2 * l
            a_kl = conv(normal_order_entry(k, l))
            for j in range(m // 2 + 1):
                cells[m - 2 * j].append(
                    p * a_kl * (loss**m) * conv((-1) ** j * normal_order_entry(m, j))
                )
        rows.append(
            [accumulate(c) if c else (Fraction(0) if exact else 0.0) for c in cells]
        )
    return rows, lam


def channel_matrix(params: ChannelParams, n_max: int) -> np.ndarray:
    """Mixed-channel action on coefficient vectors up to degree n_max.

    Returns T with T[k, j] the coefficient of (v+)^j in the image of (v+)^k,
    so a polynomial with coefficient row-vector c evolves as c @ T.  T is
    lower triangular with the eigenvalues lambda_k on the diagonal.
    """
    if n_max < 1:
        raise ValueError("n_max must be at least 1")
    if n_max > MAX_FLOAT_DEGREE:
        import warnings

        warnings.warn(
            f"degree {n_max} exceeds {MAX_FLOAT_DEGREE}; float accuracy degrades",
            stacklevel=2,
        )
    rows, _ = _channel_rows(
        n_max, params.p, math.exp(params.kappa), math.exp(-params.gamma), exact=False
    )
    return np.array(rows, dtype=float)


def channel_matrix_exact(
    n_max: int, p: Fraction, stretch: Fraction, loss: Fraction
) -> list[list[Fraction]]:
    """Exact-rational channel action; see ``channel_matrix``."""
    rows, _ = _channel_rows(n_max, p, stretch, loss, exact=True)
    return rows


@dataclass(frozen=True)
class OperatorPoly:
    """Polynomial observable sum_k coeffs[k] (v+)^k.

    Eigenpolynomials are monic and contain only every other power, which is
    what ``parity`` records.
    """

    coeffs: tuple
    parity: str

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def as_array(self) -> np.ndarray:
        return np.array([float(c) for c in self.coeffs])


def _build_tower(n, p, stretch, loss, exact: bool):
    """All eigenpolynomials Z_0..Z_n of one parity tower plus their alphas.

    Returns (coeffs, alphas, lam) where coeffs[m] is the coefficient list of
    Z_m, alphas[m][l] is the weight of Z_{m-2l} inside Z_m (l >= 1), and lam
    the eigenvalue list.
    """
    zero = Fraction(0) if exact else np.longdouble(0.0)
    one = Fraction(1) if exact else np.longdouble(1.0)
    conv = (lambda f: f) if exact else np.longdouble
    accumulate = sum
    lam = [(1 - p) * stretch**k + p * loss**k for k in range(n + 1)]

    coeffs: list[list] = []
    alphas: list[dict] = []
    for m in range(n + 1):
        al: dict[int, object] = {}
        contrib: list[list] = [[] for _ in range(m + 1)]
        for l in range(1, m // 2 + 1):
            gap = lam[m - 2 * l] - lam[m]
            if not exact and abs(gap) < 1e-8:
                raise DegenerateSpectrumError(
                    f"lambda_{m} and lambda_{m-2*l} within 1e-8 at p={float(p)}"
                )
            if exact and gap == 0:
                raise DegenerateSpectrumError(
                    f"lambda_{m} equals lambda_{m-2*l} exactly"
                )
            terms = []
            for k in range(1, l + 1):
                a_nk = conv(normal_order_entry(m, k))
                ainv = conv((-1) ** (l - k) * normal_order_entry(m - 2 * k, l - k))
                terms.append(p * (loss ** (m - 2 * k) - loss**m) * a_nk * ainv)
            for k in range(1, l):
                beta = coeffs[m - 2 * k][m - 2 * l]
                terms.append((lam[m - 2 * k] - lam[m]) * al[k] * beta)
            al[l] = -accumulate(terms) / gap
            # queue alpha * Z_{m-2l} for the coefficient list
            low = coeffs[m - 2 * l]
            for j in range(len(low)):
                if low[j] != 0:
                    contrib[j].append(al[l] * low[j])
        c = [accumulate(parts) if parts else zero for parts in contrib]
        c[m] = one
        coeffs.append(c)
        alphas.append(al)
    return coeffs, alphas, lam


def build_Z(n: int, params: ChannelParams) -> OperatorPoly:
    """Monic eigenpolynomial Z_n of the mixed channel (float mode).

    The inductive solve fixes the weight of each lower eigenpolynomial so the
    channel image is exactly lambda_n Z_n; nearby eigenvalue collisions abort
    with ``DegenerateSpectrumError``.  The recursion runs in extended
    precision and rounds once at the end: near-crossing parameters blow the
    coefficients up to ~1e6 and plain double arithmetic would lose the last
    few digits that the residual bound cares about.
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    coeffs, _, _ = _build_tower(
        n,
        np.longdouble(params.p),
        np.longdouble(math.exp(params.kappa)),
        np.longdouble(math.exp(-params.gamma)),
        exact=False,
    )
    return OperatorPoly(
        coeffs=tuple(float(c) for c in coeffs[n]),
        parity="even" if n % 2 == 0 else "odd",
    )


def build_Z_exact(n: int, p: Fraction, stretch: Fraction, loss: Fraction) -> OperatorPoly:
    """Monic eigenpolynomial with exact rational arithmetic."""
    coeffs, _, _ = _build_tower(n, p, stretch, loss, exact=True)
    return OperatorPoly(coeffs=tuple(coeffs[n]), parity="even" if n % 2 == 0 else "odd")


def eigen_residual(poly: OperatorPoly, params: ChannelParams, n: int | None = None) -> float:
    """Max-norm of (T Z - lambda Z) using the matrix action as the oracle.

    The channel parameters (p, e^kappa, e^-gamma) are pinned to their double
    values and lifted exactly into rationals, and the defect is evaluated in
    exact arithmetic.  The result therefore measures the quality of the
    coefficient vector itself, with no dot-product noise on top; it is the
    same matrix route as ``channel_matrix``, just evaluated without rounding.
    """
    n = poly.degree if n is None else n
    p = Fraction(params.p)
    stretch = Fraction(math.exp(params.kappa))
    loss = Fraction(math.exp(-params.gamma))
    rows, _ = _channel_rows(max(poly.degree, 1), p, stretch, loss, exact=True)
    lam = eigenvalue_exact(n, p, stretch, loss)
    c = [Fraction(float(x)) for x in poly.coeffs]
    worst = Fraction(0)
    for j in range(len(c)):
        image_j = sum(c[k] * rows[k][j] for k in range(len(c)))
        worst = max(worst, abs(image_j - lam * c[j]))
    return float(worst)


def eigen_residual_exact(
    poly: OperatorPoly, p: Fraction, stretch: Fraction, loss: Fraction
) -> Fraction:
    n = poly.degree
    rows = channel_matrix_exact(max(n, 1), p, stretch, loss)
    lam = eigenvalue_exact(n, p, stretch, loss)
    worst = Fraction(0)
    for j in range(n + 1):
        image_j = sum(poly.coeffs[k] * rows[k][j] for k in range(n + 1))
        worst = max(worst, abs(image_j - lam * poly.coeffs[j]))
    return worst


def expand_power(n: int, params: ChannelParams) -> np.ndarray:
    """Coefficients of (v+)^n over the eigenbasis {Z_k}.

    Index k of the returned vector weights Z_k; only k = n, n-2, ... appear:
    (v+)^n = Z_n - sum_l alpha_{n,n-2l} Z_{n-2l}.
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    _, alphas, _ = _build_tower(
        n,
        np.longdouble(params.p),
        np.longdouble(math.exp(params.kappa)),
        np.longdouble(math.exp(-params.gamma)),
        exact=False,
    )
    d = np.zeros(n + 1)
    d[n] = 1.0
    for l, a in alphas[n].items():
        d[n - 2 * l] = -float(a)
    return d


def assemble_from_eigenbasis(d, params: ChannelParams) -> np.ndarray:
    """Inverse of ``expand_power``: weights over {Z_k} back to power coefficients."""
    d = np.asarray(d, dtype=float)
    n = d.size - 1
    coeffs, _, _ = _build_tower(
        n,
        np.longdouble(params.p),
        np.longdouble(math.exp(params.kappa)),
        np.longdouble(math.exp(-params.gamma)),
        exact=False,
    )
    out = np.zeros(n + 1)
    for k in range(n + 1):
        if d[k] != 0.0:
            zk = np.array([float(c) for c in coeffs[k]])
            out[: k + 1] += d[k] * zk
    return out


def spectral_crossing(n: int, kappa: float, gamma: float, tol: float = 1e-13) -> float:
    """Control rate where the largest degree-<=n eigenvalue crosses 1.

    Bisection on max_k lambda_k(p) - 1, which is strictly decreasing in p.
    Agrees with the closed-form threshold rate for order n.
    """
    if n < 1:
        raise ValueError("n must be at least 1")

    def worst(p: float) -> float:
        params = ChannelParams(p=p, kappa=kappa, gamma=gamma)
        return max(eigenvalue(k, params) for k in range(1, n + 1)) - 1.0

    lo, hi = 0.0, 1.0
    if worst(lo) <= 0.0:
        return lo
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if worst(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
