"""Numerical primitives shared by every weighting method.

Standard-normal distribution functions, scalar root solvers with the
two-branch Newton/grid structure the weight optimizers rely on, a natural
cubic smoothing spline parameterized by effective degrees of freedom, and
the Box-Cox transformation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import optimize, special

__all__ = [
    "SolverConfig",
    "SplineFit",
    "NonConvergenceError",
    "SingularDerivativeError",
    "BracketError",
    "norm_cdf",
    "norm_sf",
    "norm_pdf",
    "norm_quantile",
    "norm_sf_quantile",
    "newton_raphson",
    "grid_search_root",
    "brent_root",
    "fit_smoothing_spline",
    "box_cox",
    "box_cox_transform",
]


class NonConvergenceError(RuntimeError):
    """Iterative solver hit its iteration cap without meeting tolerance."""


class SingularDerivativeError(NonConvergenceError):
    """Newton step undefined: derivative magnitude below 1e-300."""


class BracketError(ValueError):
    """Bracketing solver called without a sign change on [lo, hi]."""


@dataclass(frozen=True)
class SolverConfig:
    """Stopping rules for the scalar solvers."""

    max_iterations: int = 100
    abs_tolerance: float = 1e-10
    step_tolerance: float = 1e-12

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.abs_tolerance <= 0 or self.step_tolerance <= 0:
            raise ValueError("tolerances must be strictly positive")


def norm_cdf(x):
    """Standard normal CDF, <=1e-15 relative error; accepts scalars or arrays."""
    out = special.ndtr(x)
    return float(out) if np.isscalar(x) else out


def norm_sf(x):
    """Standard normal upper tail P(Z > x)."""
    out = special.ndtr(np.negative(x))
    return float(out) if np.isscalar(x) else out


def norm_pdf(x):
    x = np.asarray(x, dtype=float)
    out = np.exp(-0.5 * x * x) / np.sqrt(2.0 * np.pi)
    return float(out) if out.ndim == 0 else out


def norm_quantile(p):
    """Inverse standard normal CDF on (0, 1)."""
    parr = np.asarray(p, dtype=float)
    if np.any(parr <= 0.0) or np.any(parr >= 1.0):
        raise ValueError("norm_quantile requires p in the open interval (0, 1)")
    out = special.ndtri(parr)
    return float(out) if parr.ndim == 0 else out


def norm_sf_quantile(p):
    """Upper-tail inverse: x with P(Z > x) = p."""
    parr = np.asarray(p, dtype=float)
    if np.any(parr <= 0.0) or np.any(parr >= 1.0):
        raise ValueError("norm_sf_quantile requires p in the open interval (0, 1)")
    out = -special.ndtri(parr)
    return float(out) if parr.ndim == 0 else out


def newton_raphson(f, fprime, x0, cfg: SolverConfig | None = None):
    """Scalar Newton-Raphson.

    Returns x with |f(x)| <= cfg.abs_tolerance.  Raises
    SingularDerivativeError when the derivative collapses and
    NonConvergenceError at the iteration cap; callers fall back to
    grid_search_root in that case.
    """
    cfg = cfg or SolverConfig()
    x = float(x0)
    for _ in range(cfg.max_iterations):
        fx = f(x)
        if abs(fx) <= cfg.abs_tolerance:
            return x
        dfx = fprime(x)
        if not np.isfinite(dfx) or abs(dfx) < 1e-300:
            raise SingularDerivativeError(f"derivative {dfx!r} at x={x!r}")
        step = fx / dfx
        x_new = x - step
        if not np.isfinite(x_new):
            raise NonConvergenceError(f"diverged at x={x!r}")
        if abs(x_new - x) <= cfg.step_tolerance and abs(f(x_new)) <= cfg.abs_tolerance:
            return x_new
        x = x_new
    if abs(f(x)) <= cfg.abs_tolerance:
        return x
    raise NonConvergenceError(f"no convergence in {cfg.max_iterations} iterations")


def grid_search_root(f, grid):
    """Grid point minimizing |f|; ties break to the smallest grid value."""
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ValueError("grid must be nonempty")
    if grid.size > 1 and np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly increasing")
    vals = np.abs([f(g) for g in grid])
    return float(grid[int(np.argmin(vals))])


def brent_root(f, lo, hi, cfg: SolverConfig | None = None):
    """Bracketed root via Brent's algorithm; requires f(lo)*f(hi) <= 0."""
    cfg = cfg or SolverConfig()
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return float(lo)
    if fhi == 0.0:
        return float(hi)
    if flo * fhi > 0.0:
        raise BracketError(f"no sign change on [{lo}, {hi}]")
    root = optimize.brentq(
        f, lo, hi, xtol=cfg.step_tolerance, maxiter=max(cfg.max_iterations, 100)
    )
    if abs(f(root)) > cfg.abs_tolerance and abs(f(root)) > 1e-8 * (abs(flo) + abs(fhi)):
        raise NonConvergenceError(f"|f| = {abs(f(root))} above tolerance at root")
    return float(root)


# ---------------------------------------------------------------------------
# Natural cubic smoothing spline with effective-degrees-of-freedom selection.
# Reinsch form: fitted = (I + penalty*K)^-1 y with K = Q R^-1 Q^T; the trace
# of the smoother matrix is the effective df, bisected to the requested value.
# ---------------------------------------------------------------------------


@dataclass
class SplineFit:
    """Fitted natural cubic smoothing spline.

    Piecewise cubic between knots, continuous first and second derivatives
    at interior knots, linear extrapolation beyond the boundary knots.
    """

    knots: np.ndarray
    values: np.ndarray
    second_derivs: np.ndarray
    coefficients: np.ndarray  # (n-1, 4) per-segment cubic coefficients
    penalty: float
    effective_df: float

    def predict(self, x):
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 0
        x = np.atleast_1d(x)
        t, g, m = self.knots, self.values, self.second_derivs
        n = t.size
        idx = np.clip(np.searchsorted(t, x) - 1, 0, n - 2)
        h = t[idx + 1] - t[idx]
        lo, hi = t[idx], t[idx + 1]
        out = (
            m[idx] * (hi - x) ** 3 / (6 * h)
            + m[idx + 1] * (x - lo) ** 3 / (6 * h)
            + (g[idx] / h - m[idx] * h / 6) * (hi - x)
            + (g[idx + 1] / h - m[idx + 1] * h / 6) * (x - lo)
        )
        # natural spline is linear outside the boundary knots
        left = x < t[0]
        if np.any(left):
            s0 = (g[1] - g[0]) / (t[1] - t[0]) - (t[1] - t[0]) * m[1] / 6
            out[left] = g[0] + s0 * (x[left] - t[0])
        right = x > t[-1]
        if np.any(right):
            hn = t[-1] - t[-2]
            s1 = (g[-1] - g[-2]) / hn + hn * m[-2] / 6
            out[right] = g[-1] + s1 * (x[right] - t[-1])
        return float(out[0]) if scalar else out

    def __call__(self, x):
        return self.predict(x)


def _spline_matrices(x):
    n = x.size
    h = np.diff(x)
    q = np.zeros((n, n - 2))
    r = np.zeros((n - 2, n - 2))
    for j in range(1, n - 1):
        c = j - 1
        q[j - 1, c] = 1.0 / h[j - 1]
        q[j, c] = -1.0 / h[j - 1] - 1.0 / h[j]
        q[j + 1, c] = 1.0 / h[j]
        r[c, c] = (h[j - 1] + h[j]) / 3.0
        if j < n - 2:
            r[c, c + 1] = h[j] / 6.0
            r[c + 1, c] = h[j] / 6.0
    return q, r


def fit_smoothing_spline(x, y, effective_df):
    """Penalized least-squares cubic spline with tr(smoother) = effective_df.

    The penalty is solved by bisection so the achieved effective df matches
    the request within 1e-3; effective_df = n reproduces the interpolating
    natural spline exactly.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = x.size
    if n < 4:
        raise ValueError("need at least four points to fit the cubic spline")
    if y.size != n:
        raise ValueError("x and y must have equal length")
    if np.any(np.diff(x) <= 0):
        raise ValueError("x must be strictly increasing")
    if not 1.0 < effective_df <= n:
        raise ValueError("effective_df must lie in (1, n]")

    q, r = _spline_matrices(x)
    k = q @ np.linalg.solve(r, q.T)
    eye = np.eye(n)

    def df_at(lam):
        return float(np.trace(np.linalg.inv(eye + lam * k)))

    if effective_df >= n - 1e-9:
        lam = 0.0
    else:
        lo, hi = 1e-12, 1.0
        while df_at(hi) > effective_df and hi < 1e14:
            hi *= 10.0
        while df_at(lo) < effective_df and lo > 1e-16:
            lo /= 10.0
        # df decreases in lam; df(inf) = 2, so clamp requests at the floor
        if df_at(hi) > effective_df:
            lam = hi
        elif df_at(lo) < effective_df:
            lam = lo
        else:
            for _ in range(200):
                mid = np.sqrt(lo * hi)
                if df_at(mid) > effective_df:
                    lo = mid
                else:
                    hi = mid
                if abs(df_at(mid) - effective_df) <= 1e-4:
                    break
            lam = np.sqrt(lo * hi)

    g = np.linalg.solve(eye + lam * k, y) if lam > 0 else y.copy()
    gamma = np.linalg.solve(r, q.T @ g)
    m = np.zeros(n)
    m[1:-1] = gamma

    h = np.diff(x)
    coef = np.empty((n - 1, 4))
    for i in range(n - 1):
        # expand the value/second-derivative form into local cubic coefficients
        coef[i, 0] = g[i]
        coef[i, 1] = (g[i + 1] - g[i]) / h[i] - h[i] * (2 * m[i] + m[i + 1]) / 6
        coef[i, 2] = m[i] / 2
        coef[i, 3] = (m[i + 1] - m[i]) / (6 * h[i])

    return SplineFit(
        knots=x.copy(),
        values=g,
        second_derivs=m,
        coefficients=coef,
        penalty=float(lam),
        effective_df=df_at(lam) if lam > 0 else float(n),
    )


def box_cox_transform(y, lam):
    """Power transform (y^lam - 1)/lam, log y at lam = 0."""
    y = np.asarray(y, dtype=float)
    if np.any(y <= 0):
        raise ValueError("Box-Cox requires strictly positive data")
    if lam == 0.0:
        return np.log(y)
    return (np.power(y, lam) - 1.0) / lam


def box_cox(y):
    """Profile-likelihood Box-Cox fit over lambda in [-2, 2] step 0.01.

    Returns (transformed vector, lambda_hat).
    """
    y = np.asarray(y, dtype=float)
    if np.any(y <= 0):
        raise ValueError("Box-Cox requires strictly positive data")
    if y.size < 2 or np.var(y) == 0.0:
        raise ValueError("Box-Cox is degenerate on constant data")
    n = y.size
    logy = np.log(y)
    sum_logy = logy.sum()
    lambdas = np.round(np.arange(-2.0, 2.0 + 1e-9, 0.01), 10)
    best_lam, best_ll = 0.0, -np.inf
    for lam in lambdas:
        z = logy if lam == 0.0 else (np.exp(lam * logy) - 1.0) / lam
        var = z.var()
        if var <= 0 or not np.isfinite(var):
            continue
        ll = -0.5 * n * np.log(var) + (lam - 1.0) * sum_logy
        if ll > best_ll:
            best_ll, best_lam = ll, float(lam)
    return box_cox_transform(y, best_lam), best_lam
