"""Built-in problem instances with analytically certified constants.

Two families cover the test surface: a fully analytic convex quadratic
split (closed-form dynamics, exact rate constants) and a separable
double-well objective whose splittings share the objective but induce
different metrics.  A third constructor shifts an existing decomposition
by a convex quadratic, changing the geometry while leaving the objective
untouched.
"""

from __future__ import annotations

import numpy as np

from .core import Box, DcProblem

__all__ = [
    "make_double_well",
    "make_quadratic",
    "make_shifted_decomposition",
]

_SYM_TOL = 1e-10
_PSD_TOL = 1e-10


def _check_symmetric(m: np.ndarray, name: str) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"{name} must be a square matrix")
    scale = max(1.0, float(np.abs(m).max()))
    if float(np.abs(m - m.T).max()) > _SYM_TOL * scale:
        raise ValueError(f"{name} must be symmetric")
    return 0.5 * (m + m.T)


def _quadratic_sigma(a: np.ndarray, c: np.ndarray) -> float | None:
    """Smallest positive generalized eigenvalue of the pencil (c, a).

    This is the sharp metric PL constant of ``f(x) = x'cx/2`` under the
    metric ``a``: reduce to the symmetric form ``c^{1/2} a^{-1} c^{1/2}``
    restricted to the range of ``c``.
    """
    w, u = np.linalg.eigh(c)
    keep = w > 1e-12 * max(float(w[-1]), 1e-300)
    if not np.any(keep):
        return None
    basis = u[:, keep] * np.sqrt(w[keep])
    reduced = basis.T @ np.linalg.solve(a, basis)
    reduced = 0.5 * (reduced + reduced.T)
    return float(np.linalg.eigvalsh(reduced)[0])


def make_quadratic(a, b, region_half_width: float = 2.0) -> DcProblem:
    """Problem with ``g(x) = x'ax/2`` and ``h(x) = x'bx/2``.

    Requires ``a`` symmetric positive definite, ``b`` symmetric positive
    semidefinite and ``a - b`` positive semidefinite, so the objective
    ``f(x) = x'(a-b)x/2`` is convex with minimum 0 at the origin.  All
    rate constants are exact: ``mu`` and ``lg`` are the eigenvalue
    extremes of ``a`` and ``sigma`` comes from the generalized
    eigenproblem of ``a - b`` against ``a``.
    """
    a = _check_symmetric(a, "a")
    b = _check_symmetric(b, "b")
    if a.shape != b.shape:
        raise ValueError("a and b must have the same shape")
    n = a.shape[0]

    a_eigs = np.linalg.eigvalsh(a)
    if a_eigs[0] <= 0.0:
        raise ValueError("a must be positive definite")
    b_eigs = np.linalg.eigvalsh(b)
    if b_eigs[0] < -_PSD_TOL * max(1.0, float(b_eigs[-1])):
        raise ValueError("b must be positive semidefinite")
    c = a - b
    c_eigs = np.linalg.eigvalsh(c)
    if c_eigs[0] < -_PSD_TOL * max(1.0, float(abs(c_eigs[-1]))):
        raise ValueError("a - b must be positive semidefinite")

    a_loc = a.copy()
    b_loc = b.copy()

    return DcProblem(
        dim=n,
        g_value=lambda x: 0.5 * float(x @ (a_loc @ x)),
        h_value=lambda x: 0.5 * float(x @ (b_loc @ x)),
        g_grad=lambda x: a_loc @ x,
        h_grad=lambda x: b_loc @ x,
        g_hess=lambda x: a_loc.copy(),
        h_hess=lambda x: b_loc.copy(),
        mu=float(a_eigs[0]),
        region=Box.cube(region_half_width, n),
        lg=float(a_eigs[-1]),
        f_star=0.0,
        sigma=_quadratic_sigma(a_loc, c),
        minimizer=np.zeros(n),
        label=f"quadratic(n={n})",
    )


def make_double_well(q, region_half_width: float = 2.0) -> DcProblem:
    """Separable double-well objective with a tunable convex split.

    The objective is ``f(x) = sum_i (x_i^4/4 - x_i^2/2)``, independent of
    ``q``.  The split is ``g(x) = sum_i x_i^4/4 + x'Qx/2`` and
    ``h(x) = x'(Q+I)x/2`` with ``Q = diag(q)``, so varying ``q`` changes
    the metric without changing the objective.  Critical points have
    coordinates in {-1, 0, 1}; the minima are the sign patterns of ones
    with value ``-n/4``.
    """
    q = np.atleast_1d(np.asarray(q, dtype=float))
    if q.ndim != 1:
        raise ValueError("q must be a vector")
    if np.any(q <= 0.0):
        raise ValueError("all entries of q must be positive")
    n = q.size
    w = float(region_half_width)

    return DcProblem(
        dim=n,
        g_value=lambda x: float(0.25 * np.sum(x**4) + 0.5 * (x @ (q * x))),
        h_value=lambda x: float(0.5 * (x @ ((q + 1.0) * x))),
        g_grad=lambda x: x**3 + q * x,
        h_grad=lambda x: (q + 1.0) * x,
        g_hess=lambda x: np.diag(3.0 * x**2 + q),
        h_hess=lambda x: np.diag(q + 1.0),
        mu=float(q.min()),
        region=Box.cube(w, n),
        lg=float(3.0 * w * w + q.max()),
        f_star=-0.25 * n,
        minimizer=np.ones(n),
        label=f"double_well(q={q.tolist()})",
    )


def make_shifted_decomposition(p: DcProblem, phi_hess_diag) -> DcProblem:
    """Add the convex quadratic ``x'diag(d)x/2`` to both parts of a split.

    The objective is unchanged pointwise (the added terms cancel), but the
    metric gains ``diag(d)``, so the dynamics and every rate constant tied
    to the metric change.  Certified ``sigma`` is dropped because it
    belongs to the original metric.
    """
    d = np.atleast_1d(np.asarray(phi_hess_diag, dtype=float))
    if d.ndim != 1 or d.size != p.dim:
        raise ValueError(f"phi_hess_diag must be a vector of length {p.dim}")
    if np.any(d < 0.0):
        raise ValueError("phi_hess_diag entries must be nonnegative")

    g_value, h_value = p.g_value, p.h_value
    g_grad, h_grad = p.g_grad, p.h_grad
    g_hess, h_hess = p.g_hess, p.h_hess
    d_mat = np.diag(d)

    return DcProblem(
        dim=p.dim,
        g_value=lambda x: float(g_value(x) + 0.5 * (x @ (d * x))),
        h_value=lambda x: float(h_value(x) + 0.5 * (x @ (d * x))),
        g_grad=lambda x: np.asarray(g_grad(x), dtype=float) + d * x,
        h_grad=lambda x: np.asarray(h_grad(x), dtype=float) + d * x,
        g_hess=lambda x: np.asarray(g_hess(x), dtype=float) + d_mat,
        h_hess=lambda x: np.asarray(h_hess(x), dtype=float) + d_mat,
        mu=float(p.mu + d.min()),
        region=p.region,
        lg=None if p.lg is None else float(p.lg + d.max()),
        f_star=p.f_star,
        sigma=None,
        minimizer=p.minimizer,
        label=p.label + f"+shift(d={d.tolist()})",
    )
