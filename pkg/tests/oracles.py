"""Independent reference computations used to freeze expected values.

Nothing here imports ergodicity_lab: each oracle rebuilds the 1-D stencil
from raw coefficient arrays so that it cannot share a bug with the code it
checks.
"""

import itertools

import numpy as np


def rates_1d(a, b, h):
    """Jump rates (left, right) of the upwind chain for 1-D coefficients."""
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    right = a / h**2 + np.maximum(b, 0.0) / h
    left = a / h**2 + np.maximum(-b, 0.0) / h
    return left, right


def value_iteration_1d(a, b, L, lam, tol=1e-15, max_iter=2_000_000):
    """Discounted fixed point by uniformized value iteration.

    ``a``, ``b``, ``L`` have shape (n_points, n_controls).
    """
    n, k = L.shape
    h = 1.0 / n
    left, right = rates_1d(a, b, h)
    total = left + right
    big = total.max() + 1.0
    v = np.zeros(n)
    for _ in range(max_iter):
        vl = np.roll(v, 1)[:, None]
        vr = np.roll(v, -1)[:, None]
        q = (L + left * vl + right * vr + (big - total) * v[:, None]) / (lam + big)
        new = q.min(axis=1)
        if np.max(np.abs(new - v)) < tol * max(1.0, np.max(np.abs(new))):
            return new
        v = new
    raise RuntimeError("value iteration did not converge")


def cesaro_min_cost_1d(a, b, L):
    """Minimum long-run average cost over all deterministic stationary policies.

    Enumerates every policy, builds the uniformized transition matrix and
    raises it to a large power by repeated squaring (self-loops make the
    chain aperiodic so the power converges to the Cesaro limit).
    """
    n, k = L.shape
    h = 1.0 / n
    left, right = rates_1d(a, b, h)
    best = np.inf
    for pol in itertools.product(range(k), repeat=n):
        idx = np.arange(n)
        pol = np.asarray(pol)
        lr, rr = left[idx, pol], right[idx, pol]
        big = 2.0 * (lr + rr).max() + 1.0
        P = np.eye(n) * (1.0 - (lr + rr) / big)
        P[idx, (idx - 1) % n] += lr / big
        P[idx, (idx + 1) % n] += rr / big
        for _ in range(60):
            P = P @ P
            P /= P.sum(axis=1, keepdims=True)
        avg = P @ L[idx, pol]
        best = min(best, avg.min())
    return best


def shortest_path_limit_eikonal_1d(f):
    """Vanishing-discount limit for the 1-D eikonal problem with zero rest cost at 0.

    Moving one cell costs h times the running cost of the cell being left;
    the limit is the cheaper of the two directions to reach index 0.
    """
    f = np.asarray(f, float)
    n = f.size
    h = 1.0 / n
    out = np.zeros(n)
    for i in range(1, n):
        going_left = h * f[1 : i + 1].sum()
        going_right = h * f[i:].sum()
        out[i] = min(going_left, going_right)
    return out


def principal_eigenvalue_inverse_power(diffusion, f, tol=1e-14, max_iter=10_000):
    """Smallest eigenvalue of -2*diffusion**2 * D2_h + diag(f) on the periodic grid."""
    f = np.asarray(f, float)
    n = f.size
    h = 1.0 / n
    coef = 2.0 * diffusion**2 / h**2
    M = np.diag(2.0 * coef + f)
    for i in range(n):
        M[i, (i - 1) % n] -= coef
        M[i, (i + 1) % n] -= coef
    shift = f.min() - 1.0
    A = M - shift * np.eye(n)
    phi = np.ones(n)
    mu = np.inf
    for _ in range(max_iter):
        nxt = np.linalg.solve(A, phi)
        nxt /= np.linalg.norm(nxt)
        new_mu = nxt @ M @ nxt
        if abs(new_mu - mu) < tol:
            return new_mu, nxt
        phi, mu = nxt, new_mu
    return mu, phi


def vertex_enumeration(A, rhs, cost, tol=1e-9):
    """Minimum of cost @ x over Ax = rhs, x >= 0 by enumerating bases.

    A must have full row rank.  Returns +inf when no basic feasible solution
    exists.  Boundedness is the caller's job (construct dual-feasible costs).
    """
    m, n = A.shape
    combos = np.array(list(itertools.combinations(range(n), m)))
    subs = np.transpose(A[:, combos], (1, 0, 2))
    ok = np.abs(np.linalg.det(subs)) > 1e-10
    combos, subs = combos[ok], subs[ok]
    xb = np.linalg.solve(subs, np.broadcast_to(rhs, (len(subs), m))[..., None])[..., 0]
    resid = np.abs(np.einsum("kij,kj->ki", subs, xb) - rhs).max(axis=1)
    feas = (xb.min(axis=1) >= -tol) & (resid <= 1e-8)
    if not feas.any():
        return np.inf
    vals = np.einsum("kj,kj->k", cost[combos[feas]], xb[feas])
    return float(vals.min())
