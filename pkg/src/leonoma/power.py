"""SINR/rate evaluation and the two NOMA power solvers.

Users in a :class:`CellInstance` are indexed in descending effective-gain
order. Interference follows the printed successive-interference model: user i
hears users j < i at full strength and users j > i scaled by the residual
cancellation factor kappa; the ``conventional_sic`` switch flips the
direction for sensitivity checks.

Two solvers are provided:

* ``monotonic_power_solve`` treats each rate as a difference of increasing
  log terms (xi+ - xi-) and alternates linearization of the concave xi- part
  with a projected-gradient inner solve over the power simplex.
* ``expcone_power_solve`` optimizes the rate vector directly under the
  sum-of-exponentials power-budget constraint obtained by collapsing the
  NOMA power cascade; powers are recovered through the cascade.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize


def _quiet_minimize(*args, **kwargs):
    """scipy SLSQP emits clip-to-bounds RuntimeWarnings in normal operation."""
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", category=RuntimeWarning)
        return minimize(*args, **kwargs)

LN2 = math.log(2.0)


class InfeasibleError(RuntimeError):
    """Minimum-rate requirement cannot be met within the power budget."""

    def __init__(self, user_index: int, message: str):
        super().__init__(message)
        self.user_index = user_index


class UnsupportedModeError(RuntimeError):
    """Solver invoked in a mode it cannot handle (e.g. ipSIC cascade)."""


@dataclass(frozen=True)
class CellInstance:
    """One cell's power-allocation problem with beams fixed.

    cross_gains[i, j] = |h_i^H v_j|^2 for unit-norm beam directions v_j;
    the diagonal holds the users' effective gains.
    """

    cross_gains: np.ndarray     # (N, N), users in descending-gain order
    demands_bps: np.ndarray     # (N,)
    bandwidth_hz: float
    noise_w: float
    budget_w: float
    r_min_bps: float
    kappa: float = 0.0
    mu: int = 1
    conventional_sic: bool = False
    # optional per-user objective weights, e.g. 1/D_i^2 for the ratio scheme
    weights: np.ndarray | None = None

    @property
    def n_users(self) -> int:
        return self.cross_gains.shape[0]

    @property
    def weight_vec(self) -> np.ndarray:
        if self.weights is None:
            return np.ones(self.n_users)
        return np.asarray(self.weights, dtype=float)

    @property
    def gains(self) -> np.ndarray:
        return np.diag(self.cross_gains)

    def interference_weights(self) -> np.ndarray:
        """Coefficient matrix W with I = W @ p."""
        n = self.n_users
        g = np.asarray(self.cross_gains, dtype=float)
        lower = np.tril(np.ones((n, n)), k=-1)   # j < i
        upper = np.triu(np.ones((n, n)), k=1)    # j > i
        if self.conventional_sic:
            lower, upper = upper, lower
        return g * (lower + self.kappa * upper)


@dataclass
class PowerAllocation:
    p: np.ndarray
    rates_bps: np.ndarray
    aux_margin: float | None = None   # monotonic solver's auxiliary variable
    converged: bool = True
    objective: float = 0.0
    iterations: int = 0


# -- rate evaluation --------------------------------------------------------


def sinr(instance: CellInstance, p: np.ndarray) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if np.any(p < 0):
        raise ValueError("powers must be nonnegative")
    signal = instance.gains * p
    interference = instance.interference_weights() @ p
    return signal / (interference + instance.noise_w)


def achievable_rate(gamma: np.ndarray, bandwidth_hz: float, mu: int = 1) -> np.ndarray:
    return mu * bandwidth_hz * np.log2(1.0 + np.asarray(gamma, dtype=float))


def rates_for(instance: CellInstance, p: np.ndarray) -> np.ndarray:
    return achievable_rate(sinr(instance, p), instance.bandwidth_hz, instance.mu)


def gap_objective(instance: CellInstance, p: np.ndarray) -> float:
    r = rates_for(instance, p)
    return float(np.sum(instance.weight_vec * (r - instance.demands_bps) ** 2))


def xi_decompose(instance: CellInstance, p: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """xi+ = B log2(sigma^2 + S + I), xi- = B log2(sigma^2 + I); xi+ - xi- = R."""
    p = np.asarray(p, dtype=float)
    signal = instance.gains * p
    interference = instance.interference_weights() @ p
    b = instance.bandwidth_hz
    xi_plus = b * np.log2(instance.noise_w + signal + interference)
    xi_minus = b * np.log2(instance.noise_w + interference)
    return xi_plus, xi_minus


# -- exponential-cone cascade ----------------------------------------------


def cascade_powers(rates_bps: np.ndarray, gains: np.ndarray, noise_w: float, bandwidth_hz: float) -> np.ndarray:
    """NOMA power recursion: p_i = (2^(R_i/B) - 1) (sum_{j<i} p_j + sigma^2/g_i)."""
    rates = np.asarray(rates_bps, dtype=float)
    g = np.asarray(gains, dtype=float)
    if np.any(np.diff(g) > 1e-12 * g[:-1]):
        raise ValueError("gains must be ordered descending")
    if np.any(g <= 0):
        raise ValueError("gains must be strictly positive")
    if np.any(rates < 0):
        raise ValueError("rates must be nonnegative")
    p = np.zeros_like(rates)
    acc = 0.0
    for i in range(rates.shape[0]):
        p[i] = (2.0 ** (rates[i] / bandwidth_hz) - 1.0) * (acc + noise_w / g[i])
        acc += p[i]
    return p


def cascade_budget_lhs(rates_bps: np.ndarray, gains: np.ndarray, noise_w: float, bandwidth_hz: float) -> float:
    """Collapsed form of the cascade total power as a sum of exponentials in the rates."""
    rates = np.asarray(rates_bps, dtype=float)
    g = np.asarray(gains, dtype=float)
    inv = noise_w / g
    coeff = inv - np.concatenate(([0.0], inv[:-1]))   # sigma^2/g_0 := 0
    tail = np.cumsum(rates[::-1])[::-1]               # sum_{i_hat >= i} R_i_hat
    return float(np.sum(coeff * 2.0 ** (tail / bandwidth_hz)) - inv[-1])


def _polish_rate_point(r, d, wv, r_lo, r_hi, budget, lhs, lhs_grad):
    """Sequential-quadratic refinement of a feasible rate vector.

    The ray-style projection used by the gradient loop cannot slide along the
    budget boundary when users have very different power costs; this local
    solve fixes that. Returns the candidate only if it is feasible and better.
    """
    scale = max(float(np.max(r_hi)), 1.0)

    def f(x):
        return float(np.sum(wv * (x * scale - d) ** 2)) / scale**2

    def fgrad(x):
        return 2.0 * wv * (x * scale - d) / scale

    def c(x):
        return np.array([1.0 - lhs(x * scale) / budget])

    def cgrad(x):
        return -lhs_grad(x * scale)[None, :] * (scale / budget)

    res = _quiet_minimize(
        f, r / scale, jac=fgrad, method="SLSQP",
        bounds=list(zip(r_lo / scale, r_hi / scale)),
        constraints=[{"type": "ineq", "fun": c, "jac": cgrad}],
        options={"maxiter": 200, "ftol": 1e-14},
    )
    cand = np.clip(res.x * scale, r_lo, r_hi)
    if lhs(cand) > budget:
        # back off toward the r_min corner until strictly within budget
        t_lo, t_hi = 0.0, 1.0
        for _ in range(80):
            t = 0.5 * (t_lo + t_hi)
            if lhs(r_lo + t * (cand - r_lo)) <= budget:
                t_lo = t
            else:
                t_hi = t
        cand = r_lo + t_lo * (cand - r_lo)
    f_cand = float(np.sum(wv * (cand - d) ** 2))
    f_cur = float(np.sum(wv * (r - d) ** 2))
    if f_cand < f_cur:
        return cand, f_cand
    return r, f_cur


def expcone_power_solve(instance: CellInstance) -> PowerAllocation:
    """Minimize sum (R_i - D_i)^2 over r_min <= R_i <= D_i under the cascade budget.

    Projected gradient on the rate vector; infeasible iterates are pulled back
    to the budget boundary by bisection toward the r_min corner. Residual-SIC
    instances are rejected: the cascade cannot express kappa > 0.
    """
    if instance.kappa != 0.0:
        raise UnsupportedModeError("exponential-cone cascade requires kappa = 0")
    if instance.mu == 0:
        n = instance.n_users
        return PowerAllocation(
            p=np.zeros(n),
            rates_bps=np.zeros(n),
            objective=float(np.sum(instance.weight_vec * instance.demands_bps**2)),
        )

    wv = instance.weight_vec
    g = instance.gains.copy()
    d = np.asarray(instance.demands_bps, dtype=float)
    b = instance.bandwidth_hz
    sigma2 = instance.noise_w
    budget = instance.budget_w
    r_lo = np.full_like(d, instance.r_min_bps)
    r_hi = np.maximum(d, r_lo)

    def lhs(r):
        return cascade_budget_lhs(r, g, sigma2, b)

    if lhs(r_lo) > budget:
        p_min = cascade_powers(r_lo, g, sigma2, b)
        over = int(np.argmax(np.cumsum(p_min) > budget))
        raise InfeasibleError(over, f"minimum rate infeasible: user {over} exceeds the power budget")

    if lhs(r_hi) <= budget:
        p = cascade_powers(r_hi, g, sigma2, b)
        return PowerAllocation(p=p, rates_bps=r_hi, objective=float(np.sum(wv * (r_hi - d) ** 2)))

    def pull_back(r):
        """Bisect t in [0,1] on r_lo + t (r - r_lo) to the budget boundary."""
        t_lo, t_hi = 0.0, 1.0
        for _ in range(80):
            t = 0.5 * (t_lo + t_hi)
            if lhs(r_lo + t * (r - r_lo)) <= budget:
                t_lo = t
            else:
                t_hi = t
        return r_lo + t_lo * (r - r_lo)

    tol = 1e-8  # driven to the boundary; keep tighter than solver_params default
    r = pull_back(r_hi)
    f = float(np.sum(wv * (r - d) ** 2))
    f_prev = f
    step = float(np.max(r_hi - r_lo)) or 1.0
    iters = 0
    for iters in range(1, 801):
        grad = 2.0 * wv * (r - d)
        gnorm = np.linalg.norm(grad)
        if gnorm == 0.0:
            break
        improved = False
        s = step
        for _ in range(40):
            cand = np.clip(r - s * grad / gnorm, r_lo, r_hi)
            if lhs(cand) > budget:
                cand = pull_back(cand)
            f_cand = float(np.sum(wv * (cand - d) ** 2))
            if f_cand < f - 1e-18:
                r, f = cand, f_cand
                step = s * 1.5
                improved = True
                break
            s *= 0.5
        if not improved:
            break
        if f == 0.0 or abs(f_prev - f) <= tol * max(f, 1.0):
            break
        f_prev = f

    def lhs_grad(rr):
        inv = sigma2 / g
        coeff = inv - np.concatenate(([0.0], inv[:-1]))
        tail = np.cumsum(rr[::-1])[::-1]
        e = coeff * (LN2 / b) * 2.0 ** (tail / b)
        return np.cumsum(e)

    r, f = _polish_rate_point(r, d, wv, r_lo, r_hi, budget, lhs, lhs_grad)
    p = cascade_powers(r, g, sigma2, b)
    return PowerAllocation(p=p, rates_bps=r, objective=f, iterations=iters)


# -- monotonic (difference-of-increasing) solver ----------------------------


def _project_simplex_cap(p: np.ndarray, budget: float) -> np.ndarray:
    """Euclidean projection onto {p >= 0, sum p <= budget}."""
    q = np.maximum(p, 0.0)
    s = q.sum()
    if s <= budget:
        return q
    u = np.sort(q)[::-1]
    css = np.cumsum(u)
    idx = np.arange(1, len(q) + 1)
    cond = u - (css - budget) / idx > 0
    rho = idx[cond][-1]
    theta = (css[rho - 1] - budget) / rho
    return np.maximum(q - theta, 0.0)


def _rate_check_feasibility(instance: CellInstance) -> None:
    g = instance.gains
    b = instance.bandwidth_hz
    solo = b * np.log2(1.0 + g * instance.budget_w / instance.noise_w)
    bad = np.where(solo < instance.r_min_bps)[0]
    if bad.size:
        raise InfeasibleError(
            int(bad[0]),
            f"minimum rate infeasible: user {int(bad[0])} cannot reach r_min even with the full budget",
        )
    p_min = cascade_powers(
        np.full(instance.n_users, instance.r_min_bps), g, instance.noise_w, b
    )
    cum = np.cumsum(p_min)
    if cum[-1] > instance.budget_w:
        over = int(np.argmax(cum > instance.budget_w))
        raise InfeasibleError(over, f"minimum rate infeasible: user {over} exceeds the power budget")


def _fixed_point_powers(
    instance: CellInstance, targets_bps: np.ndarray, budget_w: float, max_iters: int = 300
) -> np.ndarray | None:
    """Minimum powers achieving the target rates under the true coupling.

    Standard interference-function iteration: p <- F(p) with
    F_i(p) = (2^(R_i/B) - 1) (W p + sigma^2)_i / G_ii. Monotone and convergent
    whenever the targets are jointly achievable; returns None on divergence.
    """
    w = instance.interference_weights()
    gdiag = instance.gains
    factor = (2.0 ** (np.asarray(targets_bps, dtype=float) / instance.bandwidth_hz) - 1.0)
    p = np.zeros(instance.n_users)
    for _ in range(max_iters):
        p_new = factor * (w @ p + instance.noise_w) / gdiag
        if not np.all(np.isfinite(p_new)) or p_new.sum() > 1e6 * max(budget_w, 1.0):
            return None
        if np.allclose(p_new, p, rtol=1e-12, atol=1e-300):
            return p_new
        p = p_new
    return p


def _target_tracking_start(instance: CellInstance, d: np.ndarray, budget: float) -> np.ndarray:
    """Feasible warm start: scale the demand vector down until its
    fixed-point power fits the budget."""
    n = instance.n_users
    p_full = _fixed_point_powers(instance, d, budget)
    if p_full is not None and p_full.sum() <= budget:
        return np.maximum(p_full, 1e-18 * budget)
    r_base = np.full(n, min(instance.r_min_bps, float(d.min())))
    lo, hi = 0.0, 1.0
    best = None
    for _ in range(40):
        mid = 0.5 * (lo + hi)
        p_mid = _fixed_point_powers(instance, r_base + mid * (d - r_base), budget)
        if p_mid is not None and p_mid.sum() <= budget:
            best, lo = p_mid, mid
        else:
            hi = mid
    if best is None:
        best = np.full(n, budget / n)
    return np.maximum(best, 1e-18 * budget)


def monotonic_power_solve(instance: CellInstance) -> PowerAllocation:
    """Difference-of-increasing-functions solve of the traffic-gap objective.

    Outer iterations linearize the concave xi- term at the incumbent; the
    inner convex surrogate is minimized by projected gradient with
    backtracking on the capped simplex. The best iterate by the true
    objective is retained, so the recorded objective is non-increasing.
    """
    n = instance.n_users
    if instance.mu == 0:
        return PowerAllocation(
            p=np.zeros(n),
            rates_bps=np.zeros(n),
            objective=float(np.sum(instance.weight_vec * instance.demands_bps**2)),
        )
    _rate_check_feasibility(instance)
    wv = instance.weight_vec

    d = np.asarray(instance.demands_bps, dtype=float)
    b = instance.bandwidth_hz
    sigma2 = instance.noise_w
    budget = instance.budget_w
    g = instance.gains
    w = instance.interference_weights()
    r_min = instance.r_min_bps
    penalty = 100.0

    def true_objective(p):
        r = rates_for(instance, p)
        short = np.maximum(r_min - r, 0.0)
        return float(np.sum(wv * (r - d) ** 2) + penalty * np.sum(short**2)), r

    # Warm start: power-control fixed point hitting the largest feasible
    # fraction of the demands under the true interference coupling.
    p = _target_tracking_start(instance, d, budget)

    f_best, _ = true_objective(p)
    p_best = p.copy()
    tol = 1e-9
    max_outer = 15
    inner_iters = 80
    total_iters = 0
    converged = False

    for outer in range(max_outer):
        # Linearize xi- at the incumbent: grad_minus[i, j] = d xi-_i / d p_j.
        interference = w @ p
        denom_minus = sigma2 + interference
        grad_minus = (b / LN2) * w / denom_minus[:, None]
        xi_minus_0 = b * np.log2(denom_minus)

        def surrogate(q):
            s_q = g * q
            i_q = w @ q
            xi_plus = b * np.log2(sigma2 + s_q + i_q)
            r_lin = xi_plus - (xi_minus_0 + grad_minus @ (q - p))
            short = np.maximum(r_min - r_lin, 0.0)
            val = float(np.sum(wv * (r_lin - d) ** 2) + penalty * np.sum(short**2))
            denom_plus = sigma2 + s_q + i_q
            coef = 2.0 * wv * (r_lin - d) - 2.0 * penalty * short
            grad_plus = (b / LN2) * (np.diag(g) + w) / denom_plus[:, None]
            grad = (grad_plus - grad_minus).T @ coef
            return val, grad

        q = p.copy()
        f_q, grad = surrogate(q)
        step = budget
        for _ in range(inner_iters):
            total_iters += 1
            gnorm = np.linalg.norm(grad)
            if gnorm == 0.0:
                break
            accepted = False
            s = step
            for _ in range(30):
                cand = _project_simplex_cap(q - s * grad / gnorm, budget)
                f_cand, grad_cand = surrogate(cand)
                if f_cand < f_q - 1e-18:
                    q, f_q, grad = cand, f_cand, grad_cand
                    step = s * 1.8
                    accepted = True
                    break
                s *= 0.5
            if not accepted:
                break

        f_true, _ = true_objective(q)
        if f_true < f_best - tol * max(f_best, 1.0):
            p_best, f_best = q.copy(), f_true
            p = q
        else:
            converged = True
            break

    p_best, f_best = _polish_power_point(instance, p_best, d, budget, penalty)

    rates = rates_for(instance, p_best)
    xi_plus_max, xi_minus_max = xi_decompose(instance, np.full(n, budget))
    _, xi_minus_p = xi_decompose(instance, p_best)
    aux = float(np.sum(xi_minus_max - xi_minus_p))
    return PowerAllocation(
        p=p_best,
        rates_bps=rates,
        aux_margin=aux,
        converged=converged,
        objective=float(np.sum(wv * (rates - d) ** 2)),
        iterations=total_iters,
    )


def _polish_power_point(
    instance: CellInstance, p: np.ndarray, d: np.ndarray, budget: float, penalty: float
) -> tuple[np.ndarray, float]:
    """Smooth local refinement of the true-gap objective over the power simplex."""
    g = instance.gains
    w = instance.interference_weights()
    wv = instance.weight_vec
    sigma2 = instance.noise_w
    b = instance.bandwidth_hz
    r_min = instance.r_min_bps
    f_scale = max(float(np.sum(wv * d**2)), 1.0)

    def value_and_grad(x):
        q = x * budget
        s_q = g * q
        i_q = w @ q
        dp = sigma2 + s_q + i_q
        dm = sigma2 + i_q
        r = b * np.log2(dp) - b * np.log2(dm)
        short = np.maximum(r_min - r, 0.0)
        val = float(np.sum(wv * (r - d) ** 2) + penalty * np.sum(short**2)) / f_scale
        jac = (b / LN2) * ((np.diag(g) + w) / dp[:, None] - w / dm[:, None])
        coef = 2.0 * wv * (r - d) - 2.0 * penalty * short
        return val, (jac.T @ coef) * budget / f_scale

    n = instance.n_users
    res = _quiet_minimize(
        lambda x: value_and_grad(x)[0],
        p / budget,
        jac=lambda x: value_and_grad(x)[1],
        method="SLSQP",
        bounds=[(0.0, 1.0)] * n,
        constraints=[{"type": "ineq",
                      "fun": lambda x: 1.0 - x.sum(),
                      "jac": lambda x: -np.ones(n)}],
        options={"maxiter": 200, "ftol": 1e-14},
    )
    cand = np.clip(res.x, 0.0, 1.0) * budget
    if cand.sum() > budget:
        cand *= budget / cand.sum()
    r_cand = rates_for(instance, cand)
    short = np.maximum(r_min - r_cand, 0.0)
    f_cand = float(np.sum(wv * (r_cand - d) ** 2) + penalty * np.sum(short**2))
    r_cur = rates_for(instance, p)
    short_cur = np.maximum(r_min - r_cur, 0.0)
    f_cur = float(np.sum(wv * (r_cur - d) ** 2) + penalty * np.sum(short_cur**2))
    if f_cand < f_cur:
        return cand, f_cand
    return p, f_cur


def equal_power_allocation(instance: CellInstance) -> PowerAllocation:
    n = instance.n_users
    if instance.mu == 0:
        return PowerAllocation(p=np.zeros(n), rates_bps=np.zeros(n),
                               objective=float(np.sum(instance.demands_bps**2)))
    p = np.full(n, instance.budget_w / n)
    rates = rates_for(instance, p)
    return PowerAllocation(p=p, rates_bps=rates,
                           objective=float(np.sum((rates - instance.demands_bps) ** 2)))


def invert_single_user_rate(rate_bps: float, gain: float, noise_w: float, bandwidth_hz: float) -> float:
    """Power achieving a target rate on an interference-free link."""
    return (2.0 ** (rate_bps / bandwidth_hz) - 1.0) * noise_w / gain


def oma_power_solve(
    gains: np.ndarray,
    demands_bps: np.ndarray,
    bandwidth_hz: float,
    noise_w: float,
    budget_w: float,
    r_min_bps: float,
    weights: np.ndarray | None = None,
) -> PowerAllocation:
    """Power split across interference-free orthogonal shares.

    Each user has its own bandwidth/noise slice, so p_i(R_i) is the
    single-user inversion and only the budget couples the users. Minimizes
    sum w_i (R_i - D_i)^2 over r_min <= R_i <= D_i by projected gradient
    with the same bisection pull-back as the NOMA cascade solver.
    """
    g = np.asarray(gains, dtype=float)
    d = np.asarray(demands_bps, dtype=float)
    wv = np.ones_like(d) if weights is None else np.asarray(weights, dtype=float)
    r_lo = np.full_like(d, r_min_bps)
    r_hi = np.maximum(d, r_lo)

    def powers(r):
        return (2.0 ** (r / bandwidth_hz) - 1.0) * noise_w / g

    def lhs(r):
        return float(powers(r).sum())

    if lhs(r_lo) > budget_w:
        cum = np.cumsum(powers(r_lo))
        over = int(np.argmax(cum > budget_w))
        raise InfeasibleError(over, f"minimum rate infeasible: user {over} exceeds the power budget")
    if lhs(r_hi) <= budget_w:
        return PowerAllocation(p=powers(r_hi), rates_bps=r_hi,
                               objective=float(np.sum(wv * (r_hi - d) ** 2)))

    def pull_back(r):
        t_lo, t_hi = 0.0, 1.0
        for _ in range(80):
            t = 0.5 * (t_lo + t_hi)
            if lhs(r_lo + t * (r - r_lo)) <= budget_w:
                t_lo = t
            else:
                t_hi = t
        return r_lo + t_lo * (r - r_lo)

    r = pull_back(r_hi)
    f = float(np.sum(wv * (r - d) ** 2))
    f_prev = f
    step = float(np.max(r_hi - r_lo)) or 1.0
    iters = 0
    for iters in range(1, 801):
        grad = 2.0 * wv * (r - d)
        gnorm = np.linalg.norm(grad)
        if gnorm == 0.0:
            break
        improved = False
        s = step
        for _ in range(40):
            cand = np.clip(r - s * grad / gnorm, r_lo, r_hi)
            if lhs(cand) > budget_w:
                cand = pull_back(cand)
            f_cand = float(np.sum(wv * (cand - d) ** 2))
            if f_cand < f - 1e-18:
                r, f = cand, f_cand
                step = s * 1.5
                improved = True
                break
            s *= 0.5
        if not improved:
            break
        if f == 0.0 or abs(f_prev - f) <= 1e-8 * max(f, 1.0):
            break
        f_prev = f

    def lhs_grad(rr):
        return (LN2 / bandwidth_hz) * (2.0 ** (rr / bandwidth_hz)) * noise_w / g

    r, f = _polish_rate_point(r, d, wv, r_lo, r_hi, budget_w, lhs, lhs_grad)
    return PowerAllocation(p=powers(r), rates_bps=r, objective=f, iterations=iters)
