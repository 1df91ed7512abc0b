"""Discrete Feynman-Kac solvers and the discrete Black-Scholes residual.

The forward functional discounts along the path with the rate at the left
endpoint and conditions on the first step; the backward functional
discounts with the rate indexed at the later time and conditions on the
last step. Both index conventions are kept exactly as stated, including
their asymmetry. General drift/volatility trees do not recombine and are
evaluated exactly up to a depth cap, with Monte Carlo beyond; declared
multiplicative-linear problems use the recombining lattice.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import CapExceededError
from .hedging import lattice_derivative
from .market import MarketLevel
from .pricing import Claim, price_explicit

DEFAULT_TREE_CAP = 22
DEFAULT_MC_SAMPLES = 1 << 16


@dataclass(frozen=True)
class FKForwardProblem:
    """Initial-condition functional: discount with r(S) at the left
    endpoints, payoff applied at the current time."""

    mu: Callable
    sigma: Callable
    rate: Callable
    payoff: Callable
    m: int

    @property
    def dt(self) -> float:
        return math.ldexp(1.0, -2 * self.m)

    @property
    def dx(self) -> float:
        return math.ldexp(1.0, -self.m)


@dataclass(frozen=True)
class FKBackwardProblem:
    """Terminal-condition functional on a possibly asymmetric walk.

    ``step_up``/``step_down`` are the positive magnitudes of the walk's up
    and down moves, taken with probabilities ``p_up``/``p_down``. When the
    one-step map is multiplicative (x -> x*factor), ``linear_factors``
    enables the recombining-lattice strategy; ``step_discount``, when set,
    replaces exp(-rho*dt) by its exact constant value.
    """

    mu: Callable
    sigma: Callable
    rho: Callable
    payoff: Callable
    step_up: float
    step_down: float
    p_up: float
    p_down: float
    m: int
    n_steps: int
    linear_factors: tuple[float, float] | None = None
    step_discount: float | None = None

    def __post_init__(self):
        if not 0.0 < self.p_up < 1.0 or abs(self.p_up + self.p_down - 1.0) \
                > 4e-16:
            raise ValueError("step probabilities must be in (0,1) and sum "
                             "to 1")

    @property
    def dt(self) -> float:
        return math.ldexp(1.0, -2 * self.m)


@dataclass(frozen=True)
class FKValue:
    """One evaluated functional value with the strategy that produced it."""

    value: float
    strategy: str
    std_error: float | None = None

    def __float__(self) -> float:
        return self.value


@dataclass
class FKSolution:
    """Reusable evaluator for a functional, with a pinned strategy.

    Wraps a forward or backward problem together with the evaluation
    strategy and its error mode: exact strategies report ``std_error``
    None, Monte Carlo reports the standard error per evaluation.
    """

    problem: "FKForwardProblem | FKBackwardProblem"
    strategy: str = "auto"
    tree_cap: int = DEFAULT_TREE_CAP
    mc_samples: int | None = None
    seed: int = 0

    def evaluate(self, k: int, x: float) -> FKValue:
        if isinstance(self.problem, FKForwardProblem):
            if self.strategy not in ("auto", "tree", "monte-carlo"):
                raise ValueError(
                    f"forward problems cannot use {self.strategy!r}")
            cap, samples = self.tree_cap, self.mc_samples
            if self.strategy == "monte-carlo":
                cap = -1
                samples = samples or DEFAULT_MC_SAMPLES
            return fk_forward_solve(self.problem, k, x, tree_cap=cap,
                                    mc_samples=samples, seed=self.seed)
        return fk_backward_solve(self.problem, k, x, strategy=self.strategy,
                                 tree_cap=self.tree_cap,
                                 mc_samples=self.mc_samples, seed=self.seed)

    def __call__(self, k: int, x: float) -> float:
        return self.evaluate(k, x).value


def _forward_tree(problem: FKForwardProblem, k: int, x: float) -> float:
    dt, dx = problem.dt, problem.dx
    layers = [np.array([x], dtype=np.float64)]
    for _ in range(k):
        cur = layers[-1]
        drifted = cur + np.asarray(problem.mu(cur)) * dt
        width = np.asarray(problem.sigma(cur)) * dx
        nxt = np.empty(2 * cur.size)
        nxt[0::2] = drifted + width
        nxt[1::2] = drifted - width
        layers.append(nxt)
    values = np.asarray(problem.payoff(layers[k]), dtype=np.float64)
    for j in range(k - 1, -1, -1):
        disc = np.exp(-np.asarray(problem.rate(layers[j]), dtype=np.float64)
                      * dt)
        values = 0.5 * disc * (values[0::2] + values[1::2])
    return float(values[0])


def _forward_mc(problem: FKForwardProblem, k: int, x: float, samples: int,
                seed: int) -> tuple[float, float]:
    rng = np.random.default_rng(seed)
    dt, dx = problem.dt, problem.dx
    state = np.full(samples, x, dtype=np.float64)
    log_disc = np.zeros(samples)
    for _ in range(k):
        log_disc -= np.asarray(problem.rate(state)) * dt
        signs = rng.integers(0, 2, size=samples) * 2 - 1
        state = (state + np.asarray(problem.mu(state)) * dt
                 + np.asarray(problem.sigma(state)) * dx * signs)
    draws = np.exp(log_disc) * np.asarray(problem.payoff(state),
                                          dtype=np.float64)
    return float(draws.mean()), float(draws.std(ddof=1)
                                      / math.sqrt(samples))


def fk_forward_solve(problem: FKForwardProblem, k: int, x: float,
                     tree_cap: int = DEFAULT_TREE_CAP,
                     mc_samples: int | None = None,
                     seed: int = 0) -> FKValue:
    """f(t_k, x) by exact tree up to ``tree_cap`` levels, else Monte Carlo.

    Satisfies f(t_{k+1}, x) = exp(-r(x) dt)/2 * (f(t_k, x+) + f(t_k, x-))
    with f(0, .) equal to the payoff.
    """
    if k < 0:
        raise ValueError("step index must be nonnegative")
    if k <= tree_cap:
        return FKValue(_forward_tree(problem, k, x), "tree")
    if mc_samples:
        value, err = _forward_mc(problem, k, x, mc_samples, seed)
        return FKValue(value, "monte-carlo", err)
    raise CapExceededError(
        f"depth {k} exceeds the exact-tree cap {tree_cap} and Monte Carlo "
        "is disabled")


def _backward_children(problem: FKBackwardProblem, t_next: float,
                       xs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    dt = problem.dt
    drift = xs + np.asarray(problem.mu(t_next, xs)) * dt
    vol = np.asarray(problem.sigma(t_next, xs))
    return drift + vol * problem.step_up, drift - vol * problem.step_down


def _step_discount(problem: FKBackwardProblem, t_next: float,
                   xs: np.ndarray) -> np.ndarray:
    if problem.step_discount is not None:
        return np.full(np.shape(xs), problem.step_discount)
    return np.exp(-np.asarray(problem.rho(t_next, xs), dtype=np.float64)
                  * problem.dt)


def _backward_tree(problem: FKBackwardProblem, k: int, x: float) -> float:
    dt = problem.dt
    depth = problem.n_steps - k
    layers = [np.array([x], dtype=np.float64)]
    for j in range(depth):
        cur = layers[-1]
        t_next = (k + j + 1) * dt
        up, down = _backward_children(problem, t_next, cur)
        nxt = np.empty(2 * cur.size)
        nxt[0::2] = up
        nxt[1::2] = down
        layers.append(nxt)
    values = np.asarray(problem.payoff(layers[depth]), dtype=np.float64)
    for j in range(depth - 1, -1, -1):
        t_next = (k + j + 1) * dt
        disc = _step_discount(problem, t_next, layers[j])
        values = disc * (problem.p_up * values[0::2]
                         + problem.p_down * values[1::2])
    return float(values[0])


def _backward_lattice(problem: FKBackwardProblem, k: int, x: float) -> float:
    f_up, f_down = problem.linear_factors
    dt = problem.dt
    depth = problem.n_steps - k
    i = np.arange(depth + 1)
    nodes = x * np.exp(i * math.log(f_up) + (depth - i) * math.log(f_down))
    values = np.asarray(problem.payoff(nodes), dtype=np.float64)
    for j in range(depth - 1, -1, -1):
        i = np.arange(j + 1)
        nodes = x * np.exp(i * math.log(f_up) + (j - i) * math.log(f_down))
        disc = _step_discount(problem, (k + j + 1) * dt, nodes)
        values = disc * (problem.p_up * values[1:]
                         + problem.p_down * values[:-1])
    return float(values[0])


def _backward_mc(problem: FKBackwardProblem, k: int, x: float, samples: int,
                 seed: int) -> tuple[float, float]:
    rng = np.random.default_rng(seed)
    dt = problem.dt
    state = np.full(samples, x, dtype=np.float64)
    log_disc = np.zeros(samples)
    for j in range(k, problem.n_steps):
        t_next = (j + 1) * dt
        log_disc += np.log(_step_discount(problem, t_next, state))
        up, down = _backward_children(problem, t_next, state)
        take_up = rng.random(samples) < problem.p_up
        state = np.where(take_up, up, down)
    draws = np.exp(log_disc) * np.asarray(problem.payoff(state),
                                          dtype=np.float64)
    return float(draws.mean()), float(draws.std(ddof=1)
                                      / math.sqrt(samples))


def fk_backward_solve(problem: FKBackwardProblem, k: int, x: float,
                      strategy: str = "auto",
                      tree_cap: int = DEFAULT_TREE_CAP,
                      mc_samples: int | None = None,
                      seed: int = 0) -> FKValue:
    """f(t_k, x) for the terminal-condition functional.

    Satisfies f(t_{k-1}, x) = disc * (p_up f(t_k, x+) + p_down f(t_k, x-))
    with f(T, .) equal to the payoff; unique by backward induction.
    """
    if not 0 <= k <= problem.n_steps:
        raise ValueError(f"step {k} outside 0..{problem.n_steps}")
    depth = problem.n_steps - k
    if strategy == "auto":
        if problem.linear_factors is not None:
            strategy = "lattice"
        elif depth <= tree_cap:
            strategy = "tree"
        elif mc_samples:
            strategy = "monte-carlo"
        else:
            raise CapExceededError(
                f"depth {depth} exceeds the exact-tree cap {tree_cap}, the "
                "problem is not declared linear, and Monte Carlo is "
                "disabled")
    if strategy == "lattice":
        if problem.linear_factors is None:
            raise ValueError("lattice strategy needs declared linear factors")
        return FKValue(_backward_lattice(problem, k, x), "lattice")
    if strategy == "tree":
        if depth > tree_cap:
            raise CapExceededError(
                f"depth {depth} exceeds the exact-tree cap {tree_cap}")
        return FKValue(_backward_tree(problem, k, x), "tree")
    if strategy == "monte-carlo":
        value, err = _backward_mc(problem, k, x,
                                  mc_samples or DEFAULT_MC_SAMPLES, seed)
        return FKValue(value, "monte-carlo", err)
    raise ValueError(f"unknown strategy {strategy!r}")


def fk_bs_specialize(level: MarketLevel, claim: Claim) -> FKBackwardProblem:
    """Risk-neutral pricing as a backward functional on this market level.

    Children are exactly x*up and x*down, probabilities are the risk-neutral
    ones, and the per-step discount is exactly 1/gross_rate; the solution
    then coincides with arbitrage-free lattice pricing.
    """
    params = level.params
    theta = (params.mu - params.r) / params.sigma
    rho_value = level.log_gross / level.dt
    return FKBackwardProblem(
        mu=lambda t, x: params.r * np.asarray(x),
        sigma=lambda t, x: params.sigma * np.asarray(x),
        rho=lambda t, x: np.full(np.shape(x), rho_value),
        payoff=claim.payoff,
        step_up=level.dx + theta * level.dt,
        step_down=level.dx - theta * level.dt,
        p_up=level.q_up,
        p_down=level.q_down,
        m=level.m,
        n_steps=level.n_steps,
        linear_factors=(level.up, level.down),
        step_discount=1.0 / level.gross_rate,
    )


def bs_residual(level: MarketLevel, claim: Claim, k: int, x: float) -> float:
    """Residual of the lattice price in the Black-Scholes operator.

    Uses the one-sided time quotient (f(t_k) - f(t_{k-1}))/dt and the exact
    lattice x-derivatives; O(2^-m) for claims with bounded third derivative.
    The claim must supply derivatives up to third order.
    """
    if k < 1:
        raise ValueError("residual needs k >= 1 for the time quotient")
    claim.derivative(3)  # enforce the smoothness contract
    params = level.params
    f_now = price_explicit(level, claim, k, x)
    f_prev = price_explicit(level, claim, k - 1, x)
    d1 = lattice_derivative(level, claim, 1, k, x)
    d2 = lattice_derivative(level, claim, 2, k, x)
    return ((f_now - f_prev) / level.dt + params.r * x * d1
            + 0.5 * params.sigma ** 2 * x * x * d2 - params.r * f_now)


def lognormal_quadrature_price(params, payoff: Callable, t: float,
                               x: float) -> float:
    """Continuous price of a claim by quadrature of the lognormal law."""
    from scipy import integrate

    u = params.horizon_float - t
    if u <= 0:
        return float(payoff(np.asarray(x)))
    disc = math.exp(-params.r * u)
    drift = (params.r - 0.5 * params.sigma ** 2) * u
    width = params.sigma * math.sqrt(u)

    def integrand(z):
        s = x * math.exp(drift + width * z)
        return float(payoff(np.asarray(s))) * math.exp(-0.5 * z * z) \
            / math.sqrt(2.0 * math.pi)

    val, _ = integrate.quad(integrand, -12.0, 12.0, limit=200,
                            epsabs=1e-12, epsrel=1e-12)
    return disc * val


def bs_pde_limit_check(params, claim: Claim, t_grid, x_grid) -> list[dict]:
    """Black-Scholes operator applied to the continuous price on a grid.

    Calls and puts use exact closed-form partials; smooth custom claims
    fall back to high-order finite differences on the quadrature price.
    Returns one row per grid point with the operator value.
    """
    from .pricing import BSMClosedForm

    closed = BSMClosedForm(params)
    rows = []
    for t in t_grid:
        for x in x_grid:
            t, x = float(t), float(x)
            if claim.kind in ("call", "put"):
                strike = claim.strike
                theta = closed.call_theta(t, x, strike)
                delta = closed.call_delta(t, x, strike)
                gamma = closed.call_gamma(t, x, strike)
                price = closed.call(t, x, strike)
                if claim.kind == "put":
                    u = params.horizon_float - t
                    disc = math.exp(-params.r * u)
                    theta += params.r * strike * disc
                    delta -= 1.0
                    price += disc * strike - x
            else:
                price = lognormal_quadrature_price(params, claim.payoff, t, x)
                h_t = 1e-5 * params.horizon_float
                h_x = 1e-4 * x

                def f_t(tt):
                    return lognormal_quadrature_price(params, claim.payoff,
                                                      tt, x)

                def f_x(xx):
                    return lognormal_quadrature_price(params, claim.payoff,
                                                      t, xx)

                theta = (-f_t(t + 2 * h_t) + 8 * f_t(t + h_t)
                         - 8 * f_t(t - h_t) + f_t(t - 2 * h_t)) / (12 * h_t)
                delta = (-f_x(x + 2 * h_x) + 8 * f_x(x + h_x)
                         - 8 * f_x(x - h_x) + f_x(x - 2 * h_x)) / (12 * h_x)
                gamma = (-f_x(x + 2 * h_x) + 16 * f_x(x + h_x) - 30 * price
                         + 16 * f_x(x - h_x) - f_x(x - 2 * h_x)) \
                    / (12 * h_x * h_x)
            operator = (theta + params.r * x * delta
                        + 0.5 * params.sigma ** 2 * x * x * gamma
                        - params.r * price)
            rows.append({"t": t, "x": x, "operator": operator})
    return rows
