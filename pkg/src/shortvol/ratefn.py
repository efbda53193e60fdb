"""Rate function of the fixed-carry short-maturity limit for a generic local vol model.

The rate function is the minimum over paths ``g`` with ``g(0) = 0`` and
``g(1) = ln(K/s0)`` of

    1/2 * int_0^1 ((g'(t) - rho) / sigma(s0 e^{g(t)}))**2 dt.

Optimal paths conserve ``C = (g'^2 - rho^2) / sigma^2(s0 e^g)``, so each path
is pinned down by a single constant and the action reduces to quadratures in
the log-price ``u``.  Paths either keep the sign of ``g'`` (branches ``up`` and
``down``) or, strictly inside the cone ``|g| < |rho| t``, turn once at a level
``u*`` where ``C sigma^2 + rho^2`` vanishes (``dip`` when the path first falls,
``hump`` when it first rises).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize

from ._quad import integrate_oriented, integrate_sqrt_ends, integrate_sqrt_start
from .errors import DomainError, NoTurningSolution, NumericError, SolverError
from .model import Market, Region, VolatilityModel, classify_region

log = logging.getLogger(__name__)

RHO_EPS = 1e-12
PATH_TOL = 1e-8
# below this |u - u0| variance drops sigma^2(u0) - sigma^2(u) are integrated
# from the derivative instead of formed by subtraction
_GAP_QUAD_BELOW = 0.05
_GL_X, _GL_W = np.polynomial.legendre.leggauss(10)


@dataclass(frozen=True)
class RateResult:
    I: float
    C: float
    region: Region
    g_star: float | None = None
    monotone: bool = True
    branch: str = "up"


@dataclass(frozen=True)
class PathSample:
    t: np.ndarray
    g: np.ndarray
    dg: np.ndarray
    t_star: float | None = None


def _var(model, s0, u):
    return float(model.sigma(s0 * math.exp(u))) ** 2


def _dvar(model, s0, u):
    """Derivative of sigma^2(s0 e^u) with respect to u."""
    S = s0 * math.exp(u)
    return 2.0 * float(model.sigma(S)) * float(model.dsigma(S)) * S


def _max_var(model, s0, a, b):
    """Largest sigma^2(s0 e^u) over [a, b] and where it is attained."""
    lo, hi = min(a, b), max(a, b)
    grid = np.linspace(lo, hi, 65)
    vals = np.array([_var(model, s0, u) for u in grid])
    i = int(np.argmax(vals))
    best, where = float(vals[i]), float(grid[i])
    if 0 < i < len(grid) - 1:
        res = optimize.minimize_scalar(
            lambda u: -_var(model, s0, u),
            bounds=(grid[i - 1], grid[i + 1]),
            method="bounded",
            options={"xatol": 1e-12},
        )
        if -res.fun > best:
            best, where = float(-res.fun), float(res.x)
    return best, where


def _var_drop(model, s0, u0, v0, h):
    """sigma^2 at u0 (equal to v0) minus sigma^2 at u0 + h.

    The offset is passed separately because u0 + h may round to u0.  Near u0
    the drop is the integral of d sigma^2/du by Gauss-Legendre, so its
    relative accuracy survives as h -> 0 instead of being lost to
    cancellation.
    """
    u = u0 + h
    if abs(h) < _GAP_QUAD_BELOW:
        w = u0 + 0.5 * h * (_GL_X + 1.0)
        S = s0 * np.exp(w)
        dv = 2.0 * model.sigma(S) * model.dsigma(S) * S
        return -0.5 * h * float(np.dot(_GL_W, dv))
    return v0 - _var(model, s0, u)


def _action_density(C, var, rho2, s, A=None):
    """(sqrt(A) - s)^2 / (var sqrt(A)) with A = C var + rho^2, written without cancellation."""
    if A is None:
        A = C * var + rho2
    if A <= 0.0:
        return 0.0
    sA = math.sqrt(A)
    if s > 0.0:
        return C * C * var / ((sA + s) ** 2 * sA)
    return (sA - s) ** 2 / (var * sA)


def _check_direction(k, direction):
    if direction == "up" and not k > 0:
        raise DomainError("direction 'up' needs K > s0")
    if direction == "down" and not k < 0:
        raise DomainError("direction 'down' needs K < s0")
    if direction not in ("up", "down"):
        raise DomainError(f"direction must be 'up' or 'down', got {direction!r}")


class _Monotone:
    """Constraint and action of one-signed paths over [lo, hi].

    Parametrised by ``delta = C - C_min`` with ``C_min = -rho^2 / max sigma^2``,
    so ``A = C sigma^2 + rho^2`` is formed as ``rho^2 (1 - sigma^2/max) +
    delta sigma^2`` and stays accurate when ``C`` sits next to ``C_min``
    (strikes very close to spot inside the cone).
    """

    def __init__(self, model, s0, rho, lo, hi):
        self.model, self.s0, self.lo, self.hi = model, s0, lo, hi
        self.rho2 = rho * rho
        self.vmax, self.u_max = _max_var(model, s0, lo, hi)
        self.C_min = -self.rho2 / self.vmax
        # quad revisits the same nodes for every delta; cache the delta-free parts
        self._nodes = {}

    def _node(self, end, sgn, v):
        key = (end, v)
        hit = self._nodes.get(key)
        if hit is None:
            u, h = end + sgn * v * v, end - self.u_max + sgn * v * v
            var = _var(self.model, self.s0, u)
            base = self.rho2 * max(_var_drop(self.model, self.s0, self.u_max, self.vmax, h), 0.0) / self.vmax
            hit = self._nodes[key] = (var, base)
        return hit

    def _integrate(self, f):
        """int_lo^hi f(var, base) du with A = base + delta var, square-root maps at both ends.

        The offset from the maximiser is carried exactly, since ``end + v^2``
        can round back to ``end``.
        """
        mid = 0.5 * (self.lo + self.hi)
        total = 0.0
        for end, sgn in ((self.lo, 1.0), (self.hi, -1.0)):
            total += integrate_oriented(
                lambda v: 2.0 * v * f(*self._node(end, sgn, v)), 0.0, math.sqrt(abs(mid - end))
            )
        return total

    def constraint(self, delta):
        def f(var, base):
            A = base + delta * var
            # A vanishes only at delta = 0 where some span point attains the max
            return math.inf if A <= 0.0 else 1.0 / math.sqrt(A)

        return self._integrate(f) - 1.0

    def action(self, delta, s):
        C = self.C_min + delta

        def f(var, base):
            return _action_density(C, var, self.rho2, s, A=base + delta * var)

        return 0.5 * self._integrate(f)

    def solve(self, direction="up"):
        F = self.constraint
        try:
            F0 = F(0.0)
        except NumericError:
            # sigma flat near its maximum: the constraint diverges at C_min
            F0 = math.inf
        if F0 < 0.0:
            raise SolverError(
                "no monotone path reaches the strike", direction=direction, C_min=self.C_min, constraint_at_C_min=F0
            )
        if F0 == 0.0:
            return 0.0
        span = self.hi - self.lo
        # roots can sit many decades above C_min, so bracket and solve in log(delta);
        # both bracket ends are evaluated at exactly the points brentq will see
        G = lambda t: F(math.exp(t))  # noqa: E731
        t_hi = math.log(max(span * span, self.rho2, 1e-12) / self.vmax)
        n = 0
        while (G_hi := G(t_hi)) > 0.0:
            n += 1
            if n > 200:
                raise SolverError("could not bracket C from above", C_min=self.C_min, delta_hi=math.exp(t_hi))
            t_hi += math.log(2.0)
        if G_hi == 0.0:
            return math.exp(t_hi)
        t_lo = t_hi
        while t_lo > t_hi - 690.0:
            t_lo -= 69.0
            if G(t_lo) > 0.0:
                t = optimize.brentq(G, t_lo, t_hi, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=300)
                return math.exp(t)
        d_lo = math.exp(t_lo)
        if math.isfinite(F0):
            return optimize.brentq(F, 0.0, d_lo, xtol=1e-300, maxiter=300)
        return 0.0


def _monotone_constraint(model, s0, rho, lo, hi):
    """Constraint minus one as a function of ``C``."""
    mono = _Monotone(model, s0, rho, lo, hi)
    return lambda C: mono.constraint(C - mono.C_min)


def _monotone_solution(model, market, K, direction):
    s0, rho = market.s0, market.rho
    k = math.log(K / s0)
    _check_direction(k, direction)
    lo, hi = (0.0, k) if direction == "up" else (k, 0.0)
    mono = _Monotone(model, s0, rho, lo, hi)
    return mono, mono.solve(direction)


def solve_C_monotone(model: VolatilityModel, market: Market, K: float, direction: str) -> float:
    """Conserved constant of the monotone path from s0 to K.

    The constraint ``int du / sqrt(C sigma^2 + rho^2) = 1`` over the log-price
    span is strictly decreasing in ``C``; the root is bracketed between the
    smallest admissible ``C`` and an upper value doubled until the sign flips.
    """
    mono, delta = _monotone_solution(model, market, K, direction)
    return mono.C_min + delta


def _rate_monotone(model, market, K, direction):
    """(I, C) of the monotone candidate."""
    mono, delta = _monotone_solution(model, market, K, direction)
    s = market.rho if direction == "up" else -market.rho
    return mono.action(delta, s), mono.C_min + delta


def _monotonicity(model, s0, rho):
    """Return -1, +1 or 0 for decreasing, increasing or flat sigma on the cone span."""
    grid = np.linspace(-abs(rho), abs(rho), 33)
    vals = np.array([_var(model, s0, u) for u in grid])
    d = np.diff(vals)
    scale = np.max(np.abs(vals))
    if np.all(np.abs(d) <= 1e-14 * scale):
        return 0
    if np.all(d <= 0):
        return -1
    if np.all(d >= 0):
        return 1
    return None


class _Turning:
    """Constraint and action for single-turn paths parametrised by the turning level."""

    def __init__(self, model, s0, rho, k, kind):
        self.model, self.s0, self.rho, self.k, self.kind = model, s0, rho, k, kind
        self.rho2 = rho * rho
        # dip: u = u* + v^2 below both endpoints; hump: u = u* - v^2 above them
        self.dirn = 1.0 if kind == "dip" else -1.0

    def _gap(self, ustar, vstar, v):
        """sigma^2(u*) - sigma^2(u) at u = u* + dirn v^2; positive on admissible paths."""
        return _var_drop(self.model, self.s0, ustar, vstar, self.dirn * v * v)

    @staticmethod
    def _leg(f, w):
        """Integrate over [0, w] with the gap-formula switch as a breakpoint."""
        v_sw = math.sqrt(_GAP_QUAD_BELOW)
        if w <= v_sw:
            return integrate_oriented(f, 0.0, w)
        return integrate_oriented(f, 0.0, v_sw) + integrate_oriented(f, v_sw, w)

    def _pieces(self, ustar):
        # lengths in v for the two legs, (leg to 0, leg to k)
        return math.sqrt(abs(ustar)), math.sqrt(abs(self.k - ustar))

    def constraint(self, ustar):
        vstar = _var(self.model, self.s0, ustar)
        rho_abs = abs(self.rho)

        def f(v):
            gap = self._gap(ustar, vstar, v)
            if gap <= 0.0:
                return math.inf
            return 2.0 * v * math.sqrt(vstar / gap) / rho_abs

        w0, wk = self._pieces(ustar)
        return self._leg(f, w0) + self._leg(f, wk) - 1.0

    def action(self, ustar):
        vstar = _var(self.model, self.s0, ustar)
        C = -self.rho2 / vstar
        # dip: the leg to 0 is walked downwards, the leg to k upwards
        s_leg0 = -self.rho if self.kind == "dip" else self.rho
        s_legk = -s_leg0

        def f(v, s):
            u = ustar + self.dirn * v * v
            # A = rho^2 gap / sigma^2(u*), free of the cancellation in C sigma^2 + rho^2
            A = self.rho2 * self._gap(ustar, vstar, v) / vstar
            return 2.0 * v * _action_density(C, _var(self.model, self.s0, u), self.rho2, s, A=A)

        w0, wk = self._pieces(ustar)
        return 0.5 * (
            self._leg(lambda v: f(v, s_leg0), w0)
            + self._leg(lambda v: f(v, s_legk), wk)
        )

    def admissible(self, ustar):
        """sigma^2(u*) must dominate sigma^2 along the whole path span."""
        lo, hi = (ustar, max(0.0, self.k)) if self.kind == "dip" else (min(0.0, self.k), ustar)
        vstar = _var(self.model, self.s0, ustar)
        grid = np.linspace(lo, hi, 33)[1:] if self.kind == "dip" else np.linspace(lo, hi, 33)[:-1]
        # slack for spans so short that sigma^2 rounds to the same value
        return all(_var(self.model, self.s0, u) < vstar * (1.0 + 1e-13) for u in grid)

    def solve(self):
        rho_abs = abs(self.rho)
        delta = 1e-10 * rho_abs
        if self.kind == "dip":
            edge = min(0.0, self.k)
            near, far = edge - delta, edge - rho_abs
        else:
            edge = max(0.0, self.k)
            near, far = edge + delta, edge + rho_abs
        if not (self.admissible(near) and self.admissible(far)):
            raise NoTurningSolution("sigma is not dominated by its turning-point value", kind=self.kind)
        G_near = self.constraint(near)
        if G_near >= 0.0:
            raise NoTurningSolution(
                "monotone candidate covers this strike", kind=self.kind, constraint_at_edge=G_near
            )
        G_far = self.constraint(far)
        if G_far <= 0.0:
            raise NoTurningSolution("turning level not bracketed", kind=self.kind, constraint_far=G_far)
        ustar = optimize.brentq(self.constraint, far, near, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=300)
        vstar = _var(self.model, self.s0, ustar)
        return -self.rho2 / vstar, ustar


def _turning_kinds(model, s0, rho):
    mono = _monotonicity(model, s0, rho)
    if mono == 0:
        return []
    if mono == -1:
        return ["dip"]
    if mono == 1:
        return ["hump"]
    return ["dip", "hump"]


def solve_C_turning(model: VolatilityModel, market: Market, K: float):
    """Conserved constant and turning level ``(C, u*)`` of a single-turn region-3 path.

    Raises :class:`NoTurningSolution` when no such path reaches ``K``.
    """
    if classify_region(market, K) != Region.REGION3:
        raise DomainError("turning paths exist only strictly inside region 3")
    s0, rho = market.s0, market.rho
    k = math.log(K / s0)
    kinds = _turning_kinds(model, s0, rho)
    if not kinds:
        raise NoTurningSolution("flat volatility: slope is constant along optimal paths")
    last = None
    for kind in kinds:
        try:
            return _Turning(model, s0, rho, k, kind).solve()
        except NoTurningSolution as exc:
            last = exc
    raise last


def _turning_candidates(model, s0, rho, k):
    for kind in _turning_kinds(model, s0, rho):
        tp = _Turning(model, s0, rho, k, kind)
        try:
            C, ustar = tp.solve()
        except NoTurningSolution:
            continue
        yield tp.action(ustar), C, kind, ustar


def rate_function(model: VolatilityModel, market: Market, K: float) -> RateResult:
    region = classify_region(market, K)
    if region == Region.ATM:
        return RateResult(I=0.0, C=0.0, region=region, branch="atm")
    rho = market.rho
    if abs(rho) < RHO_EPS:
        return rate_function_rho0(model, market, K)
    s0 = market.s0
    k = math.log(K / s0)

    if region == Region.REGION1:
        return RateResult(*_rate_monotone(model, market, K, "up"), region, branch="up")
    if region == Region.REGION2:
        return RateResult(*_rate_monotone(model, market, K, "down"), region, branch="down")

    candidates = []
    if k != 0.0:
        direction = "up" if k > 0 else "down"
        try:
            candidates.append(RateResult(*_rate_monotone(model, market, K, direction), region, branch=direction))
        except SolverError as exc:
            log.debug("monotone %s candidate infeasible at K=%g: %s", direction, K, exc)
    for I, C, kind, ustar in _turning_candidates(model, s0, rho, k):
        candidates.append(RateResult(I, C, region, g_star=ustar, monotone=False, branch=kind))
    if k == 0.0 and _monotonicity(model, s0, rho) == 0:
        # flat sigma returning to spot: the optimal path is g = 0
        var0 = _var(model, s0, 0.0)
        candidates.append(RateResult(0.5 * rho * rho / var0, -rho * rho / var0, region, branch="flat"))
    if not candidates:
        raise SolverError("no feasible region-3 path", K=K, rho=rho)
    return min(candidates, key=lambda c: c.I)


def _y(model, s0, k, power=1):
    return integrate_oriented(lambda z: float(model.sigma(s0 * math.exp(z))) ** -power, 0.0, k)


def rate_function_rho0(model: VolatilityModel, market: Market, K: float) -> RateResult:
    """Rate function with the carry set to zero: ``I = y(k)^2 / 2``, ``y(k) = int_0^k dz / sigma``."""
    s0 = market.s0
    k = math.log(K / s0)
    y = _y(model, s0, k)
    if k == 0.0:
        region = Region.ATM
    else:
        region = Region.REGION1 if k > 0 else Region.REGION2
    return RateResult(I=0.5 * y * y, C=y * y, region=region, branch="rho0")


def rate_expansion_small_rho(model: VolatilityModel, market: Market, K: float):
    """First two coefficients ``(I0, I1)`` of ``I = I0 + rho I1 + O(rho^2)``."""
    s0 = market.s0
    k = math.log(K / s0)
    if k == 0.0:
        raise DomainError("expansion needs K != s0")
    y = _y(model, s0, k)
    return 0.5 * y * y, -_y(model, s0, k, power=2)


def _initial_slope(res, var0, rho2):
    p = math.sqrt(max(res.C * var0 + rho2, 0.0))
    return -p if res.branch in ("down", "dip") else p


def optimal_path(model: VolatilityModel, market: Market, K: float, n_samples: int = 101, result: RateResult | None = None) -> PathSample:
    """Sample the optimal path on a uniform grid of ``n_samples`` times in [0, 1].

    Integrates ``g'' = C sigma(S) sigma'(S) S`` (the derivative of the slope
    relation ``g'^2 = C sigma^2 + rho^2``) from ``g(0) = 0`` with the slope of
    the winning candidate; the turning instant is the event ``g' = 0``.  The
    initial slope is polished by a secant step until ``g(1)`` hits the
    log-strike to ``PATH_TOL``.
    """
    if n_samples < 2:
        raise DomainError("need at least two samples")
    s0, rho = market.s0, market.rho
    k = math.log(K / s0)
    res = result if result is not None else rate_function(model, market, K)
    t = np.linspace(0.0, 1.0, n_samples)
    if res.branch == "atm":
        return PathSample(t=t, g=rho * t, dg=np.full_like(t, rho))
    if res.branch == "rho0":
        rho = 0.0
    rho2 = rho * rho
    var0 = _var(model, s0, 0.0)

    def rhs(_t, y, C):
        S = s0 * math.exp(y[0])
        return [y[1], C * float(model.sigma(S)) * float(model.dsigma(S)) * S]

    def turn(_t, y, C):
        return y[1]

    def run(p0, dense=False):
        C = (p0 * p0 - rho2) / var0
        return integrate.solve_ivp(
            rhs, (0.0, 1.0), [0.0, p0], method="DOP853", args=(C,),
            rtol=1e-12, atol=1e-13, t_eval=t if dense else None,
            events=turn if not res.monotone else None,
        )

    def miss(p0):
        sol = run(p0)
        if sol.status < 0:
            raise NumericError("path integration failed", solver_message=sol.message, p0=p0)
        return sol.y[0, -1] - k

    p0 = _initial_slope(res, var0, rho2)
    err = miss(p0)
    if abs(err) > 0.1 * PATH_TOL:
        h = 1e-7 * max(abs(p0), abs(rho), 1e-8)
        try:
            p0 = optimize.newton(miss, p0, x1=p0 + h, tol=1e-14, maxiter=50)
        except (RuntimeError, NumericError) as exc:
            raise NumericError("could not polish path endpoint", miss=err) from exc
    sol = run(p0, dense=True)
    if sol.status < 0:
        raise NumericError("path integration failed", solver_message=sol.message)
    g, dg = sol.y[0], sol.y[1]
    if abs(g[-1] - k) > PATH_TOL:
        raise NumericError("path misses the log-strike", miss=float(g[-1] - k))
    t_star = None
    if not res.monotone and sol.t_events is not None and len(sol.t_events[0]):
        t_star = float(sol.t_events[0][0])
    return PathSample(t=t, g=g, dg=dg, t_star=t_star)
