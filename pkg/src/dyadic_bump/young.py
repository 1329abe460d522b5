"""Young functions from the bump families and their complementary functions.

Every built-in family has the shape

    A(t) = scale * t**p * log(e + t)**a * loglog(e**e + t)**b

with ``loglog(x) = log(log(x))``.  Power, log-bump, loglog-bump and the
halved variants differ only in ``(p, a, b)``.  Complementary functions are
exact Legendre transforms ``sup_t (s t - A(t))``; the asymptotic shapes
``s**p' / (log ...)`` are available through :meth:`BumpYoung.approx_complement`
for two-sided comparisons.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "YoungError",
    "YoungFunction",
    "BumpYoung",
    "BumpComplement",
    "LinftyIndicator",
    "TabulatedYoung",
    "NumericComplement",
    "BpVerdict",
    "power",
    "logbump",
    "loglogbump",
    "b0",
    "b0_loglog",
    "custom",
    "parse_young",
    "conjugate_exponent",
    "bp_check",
    "is_convex",
    "doubling_constant",
]

E = math.e
EE = math.exp(E)
_TINY = 1e-300

_LOG_TMAX = 709.0


class YoungError(ValueError):
    """Domain errors for Young-function evaluation and parsing."""


def conjugate_exponent(p: float) -> float:
    if p <= 1:
        raise YoungError(f"conjugate exponent needs p > 1, got {p}")
    return p / (p - 1.0)


def _as_array(t):
    arr = np.asarray(t, dtype=float)
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise YoungError("Young functions are defined for t >= 0 only")
    return arr


def _out(x, like):
    return float(x) if np.ndim(like) == 0 else x


class YoungFunction:
    """Base class.  Subclasses implement ``_eval`` and ``_deriv`` on arrays."""

    #: (P, alpha, beta) for f(t) ~ t^P log(t)^alpha loglog(t)^beta, or None
    asymptotic: tuple[float, float, float] | None = None
    #: lower growth exponent, used to bracket inverses
    growth: float = 1.0

    def __call__(self, t):
        return self.eval(t)

    def eval(self, t):
        arr = _as_array(t)
        return _out(self._eval(arr), t)

    def derivative(self, t):
        arr = _as_array(t)
        return _out(self._deriv(arr), t)

    def inverse(self, s, rtol: float = 1e-13):
        """The unique ``t`` with ``A(t) = s`` by monotone bisection."""
        s_arr = _as_array(s)
        res = _bisect_inverse(self._eval, s_arr.reshape(-1), self.growth, rtol)
        return _out(res.reshape(s_arr.shape), s)

    def unit_inverse(self) -> float:
        """``A^{-1}(1)``, memoized (it seeds every Luxemburg bracket)."""
        val = self.__dict__.get("_unit_inverse")
        if val is None:
            val = float(self.inverse(1.0))
            object.__setattr__(self, "_unit_inverse", val)
        return val

    def complement(self) -> "YoungFunction":
        raise NotImplementedError

    @property
    def spec(self) -> str:
        return repr(self)

    def _eval(self, t):
        raise NotImplementedError

    def _deriv(self, t):
        raise NotImplementedError


def _bisect_inverse(fn, s, growth, rtol):
    """Vectorized bisection for ``fn(t) = s``; bracket ``[0, max(s, 2 s^(1/g))]``."""
    out = np.zeros_like(s)
    live = s > 0
    if not np.any(live):
        return out
    ss = s[live]
    with np.errstate(over="ignore", divide="ignore"):
        hi = np.maximum(ss, 2.0 * ss ** (1.0 / growth))
    for _ in range(4000):
        bad = fn(hi) < ss
        if not np.any(bad):
            break
        hi[bad] *= 2.0
    lo = np.zeros_like(ss)
    for _ in range(2000):
        mid = 0.5 * (lo + hi)
        up = fn(mid) >= ss
        hi = np.where(up, mid, hi)
        lo = np.where(up, lo, mid)
        if np.all(hi - lo <= rtol * hi):
            break
    out[live] = 0.5 * (lo + hi)
    return out


@dataclass(frozen=True, eq=False)
class BumpYoung(YoungFunction):
    """``scale * t^p log(e+t)^a loglog(e^e+t)^b`` with ``p >= 1``, ``a, b >= 0``."""

    p: float
    a: float = 0.0
    b: float = 0.0
    scale: float = 1.0
    family: str = "power"
    delta: float = 0.0
    _dual: object = None

    def __post_init__(self):
        if self.p < 1:
            raise YoungError(f"exponent must be >= 1, got {self.p}")
        if self.a < 0 or self.b < 0 or self.scale <= 0:
            raise YoungError("log exponents must be >= 0 and scale > 0")

    def __eq__(self, other):
        return (isinstance(other, BumpYoung)
                and (self.p, self.a, self.b, self.scale) == (other.p, other.a, other.b, other.scale))

    def __hash__(self):
        return hash((self.p, self.a, self.b, self.scale))

    def __repr__(self):
        if self.family in ("power", "logbump", "loglogbump", "b0", "b0loglog") and self.scale == 1.0:
            if self.family == "power":
                return f"power:p={self.p:g}"
            return f"{self.family}:p={self.p:g},delta={self.delta:g}"
        return f"BumpYoung(p={self.p:g}, a={self.a:g}, b={self.b:g}, scale={self.scale:g})"

    @property
    def spec(self):
        return repr(self)

    @property
    def growth(self):
        return self.p

    @property
    def asymptotic(self):
        return (self.p, self.a, self.b)

    @property
    def params(self) -> tuple[float, float, float, float]:
        """``(p, a, b, scale)`` for the compiled kernels."""
        return (float(self.p), float(self.a), float(self.b), float(self.scale))

    def _eval(self, t):
        with np.errstate(over="ignore", invalid="ignore"):
            out = self.scale * t ** self.p
            if self.a:
                out = out * np.log(E + t) ** self.a
            if self.b:
                out = out * np.log(np.log(EE + t)) ** self.b
        return np.where(t == 0, 0.0, out)

    def _log_terms(self, t):
        L = np.log(E + t)
        ell = np.log(EE + t)
        M = np.log(ell)
        return L, ell, M

    def _deriv(self, t):
        L, ell, M = self._log_terms(t)
        # A'(t) = scale t^(p-1) L^a M^b (p + t r(t))
        r = self.a / ((E + t) * L) + self.b / ((EE + t) * ell * M)
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            base = self.scale * (t ** (self.p - 1.0) if self.p != 1 else np.ones_like(t))
            out = base * L ** self.a * M ** self.b * (self.p + t * r)
        if self.p > 1:
            out = np.where(t == 0, 0.0, out)
        return out

    def _elasticity(self, t):
        """``t A'(t) / A(t)``, finite even where ``A`` overflows."""
        L, ell, M = self._log_terms(t)
        r = self.a / ((E + t) * L) + self.b / ((EE + t) * ell * M)
        with np.errstate(invalid="ignore"):
            return np.where(np.isinf(t), self.p, self.p + t * r)

    def _dlog_deriv_dlogt(self, t):
        """``t A''(t) / A'(t)``, the log-log slope of ``A'``."""
        L, ell, M = self._log_terms(t)
        ra = self.a / ((E + t) * L)
        rb = self.b / ((EE + t) * ell * M)
        r = ra + rb
        dra = -self.a * (L + 1.0) / ((E + t) * L) ** 2
        drb = -self.b * (ell * M + M + 1.0) / ((EE + t) * ell * M) ** 2
        h = self.p + t * r
        dh = r + t * (dra + drb)
        return (self.p - 1.0) + t * r + t * dh / h

    def complement(self) -> YoungFunction:
        if self._dual is not None:
            return self._dual
        if self.p == 1.0 and self.a == 0 and self.b == 0:
            dual = LinftyIndicator(self.scale, self)
        elif self.a == 0 and self.b == 0:
            q = conjugate_exponent(self.p)
            # Legendre transform of c t^p is (p-1) p^(-p') c^(1-p') s^p'
            c = (self.p - 1.0) * self.p ** (-q) * self.scale ** (1.0 - q)
            dual = BumpYoung(q, scale=c, family="power-dual", _dual=self)
        else:
            dual = BumpComplement(self)
        object.__setattr__(self, "_dual", dual)
        return dual

    def approx_complement(self, s):
        """Asymptotic shape ``s^p' / (log(e+s)^(a/(p-1)) loglog(e^e+s)^(b/(p-1)))``."""
        q = conjugate_exponent(self.p)
        s = _as_array(s)
        L, ell, M = self._log_terms(s)
        k = 1.0 / (self.p - 1.0)
        return s ** q * L ** (-self.a * k) * M ** (-self.b * k)


class BumpComplement(YoungFunction):
    """Exact complementary function of a :class:`BumpYoung` (``p > 1`` or logs).

    ``Abar(s) = s t* - A(t*)`` where ``A'(t*) = s``, solved by a safeguarded
    Newton iteration in ``log t``.
    """

    def __init__(self, base: BumpYoung):
        self.base = base
        self._slope0 = float(base._deriv(np.array([0.0]))[0])

    def __repr__(self):
        return f"complement({self.base!r})"

    @property
    def spec(self):
        return f"complement({self.base.spec})"

    @property
    def growth(self):
        if self.base.p > 1:
            return conjugate_exponent(self.base.p)
        return 1.0

    @property
    def asymptotic(self):
        p, a, b = self.base.p, self.base.a, self.base.b
        if p == 1:
            return None
        k = 1.0 / (p - 1.0)
        return (conjugate_exponent(p), -a * k, -b * k)

    def complement(self):
        return self.base

    def argmax(self, s: np.ndarray) -> np.ndarray:
        """Solve ``A'(t) = s`` for ``t`` (``s > A'(0)``); ``inf`` where ``t`` overflows."""
        # overflow of exp(u) is expected far out and is caught by the bracket logic
        with np.errstate(all="ignore"):
            return self._argmax(s)

    def _argmax(self, s: np.ndarray) -> np.ndarray:
        base = self.base
        logs = np.log(s)
        p = base.p
        if p > 1:
            u = np.clip((logs - math.log(p * base.scale)) / (p - 1.0), -_LOG_TMAX, _LOG_TMAX)
        else:
            u = np.zeros_like(s)
        # A' is increasing: if it is still below s at the largest double, t* overflows
        over = math.log(float(base._deriv(np.array([math.exp(_LOG_TMAX)]))[0])) < logs

        def F(u, idx=slice(None)):
            with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
                return np.log(base._deriv(np.exp(u))) - logs[idx]

        # bracket expansion in log t
        f = F(u)
        lo = np.where(f < 0, u, -np.inf)
        hi = np.where(f >= 0, u, np.inf)
        step = 1.0
        for _ in range(80):
            need_hi = np.flatnonzero(~np.isfinite(hi))
            need_lo = np.flatnonzero(~np.isfinite(lo))
            if need_hi.size == 0 and need_lo.size == 0:
                break
            if need_hi.size:
                cand = lo[need_hi] + step
                ok = F(cand, need_hi) >= 0
                hi[need_hi[ok]] = cand[ok]
                lo[need_hi[~ok]] = cand[~ok]
            if need_lo.size:
                cand = hi[need_lo] - step
                ok = F(cand, need_lo) < 0
                lo[need_lo[ok]] = cand[ok]
                hi[need_lo[~ok]] = cand[~ok]
            step *= 2.0
        with np.errstate(invalid="ignore"):
            u = 0.5 * (lo + hi)
        act = np.arange(u.size)
        for _ in range(100):
            ua, la, ha = u[act], lo[act], hi[act]
            f = F(ua, act)
            la = np.where(f < 0, ua, la)
            ha = np.where(f >= 0, ua, ha)
            with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
                newton = ua - f / base._dlog_deriv_dlogt(np.exp(ua))
            scale = np.maximum(1.0, np.abs(ua))
            # a step that rounds to nothing means convergence, not a bracket violation
            small = np.abs(newton - ua) <= 1e-14 * scale
            inside = ((newton > la) & (newton < ha) | small) & np.isfinite(newton)
            new_u = np.where(inside, newton, 0.5 * (la + ha))
            done = small | (ha - la <= 1e-15 * scale)
            u[act], lo[act], hi[act] = new_u, la, ha
            act = act[~done]
            if act.size == 0:
                break
        u[over] = np.inf
        return np.exp(u)

    def _eval(self, s):
        out = np.zeros_like(s)
        live = s > self._slope0
        if np.any(live):
            ss = s[live]
            t = self.argmax(ss)
            with np.errstate(over="ignore", invalid="ignore"):
                val = ss * t - self.base._eval(t)
                bad = ~np.isfinite(val)
                if np.any(bad):
                    # A'(t) = s gives Abar(s) = s t (h - 1) / h with h = t A'(t) / A(t)
                    h = self.base._elasticity(t[bad])
                    val[bad] = ss[bad] * t[bad] * ((h - 1.0) / h)
                val[np.isinf(t)] = np.inf
            out[live] = np.maximum(val, 0.0)
        return out

    def _deriv(self, s):
        out = np.zeros_like(s)
        live = s > self._slope0
        if np.any(live):
            out[live] = self.argmax(s[live])
        return out


class LinftyIndicator(YoungFunction):
    """Complement of ``c t``: zero on ``[0, c]`` and infinite beyond."""

    growth = 1.0
    asymptotic = None

    def __init__(self, c: float, base: YoungFunction):
        self.c = c
        self.base = base

    def __repr__(self):
        return f"complement({self.base!r})"

    def complement(self):
        return self.base

    def _eval(self, s):
        return np.where(s <= self.c, 0.0, np.inf)

    def _deriv(self, s):
        return np.where(s < self.c, 0.0, np.inf)

    def inverse(self, s, rtol: float = 1e-13):
        arr = _as_array(s)
        return _out(np.where(arr > 0, self.c, 0.0), s)


class TabulatedYoung(YoungFunction):
    """Piecewise-linear Young function through ``(t_k, A_k)``, ``t_0 = A_0 = 0``.

    Beyond the last knot the table is continued as ``A_K (t/t_K)^q`` with
    ``q`` the final log-log slope, so growth stays convex.
    """

    asymptotic = None

    def __init__(self, knots, values):
        t = np.asarray(knots, dtype=float)
        v = np.asarray(values, dtype=float)
        if t.ndim != 1 or t.shape != v.shape or t.size < 3:
            raise YoungError("custom table needs matching 1-d arrays of >= 3 points")
        if t[0] != 0 or v[0] != 0:
            raise YoungError("custom table must start at (0, 0)")
        if np.any(np.diff(t) <= 0) or np.any(np.diff(v) <= 0):
            raise YoungError("custom table must be strictly increasing")
        slopes = np.diff(v) / np.diff(t)
        if np.any(np.diff(slopes) < -1e-12 * np.abs(slopes[1:])):
            raise YoungError("custom table is not convex")
        self.knots = t
        self.values = v
        self.slopes = slopes
        self.tail = max(1.0, math.log(v[-1] / v[-2]) / math.log(t[-1] / t[-2]))
        self.growth = 1.0

    def __repr__(self):
        return f"custom:n={self.knots.size}"

    def _eval(self, t):
        tK, vK = self.knots[-1], self.values[-1]
        inside = np.interp(t, self.knots, self.values)
        with np.errstate(over="ignore"):
            outside = vK * (t / tK) ** self.tail
        return np.where(t <= tK, inside, outside)

    def _deriv(self, t):
        tK, vK = self.knots[-1], self.values[-1]
        k = np.clip(np.searchsorted(self.knots, t, side="right") - 1, 0, self.slopes.size - 1)
        inside = self.slopes[k]
        with np.errstate(over="ignore"):
            outside = vK * self.tail / tK * (t / tK) ** (self.tail - 1.0)
        return np.where(t < tK, inside, outside)

    def complement(self):
        return NumericComplement(self)


class NumericComplement(YoungFunction):
    """``sup_t (s t - A(t))`` by maximization over a dense log grid plus knots."""

    asymptotic = None
    growth = 1.0

    def __init__(self, base: YoungFunction, grid_points: int = 4000):
        self.base = base
        knots = getattr(base, "knots", np.array([0.0]))
        top = float(knots[-1]) if knots.size else 1.0
        grid = np.concatenate([knots, np.logspace(-12, math.log10(max(top, 1.0)) + 12, grid_points)])
        self.grid = np.unique(grid)
        self.grid_vals = base._eval(self.grid)

    def __repr__(self):
        return f"complement({self.base!r})"

    def complement(self):
        return self.base

    def _eval(self, s):
        flat = s.reshape(-1)
        out = np.empty_like(flat)
        for i in range(0, flat.size, 256):
            chunk = flat[i:i + 256]
            out[i:i + 256] = np.max(chunk[:, None] * self.grid[None, :] - self.grid_vals[None, :], axis=1)
        return np.maximum(out, 0.0).reshape(s.shape)

    def _deriv(self, s):
        flat = s.reshape(-1)
        out = np.empty_like(flat)
        for i in range(0, flat.size, 256):
            chunk = flat[i:i + 256]
            k = np.argmax(chunk[:, None] * self.grid[None, :] - self.grid_vals[None, :], axis=1)
            out[i:i + 256] = self.grid[k]
        return out.reshape(s.shape)


# -- constructors -----------------------------------------------------------

def power(p: float) -> BumpYoung:
    return BumpYoung(float(p), family="power")


def logbump(p: float, delta: float) -> BumpYoung:
    """``t^p log(e+t)^(p-1+delta)``."""
    _check_delta(delta)
    return BumpYoung(float(p), a=p - 1.0 + delta, family="logbump", delta=float(delta))


def loglogbump(p: float, delta: float) -> BumpYoung:
    """``t^p log(e+t)^(p-1) loglog(e^e+t)^(p-1+delta)``."""
    _check_delta(delta)
    return BumpYoung(float(p), a=p - 1.0, b=p - 1.0 + delta, family="loglogbump",
                     delta=float(delta))


def b0(p: float, delta: float) -> BumpYoung:
    """Log-bump with the log exponent's excess halved: ``t^p log(e+t)^(p-1+delta/2)``."""
    _check_delta(delta)
    return BumpYoung(float(p), a=p - 1.0 + delta / 2.0, family="b0", delta=float(delta))


def b0_loglog(p: float, delta: float) -> BumpYoung:
    _check_delta(delta)
    return BumpYoung(float(p), a=p - 1.0, b=p - 1.0 + delta / 2.0, family="b0loglog",
                     delta=float(delta))


def custom(knots, values) -> TabulatedYoung:
    return TabulatedYoung(knots, values)


def _check_delta(delta):
    if delta < 0:
        raise YoungError(f"delta must be >= 0, got {delta}")


_FAMILIES = {
    "power": lambda kw: power(kw["p"]),
    "logbump": lambda kw: logbump(kw["p"], kw["delta"]),
    "loglogbump": lambda kw: loglogbump(kw["p"], kw["delta"]),
    "b0": lambda kw: b0(kw["p"], kw["delta"]),
    "b0loglog": lambda kw: b0_loglog(kw["p"], kw["delta"]),
}


def parse_young(spec: str) -> BumpYoung:
    """Parse ``family:key=value,...``, e.g. ``logbump:p=2,delta=1``."""
    family, _, rest = spec.strip().partition(":")
    if family not in _FAMILIES:
        raise YoungError(f"unknown Young family {family!r} in {spec!r}")
    kw = {}
    for item in filter(None, rest.split(",")):
        key, eq, val = item.partition("=")
        if not eq:
            raise YoungError(f"bad parameter {item!r} in {spec!r}")
        try:
            kw[key.strip()] = float(val)
        except ValueError as exc:
            raise YoungError(f"bad number {val!r} in {spec!r}") from exc
    try:
        return _FAMILIES[family](kw)
    except KeyError as exc:
        raise YoungError(f"{spec!r} is missing parameter {exc.args[0]!r}") from None


# -- classification ---------------------------------------------------------

@dataclass
class BpVerdict:
    exponent: float
    classification: str
    tail_slope: float
    analytic: bool
    numeric_classification: str
    integral: float
    integral_extended: float

    def as_dict(self):
        return dict(self.__dict__)


def _classify_exponents(asym, q):
    P, alpha, beta = asym
    if not math.isclose(P, q, rel_tol=1e-12, abs_tol=1e-12):
        return "convergent" if P < q else "divergent"
    if not math.isclose(alpha, -1.0, abs_tol=1e-12):
        return "convergent" if alpha < -1 else "divergent"
    return "convergent" if beta < -1 - 1e-12 else "divergent"


def _log_integral(A, q, c, top, n=20001):
    """``int_c^top A(t)/t^q dt/t`` with the substitution ``x = log t``."""
    x = np.linspace(math.log(c), math.log(top), n)
    t = np.exp(x)
    with np.errstate(over="ignore", invalid="ignore"):
        g = A._eval(t) / t ** q
    return float(np.trapezoid(g, x))


def bp_check(A: YoungFunction, q: float, cutoff: float = 1e8, c: float = E,
             slope_threshold: float = 0.05) -> BpVerdict:
    """Decide whether ``int_c^inf A(t)/t^q dt/t`` converges.

    Built-in families are decided from their exact asymptotic exponents;
    a numeric tail-slope estimate is always reported alongside.
    """
    if q <= 1:
        raise YoungError("B_q needs q > 1")
    if cutoff < E:
        raise YoungError("cutoff must be >= e")
    xb = math.log(cutoff)
    xa = 0.5 * xb if xb > 2 * math.log(c) else math.log(c) + 0.5 * (xb - math.log(c))

    def h(x):
        t = math.exp(x)
        with np.errstate(over="ignore", divide="ignore"):
            g = float(A._eval(np.array([t]))[0]) / t ** q
        return math.log(g * x) if g > 0 and math.isfinite(g) else math.inf

    ha, hb = h(xa), h(xb)
    slope = (hb - ha) / (math.log(xb) - math.log(xa)) if math.isfinite(ha) and math.isfinite(hb) else math.inf
    if slope <= -slope_threshold:
        numeric = "convergent"
    elif slope >= slope_threshold:
        numeric = "divergent"
    else:
        numeric = "indeterminate"
    integral = _log_integral(A, q, c, cutoff)
    integral2 = _log_integral(A, q, c, cutoff ** 2)
    if isinstance(A, LinftyIndicator):
        return BpVerdict(q, "divergent", math.inf, True, "divergent", math.inf, math.inf)
    asym = A.asymptotic
    if asym is not None:
        return BpVerdict(q, _classify_exponents(asym, q), slope, True, numeric, integral, integral2)
    return BpVerdict(q, numeric, slope, False, numeric, integral, integral2)


def is_convex(A: YoungFunction, lo: float = 1e-6, hi: float = 1e6, n: int = 400,
              rtol: float = 1e-9) -> bool:
    """Numerical convexity on a log grid: divided differences are non-decreasing."""
    t = np.concatenate([[0.0], np.logspace(math.log10(lo), math.log10(hi), n)])
    v = A._eval(t)
    slopes = np.diff(v) / np.diff(t)
    return bool(np.all(np.diff(slopes) >= -rtol * np.abs(slopes[1:])) and np.all(np.diff(v) > 0))


def doubling_constant(A: YoungFunction, lo: float = 1e-6, hi: float = 1e6, n: int = 400) -> float:
    """``max A(2t)/A(t)`` over a log grid."""
    t = np.logspace(math.log10(lo), math.log10(hi), n)
    return float(np.max(A._eval(2 * t) / A._eval(t)))
