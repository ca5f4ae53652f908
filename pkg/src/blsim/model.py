"""Fractional flow g(u), damping h(u) and entropy pairs.

Two closures are available for the phase resistances:

* ``simple``: the classical Darcy mobilities, g = psi1/(psi1 + psi2) and
  h = 2/(psi1 + psi2) with psi_i = k_ri/mu_i.
* ``series``: each phase resistance is 1/S(lambda_i, nu) where
  S(lambda, nu) = sum_n 1/(lambda + n^2 nu) is summed in closed form.

Both are written in terms of the "conductance" S_i, so that a phase with zero
relative permeability has S_i = 0 exactly and g(0) = 0, g(1) = 1 hold without
division by zero.  Saturations outside [0, 1] are clamped before evaluation,
which extends g and h as constants.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DomainError, ModelError

SAMPLE_POINTS = 10_001  # grid used for K, h0 and the flux tables
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(48)


def series_sum(lam, nu):
    """Closed form of sum over all integers n of 1/(lam + n^2 nu)."""
    lam = np.asarray(lam, dtype=float)
    nu = float(nu)
    if nu <= 0 or np.any(lam <= 0) or not np.all(np.isfinite(lam)):
        raise DomainError("series_sum needs lambda > 0 and nu > 0")
    a = np.pi * np.sqrt(lam / nu)
    out = np.pi / np.sqrt(lam * nu) / np.tanh(a)
    return float(out) if out.ndim == 0 else out


def _conductance(psi, nu):
    """S as a function of mobility psi = 1/lambda, with S(0) = 0."""
    psi = np.asarray(psi, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.sqrt(psi / nu)
        s = np.pi * r / np.tanh(np.pi / np.sqrt(psi * nu))
    return np.where(psi > 0, s, 0.0)


def _lambda_times_conductance(psi, nu):
    """lambda * S(lambda, nu) for lambda = 1/psi; requires psi > 0."""
    a = np.pi / np.sqrt(psi * nu)
    return a / np.tanh(a)


@dataclass(frozen=True)
class FluidParams:
    mu1: float = 1.0
    mu2: float = 1.0
    nu: float = 0.1
    tau: float = 1e-3

    def __post_init__(self):
        if not (self.mu1 > 0 and self.mu2 > 0):
            raise ModelError("viscosities mu1, mu2 must be positive")
        if not self.nu > 0:
            raise ModelError("nu must be positive")
        if not self.tau >= 0:
            raise ModelError("tau must be nonnegative")


@dataclass(frozen=True)
class RelPermModel:
    """Relative permeabilities k_r1 (increasing) and k_r2 (decreasing).

    ``corey_quadratic`` uses u**p and (1-u)**p (p = 2 by default),
    ``linear`` uses u and 1-u, ``tabulated`` interpolates rows (s, kr1, kr2).
    """

    kind: str = "corey_quadratic"
    exponent: float = 2.0
    table: tuple | None = None
    k_reg: float = 1e-8

    def __post_init__(self):
        if self.kind not in ("corey_quadratic", "linear", "tabulated"):
            raise ModelError(f"unknown rel_perm.kind {self.kind!r}")
        if not self.k_reg > 0:
            raise ModelError("rel_perm.k_reg must be positive")
        if self.kind == "corey_quadratic" and not self.exponent > 0:
            raise ModelError("rel_perm.exponent must be positive")
        if self.kind == "tabulated":
            if self.table is None or len(self.table) < 2:
                raise ModelError("tabulated rel-perm needs at least two rows")
            t = np.asarray(self.table, dtype=float)
            s, k1, k2 = t[:, 0], t[:, 1], t[:, 2]
            if s[0] != 0.0 or s[-1] != 1.0 or np.any(np.diff(s) <= 0):
                raise ModelError("table saturations must increase from 0 to 1")
            if np.any(np.diff(k1) < 0) or np.any(np.diff(k2) > 0):
                raise ModelError("k_r1 must be nondecreasing and k_r2 nonincreasing")
            if np.any(t[:, 1:] < 0):
                raise ModelError("relative permeabilities must be nonnegative")
            if abs(k1[-1] - 1.0) > 1e-12 or abs(k2[0] - 1.0) > 1e-12:
                raise ModelError("table must satisfy k_r1(1) = k_r2(0) = 1")

    def kr1(self, u):
        u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
        if self.kind == "corey_quadratic":
            return u**self.exponent
        if self.kind == "linear":
            return u
        t = np.asarray(self.table, dtype=float)
        return np.interp(u, t[:, 0], t[:, 1])

    def kr2(self, u):
        u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
        if self.kind == "corey_quadratic":
            return (1.0 - u) ** self.exponent
        if self.kind == "linear":
            return 1.0 - u
        t = np.asarray(self.table, dtype=float)
        return np.interp(u, t[:, 0], t[:, 2])

    def dkr(self, u):
        """Analytic derivatives (dkr1, dkr2) or None for tabulated data."""
        u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
        if self.kind == "corey_quadratic":
            p = self.exponent
            with np.errstate(divide="ignore", invalid="ignore"):
                d1 = np.where(u > 0, p * u ** (p - 1), 0.0 if p > 1 else np.inf)
                d2 = np.where(u < 1, -p * (1 - u) ** (p - 1), 0.0 if p > 1 else -np.inf)
            return d1, d2
        if self.kind == "linear":
            return np.ones_like(u), -np.ones_like(u)
        return None


@dataclass(frozen=True, eq=False)
class FluxModel:
    """Immutable container for g, h and their derived constants.

    Build with :func:`build_flux_model`; ``g``, ``h``, ``gprime``, ``lambda1``
    and ``lambda2`` are vectorized methods.
    """

    mode: str
    fluid: FluidParams
    relperm: RelPermModel
    K: float = field(default=np.nan)
    h0: float = field(default=np.nan)
    monotone: bool = True
    _u_tab: np.ndarray = field(default=None, repr=False)
    _gplus_tab: np.ndarray = field(default=None, repr=False)
    _gminus_tab: np.ndarray = field(default=None, repr=False)

    def _mobilities(self, u):
        rp, fl = self.relperm, self.fluid
        return rp.kr1(u) / fl.mu1, rp.kr2(u) / fl.mu2

    def _conductances(self, u):
        p1, p2 = self._mobilities(u)
        if self.mode == "simple":
            return p1, p2
        return _conductance(p1, self.fluid.nu), _conductance(p2, self.fluid.nu)

    def lambda1(self, u):
        rp = self.relperm
        return self.fluid.mu1 / np.maximum(rp.kr1(u), rp.k_reg)

    def lambda2(self, u):
        rp = self.relperm
        return self.fluid.mu2 / np.maximum(rp.kr2(u), rp.k_reg)

    def g(self, u):
        s1, s2 = self._conductances(u)
        return s1 / (s1 + s2)

    def h(self, u):
        if self.mode == "simple":
            p1, p2 = self._mobilities(u)
            return 2.0 / (p1 + p2)
        rp, fl = self.relperm, self.fluid
        p1 = np.maximum(rp.kr1(u), rp.k_reg) / fl.mu1
        p2 = np.maximum(rp.kr2(u), rp.k_reg) / fl.mu2
        s1, s2 = _conductance(p1, fl.nu), _conductance(p2, fl.nu)
        ls1 = _lambda_times_conductance(p1, fl.nu)
        ls2 = _lambda_times_conductance(p2, fl.nu)
        return (ls1 + ls2) / (s1 + s2)

    def gprime(self, u):
        """dg/du, zero outside [0, 1]."""
        u = np.asarray(u, dtype=float)
        inside = (u >= 0.0) & (u <= 1.0)
        uc = np.clip(u, 0.0, 1.0)
        d = self.relperm.dkr(uc) if self.mode == "simple" else None
        if d is not None:
            p1, p2 = self._mobilities(uc)
            d1, d2 = d[0] / self.fluid.mu1, d[1] / self.fluid.mu2
            with np.errstate(invalid="ignore"):
                gp = (d1 * p2 - p1 * d2) / (p1 + p2) ** 2
        else:
            # central difference, one-sided at the ends of [0, 1]
            e = 1e-6
            lo = np.maximum(uc - e, 0.0)
            hi = np.minimum(uc + e, 1.0)
            gp = (self.g(hi) - self.g(lo)) / (hi - lo)
        return np.where(inside, gp, 0.0)

    def flux_split(self, u):
        """Integrals of max(g', 0) and min(g', 0) from 0 to u (tabulated)."""
        uc = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
        return (np.interp(uc, self._u_tab, self._gplus_tab),
                np.interp(uc, self._u_tab, self._gminus_tab))


def build_flux_model(fluid: FluidParams | None = None, relperm: RelPermModel | None = None,
                     mode: str = "simple") -> FluxModel:
    """Construct a FluxModel and compute K and h0 on a fixed sample grid."""
    fluid = fluid or FluidParams()
    relperm = relperm or RelPermModel()
    if mode not in ("simple", "series"):
        raise ModelError(f"unknown flux.mode {mode!r}")
    m = FluxModel(mode=mode, fluid=fluid, relperm=relperm)
    u = np.linspace(0.0, 1.0, SAMPLE_POINTS)
    with np.errstate(divide="ignore", invalid="ignore"):
        g = m.g(u)
        h = m.h(u)
    if not (np.all(np.isfinite(g)) and np.all(np.isfinite(h))):
        raise ModelError("g or h is not finite on [0, 1]")
    slopes = np.diff(g) / np.diff(u)
    K = float(np.max(np.abs(slopes)))
    h0 = float(np.min(h))
    if not h0 > 0:
        raise ModelError(f"damping lower bound h0 = {h0} is not positive")
    gplus = np.concatenate([[0.0], np.cumsum(np.maximum(slopes, 0.0) * np.diff(u))])
    gminus = np.concatenate([[0.0], np.cumsum(np.minimum(slopes, 0.0) * np.diff(u))])
    object.__setattr__(m, "K", K)
    object.__setattr__(m, "h0", h0)
    object.__setattr__(m, "monotone", bool(np.all(slopes >= 0)))
    object.__setattr__(m, "_u_tab", u)
    object.__setattr__(m, "_gplus_tab", gplus)
    object.__setattr__(m, "_gminus_tab", gminus)
    return m


def eval_g(u, model: FluxModel):
    return model.g(u)


def eval_h(u, model: FluxModel):
    return model.h(u)


def derived_constants(model: FluxModel) -> tuple[float, float]:
    """(K, h0): Lipschitz constant of g and lower bound of h."""
    return model.K, model.h0


def sgn_plus(x):
    return np.where(np.asarray(x) > 0, 1.0, 0.0)


def sgn_minus(x):
    return np.where(np.asarray(x) < 0, -1.0, 0.0)


@dataclass(frozen=True, eq=False)
class EntropyPair:
    family: str
    v: float
    eta: Callable
    q: Callable
    deta: Callable


FAMILIES = ("kruzhkov", "plus", "minus", "square")


def make_entropy_pair(family: str, v: float, model: FluxModel) -> EntropyPair:
    """Entropy/entropy-flux pair (eta, q) with q' = eta' g'."""
    g = model.g
    if family == "kruzhkov":
        def eta(u):
            return np.abs(np.asarray(u, float) - v)

        def q(u):
            return np.sign(np.asarray(u, float) - v) * (g(u) - g(v))

        def deta(u):
            return np.sign(np.asarray(u, float) - v)
    elif family == "plus":
        def eta(u):
            return np.maximum(np.asarray(u, float) - v, 0.0)

        def q(u):
            return sgn_plus(np.asarray(u, float) - v) * (g(u) - g(v))

        def deta(u):
            return sgn_plus(np.asarray(u, float) - v)
    elif family == "minus":
        def eta(u):
            return np.maximum(v - np.asarray(u, float), 0.0)

        def q(u):
            return sgn_minus(np.asarray(u, float) - v) * (g(u) - g(v))

        def deta(u):
            return sgn_minus(np.asarray(u, float) - v)
    elif family == "square":
        def eta(u):
            return np.asarray(u, float) ** 2

        def q(u):
            uc = np.clip(np.asarray(u, float), 0.0, 1.0)
            # integrate by parts: int_0^u 2 s g'(s) ds = 2 u g(u) - 2 int_0^u g
            s = 0.5 * (uc[..., None] * (_GL_NODES + 1.0))
            integral = 0.5 * uc * np.sum(_GL_WEIGHTS * g(s), axis=-1)
            return 2.0 * uc * g(uc) - 2.0 * integral

        def deta(u):
            return 2.0 * np.asarray(u, float)
    else:
        raise ModelError(f"unknown entropy family {family!r}")
    return EntropyPair(family=family, v=float(v), eta=eta, q=q, deta=deta)
