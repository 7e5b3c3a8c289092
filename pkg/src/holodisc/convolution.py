"""Exponential memory convolutions and their integration-by-parts algebra.

A chain with rate vector (b1, b2, ..., bn) applied to a signal g is the
nested convolution

    Z g = exp(-b1 t) * exp(-b2 t) * ... * exp(-bn t) * g,

realised as a cascade of first-order filters: with states z[0..n-1],

    dz[i]/dt = -b[i] z[i] + z[i+1]   (z[n] meaning the raw drive g),

so z[0] is the chain output.  The output is invariant under permutation of
the rate vector, which lets banks of chains be keyed by the sorted rates.

Products of two convolved signals reduce, by repeated integration by parts,
to a sum of boundary products (which belong in the reconstructed subgrid
field) plus canonical products "bare signal times convolved signal" (which
belong in the evolution equation).  ``reduce_by_parts`` performs that
reduction symbolically and keeps a trace of every step.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ReductionError

__all__ = [
    "ConvChain",
    "chain_rhs",
    "chain_step",
    "integrate_chain",
    "canonical_rates",
    "chains_equivalent",
    "ConvTerm",
    "Reduction",
    "reduce_by_parts",
]


def _validate_rates(rates) -> tuple[float, ...]:
    rates = tuple(float(r) for r in np.atleast_1d(np.asarray(rates, dtype=float)))
    if len(rates) == 0:
        raise ConfigError("a chain needs at least one rate")
    if any(r <= 0.0 for r in rates):
        raise ConfigError(f"chain rates must be positive, got {rates}")
    return rates


@dataclass(frozen=True)
class ConvChain:
    """A cascade of exponential filters with the given decay rates."""

    rates: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "rates", _validate_rates(self.rates))

    @property
    def levels(self) -> int:
        return len(self.rates)

    def zero_states(self, m: int | None = None) -> np.ndarray:
        """From-rest states: shape (levels,) or (levels, m)."""
        if m is None:
            return np.zeros(self.levels)
        return np.zeros((self.levels, m))

    def steady_gain(self) -> float:
        """Output per unit constant drive: 1 / prod(rates)."""
        return float(1.0 / np.prod(self.rates))

    def transfer(self, omega: float) -> complex:
        """Steady response to exp(i omega t): prod 1/(b + i omega)."""
        out = 1.0 + 0.0j
        for b in self.rates:
            out /= b + 1j * omega
        return out


def chain_rhs(states: np.ndarray, rates, drive) -> np.ndarray:
    """Cascade derivative: dz[i] = -b[i] z[i] + z[i+1], last fed by drive.

    states has shape (levels,) or (levels, m); drive broadcasts against one
    row of states.
    """
    states = np.asarray(states, dtype=float)
    rates = np.asarray(rates, dtype=float)
    if states.shape[0] != rates.shape[0]:
        raise ConfigError(
            f"{rates.shape[0]} rates but {states.shape[0]} cascade states"
        )
    shaped = rates.reshape((-1,) + (1,) * (states.ndim - 1))
    dz = -shaped * states
    dz[:-1] += states[1:]
    dz[-1] += drive
    return dz


def chain_step(states, rates, drive_fn, t, dt, scheme="rk4"):
    """Advance one cascade by dt.

    drive_fn(t) supplies the raw drive at substage times; for the euler and
    euler-maruyama schemes it is evaluated once, at t.
    """
    states = np.asarray(states, dtype=float)
    if scheme == "rk4":
        def f(y, s):
            return chain_rhs(y, rates, drive_fn(s))

        k1 = f(states, t)
        k2 = f(states + 0.5 * dt * k1, t + 0.5 * dt)
        k3 = f(states + 0.5 * dt * k2, t + 0.5 * dt)
        k4 = f(states + dt * k3, t + dt)
        return states + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if scheme in ("euler", "euler-maruyama"):
        return states + dt * chain_rhs(states, rates, drive_fn(t))
    raise ConfigError(f"unknown scheme {scheme!r}")


def integrate_chain(rates, drive_fn, t_end, dt, states0=None, scheme="rk4"):
    """Integrate a cascade from rest (or states0) and record every step.

    Returns
    -------
    times : ndarray, shape (n+1,)
    history : ndarray, shape (n+1, levels) or (n+1, levels, m)
    """
    chain = ConvChain(tuple(np.atleast_1d(rates)))
    if t_end <= 0.0 or dt <= 0.0:
        raise ConfigError("need t_end > 0 and dt > 0")
    states = chain.zero_states() if states0 is None else np.asarray(states0, float)
    n = int(round(t_end / dt))
    times = dt * np.arange(n + 1)
    history = np.empty((n + 1,) + states.shape)
    history[0] = states
    for i in range(n):
        states = chain_step(states, chain.rates, drive_fn, times[i], dt, scheme)
        history[i + 1] = states
    return times, history


def canonical_rates(rates) -> tuple[float, ...]:
    """Sorted rate tuple; the chain output only depends on this."""
    return tuple(sorted(_validate_rates(rates)))


def chains_equivalent(rates_a, rates_b, rtol: float = 1e-12) -> bool:
    """Whether two rate vectors define the same chain output."""
    a = np.asarray(canonical_rates(rates_a))
    b = np.asarray(canonical_rates(rates_b))
    if a.shape != b.shape:
        return False
    return bool(np.allclose(a, b, rtol=rtol, atol=0.0))


@dataclass(frozen=True)
class ConvTerm:
    """coeff * Z[left_rates](left) * Z[right_rates](right).

    Empty rate tuples mean the bare signal.  Signals are symbolic labels;
    the reducer never needs their values.
    """

    coeff: float
    left_rates: tuple[float, ...]
    right_rates: tuple[float, ...]
    left: str = "rho"
    right: str = "mu"

    def __post_init__(self):
        for name in ("left_rates", "right_rates"):
            rates = tuple(float(r) for r in getattr(self, name))
            if any(r <= 0.0 for r in rates):
                raise ReductionError(f"{name} must be positive, got {rates}")
            object.__setattr__(self, name, rates)

    def label(self) -> str:
        def side(rates, sig):
            if not rates:
                return sig
            inner = ",".join(f"{r:g}" for r in rates)
            return f"Z[{inner}]{sig}"

        return (
            f"{self.coeff:g} * {side(self.left_rates, self.left)}"
            f" * {side(self.right_rates, self.right)}"
        )


@dataclass
class Reduction:
    """Result of reducing the integral of a ConvTerm product.

    The defining identity, exact pointwise in t for cascades sharing the
    same drives:

        original(t) = d/dt [ sum of boundary products ](t)
                      + [ sum of canonical products ](t).

    Boundary products belong in the reconstructed subgrid field; canonical
    products (one side bare) belong in the evolution equation.
    """

    original: ConvTerm
    boundary: list[ConvTerm] = field(default_factory=list)
    canonical: list[ConvTerm] = field(default_factory=list)
    trace: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        def term(t: ConvTerm) -> dict:
            return {
                "coeff": t.coeff,
                "left_rates": list(t.left_rates),
                "right_rates": list(t.right_rates),
                "left": t.left,
                "right": t.right,
                "label": t.label(),
            }

        return {
            "original": term(self.original),
            "boundary": [term(t) for t in self.boundary],
            "canonical": [term(t) for t in self.canonical],
            "trace": list(self.trace),
        }


def _merge(terms: list[ConvTerm]) -> list[ConvTerm]:
    # Permutation invariance of chain outputs justifies keying by sorted
    # rates; coefficients of coincident terms add.
    merged: dict = {}
    order: list = []
    for t in terms:
        key = (
            tuple(sorted(t.left_rates)),
            tuple(sorted(t.right_rates)),
            t.left,
            t.right,
        )
        if key in merged:
            old = merged[key]
            merged[key] = ConvTerm(
                old.coeff + t.coeff, key[0], key[1], t.left, t.right
            )
        else:
            merged[key] = ConvTerm(t.coeff, key[0], key[1], t.left, t.right)
            order.append(key)
    return [merged[k] for k in order if merged[k].coeff != 0.0]


def reduce_by_parts(term: ConvTerm) -> Reduction:
    """Reduce the integral of a two-sided convolution product.

    Repeatedly applies

        int Z[l,l'](f) Z[k,k'](g) dt
            = -1/(bk+bl) Z[l,l'](f) Z[k,k'](g)
              + 1/(bk+bl) int ( Z[l'](f) Z[k,k'](g) + Z[l,l'](f) Z[k'](g) ) dt,

    stripping the leading rate of each side, until every surviving integrand
    has one bare side (the canonical form).  A term that is already canonical
    passes through unchanged.

    Returns a Reduction whose boundary list collects the integrated-out
    products and whose canonical list collects the terminal integrands; the
    trace records each elimination step.
    """
    if not isinstance(term, ConvTerm):
        raise ReductionError("reduce_by_parts needs a ConvTerm")
    red = Reduction(original=term)
    stack = [term]
    while stack:
        cur = stack.pop()
        if not cur.left_rates or not cur.right_rates:
            red.canonical.append(cur)
            continue
        bl = cur.left_rates[0]
        bk = cur.right_rates[0]
        s = bk + bl
        boundary = ConvTerm(
            -cur.coeff / s, cur.left_rates, cur.right_rates, cur.left, cur.right
        )
        child_a = ConvTerm(
            cur.coeff / s, cur.left_rates[1:], cur.right_rates, cur.left, cur.right
        )
        child_b = ConvTerm(
            cur.coeff / s, cur.left_rates, cur.right_rates[1:], cur.left, cur.right
        )
        red.boundary.append(boundary)
        red.trace.append(
            f"strip ({bl:g}, {bk:g}) from {cur.label()}: boundary {boundary.label()}"
            f"; children {child_a.label()} | {child_b.label()}"
        )
        stack.append(child_a)
        stack.append(child_b)
    red.boundary = _merge(red.boundary)
    red.canonical = _merge(red.canonical)
    return red
