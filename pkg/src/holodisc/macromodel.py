"""Coarse models: element-amplitude evolution equations with memory.

All models advance m grid values U_j(t), one per element of half-width H on
a periodic domain of length m H.  Four deterministic-skeleton variants:

``lowg``
    Low-order forced model: renormalised diffusion, advection, the three
    leading forcing-mode couplings, and a constant mean-drift correction.
    Valid at full coupling only (gamma = 1).

``lattice``
    Coarse companion of the half-spacing lattice: evolves the even lattice
    points from restrictions of the fine forcing samples.

``ssm1``
    Single-mode alternating forcing phi_j,1 = -+ phi(t): the slow-manifold
    model with four memory chains per element, plus reconstruction of grid
    values and the subgrid field.

``strongquad``
    General three-mode forcing, complete through quadratic forcing terms:
    33 memory-product couplings over 13 chains per element.

Memory lives in a ChainBank of exponential cascades keyed by (sorted rates,
input expression); the bank is advanced jointly with U so every scheme sees
consistent substage values.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .convolution import chain_rhs, canonical_rates
from .errors import ConfigError, StabilityError
from .forcing import mode_decay_rate
from .microscale import SCHEMES, check_scheme_legal
from .stencil import delta2, delta4, mudelta

__all__ = [
    "VARIANTS",
    "ModelConfig",
    "alternating_signs",
    "ChainBank",
    "build_bank",
    "lowg_rhs",
    "lattice_coarse_rhs",
    "ssm1_chain_specs",
    "ssm1_det_linear",
    "ssm1_memory_weights",
    "ssm1_rhs",
    "nsm_field_at_grid",
    "nsm_subgrid_field",
    "QuadTerm",
    "strongquad_quadratic_terms",
    "strongquad_chain_specs",
    "strongquad_expressions",
    "strongquad_chain_inputs",
    "strongquad_det_linear",
    "strongquad_rhs",
    "CoarseState",
    "init_state",
    "variant_rhs",
    "macro_step",
    "run_macro",
]

VARIANTS = ("lowg", "lattice", "ssm1", "strongquad")

_PI2 = np.pi**2
_PI4 = np.pi**4


@dataclass(frozen=True)
class ModelConfig:
    """Resolved configuration of one coarse model run.

    gamma is the inter-element coupling strength: 0 decouples elements, 1 is
    full coupling.  lowg and lattice are derived at full coupling and refuse
    anything else; ssm1 and strongquad carry gamma dependence.  The ssm1
    variant bakes in the alternating forcing pattern, which only closes
    periodically for even m.
    """

    variant: str
    alpha: float
    eps: float
    H: float
    m: int
    gamma: float = 1.0
    dt: float = 1e-3
    scheme: str = "rk4"
    seed: int | None = None
    psi1_weights: tuple[float, float, float] = (-0.5, 0.0, 0.5)

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigError(
                f"unknown variant {self.variant!r}; expected one of {VARIANTS}"
            )
        if int(self.m) != self.m or self.m < 3:
            raise ConfigError(f"need at least 3 elements, got m={self.m}")
        if self.H <= 0.0:
            raise ConfigError(f"element half-width must be positive, got {self.H}")
        if not 0.0 <= self.gamma <= 1.0:
            raise ConfigError(f"coupling gamma must lie in [0, 1], got {self.gamma}")
        if self.dt <= 0.0:
            raise ConfigError(f"time step must be positive, got {self.dt}")
        if self.scheme not in SCHEMES:
            raise ConfigError(f"unknown scheme {self.scheme!r}")
        if self.variant in ("lowg", "lattice") and self.gamma != 1.0:
            raise ConfigError(
                f"variant {self.variant!r} is derived at full coupling; "
                f"gamma must be 1.0, got {self.gamma}"
            )
        if self.variant == "ssm1" and self.m % 2:
            raise ConfigError(
                "ssm1's alternating forcing pattern needs an even element count"
            )
        if len(self.psi1_weights) != 3:
            raise ConfigError("psi1_weights must have three entries")


def alternating_signs(m: int) -> np.ndarray:
    """Element sign pattern (-1, +1, -1, +1, ...); needs even m to close."""
    if m % 2:
        raise ConfigError("alternating pattern does not close on an odd ring")
    alt = np.ones(m)
    alt[0::2] = -1.0
    return alt


class ChainBank:
    """Memory chains vectorised over elements.

    Entries are keyed by (sorted rate tuple, input expression name); chain
    outputs are permutation-invariant in the rates, so sorting loses
    nothing.  Each entry stores an array of shape (levels, m): row 0 is the
    chain output per element.
    """

    def __init__(self, m: int):
        if int(m) != m or m < 1:
            raise ConfigError(f"bank needs a positive element count, got {m}")
        self.m = int(m)
        self._states: dict[tuple, np.ndarray] = {}

    @staticmethod
    def key(rates, input_key: str) -> tuple:
        return (canonical_rates(rates), str(input_key))

    def ensure(self, rates, input_key: str) -> tuple:
        """Register a chain (idempotent), initialised from rest."""
        k = self.key(rates, input_key)
        if k not in self._states:
            self._states[k] = np.zeros((len(k[0]), self.m))
        return k

    def keys(self) -> list[tuple]:
        return sorted(self._states.keys())

    def __len__(self) -> int:
        return len(self._states)

    def states(self, rates, input_key: str) -> np.ndarray:
        k = self.key(rates, input_key)
        try:
            return self._states[k]
        except KeyError:
            raise ConfigError(
                f"bank has no chain {k}; register it with ensure()"
            ) from None

    def output(self, rates, input_key: str) -> np.ndarray:
        """Chain output per element, shape (m,)."""
        return self.states(rates, input_key)[0]

    @property
    def n_states(self) -> int:
        return sum(s.size for s in self._states.values())

    def pack(self) -> np.ndarray:
        """Flatten all chains in sorted-key order."""
        if not self._states:
            return np.zeros(0)
        return np.concatenate([self._states[k].ravel() for k in self.keys()])

    def unpack(self, flat: np.ndarray) -> None:
        """Overwrite all chain states from a flat vector (pack's inverse)."""
        flat = np.asarray(flat, dtype=float)
        if flat.size != self.n_states:
            raise ConfigError(
                f"flat vector has {flat.size} entries, bank holds {self.n_states}"
            )
        pos = 0
        for k in self.keys():
            s = self._states[k]
            self._states[k] = flat[pos : pos + s.size].reshape(s.shape)
            pos += s.size

    def rhs_flat(self, flat: np.ndarray, inputs: dict) -> np.ndarray:
        """Cascade derivatives for a packed state, given drive arrays.

        inputs maps input expression names to (m,) drive arrays; every
        registered chain must find its drive.
        """
        flat = np.asarray(flat, dtype=float)
        out = np.empty_like(flat)
        pos = 0
        for k in self.keys():
            rates, input_key = k
            levels = len(rates)
            block = flat[pos : pos + levels * self.m].reshape(levels, self.m)
            try:
                drive = inputs[input_key]
            except KeyError:
                raise ConfigError(
                    f"no drive supplied for chain input {input_key!r}"
                ) from None
            out[pos : pos + levels * self.m] = chain_rhs(
                block, np.asarray(rates), drive
            ).ravel()
            pos += levels * self.m
        return out

    def copy(self) -> "ChainBank":
        dup = ChainBank(self.m)
        dup._states = {k: v.copy() for k, v in self._states.items()}
        return dup

    def bound_to(self, flat: np.ndarray) -> "ChainBank":
        """A bank whose state arrays are views into a packed vector.

        Cheap per-stage rebinding for joint integration; mutating the views
        mutates flat and vice versa.
        """
        flat = np.asarray(flat, dtype=float)
        if flat.size != self.n_states:
            raise ConfigError(
                f"flat vector has {flat.size} entries, bank holds {self.n_states}"
            )
        dup = ChainBank(self.m)
        pos = 0
        for k in self.keys():
            shape = self._states[k].shape
            size = shape[0] * shape[1]
            dup._states[k] = flat[pos : pos + size].reshape(shape)
            pos += size
        return dup


# -- low-order model ---------------------------------------------------------

def lowg_rhs(U: np.ndarray, modes: np.ndarray, cfg: ModelConfig) -> np.ndarray:
    """Low-order forced model at full coupling.

    modes holds the per-element forcing coefficients, shape (m, 3):
    columns are the constant, sin theta, and cos 2 theta components.

        dU_j/dt = (1/H^2)(1 + alpha^2 H^2 U_j^2 / 12)(U_{j+1} - 2U_j + U_{j-1})
                  - (alpha/2H) U_j (U_{j+1} - U_{j-1})
                  + eps [phi_0 - alpha (2H/pi^2) phi_1 U_j
                         - alpha^2 (8H^2/3pi^4) phi_2 U_j^2]
                  + 0.01643 alpha^2 H^2 eps^2 U_j.
    """
    a, e, H = cfg.alpha, cfg.eps, cfg.H
    U = np.asarray(U, dtype=float)
    modes = np.asarray(modes, dtype=float)
    s0, s1, s2 = modes[:, 0], modes[:, 1], modes[:, 2]
    dU = (1.0 / H**2) * (1.0 + a * a * H * H * U * U / 12.0) * delta2(U)
    dU -= (a / H) * U * mudelta(U)
    dU += e * (
        s0
        - a * (2.0 * H / _PI2) * s1 * U
        - a * a * (8.0 * H * H / (3.0 * _PI4)) * s2 * U * U
    )
    dU += 0.01643 * a * a * H * H * e * e * U
    return dU


# -- coarse lattice model ----------------------------------------------------

def lattice_coarse_rhs(
    U: np.ndarray, phi_fine: np.ndarray, cfg: ModelConfig
) -> np.ndarray:
    """Evolution of the even lattice points from fine forcing samples.

    phi_fine holds forcing values at the 2m lattice points x_i = i H/2;
    element j's grid value sits at the even index 2j.  The forcing enters
    through two local restrictions:

        psi_j0 = phi_{2j-1}/4 + phi_{2j}/2 + phi_{2j+1}/4
        psi_j1 = w . (phi_{2j-1}, phi_{2j}, phi_{2j+1})

    with w = cfg.psi1_weights (default a centred difference, (-1/2, 0, 1/2)):

        dU_j/dt = (1/H^2)(U_{j+1} - 2U_j + U_{j-1})
                  - (alpha/2H) U_j (U_{j+1} - U_{j-1})
                  + eps [psi_j0 - (alpha H / 8) U_j psi_j1].
    """
    a, e, H = cfg.alpha, cfg.eps, cfg.H
    U = np.asarray(U, dtype=float)
    phi_fine = np.asarray(phi_fine, dtype=float)
    if phi_fine.shape != (2 * cfg.m,):
        raise ConfigError(
            f"need forcing at 2m = {2 * cfg.m} lattice points, "
            f"got shape {phi_fine.shape}"
        )
    centre = phi_fine[0::2]
    left = np.roll(phi_fine, 1)[0::2]
    right = np.roll(phi_fine, -1)[0::2]
    psi0 = 0.25 * left + 0.5 * centre + 0.25 * right
    w = cfg.psi1_weights
    psi1 = w[0] * left + w[1] * centre + w[2] * right
    dU = (1.0 / H**2) * delta2(U)
    dU -= (a / H) * U * mudelta(U)
    dU += e * (psi0 - (a * H / 8.0) * U * psi1)
    return dU


# -- single-mode alternating-forcing model -----------------------------------

def ssm1_chain_specs(cfg: ModelConfig) -> tuple[tuple[tuple, str], ...]:
    """Memory chains the ssm1 model needs: Z1, Z21, Z41, Z61 driven by phi."""
    b = {k: mode_decay_rate(k, cfg.H) for k in (1, 2, 4, 6)}
    return (
        ((b[1],), "phi"),
        ((b[1], b[2]), "phi"),
        ((b[1], b[4]), "phi"),
        ((b[1], b[6]), "phi"),
    )


def ssm1_det_linear(U: np.ndarray, phi: float, cfg: ModelConfig) -> np.ndarray:
    """Deterministic skeleton plus forcing-linear terms of the ssm1 model.

    Everything except the memory products; shared by the strong model and
    its weak replacement.
    """
    a, g, e, H = cfg.alpha, cfg.gamma, cfg.eps, cfg.H
    U = np.asarray(U, dtype=float)
    alt = alternating_signs(cfg.m)

    d2U = delta2(U)
    dU = (g / H**2) * d2U
    dU -= (g * g / (12.0 * H**2)) * delta4(U)
    dU -= (a * g / H) * U * mudelta(U)
    dU += (a * a * g / 12.0) * U * U * d2U

    bracket = (
        (2.0 / _PI2) * U
        + g * (0.1028 * U + 0.0716 * d2U)
        - 0.00363 * a * a * H * H * U**3
    )
    dU -= alt * (e * a * H) * bracket * phi
    return dU


def ssm1_memory_weights(U: np.ndarray, cfg: ModelConfig) -> dict[str, np.ndarray]:
    """Coefficients multiplying the four memory products phi * Z...phi.

    Keys name the chain by its mode pair; each value has shape (m,).  The
    strong model multiplies these by the realised products, the weak model
    by their drift-plus-noise replacements.
    """
    a, e, H = cfg.alpha, cfg.eps, cfg.H
    U = np.asarray(U, dtype=float)
    lead = e * e * a * a * U
    return {
        "z1": lead * 0.0195 * H * H,
        "z21": lead * (-(8.0 / _PI2) / 15.0),
        "z41": lead * (-(8.0 / _PI2) / 255.0),
        "z61": lead * (-(8.0 / _PI2) / 1295.0),
    }


def ssm1_rhs(
    U: np.ndarray, phi: float, bank: ChainBank, cfg: ModelConfig
) -> tuple[np.ndarray, dict]:
    """Slow-manifold model under single-mode alternating forcing.

    The forcing pattern phi_{j,1} = -+ phi(t) alternates across elements
    (lower sign on even 0-based j); phi(t) is the scalar drive.  Memory
    enters through the bank's four chains, all fed by phi.

    Returns the amplitude derivative and the bank drive map for this
    evaluation, so the caller can advance U and the chains jointly.
    """
    U = np.asarray(U, dtype=float)
    H = cfg.H
    b = {k: mode_decay_rate(k, H) for k in (1, 2, 4, 6)}
    dU = ssm1_det_linear(U, phi, cfg)
    weights = ssm1_memory_weights(U, cfg)
    phi = float(phi)
    dU += weights["z1"] * phi * bank.output((b[1],), "phi")
    dU += weights["z21"] * phi * bank.output((b[1], b[2]), "phi")
    dU += weights["z41"] * phi * bank.output((b[1], b[4]), "phi")
    dU += weights["z61"] * phi * bank.output((b[1], b[6]), "phi")
    inputs = {"phi": np.full(cfg.m, phi)}
    return dU, inputs


def nsm_field_at_grid(
    U: np.ndarray, bank: ChainBank, cfg: ModelConfig
) -> np.ndarray:
    """Reconstructed fine-scale value at each element's centre.

    The memory chains shift the true grid value off the amplitude:

        u_j(X_j) = U_j -+ eps alpha U_j [ (2H/pi^2) Z1
                   - (4/H)(Z21/3 - Z41/15 + Z61/35) ] phi,

    with the same alternation as the forcing (chains already carry phi).
    """
    a, e, H = cfg.alpha, cfg.eps, cfg.H
    U = np.asarray(U, dtype=float)
    alt = alternating_signs(cfg.m)
    b = {k: mode_decay_rate(k, H) for k in (1, 2, 4, 6)}
    z1 = bank.output((b[1],), "phi")
    z21 = bank.output((b[1], b[2]), "phi")
    z41 = bank.output((b[1], b[4]), "phi")
    z61 = bank.output((b[1], b[6]), "phi")
    offset = (2.0 * H / _PI2) * z1 - (4.0 / H) * (
        z21 / 3.0 - z41 / 15.0 + z61 / 35.0
    )
    return U + alt * e * a * U * offset


def nsm_subgrid_field(
    U: np.ndarray, bank: ChainBank, cfg: ModelConfig, theta
) -> np.ndarray:
    """Reconstructed fine-scale field across each element.

    theta is the subgrid coordinate pi (x - X_j)/H; scalars give shape (m,),
    arrays give shape theta.shape + (m,).  At theta = +-pi with gamma = 1
    and eps = 0 the field reproduces the neighbouring amplitudes exactly
    (the coupling condition).
    """
    a, g, e, H = cfg.alpha, cfg.gamma, cfg.eps, cfg.H
    U = np.asarray(U, dtype=float)
    alt = alternating_signs(cfg.m)
    theta = np.asarray(theta, dtype=float)[..., None]
    b = {k: mode_decay_rate(k, H) for k in (1, 2, 4, 6)}
    z1 = bank.output((b[1],), "phi")
    z21 = bank.output((b[1], b[2]), "phi")
    z41 = bank.output((b[1], b[4]), "phi")
    z61 = bank.output((b[1], b[6]), "phi")

    out = U + g * (
        (theta / np.pi) * mudelta(U)
        + (theta**2 / (2.0 * _PI2)) * delta2(U)
    )
    out = out + alt * e * np.sin(theta) * z1
    out = out + alt * e * a * U * (
        (2.0 * H / _PI2) * z1
        - (4.0 / H)
        * (
            np.cos(2.0 * theta) / 3.0 * z21
            - np.cos(4.0 * theta) / 15.0 * z41
            + np.cos(6.0 * theta) / 35.0 * z61
        )
    )
    return out


# -- general quadratic-forcing model -----------------------------------------

_EXPR_NAMES = (
    "phi0", "phi1", "phi2",
    "mudelta_phi0", "mudelta_phi1", "mudelta_phi2",
    "delta2_phi0", "delta2_phi1", "delta2_phi2",
)


def strongquad_expressions(modes: np.ndarray) -> dict[str, np.ndarray]:
    """Stencil images of the three mode-coefficient rings."""
    modes = np.asarray(modes, dtype=float)
    ex: dict[str, np.ndarray] = {}
    for k in range(3):
        s = modes[:, k]
        ex[f"phi{k}"] = s
        ex[f"mudelta_phi{k}"] = mudelta(s)
        ex[f"delta2_phi{k}"] = delta2(s)
    return ex


@dataclass(frozen=True)
class QuadTerm:
    """One quadratic forcing coupling: coeff * left * Z[rates](right) (* U)."""

    coeff: float
    left: str
    rates: tuple[float, ...]
    right: str
    times_U: bool = False


def strongquad_quadratic_terms(cfg: ModelConfig) -> tuple[QuadTerm, ...]:
    """The 33 quadratic memory couplings, coefficients fully resolved.

    Four prefactor families (eps^2 included):
    A = eps^2 alpha H / pi^2, B = eps^2 alpha gamma / (H pi^2),
    C = eps^2 alpha gamma H / pi^2, D = eps^2 alpha^2 / pi^2 (times U).
    """
    a, g, e, H = cfg.alpha, cfg.gamma, cfg.eps, cfg.H
    b1 = mode_decay_rate(1, H)
    b2 = mode_decay_rate(2, H)
    R1, R2 = (b1,), (b2,)
    R12, R22 = (b1, b2), (b2, b2)
    A = e * e * a * H / _PI2
    B = e * e * a * g / (H * _PI2)
    C = e * e * a * g * H / _PI2
    D = e * e * a * a / _PI2
    H2P2 = H * H / _PI2
    return (
        # single-convolution mode products
        QuadTerm(-2.0 * A, "phi0", R1, "phi1"),
        QuadTerm(0.4 * A, "phi1", R2, "phi2"),
        QuadTerm(0.4 * A, "phi2", R1, "phi1"),
        # double convolutions of the gradient/curvature images
        QuadTerm(-32.0 * B, "phi0", R12, "mudelta_phi2"),
        QuadTerm(-0.8 * B, "phi1", R22, "delta2_phi2"),
        QuadTerm(6.4 * B, "phi2", R12, "mudelta_phi2"),
        # coupling-weighted stencil products
        QuadTerm(C * 8.0 / _PI2, "phi0", R1, "mudelta_phi0"),
        QuadTerm(C * 8.0 / _PI2, "phi0", R1, "mudelta_phi2"),
        QuadTerm(C * (1.0 / 12.0 + 5.0 / (3.0 * _PI2)), "phi0", R1, "delta2_phi1"),
        QuadTerm(-C * (0.25 + 8.0 / _PI2), "phi0", R2, "mudelta_phi2"),
        QuadTerm(C * 0.2, "phi1", R2, "delta2_phi0"),
        QuadTerm(-C * (0.05 + 13.0 / (150.0 * _PI2)), "phi1", R2, "phi2"),
        QuadTerm(-C * 8.0 / (5.0 * _PI2), "phi2", R1, "mudelta_phi0"),
        QuadTerm(-C * 8.0 / (5.0 * _PI2), "phi2", R1, "mudelta_phi2"),
        QuadTerm(-C * (1.0 / 60.0 + 17.0 / (75.0 * _PI2)), "phi2", R1, "delta2_phi1"),
        QuadTerm(C * (0.125 + 4.0 / (5.0 * _PI2)), "phi2", R2, "mudelta_phi2"),
        QuadTerm(-C * (1.0 / 12.0 + 2.0 / (15.0 * _PI2)), "delta2_phi0", R1, "phi1"),
        QuadTerm(C * (1.0 / 24.0 + 5.0 / (6.0 * _PI2)), "delta2_phi0", R1, "delta2_phi1"),
        QuadTerm(-C * (1.0 / 60.0 + 17.0 / (75.0 * _PI2)), "delta2_phi1", R2, "phi2"),
        QuadTerm(-C * (1.0 / 120.0 + 17.0 / (150.0 * _PI2)), "delta2_phi1", R2, "delta2_phi2"),
        QuadTerm(-C * (0.05 + 44.0 / (75.0 * _PI2)), "delta2_phi2", R1, "phi1"),
        QuadTerm(-C * (1.0 / 120.0 + 17.0 / (150.0 * _PI2)), "delta2_phi2", R1, "delta2_phi1"),
        QuadTerm(C * (1.0 / 6.0 + 10.0 / (3.0 * _PI2)), "mudelta_phi0", R1, "mudelta_phi1"),
        QuadTerm(C * (0.25 - 8.0 / (5.0 * _PI2)), "mudelta_phi0", R2, "phi2"),
        QuadTerm(-C * (1.0 / 30.0 + 34.0 / (75.0 * _PI2)), "mudelta_phi1", R2, "mudelta_phi2"),
        QuadTerm(-C * (1.0 / 30.0 + 34.0 / (75.0 * _PI2)), "mudelta_phi2", R1, "mudelta_phi1"),
        QuadTerm(C * (0.125 - 4.0 / (5.0 * _PI2)), "mudelta_phi2", R2, "phi2"),
        # amplitude-weighted products
        QuadTerm(-D * 32.0 / 3.0, "phi0", R12, "phi2", times_U=True),
        QuadTerm(-D * (16.0 / 3.0) * H2P2, "phi0", R2, "phi2", times_U=True),
        QuadTerm(-D * 8.0 / 15.0, "phi1", R12, "phi1", times_U=True),
        QuadTerm(D * (32.0 / 15.0) * H2P2, "phi1", R1, "phi1", times_U=True),
        QuadTerm(D * 32.0 / 15.0, "phi2", R12, "phi2", times_U=True),
        QuadTerm(D * (16.0 / 15.0) * H2P2, "phi2", R2, "phi2", times_U=True),
    )


def strongquad_chain_specs(cfg: ModelConfig) -> tuple[tuple[tuple, str], ...]:
    """Distinct (rates, input) chains the quadratic couplings consume."""
    seen: list[tuple[tuple, str]] = []
    for term in strongquad_quadratic_terms(cfg):
        key = (canonical_rates(term.rates), term.right)
        if key not in seen:
            seen.append(key)
    return tuple(seen)


def strongquad_chain_inputs(modes: np.ndarray) -> dict[str, np.ndarray]:
    """Drive arrays for the bank: the stencil images the chains integrate."""
    ex = strongquad_expressions(modes)
    drives = (
        "phi1", "phi2",
        "mudelta_phi0", "mudelta_phi1", "mudelta_phi2",
        "delta2_phi0", "delta2_phi1", "delta2_phi2",
    )
    return {k: ex[k] for k in drives}


def strongquad_det_linear(
    U: np.ndarray, modes: np.ndarray, cfg: ModelConfig
) -> np.ndarray:
    """Deterministic skeleton plus forcing-linear terms of the general model.

    Everything except the 33 quadratic memory couplings; shared by the
    strong model and its weak replacement.
    """
    a, g, e, H = cfg.alpha, cfg.gamma, cfg.eps, cfg.H
    U = np.asarray(U, dtype=float)
    modes = np.asarray(modes, dtype=float)
    if modes.shape != (cfg.m, 3):
        raise ConfigError(
            f"need mode coefficients of shape ({cfg.m}, 3), got {modes.shape}"
        )
    ex = strongquad_expressions(modes)
    s0, s1, s2 = ex["phi0"], ex["phi1"], ex["phi2"]

    dU = (g / H**2) * delta2(U)
    dU -= (g * g / (12.0 * H**2)) * delta4(U)
    dU -= (g * a / H) * U * mudelta(U)

    lin = (
        s0
        - (g / 24.0) * ex["delta2_phi0"]
        + g * g * (3.0 / 640.0 + 1.0 / (8.0 * _PI4)) * delta4(s0)
    )
    lin += (g / (4.0 * _PI2)) * ex["delta2_phi2"]
    lin -= g * g * (1.0 / (48.0 * _PI2) + 1.0 / (16.0 * _PI4)) * delta4(s2)
    lin -= a * (2.0 * H / _PI2) * U * s1
    # Coupling-gradient corrections; prefactor alpha gamma H / pi^2.
    lin += (a * g * H / _PI2) * (
        U
        * (
            (8.0 / _PI2) * ex["mudelta_phi0"]
            - 0.25 * ex["mudelta_phi2"]
            + (1.0 / 12.0 + 5.0 / (3.0 * _PI2)) * ex["delta2_phi1"]
        )
        + mudelta(U)
        * (0.25 * s2 + (1.0 / 6.0 + 10.0 / (3.0 * _PI2)) * ex["mudelta_phi1"])
        - delta2(U)
        * (
            (1.0 / 6.0 + 1.0 / (3.0 * _PI2)) * s1
            - (1.0 / 24.0 + 5.0 / (6.0 * _PI2)) * ex["delta2_phi1"]
        )
    )
    lin -= a * a * (8.0 * H * H / (3.0 * _PI4)) * U * U * s0
    dU += e * lin
    return dU


def strongquad_rhs(
    U: np.ndarray, modes: np.ndarray, bank: ChainBank, cfg: ModelConfig
) -> np.ndarray:
    """General-forcing model, complete through quadratic forcing terms.

    modes holds the per-element forcing coefficients, shape (m, 3).  The
    deterministic skeleton and the forcing-linear terms are evaluated in
    place; the 33 quadratic couplings read chain outputs from the bank
    (register them with build_bank or strongquad_chain_specs first).
    """
    U = np.asarray(U, dtype=float)
    modes = np.asarray(modes, dtype=float)
    dU = strongquad_det_linear(U, modes, cfg)
    ex = strongquad_expressions(modes)
    for term in strongquad_quadratic_terms(cfg):
        v = term.coeff * ex[term.left] * bank.output(term.rates, term.right)
        if term.times_U:
            v = v * U
        dU += v
    return dU


# -- joint stepping ----------------------------------------------------------

def build_bank(cfg: ModelConfig) -> ChainBank:
    """A from-rest bank holding exactly the chains cfg's variant needs."""
    bank = ChainBank(cfg.m)
    if cfg.variant == "ssm1":
        specs = ssm1_chain_specs(cfg)
    elif cfg.variant == "strongquad":
        specs = strongquad_chain_specs(cfg)
    else:
        specs = ()
    for rates, input_key in specs:
        bank.ensure(rates, input_key)
    return bank


@dataclass
class CoarseState:
    """One instant of a coarse run: time, amplitudes, memory bank."""

    t: float
    U: np.ndarray
    bank: ChainBank


def init_state(cfg: ModelConfig, U0) -> CoarseState:
    U0 = np.asarray(U0, dtype=float)
    if U0.shape != (cfg.m,):
        raise ConfigError(f"initial amplitudes must have shape ({cfg.m},)")
    return CoarseState(t=0.0, U=U0.copy(), bank=build_bank(cfg))


def variant_rhs(U, forcing_value, bank, cfg):
    """Dispatch to the variant's evolution; returns (dU, bank drive map)."""
    if cfg.variant == "lowg":
        return lowg_rhs(U, forcing_value, cfg), {}
    if cfg.variant == "lattice":
        return lattice_coarse_rhs(U, forcing_value, cfg), {}
    if cfg.variant == "ssm1":
        return ssm1_rhs(U, forcing_value, bank, cfg)
    dU = strongquad_rhs(U, forcing_value, bank, cfg)
    return dU, strongquad_chain_inputs(forcing_value)


def macro_step(state: CoarseState, cfg: ModelConfig, forcing, dt=None) -> CoarseState:
    """Advance amplitudes and memory bank jointly by one step.

    forcing(t) returns the variant's forcing object at time t: mode
    coefficients (m, 3) for lowg and strongquad, fine lattice samples (2m,)
    for lattice, the scalar drive for ssm1.  Under rk4 it is evaluated at
    substage times, so it must be smooth; held-per-step samples (white
    noise) require the euler-maruyama scheme.

    Raises StabilityError naming the offending piece if anything goes
    non-finite.
    """
    dt = cfg.dt if dt is None else dt
    if dt <= 0.0:
        raise ConfigError(f"time step must be positive, got {dt}")
    bank = state.bank
    nb = bank.n_states

    def packed_rhs(y, t):
        flat_bank = y[:nb]
        U = y[nb:]
        probe = bank.bound_to(flat_bank) if nb else bank
        dU, inputs = variant_rhs(U, forcing(t), probe, cfg)
        if nb:
            return np.concatenate([bank.rhs_flat(flat_bank, inputs), dU])
        return dU

    y = np.concatenate([bank.pack(), state.U]) if nb else state.U.copy()
    if cfg.scheme == "rk4":
        k1 = packed_rhs(y, state.t)
        k2 = packed_rhs(y + 0.5 * dt * k1, state.t + 0.5 * dt)
        k3 = packed_rhs(y + 0.5 * dt * k2, state.t + 0.5 * dt)
        k4 = packed_rhs(y + dt * k3, state.t + dt)
        y_new = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    else:
        y_new = y + dt * packed_rhs(y, state.t)

    U_new = y_new[nb:]
    if not np.all(np.isfinite(U_new)):
        raise StabilityError(
            f"grid amplitudes went non-finite at t = {state.t + dt:.6g}; reduce dt"
        )
    new_bank = bank.copy()
    if nb:
        flat = y_new[:nb]
        if not np.all(np.isfinite(flat)):
            pos = 0
            for k in new_bank.keys():
                size = len(k[0]) * cfg.m
                if not np.all(np.isfinite(flat[pos : pos + size])):
                    raise StabilityError(
                        f"memory chain {k} went non-finite at "
                        f"t = {state.t + dt:.6g}; reduce dt"
                    )
                pos += size
        new_bank.unpack(flat)
    return CoarseState(t=state.t + dt, U=U_new, bank=new_bank)


def run_macro(
    cfg: ModelConfig,
    forcing,
    U0,
    t_end: float,
    record_every: int = 1,
    forcing_is_white: bool = False,
):
    """Run a coarse model from t = 0, recording every k-th step.

    Returns (times, U history, final state).  The bank is carried along but
    only the final instant's bank is returned.
    """
    check_scheme_legal(cfg.scheme, forcing_is_white)
    if t_end <= 0.0:
        raise ConfigError(f"need t_end > 0, got {t_end}")
    state = init_state(cfg, U0)
    n_steps = int(round(t_end / cfg.dt))
    times = [0.0]
    history = [state.U.copy()]
    for k in range(n_steps):
        state = macro_step(state, cfg, forcing)
        if (k + 1) % record_every == 0 or k + 1 == n_steps:
            times.append(state.t)
            history.append(state.U.copy())
    return np.asarray(times), np.asarray(history), state
