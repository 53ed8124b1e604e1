"""Single driven two-level atom.

Bloch generator, steady state, probe-response vectors and the closed-form
spectral correlation functions of resonance fluorescence: the inelastic
spectrum (Mollow triplet), the first-order probe-scattering amplitudes and
the probe-intensity response.  All frequencies are measured from the laser
frequency, in units of the decay rate ``gamma``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from cbs2atom.linalg import (
    DEGENERACY_TOL,
    DegenerateSpectrumError,
    PoleProximityError,
    SpectralDecomposition,
    eigen_decompose,
    green,
    green_direct,
)

#: Couplers of the Bloch vector to a weak perturbation of the drive:
#: ``DELTA_MINUS`` multiplies the co-rotating probe amplitude, ``DELTA_PLUS``
#: the counter-rotating one, in the linearized Bloch equation.
DELTA_MINUS = np.array([[0, 0, -0.5j], [0, 0, 0], [0, 1j, 0]], dtype=complex)
DELTA_PLUS = np.array([[0, 0, 0], [0, 0, 0.5j], [-1j, 0, 0]], dtype=complex)

#: Inhomogeneous parts of the two-level operator products:
#: sigma^+ (sigma^-, sigma^+, sigma^z) = i*DELTA_MINUS @ (...) + N1 * identity
#: and (sigma^-, sigma^+, sigma^z) sigma^- = -i*DELTA_PLUS @ (...) + N2 * identity.
N1 = np.array([0.5, 0, 0], dtype=complex)
N2 = np.array([0, 0.5, 0], dtype=complex)

#: Swap of the two coherence components; ``conj_swap`` is built on it.
_SWAP = np.array([[0, 1, 0], [1, 0, 0], [0, 0, 1]], dtype=complex)


def conj_swap(vec: np.ndarray) -> np.ndarray:
    """Map a Bloch-type vector to its conjugate counterpart.

    Physically: complex-conjugate every expectation value and swap the two
    coherence components, which exchanges raising and lowering operators.
    The map is an involution bit for bit (conjugation and a permutation are
    both exact), and it converts each closed-form response chain into its
    mirrored chain (resolvent arguments conjugated, couplers swapped).
    """
    return _SWAP @ np.conj(np.asarray(vec))


@dataclass(frozen=True)
class AtomDriveParams:
    """Drive parameters of one atom.

    All rates share one frequency unit; with the default ``gamma=1`` that
    unit is the decay rate itself, which is the convention used throughout
    the library and its tests.

    Attributes
    ----------
    rabi:
        Rabi amplitude at the coordinate origin, >= 0.
    delta:
        Laser-atom detuning (laser minus atomic frequency).
    gamma:
        Dipole decay rate (the excited-state population decays at
        ``2*gamma``); sets the scale of all numerical thresholds.
    phase:
        Propagation phase of the laser at the atom's position, so the local
        drive amplitude is ``rabi * exp(1j * phase)``.
    """

    rabi: float
    delta: float = 0.0
    gamma: float = 1.0
    phase: float = 0.0

    def __post_init__(self) -> None:
        if not (self.gamma > 0):
            raise ValueError("gamma must be positive")
        if self.rabi < 0:
            raise ValueError("rabi must be non-negative")
        for name in ("rabi", "delta", "gamma", "phase"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    @property
    def local_rabi(self) -> complex:
        """Position-dependent complex drive amplitude."""
        return self.rabi * np.exp(1j * self.phase)


@dataclass(frozen=True)
class BlochSystem:
    """Drift generator, drive vector and spectral decomposition of one atom.

    The Bloch vector (lowering, raising, inversion) obeys
    ``d<s>/dt = M @ <s> + L``.
    """

    params: AtomDriveParams
    M: np.ndarray = field(repr=False)
    L: np.ndarray = field(repr=False)

    @cached_property
    def decomp(self) -> SpectralDecomposition:
        return eigen_decompose(self.M, gamma=self.params.gamma)

    @cached_property
    def _decomp_or_none(self) -> SpectralDecomposition | None:
        try:
            return self.decomp
        except DegenerateSpectrumError:
            return None

    @cached_property
    def eigenvalues(self) -> np.ndarray:
        """Generator eigenvalues (available even at degenerate points)."""
        return np.linalg.eigvals(self.M)

    @cached_property
    def steady(self) -> np.ndarray:
        """Stationary Bloch vector, the solution of ``M s + L = 0``."""
        return np.linalg.solve(self.M, -self.L)

    def green(self, z: complex) -> np.ndarray:
        """Resolvent ``(z - M)^{-1}``.

        Uses the spectral decomposition when one exists; at (numerically)
        defective parameter points — where the resolvent itself is still
        perfectly regular away from the spectrum — it falls back to a dense
        solve.
        """
        if np.min(np.abs(z - self.eigenvalues)) < DEGENERACY_TOL * self.params.gamma:
            raise PoleProximityError(f"z={z} too close to an eigenvalue")
        dec = self._decomp_or_none
        if dec is not None:
            return green(dec, z)
        return green_direct(self.M, z)


def build(params: AtomDriveParams) -> BlochSystem:
    """Assemble the Bloch system for the given drive parameters."""
    g, d = params.gamma, params.delta
    om = params.local_rabi
    M = np.array(
        [
            [-g + 1j * d, 0.0, -0.5j * om],
            [0.0, -g - 1j * d, 0.5j * np.conj(om)],
            [-1j * np.conj(om), 1j * om, -2.0 * g],
        ],
        dtype=complex,
    )
    L = np.array([0.0, 0.0, -2.0 * g], dtype=complex)
    return BlochSystem(params=params, M=M, L=L)


def steady_state(sys: BlochSystem) -> np.ndarray:
    """Stationary Bloch vector of the driven atom."""
    return sys.steady


def g0_vectors(sys: BlochSystem) -> tuple[np.ndarray, np.ndarray]:
    """Connected initial conditions of the two dipole correlation functions.

    ``g0_2`` seeds ``<sigma^+(0) s(tau)> - <sigma^+><s(tau)>`` (positive
    frequency branch), ``g0_1`` the conjugate branch; both vanish for an
    undriven atom.  They follow from the two-level operator products
    evaluated in the steady state.
    """
    s = sys.steady
    g0_2 = 1j * (DELTA_MINUS @ s) + N1 - s[1] * s
    g0_1 = -1j * (DELTA_PLUS @ s) + N2 - s[0] * s
    return g0_1, g0_2


def mollow_p0(sys: BlochSystem, nu: float) -> float:
    """Inelastic single-atom fluorescence spectrum (Mollow triplet).

    Normalized so the integral over all frequencies equals the total
    inelastically scattered intensity
    ``<sigma^+ sigma^-> - |<sigma^->|^2``.
    """
    g0_1, g0_2 = g0_vectors(sys)
    val = (sys.green(-1j * nu) @ g0_2)[0] + (sys.green(1j * nu) @ g0_1)[1]
    return float(val.real) / (2.0 * np.pi)


def delta_sigma_first(sys: BlochSystem, sign: int, omega: float) -> np.ndarray:
    """First-order steady-state response to a probe sideband.

    ``sign=-1`` gives the co-rotating response ``G(-i w) DELTA_MINUS G L``
    (the harmonic oscillating with the probe), ``sign=+1`` the
    counter-rotating one ``G(+i w) DELTA_PLUS G L``.
    """
    if sign not in (+1, -1):
        raise ValueError("sign must be +1 or -1")
    coupler = DELTA_PLUS if sign == 1 else DELTA_MINUS
    return sys.green(sign * 1j * omega) @ (coupler @ sys.steady)


def delta_sigma_second(sys: BlochSystem, omega: float) -> np.ndarray:
    """Second-order (intensity-like) steady-state probe response.

    Sum of the two time orderings of one co-rotating and one
    counter-rotating probe interaction, returned at zero net frequency.
    """
    g0 = sys.green(0.0)
    return g0 @ (DELTA_PLUS @ delta_sigma_first(sys, -1, omega)) + g0 @ (
        DELTA_MINUS @ delta_sigma_first(sys, +1, omega)
    )


@dataclass(frozen=True)
class ProbeResponseSet:
    """Closed-form response vectors seeding the spectral correlation functions.

    The ``*_2`` vectors belong to the positive-frequency correlation branch,
    the ``*_1`` vectors to the conjugate branch (obtained by
    :func:`conj_swap`).  ``minus``/``plus`` carry one co-/counter-rotating
    probe interaction, ``second`` carries one of each.
    """

    nu: float
    minus_2: np.ndarray
    plus_2: np.ndarray
    second_2: np.ndarray
    minus_1: np.ndarray
    plus_1: np.ndarray
    second_1: np.ndarray


def probe_vectors(sys: BlochSystem, nu: float) -> ProbeResponseSet:
    """All six probe-response vectors at probe detuning ``nu``.

    The branch-2 vectors are explicit chains of resolvents, couplers and
    steady-state factors; the branch-1 set is generated mechanically by the
    conjugate-swap map (an exact involution).
    """
    s = sys.steady
    dm = delta_sigma_first(sys, -1, nu)   # G(-i nu) DELTA_MINUS G L
    dp = delta_sigma_first(sys, +1, nu)   # G(+i nu) DELTA_PLUS  G L
    ds2 = delta_sigma_second(sys, nu)

    minus_2 = 1j * (DELTA_MINUS @ dm) - dm * s[1] - s * dm[1]
    plus_2 = 1j * (DELTA_MINUS @ dp) - dp[1] * s - s[1] * dp
    second_2 = (
        1j * (DELTA_MINUS @ ds2)
        - s * ds2[1]
        - s[1] * ds2
        - dp[1] * dm
        - dm[1] * dp
    )
    return ProbeResponseSet(
        nu=nu,
        minus_2=minus_2,
        plus_2=plus_2,
        second_2=second_2,
        minus_1=conj_swap(plus_2),
        plus_1=conj_swap(minus_2),
        second_1=conj_swap(second_2),
    )


def p_plus(sys: BlochSystem, omega_p: float, nu: float) -> complex:
    """Amplitude correlation for emission at ``nu`` after absorbing a
    counter-rotating probe photon at ``omega_p``.

    Four-term closed form; combines one branch-2 and one branch-1 response
    of the same atom.
    """
    g0_1, g0_2 = g0_vectors(sys)
    pv = probe_vectors(sys, omega_p)
    t1 = (sys.green(1j * nu) @ (DELTA_PLUS @ (sys.green(1j * (nu - omega_p)) @ g0_1)))[1]
    t2 = (sys.green(1j * nu) @ pv.plus_1)[1]
    t3 = (sys.green(1j * (omega_p - nu)) @ (DELTA_PLUS @ (sys.green(-1j * nu) @ g0_2)))[0]
    t4 = (sys.green(1j * (omega_p - nu)) @ pv.plus_2)[0]
    return complex(t1 + t2 + t3 + t4)


def p_minus(sys: BlochSystem, omega_p: float, nu: float) -> complex:
    """Amplitude correlation for emission at ``nu`` after absorbing a
    co-rotating probe photon at ``omega_p``.

    Equals ``conj(p_plus(sys, omega_p, nu))`` — same arguments; asserted by
    tests rather than implemented through it.
    """
    g0_1, g0_2 = g0_vectors(sys)
    pv = probe_vectors(sys, omega_p)
    t1 = (sys.green(-1j * nu) @ (DELTA_MINUS @ (sys.green(1j * (omega_p - nu)) @ g0_2)))[0]
    t2 = (sys.green(-1j * nu) @ pv.minus_2)[0]
    t3 = (sys.green(1j * (nu - omega_p)) @ (DELTA_MINUS @ (sys.green(1j * nu) @ g0_1)))[1]
    t4 = (sys.green(1j * (nu - omega_p)) @ pv.minus_1)[1]
    return complex(t1 + t2 + t3 + t4)


def p2(sys: BlochSystem, omega_p: float, nu: float) -> float:
    """Spectral redistribution cross-section of a weak probe at ``omega_p``:
    the second-order (one co- plus one counter-rotating interaction)
    correction to the emission spectrum at ``nu``.
    """
    g0_1, g0_2 = g0_vectors(sys)
    pv = probe_vectors(sys, omega_p)
    gm = sys.green(-1j * nu)
    inner = (
        pv.second_2
        + DELTA_MINUS @ (sys.green(1j * (omega_p - nu)) @ (DELTA_PLUS @ (gm @ g0_2)))
        + DELTA_MINUS @ (sys.green(1j * (omega_p - nu)) @ pv.plus_2)
        + DELTA_PLUS @ (sys.green(-1j * (nu + omega_p)) @ (DELTA_MINUS @ (gm @ g0_2)))
        + DELTA_PLUS @ (sys.green(-1j * (nu + omega_p)) @ pv.minus_2)
    )
    return float(2.0 * ((gm @ inner)[0]).real)
