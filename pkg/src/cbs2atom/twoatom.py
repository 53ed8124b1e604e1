"""Two coupled driven atoms: the 15-dimensional generator and its expansions.

The mean values of all products of operators of two two-level atoms close
under a 15-component vector

    Q = (<sigma_2>, <sigma_1>, <sigma_1 (x) sigma_2>),

where each single-atom block is (lowering, raising, inversion) and the
correlation block is the row-major Kronecker product (atom-1 index slow).
Its equation of motion is ``dQ/dt = (A + V) Q + drive`` with a
block-triangular drift ``A`` and a far-field photon-exchange coupling ``V``
proportional to the complex amplitude ``T = 1.5j * gamma * exp(-1j*x) / x``
(``x`` the interatomic distance in units of the inverse wavenumber).

``V`` splits into four channels, identified by which atom contributes the
raising operator and whether the coupling enters with ``T`` or its
conjugate.  The channels are tagged ``"12"``, ``"21"``, ``"12*"``, ``"21*"``
and every perturbative quantity in this module is a mapping from the sorted
tuple of channel tags (the coupling monomial) to its coefficient vector, so
that configuration averaging downstream reduces to selecting monomials.

All solves here are brute force on the explicit 6/9/15-dimensional blocks;
the module is the ground truth against which the single-atom closed forms
are validated.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from cbs2atom.atom import (
    DELTA_MINUS,
    DELTA_PLUS,
    N1,
    N2,
    AtomDriveParams,
    BlochSystem,
    build,
    g0_vectors,
)
from cbs2atom.linalg import DEGENERACY_TOL, PoleProximityError
from cbs2atom.residues import (
    Chain,
    GreenFactor,
    embed_first_slot,
    embed_second_slot,
    expand_chain,
    integrate_chains,
    integrate_pole_sum,
)

#: The four coupling channels: "jk" transfers excitation via the raising
#: operator of atom j and the lowering operator of atom k; a trailing "*"
#: marks the conjugate-amplitude channel.
COUPLING_TAGS = ("12", "12*", "21", "21*")

#: Coupling monomials surviving the configuration average (see the
#: disorder module): the background channel pairs "12" with "21*", the
#: interference channel pairs "12" with "12*".
LADDER_MONOMIAL = ("12", "21*")
CROSSED_MONOMIAL = ("12", "12*")

_E1 = np.array([1.0, 0.0, 0.0])
_E2 = np.array([0.0, 1.0, 0.0])

#: A tagged vector maps a coupling monomial (sorted tuple of channel tags)
#: to a complex coefficient vector; the represented quantity is the sum of
#: ``amplitude(monomial) * vector`` over all entries.
TaggedVector = dict


def merge_monomials(a: tuple, b: tuple) -> tuple:
    """Combine two coupling monomials into one sorted key."""
    return tuple(sorted(a + b))


def tagged_total(tagged: TaggedVector, dim: int) -> np.ndarray:
    """Plain (untagged) sum of a tagged vector's entries."""
    out = np.zeros(dim, dtype=complex)
    for vec in tagged.values():
        out = out + vec
    return out


def _tagged_add(into: TaggedVector, key: tuple, value: np.ndarray) -> None:
    if key in into:
        into[key] = into[key] + value
    else:
        into[key] = value


def _map_tagged(matrix: np.ndarray, tagged: TaggedVector) -> TaggedVector:
    return {key: matrix @ vec for key, vec in tagged.items()}


def _couple_tagged(blocks, tagged: TaggedVector) -> TaggedVector:
    """Apply one tagged family of coupling blocks, extending each monomial."""
    out: TaggedVector = {}
    for tag, matrix in blocks.items():
        for mono, vec in tagged.items():
            _tagged_add(out, merge_monomials(mono, (tag,)), matrix @ vec)
    return out


@dataclass(frozen=True)
class ScatteringConfig:
    """Geometry of one fixed two-atom configuration.

    Positions are measured in units of the inverse laser wavenumber, so
    the interatomic separation is directly the dimensionless retardation
    parameter ``x`` and laser phases are plain dot products with the unit
    propagation direction ``k_hat``.
    """

    r1: np.ndarray
    r2: np.ndarray
    k_hat: np.ndarray = (0.0, 0.0, 1.0)
    gamma: float = 1.0

    def __post_init__(self) -> None:
        for name in ("r1", "r2", "k_hat"):
            vec = np.asarray(getattr(self, name), dtype=float)
            if vec.shape != (3,):
                raise ValueError(f"{name} must be a 3-vector")
            object.__setattr__(self, name, vec)
        if abs(np.linalg.norm(self.k_hat) - 1.0) > 1e-9:
            raise ValueError("k_hat must be a unit vector")
        if not (self.gamma > 0):
            raise ValueError("gamma must be positive")
        if self.separation <= 0.0:
            raise ValueError("atoms must sit at distinct positions")
        if self.separation < 10.0:
            warnings.warn(
                "separation below ten wavenumber units: the far-field "
                "single-photon-exchange coupling is not a good model here",
                stacklevel=2,
            )

    @property
    def separation(self) -> float:
        """Dimensionless interatomic distance ``x``."""
        return float(np.linalg.norm(np.asarray(self.r1) - np.asarray(self.r2)))

    @property
    def coupling(self) -> complex:
        """Far-field exchange amplitude ``1.5j * gamma * exp(-1j*x) / x``."""
        x = self.separation
        return 1.5j * self.gamma * np.exp(-1j * x) / x

    @property
    def phase1(self) -> float:
        """Laser propagation phase at atom 1."""
        return float(self.k_hat @ self.r1)

    @property
    def phase2(self) -> float:
        """Laser propagation phase at atom 2."""
        return float(self.k_hat @ self.r2)

    @property
    def phase_difference(self) -> float:
        """Phase mismatch ``k_hat . (r1 - r2)`` entering the interference channel."""
        return self.phase1 - self.phase2

    @classmethod
    def from_separation(cls, x: float, *, gamma: float = 1.0,
                        k_hat=(0.0, 0.0, 1.0), direction=(1.0, 0.0, 0.0),
                        origin=(0.0, 0.0, 0.0)) -> "ScatteringConfig":
        """Place atom 1 at ``origin`` and atom 2 at ``origin + x*direction``."""
        origin = np.asarray(origin, dtype=float)
        step = np.asarray(direction, dtype=float)
        norm = np.linalg.norm(step)
        if norm == 0.0:
            raise ValueError("direction must be nonzero")
        return cls(r1=origin, r2=origin + (x / norm) * step, k_hat=np.asarray(k_hat, dtype=float), gamma=gamma)


@dataclass(frozen=True, eq=False)
class TwoAtomGenerator:
    """Assembled drift, drive and tagged coupling blocks of the 15-system.

    Immutable after construction; all derived blocks are cached.  The
    single-atom (6) block is ordered atom 2 first, matching the layout of
    the 15-vector documented in the module docstring.
    """

    config: ScatteringConfig
    atom1: BlochSystem
    atom2: BlochSystem
    coupling: complex

    def amplitude(self, tag: str) -> complex:
        """Coupling amplitude of one channel: ``T`` or its conjugate."""
        return np.conj(self.coupling) if tag.endswith("*") else self.coupling

    def monomial_amplitude(self, monomial: tuple) -> complex:
        out = 1.0 + 0.0j
        for tag in monomial:
            out *= self.amplitude(tag)
        return out

    # -- drift / drive blocks -------------------------------------------------

    @cached_property
    def bloch_block(self) -> np.ndarray:
        """6x6 uncoupled part: direct sum of the two Bloch generators."""
        out = np.zeros((6, 6), dtype=complex)
        out[:3, :3] = self.atom2.M
        out[3:, 3:] = self.atom1.M
        return out

    @cached_property
    def correlation_block(self) -> np.ndarray:
        """9x9 drift of the pair correlations: Kronecker sum of the generators."""
        eye = np.eye(3)
        return np.kron(self.atom1.M, eye) + np.kron(eye, self.atom2.M)

    @cached_property
    def correlation_feed(self) -> np.ndarray:
        """9x6 coupling of the single-atom means into the correlation block."""
        out = np.zeros((9, 6), dtype=complex)
        out[:, :3] = np.kron(self.atom1.L.reshape(3, 1), np.eye(3))
        out[:, 3:] = np.kron(np.eye(3), self.atom2.L.reshape(3, 1))
        return out

    @cached_property
    def drive(self) -> np.ndarray:
        """Inhomogeneous 15-vector; the folded identity component lives here."""
        out = np.zeros(15, dtype=complex)
        out[:3] = self.atom2.L
        out[3:6] = self.atom1.L
        return out

    @cached_property
    def dense_drift(self) -> np.ndarray:
        """Full 15x15 drift matrix (coupling excluded)."""
        out = np.zeros((15, 15), dtype=complex)
        out[:6, :6] = self.bloch_block
        out[6:, :6] = self.correlation_feed
        out[6:, 6:] = self.correlation_block
        return out

    # -- tagged coupling blocks ----------------------------------------------

    @cached_property
    def pair_to_single(self) -> dict:
        """6x9 blocks feeding pair correlations back into the Bloch equations."""
        t = self.coupling
        tc = np.conj(t)
        blocks = {tag: np.zeros((6, 9), dtype=complex) for tag in COUPLING_TAGS}
        blocks["12"][:3] = 2j * t * np.kron(_E2, DELTA_PLUS)
        blocks["21"][3:] = 2j * t * np.kron(DELTA_PLUS, _E2)
        blocks["12*"][3:] = -2j * tc * np.kron(DELTA_MINUS, _E1)
        blocks["21*"][:3] = -2j * tc * np.kron(_E1, DELTA_MINUS)
        return blocks

    @cached_property
    def single_to_pair(self) -> dict:
        """9x6 blocks sourcing pair correlations from the single-atom means."""
        t = self.coupling
        tc = np.conj(t)
        blocks = {tag: np.zeros((9, 6), dtype=complex) for tag in COUPLING_TAGS}
        blocks["12"][:, :3] = 2j * t * np.kron(N1.reshape(3, 1), DELTA_PLUS)
        blocks["21"][:, 3:] = 2j * t * np.kron(DELTA_PLUS, N1.reshape(3, 1))
        blocks["12*"][:, 3:] = -2j * tc * np.kron(DELTA_MINUS, N2.reshape(3, 1))
        blocks["21*"][:, :3] = -2j * tc * np.kron(N2.reshape(3, 1), DELTA_MINUS)
        return blocks

    @cached_property
    def pair_to_pair(self) -> dict:
        """9x9 blocks coupling the pair correlations among themselves."""
        t = self.coupling
        tc = np.conj(t)
        return {
            "12": -2.0 * t * np.kron(DELTA_MINUS, DELTA_PLUS),
            "21": -2.0 * t * np.kron(DELTA_PLUS, DELTA_MINUS),
            "12*": -2.0 * tc * np.kron(DELTA_MINUS, DELTA_PLUS),
            "21*": -2.0 * tc * np.kron(DELTA_PLUS, DELTA_MINUS),
        }

    @cached_property
    def dense_coupling(self) -> np.ndarray:
        """Debug path: the summed coupling assembled as a dense 15x15 matrix."""
        out = np.zeros((15, 15), dtype=complex)
        for tag in COUPLING_TAGS:
            out[:6, 6:] += self.pair_to_single[tag]
            out[6:, :6] += self.single_to_pair[tag]
            out[6:, 6:] += self.pair_to_pair[tag]
        return out

    # -- resolvents -----------------------------------------------------------

    @cached_property
    def correlation_eigenvalues(self) -> np.ndarray:
        """Eigenvalues of the pair-correlation drift (all eigenvalue sums)."""
        e1 = self.atom1.eigenvalues
        e2 = self.atom2.eigenvalues
        return np.add.outer(e1, e2).ravel()

    def single_green(self, z: complex = 0.0) -> np.ndarray:
        """6x6 resolvent ``(z - M_bloch)^{-1}``, block-diagonal per atom."""
        out = np.zeros((6, 6), dtype=complex)
        out[:3, :3] = self.atom2.green(z)
        out[3:, 3:] = self.atom1.green(z)
        return out

    def pair_green(self, z: complex = 0.0) -> np.ndarray:
        """9x9 resolvent ``(z - M_corr)^{-1}`` by dense solve."""
        gap = np.min(np.abs(z - self.correlation_eigenvalues))
        if gap < DEGENERACY_TOL * self.config.gamma:
            raise PoleProximityError(f"z={z} too close to a correlation eigenvalue")
        return np.linalg.solve(z * np.eye(9) - self.correlation_block, np.eye(9, dtype=complex))


def assemble(config: ScatteringConfig, drive: AtomDriveParams,
             coupling: complex | None = None) -> TwoAtomGenerator:
    """Build the generator for one configuration under a common laser drive.

    ``drive`` describes the laser at the coordinate origin; each atom gets
    the extra propagation phase of its position.  ``coupling`` overrides
    the geometric exchange amplitude (diagnostics: scaling checks and the
    decoupled limit).
    """
    if abs(drive.gamma - config.gamma) > 1e-12 * config.gamma:
        raise ValueError("drive and configuration disagree on the decay rate")
    atom1 = build(AtomDriveParams(rabi=drive.rabi, delta=drive.delta, gamma=drive.gamma,
                                  phase=drive.phase + config.phase1))
    atom2 = build(AtomDriveParams(rabi=drive.rabi, delta=drive.delta, gamma=drive.gamma,
                                  phase=drive.phase + config.phase2))
    t = config.coupling if coupling is None else complex(coupling)
    return TwoAtomGenerator(config=config, atom1=atom1, atom2=atom2, coupling=t)


def exact_steady_state(gen: TwoAtomGenerator) -> np.ndarray:
    """Nonperturbative stationary 15-vector ``-(A+V)^{-1} drive``."""
    full = gen.dense_drift + gen.dense_coupling
    state = np.linalg.solve(full, -gen.drive)
    residual = np.linalg.norm(full @ state + gen.drive)
    if residual > 1e-11 * (1.0 + np.linalg.norm(gen.drive)):
        raise ArithmeticError(f"steady-state solve left residual {residual:g}")
    return state


@dataclass(frozen=True)
class OrderedSolution:
    """Stationary solution split by coupling order and monomial.

    ``bloch[n]`` holds the order-n single-atom block (6-vectors),
    ``correlation[n]`` the order-n pair block (9-vectors); both are tagged
    vectors keyed by coupling monomials of degree exactly n.
    """

    bloch: tuple
    correlation: tuple

    @property
    def max_order(self) -> int:
        return len(self.bloch) - 1

    def bloch_total(self, order: int) -> np.ndarray:
        return tagged_total(self.bloch[order], 6)

    def correlation_total(self, order: int) -> np.ndarray:
        return tagged_total(self.correlation[order], 9)

    def full_order(self, order: int) -> TaggedVector:
        """Order-n 15-vectors, merging the Bloch and correlation blocks."""
        out: TaggedVector = {}
        for mono, vec in self.bloch[order].items():
            entry = np.zeros(15, dtype=complex)
            entry[:6] = vec
            _tagged_add(out, mono, entry)
        for mono, vec in self.correlation[order].items():
            entry = np.zeros(15, dtype=complex)
            entry[6:] = vec
            _tagged_add(out, mono, entry)
        return out

    def truncated_state(self) -> np.ndarray:
        """Plain 15-vector summed over all computed orders."""
        out = np.zeros(15, dtype=complex)
        for n in range(self.max_order + 1):
            out[:6] += self.bloch_total(n)
            out[6:] += self.correlation_total(n)
        return out


def perturbative_orders(gen: TwoAtomGenerator, max_order: int = 2) -> OrderedSolution:
    """Expand the stationary state in powers of the exchange coupling.

    Realizes the block recurrences: each new Bloch order is driven by the
    previous correlation order through the pair-to-single blocks, and each
    new correlation order collects the single-to-pair and pair-to-pair
    feeds plus the same-order Bloch feed-through.
    """
    g_single = gen.single_green(0.0)
    g_pair = gen.pair_green(0.0)

    x0 = np.concatenate([gen.atom2.steady, gen.atom1.steady])
    bloch = [{(): x0}]
    correlation = [{(): g_pair @ (gen.correlation_feed @ x0)}]
    for _ in range(max_order):
        xn = _map_tagged(g_single, _couple_tagged(gen.pair_to_single, correlation[-1]))
        source = _couple_tagged(gen.single_to_pair, bloch[-1])
        for mono, vec in _couple_tagged(gen.pair_to_pair, correlation[-1]).items():
            _tagged_add(source, mono, vec)
        for mono, vec in xn.items():
            _tagged_add(source, mono, gen.correlation_feed @ vec)
        bloch.append(xn)
        correlation.append(_map_tagged(g_pair, source))
    return OrderedSolution(bloch=tuple(bloch), correlation=tuple(correlation))


# -- regression initial conditions ---------------------------------------------


def _raising_product(bloch_part: np.ndarray, corr_part: np.ndarray, include_unit: bool) -> np.ndarray:
    """15-vector of ``<sigma_2^+ Q>`` built from one (x, y) order pair.

    Multiplying the basis by the raising operator of atom 2 routes every
    component through the same 3x3 coupler; the operator-identity pieces
    contribute the constant ``N1`` only where the identity expectation
    enters (the zeroth order and the atom-1 block).
    """
    out = np.zeros(15, dtype=complex)
    out[:3] = 1j * (DELTA_MINUS @ bloch_part[:3])
    if include_unit:
        out[:3] += N1
    out[3:6] = corr_part[[1, 4, 7]]
    out[6:] = np.kron(np.eye(3), 1j * DELTA_MINUS) @ corr_part + np.kron(bloch_part[3:], N1)
    return out


def regression_initials(gen: TwoAtomGenerator, orders: OrderedSolution) -> tuple:
    """Connected initial conditions of the dipole correlation, per order.

    Returns one tagged 15-vector per order n: the operator product
    ``<sigma_2^+ Q>`` at order n minus all mean-product splittings
    ``<sigma_2^+>^(p) <Q>^(q)`` with p + q = n.
    """
    out = []
    for n in range(orders.max_order + 1):
        tagged: TaggedVector = {}
        monos = set(orders.bloch[n]) | set(orders.correlation[n])
        for mono in monos:
            xg = orders.bloch[n].get(mono, np.zeros(6, dtype=complex))
            yg = orders.correlation[n].get(mono, np.zeros(9, dtype=complex))
            _tagged_add(tagged, mono, _raising_product(xg, yg, include_unit=(n == 0)))
        for p in range(n + 1):
            full_q = orders.full_order(n - p)
            for mono_p, xp in orders.bloch[p].items():
                amp = xp[1]
                for mono_q, qvec in full_q.items():
                    _tagged_add(tagged, merge_monomials(mono_p, mono_q), -amp * qvec)
        out.append(tagged)
    return tuple(out)


def regression_initial_exact(gen: TwoAtomGenerator, steady: np.ndarray) -> np.ndarray:
    """Nonperturbative connected initial condition from a full steady state."""
    product = _raising_product(steady[:6], steady[6:], include_unit=True)
    return product - steady[1] * steady


# -- resolvent expansion -------------------------------------------------------


def resolvent_apply(gen: TwoAtomGenerator, z: complex, seed: TaggedVector,
                    max_order: int = 2) -> list:
    """Apply the order-by-order resolvent of ``z - A - V`` to a tagged seed.

    Returns ``[R0 seed, R1 seed, ..., Rmax seed]`` where the order-n term
    carries n extra coupling insertions.  The zeroth order solves the
    block-triangular drift alone; each further order routes the previous
    result once through the coupling blocks and resolves again.
    """
    g_single = gen.single_green(z)
    g_pair = gen.pair_green(z)

    def resolve(tagged: TaggedVector) -> TaggedVector:
        out: TaggedVector = {}
        for mono, vec in tagged.items():
            x_part = g_single @ vec[:6]
            y_part = g_pair @ (gen.correlation_feed @ x_part + vec[6:])
            out[mono] = np.concatenate([x_part, y_part])
        return out

    def couple(tagged: TaggedVector) -> TaggedVector:
        out: TaggedVector = {}
        for tag in COUPLING_TAGS:
            c_block = gen.pair_to_single[tag]
            h_block = gen.single_to_pair[tag]
            x_block = gen.pair_to_pair[tag]
            for mono, vec in tagged.items():
                entry = np.concatenate([c_block @ vec[6:], h_block @ vec[:6] + x_block @ vec[6:]])
                _tagged_add(out, merge_monomials(mono, (tag,)), entry)
        return out

    levels = [resolve(seed)]
    for _ in range(max_order):
        levels.append(resolve(couple(levels[-1])))
    return levels


# -- fixed-configuration spectra -----------------------------------------------


@dataclass(frozen=True)
class FixedConfigSpectra:
    """Order-two dipole-correlation spectra of one fixed configuration.

    ``autocorrelation`` is the Laplace-transformed connected correlation
    of atom 2's raising and lowering operators (component 1 of the
    15-vector), ``exchange`` the cross-atom component (component 4,
    without the interference phase factor).  ``*_parts[k]`` isolates the
    contribution with k coupling insertions in the resolvent and 2-k in
    the initial condition; the merged accessors sum them.  Elastic weights
    are products of stationary means of total coupling order two.
    """

    nu: np.ndarray
    autocorrelation_parts: tuple
    exchange_parts: tuple
    elastic_autocorrelation: dict
    elastic_exchange: dict

    def _merged(self, parts) -> dict:
        out: dict = {}
        for part in parts:
            for mono, arr in part.items():
                if mono in out:
                    out[mono] = out[mono] + arr
                else:
                    out[mono] = arr.copy()
        return out

    @property
    def autocorrelation(self) -> dict:
        return self._merged(self.autocorrelation_parts)

    @property
    def exchange(self) -> dict:
        return self._merged(self.exchange_parts)


def fixed_config_spectrum(gen: TwoAtomGenerator, nus) -> FixedConfigSpectra:
    """Second-order inelastic correlation spectra and elastic weights.

    At every frequency on the grid the Laplace image of the connected
    correlation is assembled from the three resolvent/initial-condition
    splittings; all results stay tagged by coupling monomial (every
    surviving monomial has total degree two).
    """
    nus = np.asarray(nus, dtype=float)
    orders = perturbative_orders(gen, 2)
    inits = regression_initials(gen, orders)

    auto_parts = tuple({} for _ in range(3))
    exch_parts = tuple({} for _ in range(3))
    for i, nu in enumerate(nus):
        z = -1j * nu
        for k in range(3):
            top = resolvent_apply(gen, z, inits[2 - k], max_order=k)[k]
            for mono, vec in top.items():
                for store, idx in ((auto_parts[k], 0), (exch_parts[k], 3)):
                    if mono not in store:
                        store[mono] = np.zeros(len(nus), dtype=complex)
                    store[mono][i] += vec[idx]

    elastic_auto: dict = {}
    elastic_exch: dict = {}
    for n in range(3):
        for mono_p, xp in orders.bloch[n].items():
            for mono_q, xq in orders.bloch[2 - n].items():
                key = merge_monomials(mono_p, mono_q)
                _tagged_add(elastic_auto, key, xp[1] * xq[0])
                _tagged_add(elastic_exch, key, xp[1] * xq[3])
    return FixedConfigSpectra(
        nu=nus,
        autocorrelation_parts=auto_parts,
        exchange_parts=exch_parts,
        elastic_autocorrelation=elastic_auto,
        elastic_exchange=elastic_exch,
    )


# -- radiated intensity --------------------------------------------------------


def intensity(gen: TwoAtomGenerator, direction) -> float:
    """Stationary radiated intensity toward a unit ``direction``.

    Sum of both excited-state populations plus the interference cross
    terms with their geometric phases.
    """
    direction = np.asarray(direction, dtype=float)
    s = exact_steady_state(gen)
    phase = np.exp(1j * direction @ (gen.config.r1 - gen.config.r2))
    value = 0.5 * (1.0 + s[2]) + 0.5 * (1.0 + s[5]) + s[9] * phase + s[7] * np.conj(phase)
    return float(value.real)


def double_scattering_intensity(gen: TwoAtomGenerator, direction,
                                orders: OrderedSolution) -> dict:
    """Coupling-order-two part of the intensity, tagged by monomial.

    The population terms lose their constant offsets at nonzero order, so
    each contribution is half the inversion correction plus the phased
    cross-atom coherences.
    """
    direction = np.asarray(direction, dtype=float)
    phase = np.exp(1j * direction @ (gen.config.r1 - gen.config.r2))
    out: dict = {}
    for mono, vec in orders.bloch[2].items():
        _tagged_add(out, mono, 0.5 * (vec[2] + vec[5]))
    for mono, vec in orders.correlation[2].items():
        _tagged_add(out, mono, vec[3] * phase + vec[1] * np.conj(phase))
    return out


# -- explicit closed-form transcriptions (oracles for the recurrences) ---------


def _pair_integral(system_one: BlochSystem, system_two: BlochSystem,
                   sign_one: int, sign_two: int, seed: np.ndarray) -> np.ndarray:
    """Residue-evaluated ``integral dw/2pi G1(s1*i*w) (x) G2(s2*i*w)`` on a seed."""
    ops = (
        GreenFactor(embed_first_slot(system_one.decomp), sign_one),
        GreenFactor(embed_second_slot(system_two.decomp), sign_two),
    )
    ps = expand_chain(Chain(ops=ops, seed=seed))
    return np.asarray(
        integrate_pole_sum(ps, "w1", gamma=system_one.params.gamma).constant()
    )


def pair_resolvent_integral(gen: TwoAtomGenerator, z: complex = 0.0,
                            orientation: int = +1) -> np.ndarray:
    """Pair-correlation resolvent via the frequency-integral representation.

    Splits ``(z - M_corr)^{-1}`` into a line integral over single-atom
    resolvents at ``z/2 +- i w``; ``orientation`` selects which slot gets
    the upper sign (both choices must agree).  Cross-validates
    :meth:`TwoAtomGenerator.pair_green`.
    """
    if abs(complex(z).real) > 1e-12:
        raise ValueError("integral representation requires an imaginary argument")
    if orientation not in (+1, -1):
        raise ValueError("orientation must be +1 or -1")
    half = complex(z) / 2.0
    ops = (
        GreenFactor(embed_first_slot(gen.atom1.decomp), orientation, half),
        GreenFactor(embed_second_slot(gen.atom2.decomp), -orientation, half),
    )
    ps = expand_chain(Chain(ops=ops))
    return np.asarray(integrate_pole_sum(ps, "w1", gamma=gen.config.gamma).constant())


def single_first_order_explicit(gen: TwoAtomGenerator) -> tuple:
    """First-order Bloch corrections as the printed two-term chains.

    Returns tagged 3-vectors ``(atom2_part, atom1_part)``: each atom is
    pushed by the field scattered from the other's stationary coherence,
    once co-rotating and once counter-rotating.
    """
    t = gen.coupling
    tc = np.conj(t)
    s1, s2 = gen.atom1.steady, gen.atom2.steady
    g1, g2 = gen.atom1.green(0.0), gen.atom2.green(0.0)
    atom2_part = {
        ("12",): 2j * t * s1[1] * (g2 @ (DELTA_PLUS @ s2)),
        ("21*",): -2j * tc * s1[0] * (g2 @ (DELTA_MINUS @ s2)),
    }
    atom1_part = {
        ("21",): 2j * t * s2[1] * (g1 @ (DELTA_PLUS @ s1)),
        ("12*",): -2j * tc * s2[0] * (g1 @ (DELTA_MINUS @ s1)),
    }
    return atom2_part, atom1_part


def pair_first_order_explicit(gen: TwoAtomGenerator,
                              printed_final_term: bool = False) -> TaggedVector:
    """First-order pair correlations as the printed eight-term expression.

    Four algebraic terms (stationary coherence times first-order response)
    plus four frequency integrals over opposite-sign resolvent pairs.  The
    eighth term appears in its source with the second resolvent argument
    at the same sign as the first, which closes the contour away from all
    poles and yields exactly zero; ``printed_final_term=True`` reproduces
    that literal reading, the default restores the opposite-sign pairing
    that matches the recurrences.
    """
    t = gen.coupling
    tc = np.conj(t)
    a1, a2 = gen.atom1, gen.atom2
    s1, s2 = a1.steady, a2.steady
    g1, g2 = a1.green(0.0), a2.green(0.0)
    g0_first_1, g0_second_1 = g0_vectors(a1)
    g0_first_2, g0_second_2 = g0_vectors(a2)

    out: TaggedVector = {}
    _tagged_add(out, ("21*",), -2j * tc * s1[0] * np.kron(s1, g2 @ (DELTA_MINUS @ s2)))
    _tagged_add(out, ("12",), 2j * t * s1[1] * np.kron(s1, g2 @ (DELTA_PLUS @ s2)))
    _tagged_add(out, ("21",), 2j * t * s2[1] * np.kron(g1 @ (DELTA_PLUS @ s1), s2))
    _tagged_add(out, ("12*",), -2j * tc * s2[0] * np.kron(g1 @ (DELTA_MINUS @ s1), s2))

    _tagged_add(out, ("21*",),
                -2j * tc * _pair_integral(a1, a2, +1, -1, np.kron(g0_first_1, DELTA_MINUS @ s2)))
    _tagged_add(out, ("12",),
                2j * t * _pair_integral(a1, a2, -1, +1, np.kron(g0_second_1, DELTA_PLUS @ s2)))
    _tagged_add(out, ("21",),
                2j * t * _pair_integral(a1, a2, +1, -1, np.kron(DELTA_PLUS @ s1, g0_second_2)))
    final_sign = -1 if printed_final_term else +1
    _tagged_add(out, ("12*",),
                -2j * tc * _pair_integral(a1, a2, -1, final_sign, np.kron(DELTA_MINUS @ s1, g0_first_2)))
    return out


def single_second_order_explicit(gen: TwoAtomGenerator) -> TaggedVector:
    """Squared-magnitude part of the second-order atom-2 Bloch correction.

    The printed eight terms: four products of stationary factors with
    double-response chains, four frequency integrals pairing a first-atom
    spectral factor with a second-atom response chain.  Monomials with two
    equal tags (squared amplitudes) are not part of this transcription.
    """
    t = gen.coupling
    tt = t * np.conj(t)
    a1, a2 = gen.atom1, gen.atom2
    d1, d2 = a1.decomp, a2.decomp
    gamma = gen.config.gamma
    s1, s2 = a1.steady, a2.steady
    g1, g2 = a1.green(0.0), a2.green(0.0)
    g0_first_1, g0_second_1 = g0_vectors(a1)
    g0_first_2, g0_second_2 = g0_vectors(a2)

    out: TaggedVector = {}
    _tagged_add(out, LADDER_MONOMIAL,
                4.0 * tt * s1[1] * s1[0] * (g2 @ (DELTA_MINUS @ (g2 @ (DELTA_PLUS @ s2)))))
    _tagged_add(out, LADDER_MONOMIAL,
                4.0 * tt * s1[1] * s1[0] * (g2 @ (DELTA_PLUS @ (g2 @ (DELTA_MINUS @ s2)))))
    _tagged_add(out, CROSSED_MONOMIAL,
                4.0 * tt * s2[0] * (g1 @ (DELTA_MINUS @ s1))[1] * (g2 @ (DELTA_PLUS @ s2)))
    _tagged_add(out, ("21", "21*"),
                4.0 * tt * s2[1] * (g1 @ (DELTA_PLUS @ s1))[0] * (g2 @ (DELTA_MINUS @ s2)))

    def paired(mono, scalar_chain, vector_ops, vector_seed):
        value = np.array([
            integrate_chains(
                [scalar_chain, Chain(ops=vector_ops, seed=vector_seed, extract=comp)],
                ("w1",), gamma=gamma)
            for comp in range(3)
        ])
        _tagged_add(out, mono, 4.0 * tt * value)

    paired(LADDER_MONOMIAL,
           Chain(ops=(GreenFactor(d1, -1),), seed=g0_second_1, extract=0),
           (g2, DELTA_MINUS, GreenFactor(d2, +1), DELTA_PLUS), s2)
    paired(LADDER_MONOMIAL,
           Chain(ops=(GreenFactor(d1, +1),), seed=g0_first_1, extract=1),
           (g2, DELTA_PLUS, GreenFactor(d2, -1), DELTA_MINUS), s2)
    paired(CROSSED_MONOMIAL,
           Chain(ops=(GreenFactor(d1, +1), DELTA_MINUS), seed=s1, extract=1),
           (g2, DELTA_PLUS, GreenFactor(d2, -1)), g0_first_2)
    paired(("21", "21*"),
           Chain(ops=(GreenFactor(d1, +1), DELTA_PLUS), seed=s1, extract=0),
           (g2, DELTA_MINUS, GreenFactor(d2, -1)), g0_second_2)
    return out
