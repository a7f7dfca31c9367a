"""Joint atom-field states in a truncated Fock space.

A :class:`CompositeState` is an ordered tuple of subsystem descriptors plus a
flat complex amplitude vector. The vector is row-major over the subsystem
dimensions with the *last* subsystem varying fastest, so reshaping it to
``state.dims`` gives a tensor with one axis per subsystem.

States are immutable; every function here returns a new state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import ClassVar, Iterable, Mapping, Sequence, Union

import numpy as np
from scipy.special import gammaln
from scipy.stats import poisson

from .errors import CapacityError, DomainError, ShapeError, TruncationError

#: Largest joint dimension ``tensor`` will build.
MAX_DIMENSION = 1 << 24

#: Number of top Fock levels inspected by :func:`tail_mass`.
TAIL_LEVELS = 3

#: Default admissible tail mass for protocol states.
DEFAULT_TAIL_TOLERANCE = 1e-10


@dataclass(frozen=True)
class Atom3:
    """Three-level lambda atom: upper level ``a``, degenerate lower levels ``b``, ``c``."""

    name: str = field(default="", compare=False)
    levels: ClassVar[tuple[str, ...]] = ("a", "b", "c")
    dim: ClassVar[int] = 3


@dataclass(frozen=True)
class Atom2:
    """Two-level probe atom: lower level ``f``, upper level ``e``."""

    name: str = field(default="", compare=False)
    levels: ClassVar[tuple[str, ...]] = ("f", "e")
    dim: ClassVar[int] = 2


@dataclass(frozen=True)
class CavityMode:
    """Single cavity mode truncated to Fock levels ``0..n_max``.

    ``tail_tolerance`` is the largest probability the protocol code accepts
    on the top :data:`TAIL_LEVELS` Fock levels before declaring the
    truncation inadequate.
    """

    n_max: int
    tail_tolerance: float = field(default=DEFAULT_TAIL_TOLERANCE, compare=False)
    name: str = field(default="C", compare=False)

    def __post_init__(self):
        if int(self.n_max) != self.n_max or self.n_max < 1:
            raise DomainError(f"n_max must be an integer >= 1, got {self.n_max!r}")
        if not (self.tail_tolerance >= 0.0):
            raise DomainError(f"tail_tolerance must be non-negative, got {self.tail_tolerance!r}")

    @property
    def dim(self) -> int:
        return self.n_max + 1

    @property
    def levels(self) -> tuple[int, ...]:
        return tuple(range(self.n_max + 1))


Subsystem = Union[Atom3, Atom2, CavityMode]


def is_atom(sub: Subsystem) -> bool:
    return isinstance(sub, (Atom3, Atom2))


@dataclass(frozen=True)
class PhysicalParams:
    """Physical constants of the dispersive lambda interaction.

    All frequencies in rad/s and ``tau`` in seconds. Level frequencies are
    optional; when given they must reproduce ``delta`` for both lower levels.
    """

    g: float
    tau: float
    delta: float
    omega_a: float | None = None
    omega_b: float | None = None
    omega_c: float | None = None
    omega: float | None = None

    def __post_init__(self):
        if self.delta == 0:
            raise DomainError("detuning delta must be non-zero (dispersive limit)")
        freqs = (self.omega_a, self.omega_b, self.omega_c, self.omega)
        if any(f is not None for f in freqs):
            if any(f is None for f in freqs):
                raise DomainError("give all of omega_a, omega_b, omega_c, omega or none of them")
            scale = max(abs(f) for f in freqs) or 1.0
            for lower in (self.omega_b, self.omega_c):
                if abs(self.omega_a - lower - self.omega - self.delta) > 1e-9 * scale:
                    raise DomainError("level frequencies inconsistent with delta = omega_a - omega_lower - omega")

    @property
    def phi(self) -> float:
        """Photon-number phase per passage, ``2 g^2 tau / delta``."""
        return 2.0 * self.g**2 * self.tau / self.delta

    @classmethod
    def for_phase(cls, phi: float, g: float, delta: float) -> "PhysicalParams":
        """Interaction time giving the requested ``phi`` for fixed ``g`` and ``delta``."""
        if g == 0:
            raise DomainError("coupling g must be non-zero")
        return cls(g=g, tau=phi * delta / (2.0 * g**2), delta=delta)


@dataclass(frozen=True, eq=False)
class CompositeState:
    """Pure (possibly unnormalized) state of an ordered list of subsystems."""

    subsystems: tuple[Subsystem, ...]
    amps: np.ndarray
    diagnostics: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        subs = tuple(self.subsystems)
        amps = np.array(self.amps, dtype=np.complex128).reshape(-1)
        expected = math.prod(s.dim for s in subs)
        if amps.size != expected:
            raise ShapeError(f"amplitude vector has length {amps.size}, subsystems need {expected}")
        if not np.all(np.isfinite(amps)):
            raise DomainError("state amplitudes must be finite")
        amps.setflags(write=False)
        object.__setattr__(self, "subsystems", subs)
        object.__setattr__(self, "amps", amps)
        object.__setattr__(self, "diagnostics", MappingProxyType(dict(self.diagnostics)))

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(s.dim for s in self.subsystems)

    @property
    def dim(self) -> int:
        return self.amps.size

    def tensor(self) -> np.ndarray:
        """Amplitudes reshaped to one axis per subsystem (read-only view)."""
        return self.amps.reshape(self.dims)

    def norm2(self) -> float:
        return float(np.vdot(self.amps, self.amps).real)

    def normalized(self) -> "CompositeState":
        n2 = self.norm2()
        if n2 <= 0.0:
            raise DomainError("cannot normalize the zero vector")
        return self.replace(amps=self.amps / math.sqrt(n2))

    def replace(self, *, amps=None, subsystems=None, diagnostics=None) -> "CompositeState":
        return CompositeState(
            self.subsystems if subsystems is None else tuple(subsystems),
            self.amps if amps is None else amps,
            self.diagnostics if diagnostics is None else diagnostics,
        )

    def with_diagnostics(self, **extra: float) -> "CompositeState":
        return self.replace(diagnostics={**self.diagnostics, **extra})

    def index_of(self, name: str) -> int:
        for i, sub in enumerate(self.subsystems):
            if sub.name == name:
                return i
        raise ShapeError(f"no subsystem named {name!r} in {[s.name for s in self.subsystems]}")

    def amplitude(self, *levels) -> complex:
        """Amplitude of a basis ket given one level (name or Fock number) per subsystem."""
        if len(levels) != len(self.subsystems):
            raise ShapeError("need one level per subsystem")
        idx = tuple(_level_index(sub, lv) for sub, lv in zip(self.subsystems, levels))
        return complex(self.tensor()[idx])

    def __repr__(self) -> str:
        names = ",".join(f"{type(s).__name__}({s.name})" for s in self.subsystems)
        return f"CompositeState([{names}], norm2={self.norm2():.6g})"


def _level_index(sub: Subsystem, level) -> int:
    if isinstance(sub, CavityMode):
        n = int(level)
        if n != level or not 0 <= n <= sub.n_max:
            raise DomainError(f"Fock level {level!r} outside 0..{sub.n_max}")
        return n
    try:
        return sub.levels.index(level)
    except ValueError:
        raise DomainError(f"level {level!r} not one of {sub.levels}") from None


def level_index(sub: Subsystem, level) -> int:
    """Position of a named level (or Fock number) in a subsystem's basis."""
    return _level_index(sub, level)


# -- constructors -----------------------------------------------------------


def fock_state(n: int, mode: CavityMode) -> CompositeState:
    if int(n) != n or not 0 <= n <= mode.n_max:
        raise DomainError(f"Fock level {n!r} outside 0..{mode.n_max}")
    amps = np.zeros(mode.dim, dtype=np.complex128)
    amps[int(n)] = 1.0
    return CompositeState((mode,), amps)


def coherent_amplitudes(alpha: complex, n_max: int) -> np.ndarray:
    """Untruncated-normalization coefficients ``exp(-|a|^2/2) a^n / sqrt(n!)`` for ``n <= n_max``."""
    alpha = complex(alpha)
    n = np.arange(n_max + 1)
    if alpha == 0:
        return (n == 0).astype(np.complex128)
    r = abs(alpha)
    log_mag = -0.5 * r * r + n * math.log(r) - 0.5 * gammaln(n + 1)
    return np.exp(log_mag) * np.exp(1j * math.atan2(alpha.imag, alpha.real) * n)


def required_n_max(mean_photons: float, tolerance: float) -> int:
    """Smallest cutoff whose Poisson tail above it is at most ``tolerance``."""
    if mean_photons == 0:
        return 1
    n = int(poisson.isf(tolerance, mean_photons)) if tolerance > 0 else 10**9
    while poisson.sf(n, mean_photons) > tolerance:
        n += 1
    while n > 1 and poisson.sf(n - 1, mean_photons) <= tolerance:
        n -= 1
    return max(n, 1)


def coherent_state(alpha: complex, mode: CavityMode) -> CompositeState:
    """Coherent state ``|alpha>`` truncated to ``mode`` and renormalized.

    Raises :class:`TruncationError` when the Poisson mass beyond ``n_max``
    exceeds ``mode.tail_tolerance``. The discarded mass is kept in
    ``diagnostics['discarded_mass']``.
    """
    alpha = complex(alpha)
    mu = abs(alpha) ** 2
    discarded = float(poisson.sf(mode.n_max, mu)) if mu > 0 else 0.0
    if discarded > mode.tail_tolerance:
        need = required_n_max(mu, mode.tail_tolerance)
        raise TruncationError(
            f"coherent state alpha={alpha} loses {discarded:.3g} beyond n_max={mode.n_max}; "
            f"need n_max >= {need}",
            tail=discarded,
            required_n_max=need,
        )
    c = coherent_amplitudes(alpha, mode.n_max)
    kept = float(np.vdot(c, c).real)
    return CompositeState((mode,), c / math.sqrt(kept), {"discarded_mass": discarded, "renormalization": 1.0 / math.sqrt(kept)})


def even_odd_state(alpha: complex, sign: int, mode: CavityMode) -> CompositeState:
    """Non-normalized ``|alpha> + sign |-alpha>`` built from coherent states."""
    if sign not in (1, -1):
        raise DomainError("sign must be +1 or -1")
    a = coherent_state(alpha, mode)
    b = coherent_state(-complex(alpha), mode)
    return CompositeState((mode,), a.amps + sign * b.amps)


def default_n_max(alpha: complex) -> int:
    """Cutoff sized for the displaced field ``|2 alpha>``: ``ceil(|2a|^2 + 6|2a| + 10)``."""
    r = 2.0 * abs(complex(alpha))
    return int(math.ceil(r * r + 6.0 * r + 10.0))


def atom_state(kind: Atom3 | Atom2, amplitudes: Mapping[str, complex] | str) -> CompositeState:
    """Atomic state from a level name or a ``{level: amplitude}`` mapping."""
    if isinstance(amplitudes, str):
        amplitudes = {amplitudes: 1.0}
    amps = np.zeros(kind.dim, dtype=np.complex128)
    for level, value in amplitudes.items():
        amps[_level_index(kind, level)] = value
    return CompositeState((kind,), amps)


def tensor(*states: CompositeState) -> CompositeState:
    """Tensor product in the given order (left factor is the slow index)."""
    if not states:
        raise DomainError("tensor needs at least one state")
    total = math.prod(s.dim for s in states)
    if total > MAX_DIMENSION:
        raise CapacityError(f"joint dimension {total} exceeds limit {MAX_DIMENSION}")
    amps = states[0].amps
    subs: tuple[Subsystem, ...] = states[0].subsystems
    for s in states[1:]:
        amps = np.kron(amps, s.amps)
        subs = subs + s.subsystems
    return CompositeState(subs, amps)


def permute(s: CompositeState, order: Sequence[int]) -> CompositeState:
    """Reorder subsystems; ``order[k]`` is the old position of new subsystem ``k``."""
    order = list(order)
    if sorted(order) != list(range(len(s.subsystems))):
        raise ShapeError(f"{order} is not a permutation of the subsystems")
    amps = np.transpose(s.tensor(), order).reshape(-1)
    return CompositeState(tuple(s.subsystems[i] for i in order), amps, s.diagnostics)


def insert(s: CompositeState, position: int, factor: CompositeState) -> CompositeState:
    """Tensor ``factor`` into ``s`` so that its first subsystem lands at ``position``."""
    n, k = len(s.subsystems), len(factor.subsystems)
    if not 0 <= position <= n:
        raise ShapeError(f"insert position {position} outside 0..{n}")
    joint = tensor(s, factor)
    order = list(range(position)) + list(range(n, n + k)) + list(range(position, n))
    return permute(joint, order)


def relabel(s: CompositeState, *names: str) -> CompositeState:
    """Rename the subsystems in order (kinds and amplitudes unchanged)."""
    if len(names) != len(s.subsystems):
        raise ShapeError("need one name per subsystem")
    subs = tuple(type(sub)(**{**_fields(sub), "name": nm}) for sub, nm in zip(s.subsystems, names))
    return s.replace(subsystems=subs)


def _fields(sub: Subsystem) -> dict:
    if isinstance(sub, CavityMode):
        return {"n_max": sub.n_max, "tail_tolerance": sub.tail_tolerance}
    return {}


# -- comparison and diagnostics ----------------------------------------------


def same_layout(a: CompositeState, b: CompositeState) -> bool:
    """True when both states have the same subsystem kinds and dimensions, in order."""
    return len(a.subsystems) == len(b.subsystems) and all(
        type(x) is type(y) and x.dim == y.dim for x, y in zip(a.subsystems, b.subsystems)
    )


def fidelity(a: CompositeState, b: CompositeState) -> float:
    """Squared overlap ``|<a|b>|^2`` of the normalized states."""
    if not same_layout(a, b):
        raise ShapeError("fidelity needs identical subsystem lists")
    na, nb = a.norm2(), b.norm2()
    if na <= 0 or nb <= 0:
        raise DomainError("fidelity of a zero vector is undefined")
    return float(abs(np.vdot(a.amps, b.amps)) ** 2 / (na * nb))


def _cavity_axis(s: CompositeState, cavity_index: int) -> CavityMode:
    if not 0 <= cavity_index < len(s.subsystems):
        raise ShapeError(f"subsystem index {cavity_index} out of range")
    sub = s.subsystems[cavity_index]
    if not isinstance(sub, CavityMode):
        raise ShapeError(f"subsystem {cavity_index} is {type(sub).__name__}, not a cavity")
    return sub


def fock_distribution(s: CompositeState, cavity_index: int) -> np.ndarray:
    """Photon-number probabilities of one cavity, summed over everything else."""
    _cavity_axis(s, cavity_index)
    p = np.abs(s.tensor()) ** 2
    axes = tuple(i for i in range(p.ndim) if i != cavity_index)
    return p.sum(axis=axes)


def tail_mass(s: CompositeState, cavity_index: int) -> float:
    """Probability on the top three Fock levels of the addressed cavity."""
    dist = fock_distribution(s, cavity_index)
    return float(dist[-TAIL_LEVELS:].sum())


def check_truncation(s: CompositeState, cavity_index: int, what: str = "state") -> float:
    """Return the tail mass relative to the norm, raising :class:`TruncationError` above tolerance."""
    mode = _cavity_axis(s, cavity_index)
    tail = tail_mass(s, cavity_index) / s.norm2()
    if tail > mode.tail_tolerance:
        raise TruncationError(
            f"{what}: tail mass {tail:.3g} on the top Fock levels exceeds "
            f"tolerance {mode.tail_tolerance:.3g} at n_max={mode.n_max}",
            tail=tail,
        )
    return tail


def reduced_density(s: CompositeState, keep: Iterable[int]) -> np.ndarray:
    """Reduced density matrix of the kept subsystems (in the given order), trace = norm2."""
    keep = list(keep)
    rest = [i for i in range(len(s.subsystems)) if i not in keep]
    t = np.transpose(s.tensor(), keep + rest)
    dk = math.prod(s.dims[i] for i in keep)
    m = t.reshape(dk, -1)
    return m @ m.conj().T


def split_product(s: CompositeState, keep: Sequence[int]) -> tuple[CompositeState, CompositeState, np.ndarray]:
    """Schmidt-split ``s`` into the kept subsystems and the rest.

    Returns the leading Schmidt vectors as normalized states (kept part,
    remainder) and the normalized Schmidt weights. For a product state the
    first weight is 1 and the split is exact up to a global phase.
    """
    keep = list(keep)
    rest = [i for i in range(len(s.subsystems)) if i not in keep]
    if not keep or not rest:
        raise ShapeError("split needs a non-empty kept set and a non-empty remainder")
    t = np.transpose(s.tensor(), keep + rest)
    dk = math.prod(s.dims[i] for i in keep)
    u, sv, vh = np.linalg.svd(t.reshape(dk, -1), full_matrices=False)
    weights = sv**2 / float((sv**2).sum())
    # fix the global phase so the largest kept amplitude is real positive
    lead = u[:, 0]
    k = int(np.argmax(np.abs(lead)))
    ph = lead[k] / abs(lead[k])
    left = CompositeState(tuple(s.subsystems[i] for i in keep), lead / ph)
    right = CompositeState(tuple(s.subsystems[i] for i in rest), vh[0] * ph)
    return left, right, weights
