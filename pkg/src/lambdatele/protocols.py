"""EPR-pair preparation and post-selected teleportation with lambda atoms.

Both pipelines are assembled from :mod:`operators` and :mod:`measurement`
only. Subsystem order is atoms first, then the probe atom, then the cavity
last.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, NamedTuple, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import DomainError
from .fockspace import (
    DEFAULT_TAIL_TOLERANCE,
    Atom2,
    Atom3,
    CavityMode,
    CompositeState,
    atom_state,
    check_truncation,
    coherent_amplitudes,
    coherent_state,
    default_n_max,
    fidelity,
    insert,
    reduced_density,
    relabel,
    split_product,
    tail_mass,
    tensor,
)
from .measurement import Branch, enumerate_joint, measure, post_select, sample
from .operators import (
    IDENTITY_2,
    R4_SWAP,
    R_ROTATION,
    apply_atomic_unitary,
    dispersive_lambda_evolve,
    displace,
    jc_evolve,
)

PHI_PI = math.pi


class BellVariant(str, Enum):
    PSI_PLUS = "psi-plus"
    PSI_MINUS = "psi-minus"
    PHI_MINUS = "phi-minus"
    PHI_PLUS = "phi-plus"

    @property
    def injection_sign(self) -> int:
        """Sign of the coherent amplitude injected after the dispersive passes."""
        return 1 if self in (BellVariant.PSI_PLUS, BellVariant.PHI_MINUS) else -1

    @property
    def rotated(self) -> bool:
        return self in (BellVariant.PHI_MINUS, BellVariant.PHI_PLUS)


_BELL_AMPS = {
    # (b1 b2, b1 c2, c1 b2, c1 c2)
    BellVariant.PSI_PLUS: (1, 0, 0, 1),
    BellVariant.PSI_MINUS: (1, 0, 0, -1),
    BellVariant.PHI_MINUS: (0, 1, -1, 0),
    BellVariant.PHI_PLUS: (0, 1, 1, 0),
}


def bell_state(variant: BellVariant | str, names: tuple[str, str] = ("A1", "A2")) -> CompositeState:
    variant = BellVariant(variant)
    t = np.zeros((3, 3), dtype=np.complex128)
    bb, bc, cb, cc = _BELL_AMPS[variant]
    t[1, 1], t[1, 2], t[2, 1], t[2, 2] = bb, bc, cb, cc
    return CompositeState((Atom3(names[0]), Atom3(names[1])), t.reshape(-1) / math.sqrt(2.0))


def bell_basis() -> dict[BellVariant, CompositeState]:
    """The four ideal two-atom Bell kets, normalized, keyed by variant."""
    return {v: bell_state(v) for v in BellVariant}


# -- probe pulse ---------------------------------------------------------------


def nearest_photon_number(alpha: complex) -> int:
    """Integer nearest the mean photon number of the displaced field ``|2 alpha>``."""
    return int(math.floor(4.0 * abs(complex(alpha)) ** 2 + 0.5))


def probe_pulse_heuristic(alpha: complex) -> float:
    """Probe interaction ``gt = pi / (2 sqrt(nbar))`` with ``nbar = round(|2 alpha|^2)``.

    The probe sees the displaced field ``|2 alpha>``, so its mean photon
    number ``|2 alpha|^2`` sets the Rabi angle, not ``|alpha|^2``.
    """
    if complex(alpha) == 0:
        raise DomainError("the probe heuristic is undefined at alpha = 0")
    nbar = nearest_photon_number(alpha)
    if nbar == 0:
        raise DomainError(f"|2 alpha|^2 = {4 * abs(alpha) ** 2:.3g} rounds to zero photons")
    return math.pi / (2.0 * math.sqrt(nbar))


def chi_series(alpha: complex, gt: float, n_terms: int) -> tuple[np.ndarray, np.ndarray]:
    """Evaluate the probe-field kets term by term from their series.

    ``chi_f[n] = C_n cos(gt sqrt n)`` and
    ``chi_e[n] = -i C_{n+1} sin(gt sqrt(n+1))`` with ``C_n`` the Fock
    coefficients of ``|2 alpha>``. Independent of the propagators; used as
    an oracle and to report the residual ``||chi_f||^2``.
    """
    c = coherent_amplitudes(2.0 * complex(alpha), n_terms)
    n = np.arange(n_terms + 1)
    chi_f = c * np.cos(gt * np.sqrt(n))
    chi_e = -1j * c[1:] * np.sin(gt * np.sqrt(n[1:]))
    return chi_e, chi_f


# -- EPR preparation ------------------------------------------------------------


@dataclass(frozen=True)
class EprResult:
    variant: BellVariant
    alpha: complex
    gt: float
    n_max: int
    success_probability: float
    pair_state: CompositeState
    fidelity_to_ideal: float
    diagnostics: dict = field(default_factory=dict)


def _resolve_mode(alpha: complex, n_max: int | None, tail_tolerance: float) -> CavityMode:
    return CavityMode(default_n_max(alpha) if n_max is None else int(n_max), tail_tolerance)


def epr_stages(alpha: complex, probe_gt: float, variant: BellVariant | str = BellVariant.PSI_PLUS,
               n_max: int | None = None, tail_tolerance: float = DEFAULT_TAIL_TOLERANCE,
               names: tuple[str, str] = ("A1", "A2")) -> Iterator[tuple[str, CompositeState]]:
    """Yield ``(stage, state)`` for every step of the pair-preparation pipeline.

    Stages: ``initial`` (first atom and cavity), ``after_first``,
    ``second_added``, ``after_second``, ``after_injection``, ``after_probe``.
    Every state is checked against the cavity tail tolerance.
    """
    variant = BellVariant(variant)
    mode = _resolve_mode(alpha, n_max, tail_tolerance)
    first, second = names

    s = tensor(atom_state(Atom3(first), "b"), coherent_state(alpha, mode))
    discarded = s.diagnostics.get("discarded_mass", 0.0)
    yield "initial", s.with_diagnostics(discarded_mass=discarded)

    s = dispersive_lambda_evolve(s, 0, 1, PHI_PI)
    check_truncation(s, 1, "after first dispersive pass")
    yield "after_first", s

    s = insert(s, 1, atom_state(Atom3(second), "b"))
    yield "second_added", s

    s = dispersive_lambda_evolve(s, 1, 2, PHI_PI)
    check_truncation(s, 2, "after second dispersive pass")
    yield "after_second", s

    s = displace(s, 2, variant.injection_sign * complex(alpha))
    yield "after_injection", s

    s = insert(s, 2, atom_state(Atom2("A3"), "f"))
    s = jc_evolve(s, 2, 3, probe_gt)
    check_truncation(s, 3, "after probe atom")
    yield "after_probe", s.with_diagnostics(discarded_mass=discarded)


def epr_trace(alpha: complex, probe_gt: float | None = None, variant: BellVariant | str = BellVariant.PSI_PLUS,
              n_max: int | None = None, tail_tolerance: float = DEFAULT_TAIL_TOLERANCE) -> dict[str, CompositeState]:
    gt = probe_pulse_heuristic(alpha) if probe_gt is None else probe_gt
    return dict(epr_stages(alpha, gt, variant, n_max, tail_tolerance))


def prepare_epr(alpha: complex, probe_gt: float | None = None, variant: BellVariant | str = BellVariant.PSI_PLUS,
                n_max: int | None = None, tail_tolerance: float = DEFAULT_TAIL_TOLERANCE,
                names: tuple[str, str] = ("A1", "A2")) -> EprResult:
    """Prepare a Bell pair of lambda atoms, conditioned on detecting the probe excited.

    ``probe_gt=None`` uses :func:`probe_pulse_heuristic`. Raises
    :class:`~lambdatele.errors.TruncationError` if the cutoff is too small
    and :class:`~lambdatele.errors.PostSelectionError` if the excited
    probe outcome is impossible.
    """
    variant = BellVariant(variant)
    gt = probe_pulse_heuristic(alpha) if probe_gt is None else float(probe_gt)
    stages = dict(epr_stages(alpha, gt, variant, n_max, tail_tolerance, names))
    final = stages["after_probe"]
    p_e, s = post_select(final, 2, "e")
    if variant.rotated:
        s = apply_atomic_unitary(s, 1, R_ROTATION)
    pair, field_state, weights = split_product(s, [0, 1])
    ideal = bell_state(variant, names)
    rho = reduced_density(s, [0, 1]) / s.norm2()
    fid = float(np.real(np.vdot(ideal.amps, rho @ ideal.amps)))
    mode = final.subsystems[-1]
    diagnostics = {
        "tail_mass": max(tail_mass(st, len(st.subsystems) - 1) for st in stages.values()),
        "discarded_mass": float(final.diagnostics.get("discarded_mass", 0.0)),
        "jc_clipped_probability": float(final.diagnostics.get("jc_clipped_probability", 0.0)),
        "schmidt_residual": float(1.0 - weights[0]),
        "field_state": field_state,
    }
    return EprResult(variant, complex(alpha), gt, mode.n_max, p_e, pair, min(max(fid, 0.0), 1.0), diagnostics)


def _e3_probability(alpha: complex, gt: float, mode: CavityMode, tail_tolerance: float) -> float:
    final = dict(epr_stages(alpha, gt, BellVariant.PSI_PLUS, mode.n_max, tail_tolerance))["after_probe"]
    for b in measure(final, 2):
        if b.outcome == "e":
            return b.probability / final.norm2()
    return 0.0


class ProbeOptimum(NamedTuple):
    gt: float
    e3_probability: float
    chi_f_residual: float
    heuristic_gt: float
    heuristic_probability: float


def probe_pulse_optimize(alpha: complex, n_max: int | None = None, grid_points: int = 257,
                         xtol: float = 1e-6, tail_tolerance: float = DEFAULT_TAIL_TOLERANCE) -> ProbeOptimum:
    """Maximize the excited-probe probability of the pair pipeline over ``gt``.

    Grid search on ``(0, 2 pi / sqrt(nbar)]`` followed by golden-section
    refinement around the best grid point. ``chi_f_residual`` is
    ``||chi_f||^2`` of the series at the optimum: the chance that the probe
    stays in ``f`` when the field is ``|2 alpha>``.
    """
    heuristic = probe_pulse_heuristic(alpha)
    mode = _resolve_mode(alpha, n_max, tail_tolerance)
    upper = 4.0 * heuristic
    grid = np.linspace(upper / grid_points, upper, grid_points)
    values = np.array([_e3_probability(alpha, g, mode, tail_tolerance) for g in grid])
    k = int(np.argmax(values))
    lo = grid[k - 1] if k > 0 else grid[0] * 0.5
    hi = grid[k + 1] if k + 1 < grid.size else upper
    if lo < grid[k] < hi:
        res = minimize_scalar(
            lambda g: -_e3_probability(alpha, g, mode, tail_tolerance),
            bracket=(lo, grid[k], hi),
            method="golden",
            options={"xtol": xtol / max(grid[k], 1e-12)},
        )
        best_gt, best_p = float(res.x), float(-res.fun)
        if best_p < values[k]:
            best_gt, best_p = float(grid[k]), float(values[k])
    else:
        best_gt, best_p = float(grid[k]), float(values[k])
    _, chi_f = chi_series(alpha, best_gt, mode.n_max + 40)
    h_p = _e3_probability(alpha, heuristic, mode, tail_tolerance)
    if h_p > best_p:
        best_gt, best_p = heuristic, h_p
        _, chi_f = chi_series(alpha, best_gt, mode.n_max + 40)
    return ProbeOptimum(best_gt, best_p, float(np.vdot(chi_f, chi_f).real), heuristic, h_p)


# -- Bell checks ------------------------------------------------------------------


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    value: float


def bell_checks(tol: float = 1e-12) -> tuple[np.ndarray, list[CheckResult]]:
    """Gram matrix of the Bell basis and the rotation mapping identities."""
    basis = bell_basis()
    vs = list(basis.values())
    gram = np.array([[np.vdot(a.amps, b.amps) for b in vs] for a in vs])
    checks = [CheckResult("gram-identity", bool(np.max(np.abs(gram - np.eye(4))) <= tol),
                          float(np.max(np.abs(gram - np.eye(4)))))]
    for src, dst in ((BellVariant.PSI_PLUS, BellVariant.PHI_MINUS), (BellVariant.PSI_MINUS, BellVariant.PHI_PLUS)):
        mapped = apply_atomic_unitary(basis[src], 1, R_ROTATION)
        err = float(np.max(np.abs(mapped.amps - basis[dst].amps)))
        checks.append(CheckResult(f"R({src.value})={dst.value}", err <= tol, err))
    return gram, checks


# -- teleportation -------------------------------------------------------------------

ENUMERATE = "enumerate"
SAMPLE = "sample"


def correction_for(outcome: Sequence[str] | str) -> np.ndarray:
    """Receiver's correction after the sender detects ``outcome`` on her two atoms."""
    levels = tuple(outcome)
    if len(levels) != 2 or any(lv not in ("b", "c") for lv in levels):
        raise DomainError(f"outcome must be two levels from (b, c), got {outcome!r}")
    return IDENTITY_2 if levels[0] == levels[1] else R4_SWAP


@dataclass(frozen=True)
class TeleportConfig:
    zeta: complex
    xi: complex
    alpha: complex = 2.0
    probe_gt: float | None = None
    n_max: int | None = None
    mode: str = ENUMERATE
    seed: int | None = None
    tail_tolerance: float = DEFAULT_TAIL_TOLERANCE

    def __post_init__(self):
        norm = abs(complex(self.zeta)) ** 2 + abs(complex(self.xi)) ** 2
        if abs(norm - 1.0) > 1e-12:
            raise DomainError(f"|zeta|^2 + |xi|^2 = {norm!r}, expected 1")
        if self.mode not in (ENUMERATE, SAMPLE):
            raise DomainError(f"mode must be {ENUMERATE!r} or {SAMPLE!r}")
        if self.mode == SAMPLE and self.seed is None:
            raise DomainError("sample mode needs a seed")

    @property
    def gt(self) -> float:
        return probe_pulse_heuristic(self.alpha) if self.probe_gt is None else float(self.probe_gt)

    def input_state(self, name: str = "A4") -> CompositeState:
        return atom_state(Atom3(name), {"b": complex(self.zeta), "c": complex(self.xi)})


@dataclass(frozen=True)
class TeleportOutcome:
    outcome: str
    probability: float
    received_state: CompositeState
    corrected_state: CompositeState
    fidelity_before_correction: float
    fidelity_to_input: float
    correction: str
    residual_state: CompositeState
    schmidt_residual: float


@dataclass(frozen=True)
class SampledPath:
    e3_detected: bool
    outcome: str | None
    fidelity_to_input: float | None


@dataclass(frozen=True)
class TeleportResult:
    config: TeleportConfig
    gt: float
    n_max: int
    e3_probability: float
    epr_probability: float
    outcomes: list[TeleportOutcome]
    dispersive_outcome_probabilities: dict[str, float]
    sampled_path: SampledPath | None = None

    def outcome(self, label: str) -> TeleportOutcome:
        for o in self.outcomes:
            if o.outcome == label:
                return o
        raise KeyError(label)


def teleport_stages(config: TeleportConfig) -> Iterator[tuple[str, CompositeState]]:
    """Yield the sender-side states: ``initial``, ``after_passes``, ``after_injection``, ``after_probe``.

    Subsystems are (A1, A2, A4, C), with the probe A3 inserted before the
    cavity for the last stage. The shared pair is prepared first with a
    separate cavity; its success probability is in the ``initial`` state's
    diagnostics under ``epr_probability``.
    """
    gt = config.gt
    epr = prepare_epr(config.alpha, gt, BellVariant.PSI_PLUS, config.n_max, config.tail_tolerance, names=("A2", "A4"))
    pair = relabel(epr.pair_state, "A2", "A4")
    mode = _resolve_mode(config.alpha, config.n_max, config.tail_tolerance)
    s = tensor(relabel(config.input_state(), "A1"), pair, coherent_state(config.alpha, mode))
    yield "initial", s.with_diagnostics(epr_probability=epr.success_probability)

    s = dispersive_lambda_evolve(s, 0, 3, PHI_PI)
    s = dispersive_lambda_evolve(s, 1, 3, PHI_PI)
    check_truncation(s, 3, "after dispersive passes")
    yield "after_passes", s

    s = displace(s, 3, complex(config.alpha))
    yield "after_injection", s

    s = insert(s, 3, atom_state(Atom2("A3"), "f"))
    s = jc_evolve(s, 3, 4, gt)
    check_truncation(s, 4, "after probe atom")
    yield "after_probe", s


def _outcome_record(branch: Branch, target: CompositeState) -> TeleportOutcome:
    received, residual, weights = split_product(branch.state, [0])
    u = correction_for(branch.outcome)
    corrected = apply_atomic_unitary(received, 0, u)
    return TeleportOutcome(
        outcome=branch.outcome,
        probability=branch.probability,
        received_state=received,
        corrected_state=corrected,
        fidelity_before_correction=fidelity(received, target),
        fidelity_to_input=fidelity(corrected, target),
        correction="identity" if u is IDENTITY_2 else "R4",
        residual_state=residual,
        schmidt_residual=float(1.0 - weights[0]),
    )


def teleport(config: TeleportConfig) -> TeleportResult:
    """Teleport ``zeta|b> + xi|c>`` from A1 to A4, conditioned on the probe firing.

    All four detection outcomes on (A1, A2) are enumerated and corrected. In
    sample mode one trajectory is additionally drawn: first the probe
    outcome, then the sender's detection, each from its own seeded draw.
    """
    stages = dict(teleport_stages(config))
    target = config.input_state()

    passes = stages["after_passes"].normalized()
    dispersive = {b.outcome: b.probability for b in enumerate_joint(passes, [0, 1])}

    final = stages["after_probe"]
    probe_branches = measure(final, 3)
    p_e, conditioned = post_select(final, 3, "e")
    outcomes = [_outcome_record(b, target) for b in enumerate_joint(conditioned, [0, 1])]

    path = None
    if config.mode == SAMPLE:
        probe_seed, detect_seed = np.random.SeedSequence(config.seed).generate_state(2)
        norm = final.norm2()
        normalized = [Branch(b.labels, b.state, b.probability / norm) for b in probe_branches]
        drawn = sample(normalized, int(probe_seed))
        if drawn.outcome != "e":
            path = SampledPath(False, None, None)
        else:
            pick = sample([Branch(((0, o.outcome[0]), (1, o.outcome[1])), o.received_state, o.probability)
                           for o in outcomes], int(detect_seed))
            rec = next(o for o in outcomes if o.outcome == pick.outcome)
            path = SampledPath(True, rec.outcome, rec.fidelity_to_input)

    mode = final.subsystems[-1]
    return TeleportResult(
        config=config,
        gt=config.gt,
        n_max=mode.n_max,
        e3_probability=p_e,
        epr_probability=float(stages["initial"].diagnostics["epr_probability"]),
        outcomes=outcomes,
        dispersive_outcome_probabilities=dispersive,
        sampled_path=path,
    )
