"""End-to-end interaction-free measurement protocols and figures of merit."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .amplitude import (
    ConditioningError,
    MEASURE_ZERO,
    ModeSpace,
    PureState,
    explosion_measure,
    make_state,
)
from .optics import (
    Absorber,
    BeamSplitter,
    Circuit,
    OutcomeDistribution,
    build_mzi,
    measure,
    run_circuit,
)


@dataclass(frozen=True)
class EfficiencyReport:
    p_success: float
    p_explosion: float
    p_inconclusive: float

    @property
    def efficiency(self) -> float:
        """Share of conclusive runs ending in a safe detection; NaN when no
        run is conclusive."""
        conclusive = self.p_success + self.p_explosion
        if conclusive <= MEASURE_ZERO:
            return math.nan
        return self.p_success / conclusive

    @property
    def total(self) -> float:
        return self.p_success + self.p_explosion + self.p_inconclusive


def _check_unit(name, value, open_interval=False):
    lo_ok = value > 0 if open_interval else value >= 0
    hi_ok = value < 1 if open_interval else value <= 1
    if not (lo_ok and hi_ok):
        bounds = "(0, 1)" if open_interval else "[0, 1]"
        raise ValueError(f"{name} = {value} outside {bounds}")


# --- Elitzur-Vaidman ---------------------------------------------------------


def ev_single_shot(R: float = 0.5, object_t: complex | None = None) -> OutcomeDistribution:
    """One photon through a matched interferometer; D2 is the informative port."""
    _check_unit("R", R)
    circuit, _ = build_mzi(R, None, object_t)
    final, _ = run_circuit(circuit, circuit.input_state())
    return measure(final, circuit.detectors)


def ev_iterated(R: float) -> EfficiencyReport:
    """Repeat the single shot while D1 (inconclusive) clicks.

    Summing the geometric series over re-runs, each outcome's share is its
    single-shot probability divided by ``1 - P(D1)``.
    """
    _check_unit("R", R, open_interval=True)
    shot = ev_single_shot(R, 0.0)
    stop = 1.0 - shot["D1"]
    return EfficiencyReport(shot["D2"] / stop, shot.explosion_prob / stop, 0.0)


def ev_iterated_monte_carlo(R: float, trials: int, seed: int | None = 0) -> EfficiencyReport:
    """Sample the iterated protocol photon by photon."""
    _check_unit("R", R, open_interval=True)
    shot = ev_single_shot(R, 0.0)
    probs = np.array([shot["D1"], shot["D2"], shot.explosion_prob])
    probs = probs / probs.sum()
    rng = np.random.default_rng(seed)
    counts = np.zeros(3, dtype=np.int64)
    active = trials
    while active:
        draws = rng.choice(3, size=active, p=probs)
        counts[1:] += np.bincount(draws, minlength=3)[1:]
        active = int(np.count_nonzero(draws == 0))
    return EfficiencyReport(counts[1] / trials, counts[2] / trials, 0.0)


def efficiency_frontier(R_grid: Iterable[float]) -> list[tuple[float, float]]:
    return [(float(R), ev_iterated(R).efficiency) for R in R_grid]


def frontier_best(frontier: Sequence[tuple[float, float]]) -> tuple[float, float] | None:
    """Grid point with the highest efficiency (the small-R end)."""
    if not frontier:
        return None
    return max(frontier, key=lambda p: p[1])


# --- Zeno two-cavity scheme --------------------------------------------------


@dataclass(frozen=True)
class ZenoConfig:
    N: int
    object_present: bool = True
    object_t: complex = 0.0
    theta: float | None = None

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise ValueError(f"N = {self.N} must be a positive integer")
        if abs(complex(self.object_t)) > 1:
            raise ValueError("|object_t| must not exceed 1")
        if self.theta is None:
            object.__setattr__(self, "theta", math.pi / (2 * self.N))


@dataclass(frozen=True, eq=False)
class ZenoResult:
    report: EfficiencyReport
    trace: np.ndarray  # live amplitudes (left, right) after each cycle, row 0 = start
    final: PureState


def zeno_circuit(cfg: ZenoConfig) -> Circuit:
    space = ModeSpace(["left", "right"])
    coupler = BeamSplitter("coupler", "left", "right", math.sin(cfg.theta) ** 2)
    cycle = [(coupler,)]
    if cfg.object_present:
        cycle.append((Absorber("object", "right", cfg.object_t),))
    steps = cycle * cfg.N
    return Circuit(space, steps, {"left": "left", "right": "right"}, source="left")


def zeno_ifm(cfg: ZenoConfig) -> ZenoResult:
    """Photon starts in the left cavity and leaks by ``theta`` per cycle.

    Finding it in the left cavity at the end is the success signal; what
    the object absorbs is the explosion probability; the right cavity is
    inconclusive.
    """
    circuit = zeno_circuit(cfg)
    start = circuit.input_state()
    final, trajectory = run_circuit(circuit, start)
    per_cycle = 2 if cfg.object_present else 1
    trace = np.array([start.amplitudes] + [s.amplitudes for s in trajectory[per_cycle - 1 :: per_cycle]])
    out = measure(final, circuit.detectors)
    report = EfficiencyReport(out["left"], out.explosion_prob, out["right"])
    return ZenoResult(report, trace, final)


# --- Paul-Pavicic single cavity ----------------------------------------------


@dataclass(frozen=True)
class CavityConfig:
    """``r`` is the amplitude reflectivity of both cavity mirrors; the
    incoming pulse spans ``M`` cavity round trips."""

    r: float
    M: int
    object_present: bool = False

    def __post_init__(self):
        if not 0.0 <= self.r < 1.0:
            raise ValueError(f"mirror reflectivity r = {self.r} outside [0, 1)")
        if int(self.M) != self.M or self.M < 1:
            raise ValueError(f"M = {self.M} must be a positive integer")


@dataclass(frozen=True)
class CavityOutcome:
    p_reflect: float
    p_transmit: float
    p_absorb: float

    def __iter__(self):
        return iter((self.p_reflect, self.p_transmit, self.p_absorb))


def paul_pavicic(cfg: CavityConfig) -> CavityOutcome:
    """Resonant Fabry-Perot cavity probed by a flat pulse of ``M`` time bins.

    Bin ``j`` carries input amplitude ``1/sqrt(M)``. The intracavity field
    ``c`` (just inside the front mirror) obeys ``c_j = tau a_j + r^2 c_{j-1}``
    on resonance, the reflected output is ``i r (a_j - tau c_{j-1})`` and the
    transmitted output ``tau c_j``. Output bins are orthogonal, so their
    probabilities add. After the pulse, the stored field rings down into
    reflection and transmission in the ratio ``1 : r^2``.

    An opaque object inside absorbs everything that enters, so the cavity
    reduces to its front mirror.
    """
    r, M = cfg.r, int(cfg.M)
    tau = math.sqrt(1.0 - r * r)
    a = 1.0 / math.sqrt(M)
    if cfg.object_present:
        return CavityOutcome(r * r, 0.0, tau * tau)
    c = 0.0
    p_reflect = p_transmit = 0.0
    for _ in range(M):
        refl = r * (a - tau * c)
        c = tau * a + r * r * c
        p_reflect += refl * refl
        p_transmit += (tau * c) ** 2
    # field r*c is left heading back to the front mirror
    ring = (tau * r * c) ** 2 / (1.0 - r**4)
    p_reflect += ring
    p_transmit += r * r * ring
    return CavityOutcome(p_reflect, p_transmit, 0.0)


# --- negative-result measurements --------------------------------------------


def negative_result_update(state: PureState, covered: Iterable[str]) -> tuple[PureState, float]:
    """Condition ``state`` on a detector covering ``covered`` seeing nothing.

    Returns the renormalized state and the probability ``p_null`` of the
    null result.
    """
    covered = list(covered)
    idx = state.space.indices(covered)
    if not covered:
        raise ValueError("the detector must cover at least one mode")
    if len(set(idx)) == state.space.size:
        raise ValueError("detector covers every mode: the null result is impossible")
    before = state.live_probability
    amps = np.array(state.amplitudes)
    amps[idx] = 0.0
    after = float(np.sum(np.abs(amps) ** 2))
    if after <= MEASURE_ZERO or before <= MEASURE_ZERO:
        raise ConditioningError("conditioning on measure-zero event: the null result cannot occur")
    return PureState(state.space, amps / math.sqrt(after)), after / before


def uniform_state(space: ModeSpace) -> PureState:
    return PureState(space, np.full(space.size, 1.0 / math.sqrt(space.size), dtype=complex))


@dataclass(frozen=True, eq=False)
class DickeResult:
    e_before: float
    e_after: float
    n_basis: int
    coefficients: np.ndarray
    captured_weight: float

    @property
    def resolved(self) -> bool:
        """True when the truncated basis holds at least 99% of the projected state."""
        return self.captured_weight >= 0.99


def half_box_overlaps(n_basis: int) -> np.ndarray:
    """``<n| P_right |1>`` for box eigenstates ``sqrt(2) sin(n pi x)`` on [0, 1],
    with ``P_right`` the projector onto the dark half x > 1/2."""
    out = np.empty(n_basis)
    for k in range(n_basis):
        n = k + 1
        if n == 1:
            out[k] = 0.5
        else:
            out[k] = (
                math.sin((n + 1) * math.pi / 2) / ((n + 1) * math.pi)
                - math.sin((n - 1) * math.pi / 2) / ((n - 1) * math.pi)
            )
    return out


def dicke_energy_shift(n_basis: int) -> DickeResult:
    """Ground state of a unit box, with the illuminated half x < 1/2 cut away.

    Energies are in units of the ground energy (``E_n = n^2``). The cut
    state has a jump at the centre, so ``e_after`` keeps growing with
    ``n_basis``; ``captured_weight`` tells how much of the cut state the
    truncated basis represents.
    """
    if n_basis < 1:
        raise ValueError("n_basis must be at least 1")
    c = half_box_overlaps(n_basis)
    weight = float(c @ c)
    n = np.arange(1, n_basis + 1)
    e_after = float((c * c) @ (n * n) / weight)
    return DickeResult(1.0, e_after, n_basis, c / math.sqrt(weight), weight / 0.5)


# --- irradiation -------------------------------------------------------------


@dataclass(frozen=True)
class IrradiationResult:
    absorbed: float
    detected: float

    @property
    def defined(self) -> bool:
        return self.absorbed > 0 and self.detected > 0

    @property
    def value(self) -> float:
        """Absorbed probability per informative detection (NaN if undefined)."""
        return self.absorbed / self.detected if self.defined else math.nan


def irradiation_metric(backend: str, object_t: complex = 0.0, *, R: float = 0.5, N: int = 10) -> IrradiationResult:
    """Ledger measure per conclusive detection for the EV or Zeno scheme."""
    if backend == "ev":
        out = ev_single_shot(R, object_t)
        return IrradiationResult(out.explosion_prob, out["D2"])
    if backend == "zeno":
        res = zeno_ifm(ZenoConfig(N, True, object_t))
        return IrradiationResult(res.report.p_explosion, res.report.p_success)
    raise ValueError(f"unknown irradiation backend {backend!r}; use 'ev' or 'zeno'")
