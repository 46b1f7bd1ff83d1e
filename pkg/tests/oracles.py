"""Independent reference computations for the test suite.

Nothing here calls the stepper: circuits are turned into dense matrices
built from the element parameters alone, ABL probabilities come from the
sequential-measurement definition, and box-state energies from quadrature.
"""

import math

import numpy as np
from scipy import integrate

from ifm.optics import Absorber, BeamSplitter, Circuit, Mirror, PhaseShift
from ifm.amplitude import ModeSpace


def element_matrix(el, labels):
    n = len(labels)
    m = np.eye(n, dtype=complex)
    if isinstance(el, BeamSplitter):
        i, j = labels.index(el.mode_a), labels.index(el.mode_b)
        t, r = np.sqrt(1 - el.reflectivity), np.sqrt(el.reflectivity)
        m[i, i] = m[j, j] = t
        m[i, j] = m[j, i] = 1j * r
    elif isinstance(el, Mirror):
        m[labels.index(el.mode), labels.index(el.mode)] = 1j
    elif isinstance(el, PhaseShift):
        m[labels.index(el.mode), labels.index(el.mode)] = np.exp(1j * el.phase)
    elif isinstance(el, Absorber):
        m[labels.index(el.mode), labels.index(el.mode)] = el.transmission
    return m


def step_matrix(step, labels):
    m = np.eye(len(labels), dtype=complex)
    for el in step:
        m = element_matrix(el, labels) @ m
    return m


def dense_run(circuit, psi0):
    """Final live vector, absorbed probability per step and the live vector
    after every step."""
    labels = list(circuit.space.labels)
    v = np.array(psi0, dtype=complex)
    absorbed = []
    history = []
    for step in circuit.steps:
        lost = 0.0
        for el in step:
            if isinstance(el, Absorber):
                k = labels.index(el.mode)
                lost += (1 - abs(el.transmission) ** 2) * abs(v[k]) ** 2
        absorbed.append(lost)
        v = step_matrix(step, labels) @ v
        history.append(v.copy())
    return v, absorbed, history


def dense_outcomes(circuit, psi0):
    v, absorbed, _ = dense_run(circuit, psi0)
    labels = list(circuit.space.labels)
    p = np.abs(v) ** 2
    dets = {name: p[labels.index(mode)] for name, mode in circuit.detectors.items()}
    residual = p.sum() - sum(dets.values())
    return dets, sum(absorbed), residual


def random_circuit(rng, max_modes=6, max_steps=12):
    n = int(rng.integers(2, max_modes + 1))
    labels = [f"m{k}" for k in range(n)]
    steps = []
    count = 0
    for j in range(int(rng.integers(1, max_steps + 1))):
        free = list(rng.permutation(labels))
        step = []
        while free and rng.random() < 0.8:
            kind = rng.integers(4)
            count += 1
            if kind == 0 and len(free) >= 2:
                a, b = free.pop(), free.pop()
                step.append(BeamSplitter(f"bs{count}", a, b, float(rng.random())))
            elif kind == 1:
                step.append(Mirror(f"mir{count}", free.pop()))
            elif kind == 2:
                step.append(PhaseShift(f"ph{count}", free.pop(), float(rng.uniform(-np.pi, np.pi))))
            else:
                t = rng.random() * np.exp(1j * rng.uniform(0, 2 * np.pi))
                step.append(Absorber(f"abs{count}", free.pop(), complex(t)))
        steps.append(step)
    n_det = int(rng.integers(1, n + 1))
    dets = {f"D{k}": labels[k] for k in range(n_det)}
    return Circuit(ModeSpace(labels), steps, dets, source=labels[int(rng.integers(n))])


# --- composite ---------------------------------------------------------------

BS = lambda R: np.array([[np.sqrt(1 - R), 1j * np.sqrt(R)], [1j * np.sqrt(R), np.sqrt(1 - R)]])
MIRRORS = 1j * np.eye(2)
UP, LO = 0, 1


def nested_dense(R, interaction=True):
    """Four pair amplitudes for the nested interferometers, index 2*a + b.

    Returns the list of per-step 4x4 live maps and the input vector."""
    coincidence = np.eye(4, dtype=complex)
    if interaction:
        coincidence[2 * LO + LO, 2 * LO + LO] = 0.0
    maps = [
        np.kron(BS(R), BS(R)),
        np.kron(MIRRORS, MIRRORS),
        coincidence,
        np.kron(BS(1 - R), BS(1 - R)),
    ]
    psi = np.zeros(4, dtype=complex)
    psi[2 * UP + UP] = 1.0
    return maps, psi


def sequential_abl(maps, psi, slice_index, projector_diag, final_index):
    """ABL from its operational definition: probability of finding P at the
    intermediate time and then the post-selected outcome, normalized over
    the two alternatives P and 1 - P."""
    v = psi
    for m in maps[:slice_index]:
        v = m @ v
    after = maps[slice_index:]

    def joint(proj):
        w = proj @ v
        for m in after:
            w = m @ w
        return abs(w[final_index]) ** 2

    P = np.diag(projector_diag).astype(complex)
    yes, no = joint(P), joint(np.eye(len(v)) - P)
    return yes / (yes + no)


# --- Dicke half box ----------------------------------------------------------


def quadrature_box_energy(n_basis):
    """Energy (units of the ground energy) of the cut ground state expanded
    in ``n_basis`` box eigenstates, with coefficients and kinetic energy both
    obtained by numerical quadrature."""

    def cut(x):
        return 2.0 * np.sin(np.pi * x) if x > 0.5 else 0.0

    coeffs = []
    for n in range(1, n_basis + 1):
        val, _ = integrate.quad(
            lambda x: cut(x) * np.sqrt(2) * np.sin(n * np.pi * x), 0.5, 1.0, limit=200
        )
        coeffs.append(val)
    coeffs = np.array(coeffs)
    ns = np.arange(1, n_basis + 1)
    x = np.linspace(0.0, 1.0, 40001)
    phi = (coeffs[:, None] * np.sqrt(2) * np.sin(np.outer(ns, np.pi * x))).sum(axis=0)
    dphi = (coeffs[:, None] * np.sqrt(2) * ns[:, None] * np.pi * np.cos(np.outer(ns, np.pi * x))).sum(axis=0)
    kinetic = integrate.simpson(dphi**2, x=x)
    norm = integrate.simpson(phi**2, x=x)
    return kinetic / norm / math.pi**2


# --- Fabry-Perot time-bin simulation -----------------------------------------


def cavity_time_domain(r, M, tail_bins=None):
    """Complex time-bin simulation of a two-mirror cavity with explicit
    mirror matrices and a round-trip phase of pi (resonance)."""
    tau = math.sqrt(1 - r * r)
    mirror = np.array([[1j * r, tau], [tau, 1j * r]])  # (outside in, inside in) -> (outside out, inside out)
    a = 1 / math.sqrt(M)
    if tail_bins is None:
        tail_bins = int(math.ceil(40 / max(1e-12, -math.log(max(r, 1e-300)) * 4))) + 10 if r > 0 else 1
    returning = 0j
    p_refl = p_trans = 0.0
    for j in range(M + tail_bins):
        inp = a if j < M else 0.0
        out_refl, inside = mirror @ np.array([inp, returning])
        p_refl += abs(out_refl) ** 2
        # half round trip to the back mirror
        trans, back = mirror @ np.array([0.0, inside * 1j])  # phase pi/2 per pass
        p_trans += abs(trans) ** 2
        returning = back * 1j
    return p_refl, p_trans, abs(returning) ** 2
