"""Variational recompilation of the 8x8 projector-embedding unitary.

The hardware-shaped ansatz acts on a line of three qubits: an initial U3 on
every qubit (9 angles), then ``n_layers`` layers, each one CX between the
middle qubit and an outer qubit — qubit 0 for odd layer index, qubit 2 for
even — followed by a U3 on each of the two qubits the CX touched (6 angles
per layer, 9 + 6*n_layers total).  The CX control is placed on the middle
qubit throughout.

The recompilation loss is the Hilbert-Schmidt overlap

    loss(U, params) = 1 - Re tr(U^dag V(params)) / 8,

minimized with box-constrained L-BFGS-B inside a basin-hopping loop
(Gaussian perturbation, accept-if-improved), restarted over independent
seeded rounds.  Gradients are central finite differences evaluated by the
fused kernel in ``_fastpath``; a pure-numpy reference path (``loss``,
``ansatz_unitary``) backs it for cross-checking.

Quality is certified by the mean overlap |<beta| V^dag U |beta>| over random
normalized states, which is insensitive to global phase.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import minimize as _scipy_minimize

from . import qcore
from ._fastpath import loss_grad as _kernel_loss_grad

ANGLE_MIN = 0.0
ANGLE_MAX = 4.0 * np.pi
FD_STEP = 1e-6

_BITREV3 = (0, 4, 2, 6, 1, 5, 3, 7)


def _embedded_cx(control: int, target: int) -> np.ndarray:
    """8x8 matrix (qubit 0 = MSB) of a CX inside the 3-qubit block."""
    u = np.empty((8, 8), dtype=np.complex128)
    for c in range(8):
        amps = np.zeros(8, dtype=np.complex128)
        amps[_BITREV3[c]] = 1.0
        out = qcore._apply_matrix(amps, qcore.CX_MAT, (control, target), 3)
        u[:, c] = out[list(_BITREV3)]
    return u


_CX10 = _embedded_cx(1, 0)
_CX12 = _embedded_cx(1, 2)


@dataclass
class AnsatzParams:
    """Angles for the 3-qubit nearest-neighbor ansatz."""

    n_layers: int
    angles: np.ndarray

    def __post_init__(self):
        if self.n_layers < 1:
            raise ValueError("n_layers must be >= 1")
        self.angles = np.asarray(self.angles, dtype=np.float64)
        want = 9 + 6 * self.n_layers
        if self.angles.shape != (want,):
            raise ValueError(
                f"expected {want} angles for n_layers={self.n_layers}, "
                f"got shape {self.angles.shape}"
            )
        if not np.all(np.isfinite(self.angles)):
            raise ValueError("non-finite angle")
        if np.any(self.angles < ANGLE_MIN - 1e-12) or np.any(
            self.angles > ANGLE_MAX + 1e-12
        ):
            raise ValueError("angle outside box [0, 4*pi]")


@dataclass
class OptimizerConfig:
    max_iterations: int = 600
    basin_hops: int = 20
    perturbation_scale: float = 0.3
    rounds: int = 20
    seed: int = 0
    loss_tolerance: float = 1e-6

    def __post_init__(self):
        if min(self.max_iterations, self.basin_hops, self.rounds) < 1:
            raise ValueError("iteration/hop/round counts must be positive")
        if self.perturbation_scale <= 0 or self.loss_tolerance <= 0:
            raise ValueError("scale and tolerance must be positive")


@dataclass
class RecompileResult:
    params: AnsatzParams
    final_loss: float
    fidelity_estimate: float
    iterations_used: int
    cx_count: int
    # best-so-far loss after the initial descent and after each hop; kept so
    # the monotone best-so-far property is observable
    hop_losses: list[float] = field(default_factory=list)


def ansatz_circuit(params: AnsatzParams) -> qcore.Circuit:
    """Brick-layered U3/CX circuit on qubits (0, 1, 2); qubit 1 is the middle."""
    a = params.angles
    circ = qcore.Circuit(3)
    for q in range(3):
        circ.u3(q, a[3 * q], a[3 * q + 1], a[3 * q + 2])
    for k in range(1, params.n_layers + 1):
        outer = 0 if k % 2 == 1 else 2
        circ.cx(1, outer)
        off = 9 + 6 * (k - 1)
        lo, hi = sorted((1, outer))
        circ.u3(lo, a[off], a[off + 1], a[off + 2])
        circ.u3(hi, a[off + 3], a[off + 4], a[off + 5])
    return circ


def ansatz_unitary(params: AnsatzParams) -> np.ndarray:
    """8x8 matrix of the ansatz (qubit 0 = MSB), built through the simulator."""
    circ = ansatz_circuit(params)
    u = np.empty((8, 8), dtype=np.complex128)
    rev = list(_BITREV3)
    for c in range(8):
        amps = np.zeros(8, dtype=np.complex128)
        amps[_BITREV3[c]] = 1.0
        state = qcore.apply_circuit(qcore.StateVector(3, amps), circ)
        u[:, c] = state.amps[rev]
    return u


def hs_loss(target: np.ndarray, v: np.ndarray) -> float:
    """Hilbert-Schmidt loss 1 - Re tr(target^dag v)/d between equal-size squares."""
    target = np.asarray(target)
    if target.shape != v.shape or target.shape[0] != target.shape[1]:
        raise ValueError("loss needs two equal square matrices")
    d = target.shape[0]
    return float(1.0 - np.real(np.trace(target.conj().T @ v)) / d)


def loss(target: np.ndarray, params: AnsatzParams) -> float:
    """Reference loss via the simulator-built ansatz matrix."""
    _check_target(target)
    return hs_loss(target, ansatz_unitary(params))


def loss_and_gradient(target: np.ndarray, params: AnsatzParams):
    """Fused loss + central-FD gradient (step 1e-6) via the compiled kernel."""
    _check_target(target)
    tdag = np.ascontiguousarray(target.conj().T.astype(np.complex128))
    f, g = _kernel_loss_grad(params.angles, params.n_layers, tdag, _CX10,
                             _CX12, FD_STEP)
    return float(f), g


def gradient(target: np.ndarray, params: AnsatzParams) -> np.ndarray:
    return loss_and_gradient(target, params)[1]


def _check_target(target: np.ndarray) -> None:
    target = np.asarray(target)
    if target.shape != (8, 8):
        raise ValueError("recompilation target must be 8x8")
    if np.max(np.abs(target.conj().T @ target - np.eye(8))) > 1e-10:
        raise ValueError("recompilation target must be unitary")


def _descent(fun: Callable, x0: np.ndarray, cfg: OptimizerConfig):
    res = _scipy_minimize(
        fun,
        x0,
        jac=True,
        method="L-BFGS-B",
        bounds=[(ANGLE_MIN, ANGLE_MAX)] * len(x0),
        options={"maxiter": cfg.max_iterations},
    )
    return res.x, float(res.fun), int(res.nit)


def minimize(target: np.ndarray, start: AnsatzParams, cfg: OptimizerConfig,
             fidelity_trials: int = 200,
             _rng: np.random.Generator | None = None) -> RecompileResult:
    """One basin-hopped descent from ``start``.

    L-BFGS-B with box [0, 4*pi], then up to ``cfg.basin_hops`` Gaussian
    perturbations of the incumbent (scale ``cfg.perturbation_scale``), each
    re-descended and accepted only on improvement.  Stops early once the
    best loss drops below ``cfg.loss_tolerance``.
    """
    _check_target(target)
    rng = _rng if _rng is not None else np.random.default_rng(cfg.seed)
    tdag = np.ascontiguousarray(target.conj().T.astype(np.complex128))
    n_l = start.n_layers

    def fun(x):
        return _kernel_loss_grad(x, n_l, tdag, _CX10, _CX12, FD_STEP)

    x_best, f_best, iters = _descent(fun, start.angles, cfg)
    history = [f_best]
    for _ in range(cfg.basin_hops):
        if f_best < cfg.loss_tolerance:
            break
        x0 = np.clip(
            x_best + rng.normal(0.0, cfg.perturbation_scale, len(x_best)),
            ANGLE_MIN,
            ANGLE_MAX,
        )
        x, f, nit = _descent(fun, x0, cfg)
        iters += nit
        if f < f_best:
            x_best, f_best = x, f
        history.append(f_best)
    params = AnsatzParams(n_l, x_best)
    fid = fidelity_random_state(target, ansatz_unitary(params),
                                trials=fidelity_trials, seed=cfg.seed)
    return RecompileResult(params, f_best, fid, iters, n_l, history)


def recompile(target: np.ndarray, n_layers: int, cfg: OptimizerConfig,
              fidelity_trials: int = 200, threads: int = 1) -> RecompileResult:
    """Multi-round driver: independent seeded rounds, min-loss merge.

    Round r draws its start uniformly from [0, 2*pi) using the r-th child of
    ``SeedSequence(cfg.seed)``; rounds after the first one to reach
    ``loss_tolerance`` are skipped.  The merged result is bitwise independent
    of ``threads``.
    """
    _check_target(target)
    npar = 9 + 6 * n_layers
    children = np.random.SeedSequence(cfg.seed).spawn(cfg.rounds)

    def run_round(child):
        rng = np.random.default_rng(child)
        start = AnsatzParams(n_layers, rng.uniform(0.0, 2.0 * np.pi, npar))
        return minimize(target, start, cfg, fidelity_trials=fidelity_trials,
                        _rng=rng)

    results: list[RecompileResult] = []
    if threads <= 1:
        for child in children:
            r = run_round(child)
            results.append(r)
            if r.final_loss < cfg.loss_tolerance:
                break
    else:
        # waves of `threads` rounds; truncate at the first round (in round
        # order) that met tolerance so the outcome matches the sequential run
        with ThreadPoolExecutor(max_workers=threads) as pool:
            stop = False
            for lo in range(0, len(children), threads):
                if stop:
                    break
                wave = list(pool.map(run_round, children[lo:lo + threads]))
                for r in wave:
                    results.append(r)
                    if r.final_loss < cfg.loss_tolerance:
                        stop = True
                        break

    best = min(results, key=lambda r: r.final_loss)
    total_iters = sum(r.iterations_used for r in results)
    return RecompileResult(best.params, best.final_loss,
                           best.fidelity_estimate, total_iters,
                           best.cx_count, best.hop_losses)


def random_state_fidelities(u: np.ndarray, v: np.ndarray, trials: int,
                            seed: int) -> np.ndarray:
    """Per-trial overlaps |<beta| v^dag u |beta>| for random normalized beta."""
    if trials < 1:
        raise ValueError("trials must be positive")
    u = np.asarray(u, dtype=np.complex128)
    v = np.asarray(v, dtype=np.complex128)
    if u.shape != v.shape or u.shape != (8, 8):
        raise ValueError("fidelity needs two 8x8 matrices")
    rng = np.random.default_rng(seed)
    d = u.shape[0]
    m = v.conj().T @ u
    betas = rng.normal(size=(trials, d)) + 1j * rng.normal(size=(trials, d))
    betas /= np.linalg.norm(betas, axis=1, keepdims=True)
    return np.abs(np.einsum("ti,ij,tj->t", betas.conj(), m, betas))


def fidelity_random_state(u: np.ndarray, v: np.ndarray, trials: int = 200,
                          seed: int = 0) -> float:
    """Mean random-state overlap between unitaries ``u`` and ``v``."""
    return float(np.mean(random_state_fidelities(u, v, trials, seed)))
