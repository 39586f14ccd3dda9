"""Ready-made benchmark problems, including two PDE semi-discretisations."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np
import scipy.sparse as sp

from .core import ControlGrid, OCProblem
from .stepper import LinearAffineDynamics


@dataclass(frozen=True)
class CostSpec:
    """Running cost delta1*phi(|y|^2) + gamma*|u|^2 and terminal cost delta2*phi(|y|^2).

    ``weight`` multiplies the squared Euclidean norm (dx for a discrete L2 norm).
    """

    delta1: float = 0.0
    delta2: float = 1.0
    gamma: float = 0.0
    phi: Callable = None
    weight: float = 1.0

    def __post_init__(self):
        if min(self.delta1, self.delta2, self.gamma) < 0:
            raise ValueError("cost weights must be nonnegative")

    def _sq(self, X: np.ndarray) -> np.ndarray:
        s = self.weight * np.einsum("ij,ij->i", X, X)
        return s if self.phi is None else self.phi(s)

    def running(self, X: np.ndarray, u: np.ndarray, t: float) -> np.ndarray:
        out = self.gamma * float(np.dot(u, u)) * np.ones(len(X))
        if self.delta1:
            out += self.delta1 * self._sq(X)
        return out

    def terminal(self, X: np.ndarray) -> np.ndarray:
        return self.delta2 * self._sq(X)


def phi_nonquadratic(s):
    """sin(pi|s|) on |s| <= 1/2, 1 on (1/2, 1], (|s|-1)^2 + 1 beyond."""
    a = np.abs(np.asarray(s, dtype=float))
    out = np.where(a <= 0.5, np.sin(np.pi * a), np.where(a <= 1.0, 1.0, (a - 1.0) ** 2 + 1.0))
    return float(out) if out.ndim == 0 else out


@dataclass
class Benchmark:
    """A problem with the initial state, control set and discretisation it is run with."""

    name: str
    problem: OCProblem
    x0: np.ndarray
    controls: ControlGrid
    T: float = 1.0
    dt: float = 0.05
    scheme: str = "explicit"
    scope: str = "level"
    extras: dict = field(default_factory=dict)


def make_test1() -> OCProblem:
    """f(x, u) = (u, x1^2), L = 0, g(x) = -x2."""

    def f(X, u, t):
        return np.stack([np.full(len(X), u[0]), X[:, 0] ** 2], axis=1)

    return OCProblem(dim=2, control_dim=1, dynamics=f, terminal_cost=lambda X: -X[:, 1],
                     autonomous=True, name="test1")


VDP_CASES = {
    1: dict(delta1=0.0, delta2=1.0, gamma=0.0),
    2: dict(delta1=1.0, delta2=1.0, gamma=0.01),
    3: dict(delta1=0.1, delta2=1.0, gamma=0.1),
}


def make_vdp(case: int, omega: float = 0.15) -> OCProblem:
    """Van der Pol oscillator x1' = x2, x2' = omega (1 - x1^2) x2 - x1 + u.

    In case 3 the damping omega is a second control: u = (omega, u).
    """
    if case not in VDP_CASES:
        raise ValueError(f"unknown Van der Pol case {case!r}; expected 1, 2 or 3")
    cost = CostSpec(**VDP_CASES[case])
    if case == 3:
        def f(X, u, t):
            x1, x2 = X[:, 0], X[:, 1]
            return np.stack([x2, u[0] * (1 - x1 ** 2) * x2 - x1 + u[1]], axis=1)
        m = 2
    else:
        def f(X, u, t):
            x1, x2 = X[:, 0], X[:, 1]
            return np.stack([x2, omega * (1 - x1 ** 2) * x2 - x1 + u[0]], axis=1)
        m = 1
    return OCProblem(dim=2, control_dim=m, dynamics=f, running_cost=cost.running,
                     terminal_cost=cost.terminal, autonomous=True, name=f"vdp{case}")


def vdp3_controls(lo: float = -1.0, hi: float = 1.0, step: Optional[float] = None,
                  per_axis: int = 10) -> ControlGrid:
    """Pairs (omega, u) on [lo, hi]^2: ``per_axis`` evenly spaced values, or spacing ``step``."""
    if step is not None:
        return ControlGrid.hypercube(lo, hi, step, m=2)
    return ControlGrid.linspace(lo, hi, per_axis, m=2)


DRIVEN_OMEGA = math.pi / 2


def make_driven_oscillator(omega: float = DRIVEN_OMEGA) -> OCProblem:
    """Damped oscillator with sinusoidal forcing, x2' = -omega x2 - omega^2 x1 + sin(omega t) + u."""
    cost = CostSpec(delta1=0.1, delta2=1.0, gamma=0.1)

    def f(X, u, t):
        x1, x2 = X[:, 0], X[:, 1]
        return np.stack([x2, -omega * x2 - omega ** 2 * x1 + math.sin(omega * t) + u[0]], axis=1)

    return OCProblem(dim=2, control_dim=1, dynamics=f, running_cost=cost.running,
                     terminal_cost=cost.terminal, autonomous=False, name="driven")


def cycle_limit(t, omega: float = DRIVEN_OMEGA) -> np.ndarray:
    """Periodic orbit the uncontrolled driven oscillator settles on.

    Forcing at the natural frequency gives x1 = -cos(omega t) / omega^2,
    x2 = sin(omega t) / omega.
    """
    t = np.asarray(t, dtype=float)
    return np.stack([-np.cos(omega * t) / omega ** 2, np.sin(omega * t) / omega], axis=-1)


def _laplacian(d: int, dx: float):
    return sp.diags([np.ones(d - 1), -2.0 * np.ones(d), np.ones(d - 1)], [-1, 0, 1], format="csr") / dx ** 2


def _indicator(a: float, b: float, closed: bool = True):
    if closed:
        return lambda x: ((x >= a) & (x <= b)).astype(float)
    return lambda x: ((x > a) & (x < b)).astype(float)


HEAT_PROFILES = {
    "smooth": lambda x: -x ** 2 + x,
    "indicator": _indicator(0.25, 0.75),
}


def heat_semidiscretization(d: int, sigma: float = 0.1,
                            profile: Union[str, Callable] = "smooth",
                            delta1: float = 1.0, gamma: float = 0.01, delta2: float = 1.0):
    """Centred differences for y_t = sigma y_xx + y0(x) u on (0, 1) with zero Dirichlet data.

    Returns (dynamics, problem, x0) with x0 = y0 at the interior points
    x_i = i dx, i = 1..d, dx = 1/(d+1). Norms are the discrete L2 norm.
    """
    if d < 2:
        raise ValueError("need at least 2 interior points")
    y0 = HEAT_PROFILES[profile] if isinstance(profile, str) else profile
    dx = 1.0 / (d + 1)
    x = dx * np.arange(1, d + 1)
    B = y0(x)
    dyn = LinearAffineDynamics(sigma * _laplacian(d, dx), B)
    cost = CostSpec(delta1=delta1, delta2=delta2, gamma=gamma, weight=dx)
    problem = OCProblem(dim=d, control_dim=1, dynamics=dyn, running_cost=cost.running,
                        terminal_cost=cost.terminal, autonomous=True, state_weight=dx, linear=dyn,
                        name=f"heat-{profile if isinstance(profile, str) else 'custom'}")
    return dyn, problem, B.copy()


def wave_semidiscretization(d: int, c: float = 0.5, actuator: tuple = (0.4, 0.6),
                            w0: Callable = lambda x: np.sin(np.pi * x),
                            w1: Callable = lambda x: np.zeros_like(x),
                            gamma: float = 0.01, phi: Optional[Callable] = None):
    """First-order form y = (w, w_t) of w_tt = c w_xx + chi_actuator(x) u with zero Dirichlet data.

    The state has dimension 2d; A = [[0, I], [c D2, 0]], B = (0, chi). The
    cost is phi(|y|^2) + gamma u^2 with terminal phi(|y|^2), phi = identity
    unless given.
    """
    if d < 2:
        raise ValueError("need at least 2 interior points")
    a, b = actuator
    if not (0.0 <= a < b <= 1.0):
        raise ValueError(f"actuator interval {actuator} must lie inside (0, 1)")
    dx = 1.0 / (d + 1)
    x = dx * np.arange(1, d + 1)
    I = sp.identity(d, format="csr")
    A = sp.bmat([[None, I], [c * _laplacian(d, dx), None]], format="csr")
    chi = _indicator(a, b, closed=False)(x)
    dyn = LinearAffineDynamics(A, np.concatenate([np.zeros(d), chi]))
    cost = CostSpec(delta1=1.0, delta2=1.0, gamma=gamma, phi=phi, weight=dx)
    problem = OCProblem(dim=2 * d, control_dim=1, dynamics=dyn, running_cost=cost.running,
                        terminal_cost=cost.terminal, autonomous=True, state_weight=dx, linear=dyn,
                        name="wave-" + ("quadratic" if phi is None else "phi"))
    return dyn, problem, np.concatenate([w0(x), w1(x)])


PROBLEM_NAMES = ("test1", "vdp1", "vdp2", "vdp3", "driven", "heat-smooth", "heat-indicator",
                 "wave-quadratic", "wave-phi")


def get_benchmark(name: str, d: Optional[int] = None, **params) -> Benchmark:
    """Look up a benchmark by registry name with its default settings.

    ``d`` is the number of interior grid points for the PDE problems (the
    wave state has dimension 2d); other keyword arguments go to the problem
    constructor.
    """
    three = ControlGrid.from_values([-1.0, 0.0, 1.0])
    two = ControlGrid.from_values([-1.0, 1.0])
    if name == "test1":
        return Benchmark(name, make_test1(), np.array([-0.5, 0.5]), two, scope="tree")
    if name in ("vdp1", "vdp2"):
        return Benchmark(name, make_vdp(int(name[-1]), **params), np.array([-1.0, 1.0]), two, scope="tree")
    if name == "vdp3":
        return Benchmark(name, make_vdp(3), np.array([-0.5, 0.5]), vdp3_controls(**params), scope="tree")
    if name == "driven":
        return Benchmark(name, make_driven_oscillator(**params), np.array([-0.5, 0.5]), three)
    if name.startswith("heat-"):
        profile = name.split("-", 1)[1]
        if profile not in HEAT_PROFILES:
            raise KeyError(name)
        _, problem, x0 = heat_semidiscretization(d or 100, profile=profile, **params)
        return Benchmark(name, problem, x0, three, scheme="implicit")
    if name in ("wave-quadratic", "wave-phi"):
        phi = phi_nonquadratic if name == "wave-phi" else None
        _, problem, x0 = wave_semidiscretization(d or 100, phi=phi, **params)
        return Benchmark(name, problem, x0, three, scheme="implicit")
    raise KeyError(f"unknown problem {name!r}; known: {', '.join(PROBLEM_NAMES)}")
