"""L-infinity bounded attacks that pull a forecaster's output toward a target value.

White-box methods (FGSM, BIM, PGD) use the analytic loss gradient. The
black-box ``dga`` method only queries forecasts: it estimates the gradient with
forward differences along seeded random unit directions and takes signed,
projected steps. It approximates a directional-gradient-approximation attack;
it is not a reproduction of any published implementation.

All methods minimise ``mean((forecast(x) - target)**2)`` and never clip to a
data range, only to the epsilon ball around the clean context.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ilid.forecasters import CapabilityError, as_model

METHODS = ("fgsm", "bim", "pgd", "dga", "none")
SPARSE_MODES = ("topk_gradient", "random")


class AttackError(RuntimeError):
    def __init__(self, message, queries=0):
        super().__init__(message)
        self.queries = queries


@dataclass
class AttackConfig:
    method: str = "pgd"
    epsilon: float = 0.2
    steps: int = 10
    step_size: float | None = None
    target: float = 0.0
    sparsity: float | None = None
    sparse_mode: str | None = None
    seed: int = 0
    dga_directions: int = 16
    dga_delta: float = 0.01
    horizon: int | None = None
    record_losses: bool = True

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown attack method {self.method!r}; expected one of {METHODS}")
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be > 0, got {self.epsilon}")
        if self.steps < 1:
            raise ValueError(f"steps must be >= 1, got {self.steps}")
        if self.step_size is None:
            self.step_size = self.epsilon / self.steps
        if not self.step_size > 0:
            raise ValueError("step_size must be > 0")
        if self.sparsity is not None and not 0 < self.sparsity < 1:
            raise ValueError(f"sparsity must be in (0, 1), got {self.sparsity}")
        if self.sparse_mode is not None and self.sparse_mode not in SPARSE_MODES:
            raise ValueError(f"unknown sparse mode {self.sparse_mode!r}")
        if self.dga_directions < 1 or not self.dga_delta > 0:
            raise ValueError("dga needs dga_directions >= 1 and dga_delta > 0")

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class AttackResult:
    perturbed_context: np.ndarray
    linf: float
    queries: int
    mask: np.ndarray | None = None
    losses: list = field(default_factory=list)

    @property
    def final_loss(self) -> float:
        return self.losses[-1] if self.losses else float("nan")


def sparsify(grad_or_seed, T: int, fraction: float, mode: str = "topk_gradient") -> np.ndarray:
    """Pick ``round(fraction * T)`` timesteps to perturb; returns sorted indices.

    ``topk_gradient`` takes the largest ``|gradient|`` entries (ties to the
    earlier index); ``random`` draws uniformly from a seed.
    """
    if not 0 < fraction < 1:
        raise ValueError(f"sparsity fraction must be in (0, 1), got {fraction}")
    size = int(round(fraction * T))
    if size < 1:
        raise ValueError(f"fraction {fraction} of T={T} selects no timesteps")
    if mode == "topk_gradient":
        g = np.abs(np.asarray(grad_or_seed, dtype=float).reshape(-1))
        if g.size != T:
            raise ValueError(f"gradient length {g.size} != T={T}")
        idx = np.argsort(-g, kind="stable")[:size]
    elif mode == "random":
        idx = np.random.default_rng(int(grad_or_seed)).choice(T, size=size, replace=False)
    else:
        raise ValueError(f"unknown sparse mode {mode!r}")
    return np.sort(idx)


def _horizon(window, cfg):
    if cfg.horizon is not None:
        return cfg.horizon
    if getattr(window, "truth", None) is None:
        raise ValueError("attack horizon is unknown: set AttackConfig.horizon or give the window a truth")
    return window.truth.size


class _Oracle:
    """Loss/gradient access with query accounting."""

    def __init__(self, forecaster, horizon, target, record=True):
        self.model = as_model(forecaster)
        self.horizon = horizon
        self.target = target
        self.record = record
        self.queries = 0

    def loss(self, x):
        self.queries += 1
        try:
            y = self.model.forecast(x, self.horizon)
        except Exception as exc:
            raise AttackError(f"forecast query failed after {self.queries - 1} queries: {exc}",
                              self.queries - 1) from exc
        return float(np.mean((y - self.target) ** 2))

    def grad(self, x):
        if not hasattr(self.model, "loss_gradient"):
            raise CapabilityError(
                f"white-box attack needs gradients; {type(self.model).__name__} does not expose them"
            )
        self.queries += 1
        return self.model.loss_gradient(x, self.horizon, self.target)


def _mask_vector(mask, T):
    m = np.zeros(T, dtype=bool)
    if mask is None:
        m[:] = True
    else:
        m[mask] = True
    return m


def _resolve_mask(cfg, x, oracle, gradient_available):
    if cfg.sparsity is None:
        return None
    mode = cfg.sparse_mode or ("topk_gradient" if gradient_available else "random")
    if mode == "topk_gradient":
        return sparsify(oracle.grad(x), x.size, cfg.sparsity, mode)
    return sparsify(cfg.seed, x.size, cfg.sparsity, mode)


def _project(x_adv, x0, eps, active):
    out = np.clip(x_adv, x0 - eps, x0 + eps)
    out[~active] = x0[~active]
    return out


def _result(x_adv, x0, oracle, mask, losses):
    return AttackResult(x_adv, float(np.max(np.abs(x_adv - x0))), oracle.queries, mask, losses)


def fgsm(window, forecaster, cfg: AttackConfig) -> AttackResult:
    """One signed step of size epsilon against the loss gradient."""
    x0 = np.asarray(window.context, dtype=float)
    oracle = _Oracle(forecaster, _horizon(window, cfg), cfg.target, cfg.record_losses)
    g = oracle.grad(x0)
    mask = None
    if cfg.sparsity is not None:
        mode = cfg.sparse_mode or "topk_gradient"
        mask = sparsify(g if mode == "topk_gradient" else cfg.seed, x0.size, cfg.sparsity, mode)
    active = _mask_vector(mask, x0.size)
    x_adv = x0 - cfg.epsilon * np.sign(g) * active
    x_adv = _project(x_adv, x0, cfg.epsilon, active)
    return _result(x_adv, x0, oracle, mask, [_loss_free(oracle, x_adv)])


def _loss_free(oracle, x):
    """Bookkeeping loss evaluation that does not count as an attack query."""
    if not oracle.record:
        return float("nan")
    q = oracle.queries
    value = oracle.loss(x)
    oracle.queries = q
    return value


def _iterate(x0, x_start, oracle, cfg, active, mask, grad_fn):
    x = x_start.copy()
    losses = []
    for _ in range(cfg.steps):
        g = grad_fn(x)
        x = _project(x - cfg.step_size * np.sign(g) * active, x0, cfg.epsilon, active)
        losses.append(_loss_free(oracle, x))
    return _result(x, x0, oracle, mask, losses)


def bim(window, forecaster, cfg: AttackConfig) -> AttackResult:
    """Iterated signed steps of ``step_size``, projected onto the epsilon ball."""
    x0 = np.asarray(window.context, dtype=float)
    oracle = _Oracle(forecaster, _horizon(window, cfg), cfg.target, cfg.record_losses)
    mask = _resolve_mask(cfg, x0, oracle, True)
    active = _mask_vector(mask, x0.size)
    return _iterate(x0, x0, oracle, cfg, active, mask, oracle.grad)


def pgd(window, forecaster, cfg: AttackConfig) -> AttackResult:
    """BIM from a seeded uniform random start inside the epsilon ball."""
    x0 = np.asarray(window.context, dtype=float)
    oracle = _Oracle(forecaster, _horizon(window, cfg), cfg.target, cfg.record_losses)
    mask = _resolve_mask(cfg, x0, oracle, True)
    active = _mask_vector(mask, x0.size)
    rng = np.random.default_rng(cfg.seed)
    start = x0 + rng.uniform(-cfg.epsilon, cfg.epsilon, size=x0.size) * active
    start = _project(start, x0, cfg.epsilon, active)
    return _iterate(x0, start, oracle, cfg, active, mask, oracle.grad)


def dga_gradient_estimate(oracle, x, directions, delta, base_loss=None):
    """Average of forward-difference directional derivatives times their directions."""
    if base_loss is None:
        base_loss = oracle.loss(x)
    est = np.zeros_like(x)
    for u in directions:
        est += (oracle.loss(x + delta * u) - base_loss) / delta * u
    return est / len(directions)


def random_unit_directions(rng, q, T, active=None):
    u = rng.standard_normal((q, T))
    if active is not None:
        u[:, ~active] = 0.0
    return u / np.linalg.norm(u, axis=1, keepdims=True)


def dga(window, forecaster, cfg: AttackConfig) -> AttackResult:
    """Query-only attack: zeroth-order gradient estimate, then a projected sign step.

    Each step costs ``dga_directions + 1`` forecast queries.
    """
    x0 = np.asarray(window.context, dtype=float)
    oracle = _Oracle(forecaster, _horizon(window, cfg), cfg.target, cfg.record_losses)
    mask = None
    if cfg.sparsity is not None:
        mode = cfg.sparse_mode or "random"
        if mode != "random":
            raise CapabilityError("dga is query-only; use sparse_mode 'random'")
        mask = sparsify(cfg.seed, x0.size, cfg.sparsity, mode)
    active = _mask_vector(mask, x0.size)
    rng = np.random.default_rng(cfg.seed)

    def grad_fn(x):
        u = random_unit_directions(rng, cfg.dga_directions, x.size, active)
        return dga_gradient_estimate(oracle, x, u, cfg.dga_delta)

    return _iterate(x0, x0, oracle, cfg, active, mask, grad_fn)


def no_attack(window, forecaster, cfg: AttackConfig) -> AttackResult:
    x0 = np.asarray(window.context, dtype=float)
    return AttackResult(x0.copy(), 0.0, 0, None, [])


_DISPATCH = {"fgsm": fgsm, "bim": bim, "pgd": pgd, "dga": dga, "none": no_attack}


def run_attack(window, forecaster, cfg: AttackConfig) -> AttackResult:
    return _DISPATCH[cfg.method](window, forecaster, cfg)
