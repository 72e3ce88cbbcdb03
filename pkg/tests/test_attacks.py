import numpy as np
import pytest

from ilid.attacks import (
    AttackConfig,
    AttackError,
    _Oracle,
    bim,
    dga,
    dga_gradient_estimate,
    fgsm,
    pgd,
    random_unit_directions,
    run_attack,
    sparsify,
)
from ilid.forecasters import CapabilityError, ForecasterSpec
from ilid.timeseries import SampleWindow

TOY = ForecasterSpec("fixed_linear", {"weights": [0.5, 0.5]})
RF = ForecasterSpec("random_feature", {"seed": 7, "p": 8, "k": 32, "season": 12, "output_scale": 0.3})


def toy_window(values=(1.0, 1.0)):
    return SampleWindow(np.array(values), np.zeros(1))


def rf_windows(n=5, T=48, tau=6):
    rng = np.random.default_rng(4)
    out = []
    for i in range(n):
        t = np.arange(T + tau) + i * 5
        x = np.sin(2 * np.pi * t / 12) + 0.05 * rng.standard_normal(T + tau)
        out.append(SampleWindow(x[:T], x[T:]))
    return out


class QueryOnly:
    """A gradient-free handle around a local model."""

    min_context = 2

    def __init__(self, spec):
        self.spec = spec
        self.calls = 0

    def forecast(self, context, horizon):
        self.calls += 1
        return self.spec.model.forecast(context, horizon)


def test_fgsm_toy_example():
    res = fgsm(toy_window(), TOY, AttackConfig("fgsm", epsilon=0.2))
    assert res.perturbed_context.tolist() == [0.8, 0.8]
    assert res.linf == pytest.approx(0.2, abs=1e-15)
    assert res.final_loss == pytest.approx(0.64, abs=1e-12)
    assert res.queries == 1


def test_fgsm_at_stationary_point_is_identity():
    res = fgsm(toy_window((0.0, 0.0)), TOY, AttackConfig("fgsm", epsilon=0.2))
    assert res.perturbed_context.tolist() == [0.0, 0.0]


def test_epsilon_must_be_positive():
    with pytest.raises(ValueError):
        AttackConfig("fgsm", epsilon=0.0)


def test_bim_one_full_step_equals_fgsm():
    w = rf_windows(1)[0]
    a = bim(w, RF, AttackConfig("bim", epsilon=0.2, steps=1, step_size=0.2))
    b = fgsm(w, RF, AttackConfig("fgsm", epsilon=0.2))
    assert a.perturbed_context.tobytes() == b.perturbed_context.tobytes()


def test_bim_loss_non_increasing_on_toy():
    res = bim(SampleWindow(np.array([1.0, 0.6, 1.4, 0.9]), np.zeros(2)),
              ForecasterSpec("fixed_linear", {"weights": [0.4, 0.3, 0.2, 0.1]}),
              AttackConfig("bim", epsilon=0.5, steps=10))
    assert all(b <= a + 1e-15 for a, b in zip(res.losses, res.losses[1:]))
    assert res.queries == 10


@pytest.mark.parametrize("method", ["fgsm", "bim", "pgd", "dga"])
def test_linf_bound(method):
    for k, w in enumerate(rf_windows()):
        res = run_attack(w, RF, AttackConfig(method, epsilon=0.2, steps=8, seed=k))
        assert np.max(np.abs(res.perturbed_context - w.context)) <= 0.2 + 1e-9
        assert res.linf <= 0.2 + 1e-9


def test_pgd_determinism_and_seed_dependence():
    w = rf_windows(1)[0]
    cfg = AttackConfig("pgd", epsilon=0.2, steps=5, seed=3)
    a, b = pgd(w, RF, cfg), pgd(w, RF, cfg)
    assert a.perturbed_context.tobytes() == b.perturbed_context.tobytes()
    assert a.losses == b.losses
    c = pgd(w, RF, AttackConfig("pgd", epsilon=0.2, steps=5, seed=4))
    assert c.perturbed_context.tobytes() != a.perturbed_context.tobytes()


def test_white_box_needs_gradients():
    w = rf_windows(1)[0]
    for method in ("fgsm", "bim", "pgd"):
        with pytest.raises(CapabilityError):
            run_attack(w, ForecasterSpec("seasonal_naive", {"m": 12}), AttackConfig(method))


def test_dga_toy_directional_derivative():
    oracle = _Oracle(TOY, 1, 0.0)
    est = dga_gradient_estimate(oracle, np.array([1.0, 1.0]), [np.array([1.0, 0.0])], 0.01)
    assert est[0] == pytest.approx(1.0025, abs=1e-9)
    assert est[1] == 0.0
    assert oracle.queries == 2


def test_dga_query_count():
    w = rf_windows(1)[0]
    cfg = AttackConfig("dga", epsilon=0.2, steps=7, dga_directions=5)
    assert dga(w, RF, cfg).queries == 7 * (5 + 1)


def test_dga_with_gradient_free_handle():
    w = rf_windows(1)[0]
    handle = QueryOnly(RF)
    res = dga(w, handle, AttackConfig("dga", epsilon=0.2, steps=4, dga_directions=6, seed=1,
                                      record_losses=False))
    assert handle.calls == res.queries == 4 * 7
    assert res.linf <= 0.2 + 1e-9


def test_dga_estimate_aligns_with_true_gradient_as_q_grows():
    spec = ForecasterSpec("fixed_linear", {"weights": [0.125] * 8})
    x = np.linspace(0.5, 1.5, 8)
    true = spec.model.loss_gradient(x, 1, 0.0)

    def median_angle(q):
        angles = []
        for seed in range(100):
            oracle = _Oracle(spec, 1, 0.0)
            u = random_unit_directions(np.random.default_rng(seed), q, 8)
            g = dga_gradient_estimate(oracle, x, u, 1e-4)
            cos = g @ true / (np.linalg.norm(g) * np.linalg.norm(true))
            angles.append(np.arccos(np.clip(cos, -1, 1)))
        return float(np.median(angles))

    a = [median_angle(q) for q in (2, 8, 64)]
    assert a[0] > a[1] > a[2]


def test_dga_surfaces_remote_failures_with_query_count():
    class Flaky(QueryOnly):
        def forecast(self, context, horizon):
            if self.calls >= 5:
                raise RuntimeError("down")
            return super().forecast(context, horizon)

    with pytest.raises(AttackError) as info:
        dga(rf_windows(1)[0], Flaky(RF), AttackConfig("dga", steps=3, dga_directions=4, record_losses=False))
    assert info.value.queries == 5


def test_sparsify_examples():
    assert sparsify(np.arange(10.0), 10, 0.4).size == 4
    assert sparsify([3.0, 1.0, 2.0, 5.0], 4, 0.5).tolist() == [0, 3]
    assert sparsify([-3.0, 1.0, 2.0, 0.5], 4, 0.5).tolist() == [0, 2]
    assert sparsify([1.0, 1.0, 1.0, 1.0], 4, 0.5).tolist() == [0, 1]  # ties to earlier index
    r = sparsify(9, 20, 0.4, "random")
    assert r.tolist() == sparsify(9, 20, 0.4, "random").tolist() and r.size == 8


def test_sparsify_rejects_empty_mask():
    with pytest.raises(ValueError):
        sparsify([1.0, 2.0], 2, 0.1)


@pytest.mark.parametrize("method,mode", [("fgsm", None), ("bim", None), ("pgd", "random"),
                                         ("pgd", "topk_gradient"), ("dga", None)])
def test_sparse_attack_leaves_other_coordinates_untouched(method, mode):
    w = rf_windows(1)[0]
    res = run_attack(w, RF, AttackConfig(method, epsilon=0.2, steps=5, sparsity=0.4, sparse_mode=mode,
                                         seed=2))
    assert res.mask.size == round(0.4 * w.T)
    off = np.ones(w.T, dtype=bool)
    off[res.mask] = False
    assert res.perturbed_context[off].tobytes() == w.context[off].tobytes()


def test_dga_rejects_gradient_mask():
    with pytest.raises(CapabilityError):
        dga(rf_windows(1)[0], RF, AttackConfig("dga", sparsity=0.4, sparse_mode="topk_gradient"))


def test_none_is_identity():
    w = rf_windows(1)[0]
    res = run_attack(w, RF, AttackConfig("none"))
    assert res.perturbed_context.tobytes() == w.context.tobytes() and res.queries == 0
