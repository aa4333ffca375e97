import csv
import math

import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from massmin import (Adam, FieldConfig, NumericalError, Schedule, TrainConfig,
                     adam_step, load_checkpoint, lr_at, save_checkpoint,
                     train_minimal_surface, train_reconstruction, write_log)
from helpers import hemisphere, unit_circle, uv_sphere


def small_config(**overrides):
    base = dict(iterations=3, ambient_batch=32, surface_batch=32,
                mass_samples=256, log_every=1, mass_every=2,
                field=FieldConfig(m=8, width=8, hidden_layers=1, dtype="float64"))
    base.update(overrides)
    return TrainConfig.minimal_defaults(**base)


# ---------------------------------------------------------------- schedule

def test_lr_decay_steps():
    sched = Schedule(0.0005, 0.6, 10000)
    assert lr_at(sched, 0) == 0.0005
    assert lr_at(sched, 10000) == pytest.approx(0.0003)
    assert lr_at(sched, 25000) == pytest.approx(0.00018)


def test_lr_constant_within_window():
    sched = Schedule(0.1, 0.5, 100)
    assert lr_at(sched, 0) == lr_at(sched, 99)
    assert lr_at(sched, 100) == lr_at(sched, 199) == 0.05


def test_schedule_validation():
    with pytest.raises(ValueError):
        Schedule(0.1, 0.0, 100)
    with pytest.raises(ValueError):
        Schedule(0.1, 1.5, 100)
    with pytest.raises(ValueError):
        Schedule(0.1, 0.6, 0)
    with pytest.raises(ValueError):
        Schedule(0.1).lr_at(-1)


@given(st.integers(0, 10**6), st.integers(0, 10**6))
@settings(max_examples=50, deadline=None)
def test_lr_non_increasing(i, j):
    sched = Schedule(0.0005, 0.6, 2000)
    lo, hi = sorted((i, j))
    assert lr_at(sched, hi) <= lr_at(sched, lo)


# ---------------------------------------------------------------- adam

def test_adam_zero_gradient_is_identity():
    theta = np.array([1.0, -2.0, 3.0])
    out = Adam(3).step(theta, np.zeros(3), 0.1)
    np.testing.assert_array_equal(out, theta)


def test_adam_first_step_is_signed_lr():
    theta = np.zeros(4)
    g = np.array([3.0, -0.5, 1e-3, -200.0])
    out = Adam(4).step(theta, g, 0.01)
    # at t=1 the bias-corrected ratio m̂/√v̂ collapses to sign(g) up to ε
    np.testing.assert_allclose(out, -0.01 * np.sign(g), rtol=1e-5)


def test_adam_opposite_gradients_opposite_moves():
    g = np.array([0.3, -1.2, 4.0])
    a = Adam(3).step(np.zeros(3), g, 0.05)
    b = Adam(3).step(np.zeros(3), -g, 0.05)
    np.testing.assert_allclose(a, -b, rtol=0, atol=1e-15)


def test_adam_shape_mismatch():
    with pytest.raises(ValueError):
        Adam(3).step(np.zeros(2), np.zeros(2), 0.1)


def test_adam_drives_quadratic_to_zero():
    # 100 steps on f(θ)=‖θ‖² from (1,1): the end point sits deep inside the
    # basin even though single steps may overshoot near the minimum.
    theta = np.array([1.0, 1.0])
    state = Adam(2)
    for _ in range(100):
        theta = adam_step(state, theta, 2.0 * theta, 0.1)
    assert np.linalg.norm(theta) < 0.05


def test_adam_matches_torch_reference():
    rng = np.random.default_rng(7)
    theta = rng.normal(size=11)
    t_theta = torch.tensor(theta.copy(), dtype=torch.float64, requires_grad=True)
    opt = torch.optim.Adam([t_theta], lr=1.0)
    ours = Adam(11)
    for it in range(25):
        g = rng.normal(size=11)
        lr = 0.1 * 0.5 ** (it // 7)
        for group in opt.param_groups:
            group["lr"] = lr
        t_theta.grad = torch.tensor(g, dtype=torch.float64)
        opt.step()
        theta = ours.step(theta, g, lr)
        np.testing.assert_allclose(theta, t_theta.detach().numpy(),
                                   rtol=0, atol=1e-13)


# ---------------------------------------------------------------- config

def test_train_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(iterations=-1)
    with pytest.raises(ValueError):
        TrainConfig(ambient_batch=0)
    with pytest.raises(ValueError):
        TrainConfig(alpha_scale=0.0)


def test_train_config_round_trip():
    cfg = small_config(seed=5, base_lr=0.002)
    again = TrainConfig.from_dict(cfg.to_dict())
    assert again == cfg
    assert isinstance(again.field, FieldConfig)


def test_default_profiles():
    minimal = TrainConfig.minimal_defaults()
    assert not minimal.use_surface_loss and not minimal.boundary_weighting
    assert minimal.iterations == 100000 and minimal.base_lr == 0.0005
    recon = TrainConfig.reconstruction_defaults()
    assert recon.use_surface_loss and recon.boundary_weighting
    assert recon.base_lr == 0.001 and recon.decay_every == 2000
    assert recon.ambient_batch == 4000 and recon.surface_batch == 4000


def test_schedule_property_matches_fields():
    cfg = small_config(base_lr=0.01, decay_factor=0.5, decay_every=3)
    assert cfg.schedule.lr_at(3) == pytest.approx(0.005)


# ---------------------------------------------------------------- logging

def test_write_log_format(tmp_path):
    history = [
        {"iteration": 0, "lr": 0.0005, "current_loss": 0.25,
         "surface_loss": None, "mass_estimate": 1.5},
        {"iteration": 10, "lr": 0.0005, "current_loss": 0.125,
         "surface_loss": 0.01, "mass_estimate": None},
    ]
    path = tmp_path / "loss.csv"
    write_log(history, path)
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["iteration", "lr", "current_loss", "surface_loss", "mass_estimate"]
    assert rows[1] == ["0", "0.0005", "0.25", "", "1.5"]
    assert rows[2] == ["10", "0.0005", "0.125", "0.01", ""]


def test_write_log_deterministic_bytes(tmp_path):
    history = [{"iteration": i, "lr": 0.1 / (i + 1), "current_loss": math.pi / (i + 1),
                "surface_loss": None, "mass_estimate": None} for i in range(5)]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    write_log(history, a)
    write_log(history, b)
    assert a.read_bytes() == b.read_bytes()


# ---------------------------------------------------------------- training

def test_zero_iterations_returns_initialized_current():
    cfg = small_config(iterations=0)
    current, history = train_minimal_surface(unit_circle(segments=12), cfg)
    assert history == []
    fresh = cfg.field.build(cfg.seed)
    np.testing.assert_array_equal(current.field.get_flat_params(),
                                  fresh.get_flat_params())


def test_minimal_training_reproducible():
    cfg = small_config(iterations=4, seed=3)
    _, h1 = train_minimal_surface(unit_circle(segments=12), cfg)
    _, h2 = train_minimal_surface(unit_circle(segments=12), cfg)
    assert h1 == h2
    assert [row["iteration"] for row in h1] == [0, 1, 2, 3]
    assert all(row["surface_loss"] is None for row in h1)


def test_minimal_training_log_cadence():
    cfg = small_config(iterations=7, log_every=3, mass_every=6)
    _, history = train_minimal_surface(unit_circle(segments=12), cfg)
    # rows at multiples of log_every plus the final iteration
    assert [row["iteration"] for row in history] == [0, 3, 6]
    masses = [row["mass_estimate"] is not None for row in history]
    assert masses == [True, False, True]


def test_divergent_training_aborts():
    cfg = small_config(iterations=50, base_lr=1e12,
                       field=FieldConfig(m=8, width=8, hidden_layers=1,
                                         dtype="float32"))
    with pytest.raises(NumericalError):
        train_minimal_surface(unit_circle(segments=12), cfg)


def _recon_config(**overrides):
    base = dict(iterations=3, ambient_batch=32, surface_batch=32,
                mass_samples=256, log_every=1, mass_every=2,
                field=FieldConfig(m=8, width=8, hidden_layers=1, dtype="float64"))
    base.update(overrides)
    return TrainConfig.reconstruction_defaults(**base)


def test_reconstruction_rejects_closed_mesh():
    with pytest.raises(ValueError, match="closed"):
        train_reconstruction(uv_sphere(radius=0.4), _recon_config())


def test_reconstruction_rejects_unnormalized_mesh():
    with pytest.raises(ValueError, match="normalized"):
        train_reconstruction(hemisphere(radius=1.0), _recon_config())


def test_reconstruction_history_has_both_losses():
    mesh = hemisphere(radius=0.45)
    _, history = train_reconstruction(mesh, _recon_config())
    assert all(row["surface_loss"] is not None for row in history)
    _, ablated = train_reconstruction(mesh, _recon_config(use_surface_loss=False))
    assert all(row["surface_loss"] is None for row in ablated)


def test_reconstruction_reproducible():
    mesh = hemisphere(radius=0.45)
    _, h1 = train_reconstruction(mesh, _recon_config(seed=9))
    _, h2 = train_reconstruction(mesh, _recon_config(seed=9))
    assert h1 == h2


# ---------------------------------------------------------------- checkpoints

def test_checkpoint_round_trip(tmp_path):
    cfg = small_config(iterations=2, field=FieldConfig(m=8, width=8,
                                                       hidden_layers=1,
                                                       dtype="float32"))
    current, _ = train_minimal_surface(unit_circle(segments=12), cfg)
    path = tmp_path / "run.mmck"
    save_checkpoint(path, current)
    loaded = load_checkpoint(path)

    np.testing.assert_array_equal(loaded.field.get_flat_params(),
                                  current.field.get_flat_params())
    np.testing.assert_array_equal(
        loaded.field.features.frequencies.detach().numpy(),
        current.field.features.frequencies.detach().numpy())
    assert loaded.alpha_scale == current.alpha_scale
    assert loaded.boundary.num_loops == current.boundary.num_loops
    pts = np.random.default_rng(0).uniform(-1, 1, (40, 3))
    np.testing.assert_array_equal(loaded.current_vector(pts),
                                  current.current_vector(pts))


def test_checkpoint_bytes_deterministic(tmp_path):
    cfg = small_config(iterations=1)
    current, _ = train_minimal_surface(unit_circle(segments=12), cfg)
    a, b = tmp_path / "a.mmck", tmp_path / "b.mmck"
    save_checkpoint(a, current)
    save_checkpoint(b, current)
    assert a.read_bytes() == b.read_bytes()


def test_checkpoint_rejects_foreign_file(tmp_path):
    path = tmp_path / "junk.mmck"
    path.write_bytes(b"OBJ\n" + b"\x00" * 64)
    with pytest.raises(ValueError, match="not a checkpoint"):
        load_checkpoint(path)


def test_checkpoint_rejects_truncation(tmp_path):
    cfg = small_config(iterations=0)
    current, _ = train_minimal_surface(unit_circle(segments=12), cfg)
    path = tmp_path / "full.mmck"
    save_checkpoint(path, current)
    clipped = tmp_path / "clipped.mmck"
    clipped.write_bytes(path.read_bytes()[:-17])
    with pytest.raises(ValueError):
        load_checkpoint(clipped)
