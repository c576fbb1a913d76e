import numpy as np
import pytest

from srad import network
from srad.core import RngHandle, make_dataset, make_video
from srad.ingest import SyntheticConfig, generate_synthetic
from srad.objective import Hyperparameters, regression_loss
from srad.train import FULL, NO_LC, NO_YP, TrainConfig, fit, init_training, train_step, video_objective

HP = Hyperparameters(learning_rate=1e-3, hidden_width=8, dropout_rate=0.3, epochs=3, seed=5)


@pytest.fixture(scope="module")
def small():
    cfg = SyntheticConfig(num_normal_videos=4, num_anomalous_videos=4, num_test_normal_videos=0,
                          num_test_anomalous_videos=0, feature_dim=6, seed=3)
    return generate_synthetic(cfg)[0]


def test_zero_epochs_returns_initial_model(small):
    cfg = TrainConfig(Hyperparameters(hidden_width=8, epochs=0, seed=5))
    model, adam, hist = fit(small, cfg)
    fresh, _ = init_training(small, cfg)
    assert len(hist) == 0 and adam.t == 0
    assert all(np.array_equal(a, b) for a, b in zip(model.params().values(), fresh.params().values()))


def test_lambda_zero_normal_video_is_plain_mse_step():
    hp = Hyperparameters(lambda_=0.0, learning_rate=1e-2, hidden_width=5, dropout_rate=0.2, seed=1)
    cfg = TrainConfig(hp)
    video = make_video("n", 0, 48, np.random.default_rng(0).normal(size=(3, 4)))
    model = network.init_model(4, 5, 0.2, RngHandle(1))
    adam = network.init_adam(model, 1e-2)
    rng = RngHandle(7)
    new, _, rec = train_step(model, adam, video, cfg, rng)

    cache = network.forward(model, video.features, rng.child("dropout"), train=True)
    L, dL = regression_loss(np.zeros(3), cache.scores)
    expected, _ = network.adam_step(model, network.backward(model, cache, dL), adam)
    assert all(np.array_equal(a, b) for a, b in zip(new.params().values(), expected.params().values()))
    assert rec.L == L and rec.s1 is None and rec.orientation == ""


def test_single_fragment_anomalous_video_is_degenerate():
    cfg = TrainConfig(Hyperparameters(hidden_width=4, seed=0))
    model = network.init_model(3, 4, 0.0, RngHandle(0))
    video = make_video("solo", 1, 10, [[0.1, 0.2, 0.3]])
    res = video_objective(model, video.features, 1, cfg, RngHandle(1))
    assert list(res.targets) == [1.0]
    assert res.clusters.degenerate and not res.lc_active
    _, _, rec = train_step(model, network.init_adam(model), video, cfg, RngHandle(1))
    assert rec.degenerate and rec.L_c is None


def test_ablation_semantics():
    model = network.init_model(4, 6, 0.0, RngHandle(2))
    x = np.random.default_rng(1).normal(size=(6, 4))
    x[:2] += 3.0
    hp = Hyperparameters(hidden_width=6, dropout_rate=0.0, seed=0)
    full = video_objective(model, x, 1, TrainConfig(hp, FULL), RngHandle(3))
    no_yp = video_objective(model, x, 1, TrainConfig(hp, NO_YP), RngHandle(3))
    no_lc = video_objective(model, x, 1, TrainConfig(hp, NO_LC), RngHandle(3))
    warm = video_objective(model, x, 1, TrainConfig(hp, FULL), RngHandle(3), warmup=True)

    assert full.pseudo is not None and np.array_equal(full.targets, full.pseudo.y_p)
    assert full.lc_active and full.loss.L_c > 0
    assert np.all(no_yp.targets == 1) and no_yp.pseudo is None and no_yp.lc_active
    assert not no_lc.lc_active and no_lc.loss.lambda_ == 0 and np.array_equal(no_lc.targets, full.targets)
    assert np.all(warm.targets == 1) and warm.lc_active
    assert no_yp.loss.L_c == full.loss.L_c


def test_history_shape_and_no_lc_column(small):
    _, _, hist = fit(small, TrainConfig(HP, NO_LC))
    assert len(hist) == len(small) * HP.epochs
    for e in range(1, HP.epochs + 1):
        assert sorted(r.video_id for r in hist if r.epoch == e) == sorted(v.video_id for v in small)
    assert all(r.L_c is None for r in hist)
    rows = hist.to_csv().splitlines()
    assert rows[0] == "epoch,iter,video_id,label,Lr,Lc,L,d,s1,s2,orientation,degenerate"
    assert all(line.split(",")[5] == "" for line in rows[1:])


def test_warmup_epochs_skip_pseudo_labels(small):
    cfg = TrainConfig(HP, FULL, warmup_epochs=2)
    _, _, hist = fit(small, cfg)
    anom = [r for r in hist if r.label == 1]
    assert all(r.orientation == "" for r in anom if r.epoch <= 2)
    assert all(r.orientation in ("as-is", "inverted") for r in anom if r.epoch == 3)


def test_fit_is_reproducible(small):
    cfg = TrainConfig(HP)
    m1, _, h1 = fit(small, cfg)
    m2, _, h2 = fit(small, cfg)
    assert h1.to_csv() == h2.to_csv()
    assert all(np.array_equal(a, b) for a, b in zip(m1.params().values(), m2.params().values()))
    m3, _, h3 = fit(small, TrainConfig(Hyperparameters(**{**HP.__dict__, "seed": 6})))
    assert h3.to_csv() != h1.to_csv()


def test_checkpoint_cadence(small, tmp_path):
    cfg = TrainConfig(HP, checkpoint_every=2, checkpoint_dir=str(tmp_path))
    model, _, _ = fit(small, cfg)
    assert sorted(p.name for p in tmp_path.iterdir()) == ["epoch-0002.srck"]


def test_fit_rejects_bad_inputs(small):
    bad = make_dataset([make_video("v", 0, 16, [[np.nan, 0.0]])], 2, 16)
    with pytest.raises(ValueError, match="non-finite"):
        fit(bad, TrainConfig(HP))
    with pytest.raises(ValueError, match="ablation"):
        fit(small, TrainConfig(HP, "bogus"))
