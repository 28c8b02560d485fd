import numpy as np
import pytest

from ecgres import model as md
from ecgres import nn
from ecgres import segment as sg
from ecgres.errors import CheckpointError, ConfigError, ShapeError
from ecgres.wfdb_io import BeatClass

from conftest import fd_gradient, rel_error
from test_segment import make_segment


@pytest.fixture
def small_model():
    return md.build_model(md.ModelConfig(seed=1))


class TestBuildModel:
    def test_length_chain(self, small_model):
        assert small_model.length_chain == [180, 90, 45, 23, 12, 6]
        assert small_model.flat_features == 108

    def test_seed_determinism(self):
        m1 = md.build_model(md.ModelConfig(seed=9))
        m2 = md.build_model(md.ModelConfig(seed=9))
        for k, v in m1.params().items():
            assert np.array_equal(v, m2.params()[k]), k

    def test_different_seeds_differ(self):
        m1 = md.build_model(md.ModelConfig(seed=1))
        m2 = md.build_model(md.ModelConfig(seed=2))
        assert not np.array_equal(m1.params()["conv1.w"], m2.params()["conv1.w"])

    def test_collapsing_config_rejected(self):
        with pytest.raises(ConfigError):
            md.build_model(md.ModelConfig(input_length=8))

    def test_biases_zero(self, small_model):
        for name, arr in small_model.params().items():
            if name.endswith(".b"):
                assert np.all(arr == 0)


class TestForward:
    def test_zero_input_equal_logits(self):
        # fresh zero-bias model: zeros propagate, every class gets the same logit
        m = md.build_model(md.ModelConfig(seed=3))
        logits = m.forward(np.zeros((2, 1, 180), dtype=np.float32))
        assert np.allclose(logits, logits[:, :1], atol=1e-7)

    def test_softmax_rows_sum(self, small_model):
        x = np.random.default_rng(0).standard_normal((8, 1, 180)).astype(np.float32)
        probs = nn.softmax(small_model.forward(x))
        assert np.allclose(probs.sum(axis=1), 1.0, atol=1e-6)

    def test_batch_independence(self, small_model):
        rng = np.random.default_rng(1)
        batch = rng.standard_normal((32, 1, 180)).astype(np.float32)
        full = small_model.forward(batch)
        single = small_model.forward(batch[7:8])
        assert np.abs(full[7] - single[0]).max() < 1e-6

    def test_bad_shape(self, small_model):
        with pytest.raises(ShapeError):
            small_model.forward(np.zeros((1, 1, 100)))


class TestEndToEndGradient:
    def test_all_parameters_match_finite_differences(self):
        m = md.build_model(md.ModelConfig(seed=5))
        # float64 everywhere so the finite-difference probe is meaningful
        for layer in m._named.values():
            layer.params = {k: v.astype(np.float64) for k, v in layer.params.items()}
            for k in layer.params:
                if k == "b":
                    layer.params[k] = 0.01 * np.random.default_rng(0).standard_normal(
                        layer.params[k].shape
                    )
        rng = np.random.default_rng(6)
        x = rng.standard_normal((4, 1, 180))
        labels = np.array([0, 1, 2, 4])

        def loss_fn():
            logits = m.forward(x)
            return nn.softmax_cross_entropy(logits, labels)[0]

        logits = m.forward(x)
        _, _, grad = nn.softmax_cross_entropy(logits, labels)
        m.backward(grad)
        analytic = {k: v.copy() for k, v in m.grads().items()}

        params = m.params()
        rng2 = np.random.default_rng(7)
        for name, p in params.items():
            # probe a random subset of coordinates per tensor
            flat = p.reshape(-1)
            n_probe = min(6, flat.size)
            coords = rng2.choice(flat.size, size=n_probe, replace=False)
            for idx in coords:
                orig = flat[idx]
                h = 1e-5
                flat[idx] = orig + h
                fp = loss_fn()
                flat[idx] = orig - h
                fm = loss_fn()
                flat[idx] = orig
                fd = (fp - fm) / (2 * h)
                an = analytic[name].reshape(-1)[idx]
                denom = max(abs(fd), abs(an), 1e-4)
                assert abs(fd - an) / denom < 1e-3, (name, idx, fd, an)


class TestTrain:
    def _toy_split(self, n=10, seed=0):
        segs = [make_segment(label=BeatClass(i % 5), ann=i, seed=i) for i in range(n)]
        return sg.DatasetSplit(segs, [], seed)

    def test_one_step_for_small_set(self):
        m = md.build_model(md.ModelConfig(seed=0))
        log = md.train(m, self._toy_split(10), md.TrainConfig(epochs=1))
        assert len(log.epochs) == 1

    def test_loss_decreases(self, synth_segments):
        segs = synth_segments[:200]
        split = sg.DatasetSplit(segs, [], 0)
        m = md.build_model(md.ModelConfig(seed=0))
        log = md.train(m, split, md.TrainConfig(epochs=20, shuffle_seed=0))
        assert log.epochs[-1].train_loss < log.epochs[0].train_loss

    def test_reproducible(self):
        split = self._toy_split(40)
        logs = []
        finals = []
        for _ in range(2):
            m = md.build_model(md.ModelConfig(seed=4))
            log = md.train(m, split, md.TrainConfig(epochs=3, shuffle_seed=4))
            logs.append([(e.train_loss, e.train_accuracy) for e in log.epochs])
            finals.append({k: v.copy() for k, v in m.params().items()})
        assert logs[0] == logs[1]
        for k in finals[0]:
            assert np.array_equal(finals[0][k], finals[1][k]), k

    def test_overfits_small_subset(self, synth_segments):
        # capacity check: 50 beats to 100% train accuracy within 200 epochs
        rng = np.random.default_rng(0)
        idx = rng.choice(len(synth_segments), 50, replace=False)
        split = sg.DatasetSplit([synth_segments[i] for i in idx], [], 0)
        m = md.build_model(md.ModelConfig(seed=0))
        log = md.train(m, split, md.TrainConfig(epochs=200, shuffle_seed=0))
        assert max(e.train_accuracy for e in log.epochs) == 1.0


class TestPredict:
    def test_probabilities_valid(self, small_model):
        seg = make_segment(seed=3)
        cls, probs = md.predict(small_model, seg)
        assert isinstance(cls, BeatClass)
        assert probs.sum() == pytest.approx(1.0, abs=1e-6)

    def test_shift_invariance(self, small_model):
        x = np.random.default_rng(2).standard_normal((1, 1, 180)).astype(np.float32)
        logits = small_model.forward(x)
        p1 = nn.softmax(logits)
        p2 = nn.softmax(logits + 123.0)
        assert np.allclose(p1, p2, atol=1e-9)


class TestCheckpoint:
    def test_roundtrip_bit_identical(self, small_model, tmp_path):
        path = tmp_path / "m.ecgm"
        md.save_checkpoint(small_model, path)
        loaded = md.load_checkpoint(path)
        assert loaded.config == small_model.config
        for k, v in small_model.params().items():
            assert np.array_equal(v, loaded.params()[k]), k

    def test_truncated_rejected(self, small_model, tmp_path):
        path = tmp_path / "m.ecgm"
        md.save_checkpoint(small_model, path)
        path.write_bytes(path.read_bytes()[:-50])
        with pytest.raises(CheckpointError):
            md.load_checkpoint(path)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "m.ecgm"
        path.write_bytes(b"XXXX" + bytes(100))
        with pytest.raises(CheckpointError):
            md.load_checkpoint(path)

    def test_config_mismatch_named(self, small_model, tmp_path):
        path = tmp_path / "m.ecgm"
        md.save_checkpoint(small_model, path)
        # corrupt the config echo: claim a different hidden width
        data = path.read_bytes()
        data = data.replace(b"fc_hidden=64", b"fc_hidden=32")
        path.write_bytes(data)
        with pytest.raises(CheckpointError, match="fc1"):
            md.load_checkpoint(path)
