import numpy as np
import pytest

from idreader import classifier, raster, tensornet as tn
from idreader.classifier import DocumentClass, TrainConfig
from idreader.errors import EmptyDataset, ShapeMismatch


def tiny_class_images(rng, n_per_class=1):
    """One distinctly colored 200x200 image per class."""
    data = []
    for code in range(9):
        for _ in range(n_per_class):
            base = np.zeros((200, 200, 3), dtype=np.uint8)
            base[:, :, code % 3] = 40 + 20 * code
            base[50:150, 50:150, (code + 1) % 3] = 255 - 20 * code
            noise = rng.integers(0, 10, size=base.shape, dtype=np.uint8)
            img = np.clip(base.astype(int) + noise, 0, 255).astype(np.uint8)
            data.append((img, DocumentClass(code)))
    return data


class TestDocumentClass:
    def test_nine_stable_codes(self):
        assert len(DocumentClass) == 9
        assert [int(c) for c in DocumentClass] == list(range(9))
        assert DocumentClass.PASSPORT.label == "passport"


class TestPreprocess:
    def test_full_frame_values(self):
        rng = np.random.default_rng(0)
        photo = rng.integers(0, 256, size=(200, 200, 3), dtype=np.uint8)
        quad = raster.quad_from_rect(0, 0, 200, 200)
        out = classifier.preprocess(photo, quad)
        assert out.shape == (200, 200, 3)
        assert np.allclose(out, photo / 255.0)

    def test_all_white(self):
        photo = np.full((300, 400, 3), 255, dtype=np.uint8)
        quad = raster.quad_from_rect(50, 50, 350, 250)
        out = classifier.preprocess(photo, quad)
        assert np.allclose(out, 1.0)

    def test_matches_independent_warp(self):
        rng = np.random.default_rng(1)
        yy, xx = np.mgrid[0:240, 0:320]
        checker = (((yy // 16) + (xx // 16)) % 2 * 255).astype(np.uint8)
        photo = np.stack([checker] * 3, axis=2)
        quad = raster.quad_from_rect(40, 30, 280, 210) + rng.uniform(-2, 2, (4, 2))
        out = classifier.preprocess(photo, quad)
        ref = raster.warp_perspective(photo, quad, 200, 200).astype(np.float32) / 255.0
        assert np.array_equal(out, ref)


class TestTrain:
    def test_overfits_nine_samples(self):
        rng = np.random.default_rng(2)
        data = tiny_class_images(rng)
        cfg = TrainConfig(epochs=60, batch_size=32, seed=0)
        params, history = classifier.train(data, cfg)
        assert len(history) == 60
        acc, _ = classifier.evaluate_classifier(params, data)
        assert acc == 1.0

    def test_loss_decreases(self):
        rng = np.random.default_rng(3)
        data = tiny_class_images(rng)
        params, history = classifier.train(data, TrainConfig(epochs=11, seed=1))
        assert history[10][0] < history[0][0]

    def test_bitwise_deterministic(self):
        rng = np.random.default_rng(4)
        data = tiny_class_images(rng)
        cfg = TrainConfig(epochs=3, seed=9)
        p1, h1 = classifier.train(data, cfg)
        p2, h2 = classifier.train(data, cfg)
        assert h1 == h2
        for name in p1.tensors:
            assert np.array_equal(p1.tensors[name], p2.tensors[name])

    def test_empty_dataset(self):
        with pytest.raises(EmptyDataset):
            classifier.train([], TrainConfig(epochs=1))


class TestClassify:
    def test_probs_sum_and_argmax(self):
        params = tn.init_params(1, 2, seed=5)
        rng = np.random.default_rng(5)
        x = rng.uniform(0, 1, size=(200, 200, 3)).astype(np.float32)
        cls, probs = classifier.classify(params, x)
        assert probs.sum() == pytest.approx(1.0, abs=1e-6)
        assert int(cls) == int(probs.argmax())

    def test_zero_weights_tie_breaks_to_zero(self):
        params = tn.init_params(1, 2, seed=0)
        for t in params.tensors.values():
            t[...] = 0.0
        cls, probs = classifier.classify(params, np.zeros((200, 200, 3), np.float32))
        assert cls == DocumentClass.PAPER_ID_FRONT
        assert np.allclose(probs, 1 / 9)

    def test_argmax_invariance_under_monotone_logit_shift(self):
        # equivalent check on softmax directly: argmax(softmax(z)) == argmax(z)
        rng = np.random.default_rng(6)
        for _ in range(100):
            z = rng.uniform(-5, 5, size=9)
            assert tn.softmax(z).argmax() == z.argmax()
            assert tn.softmax(3.0 * z + 7.0).argmax() == z.argmax()

    def test_shape_check(self):
        params = tn.init_params(1, 2, seed=0)
        with pytest.raises(ShapeMismatch):
            classifier.classify(params, np.zeros((100, 100, 3), np.float32))


class TestEvaluate:
    def test_uniform_model_gives_ln9(self):
        params = tn.init_params(2, 8, seed=0)
        for t in params.tensors.values():
            t[...] = 0.0
        rng = np.random.default_rng(7)
        data = tiny_class_images(rng)
        acc, ce = classifier.evaluate_classifier(params, data)
        assert ce == pytest.approx(np.log(9), abs=1e-6)
        assert 0.0 <= acc <= 1.0

    def test_full_batch_equals_single_batch_epoch(self):
        # batch_size >= dataset size: one Adam step per epoch either way
        rng = np.random.default_rng(8)
        data = tiny_class_images(rng)
        p1, _ = classifier.train(data, TrainConfig(epochs=2, batch_size=9, seed=3))
        p2, _ = classifier.train(data, TrainConfig(epochs=2, batch_size=64, seed=3))
        for name in p1.tensors:
            assert np.array_equal(p1.tensors[name], p2.tensors[name])

    def test_history_csv(self, tmp_path):
        path = tmp_path / "hist.csv"
        classifier.history_to_csv([(2.0, 0.5), (1.0, 0.75)], path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "epoch,mean_ce,accuracy"
        assert lines[1].startswith("0,2.0")
        assert len(lines) == 3


class TestConfigGrid:
    def test_forward_shapes_all_table_configs(self):
        x = np.zeros((200, 200, 3), dtype=np.float32)
        for n_b in (1, 2, 3):
            for n_f in (8, 16):
                params = tn.init_params(n_b, n_f, seed=0)
                probs, _ = tn.model_forward(params, x)
                assert probs.shape == (9,)
                assert probs.sum() == pytest.approx(1.0, abs=1e-6)
