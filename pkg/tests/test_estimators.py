import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError
from sklearn.pipeline import Pipeline

from vcmcodec.errors import InvalidInputError
from vcmcodec.estimators import (
    GaussianHeatmapRenderer,
    KeypointQuantizer,
    MotionFrameSynthesizer,
    SoftArgmaxKeypointExtractor,
)
from vcmcodec.featstream import pack_descriptors
from vcmcodec.heatmaps import gaussian_heatmap


def rendered_stack(positions, dims=(32, 32), spread=4.0):
    maps = []
    for p in positions:
        g = gaussian_heatmap(np.asarray(p, dtype=float), spread * np.eye(2), dims)
        maps.append(g / g.sum())
    return np.stack(maps)


class TestExtractor:
    def test_recovers_rendered_positions(self):
        positions = [(10.0, 20.0), (25.0, 7.0)]
        packed = SoftArgmaxKeypointExtractor().transform(rendered_stack(positions))
        assert packed.shape == (2, 6)
        np.testing.assert_allclose(packed[:, :2], positions, atol=0.1)

    def test_softmax_mode_accepts_raw_scores(self, rng):
        raw = rng.normal(size=(3, 16, 16))
        packed = SoftArgmaxKeypointExtractor(apply_softmax=True).transform(raw)
        assert packed.shape == (3, 6)
        assert np.all((packed[:, 0] >= 0) & (packed[:, 0] <= 15))

    def test_batch_of_frames(self):
        stack = rendered_stack([(10.0, 20.0)])
        batch = np.stack([stack, stack])
        packed = SoftArgmaxKeypointExtractor().transform(batch)
        assert packed.shape == (2, 1, 6)

    def test_rejects_bad_rank(self):
        with pytest.raises(InvalidInputError):
            SoftArgmaxKeypointExtractor().transform(np.zeros((4, 4)))

    def test_sklearn_protocol(self):
        est = SoftArgmaxKeypointExtractor(apply_softmax=True)
        assert est.get_params() == {"apply_softmax": True}
        cloned = clone(est)
        assert cloned.get_params() == est.get_params()


class TestQuantizer:
    def test_roundtrip_bound(self, rng):
        positions = rng.uniform(0, 60, size=(5, 3, 2))
        covariances = np.broadcast_to(6.0 * np.eye(2), (5, 3, 2, 2)).copy()
        packed = pack_descriptors(positions, covariances)
        quantizer = KeypointQuantizer()
        ints = quantizer.fit_transform(packed)
        assert ints.shape == packed.shape and ints.dtype == np.int64
        back = quantizer.inverse_transform(ints)
        assert np.abs(back[..., :2] - packed[..., :2]).max() <= 1.0

    def test_get_set_params(self):
        quantizer = KeypointQuantizer(pos_step=1.0, cov_step=32.0)
        assert quantizer.get_params() == {"pos_step": 1.0, "cov_step": 32.0}
        quantizer.set_params(pos_step=4.0)
        assert quantizer.pos_step == 4.0

    def test_pipeline_composition(self):
        stack = rendered_stack([(12.0, 9.0), (20.0, 22.0)])
        pipe = Pipeline([
            ("extract", SoftArgmaxKeypointExtractor()),
            ("quantize", KeypointQuantizer()),
        ])
        ints = pipe.fit_transform(stack)
        assert ints.shape == (2, 6)
        back = pipe.named_steps["quantize"].inverse_transform(ints)
        np.testing.assert_allclose(back[:, :2], [[12, 9], [20, 22]], atol=1.1)


class TestRenderer:
    def test_renders_peak_at_keypoint(self):
        packed = pack_descriptors(np.array([[8.0, 12.0]]), 4.0 * np.eye(2)[None])
        maps = GaussianHeatmapRenderer(height=24, width=24).transform(packed)
        assert maps.shape == (1, 24, 24)
        assert maps[0, 12, 8] == 1.0

    def test_alpha_param_controls_spread(self):
        packed = pack_descriptors(np.array([[8.0, 8.0]]), 4.0 * np.eye(2)[None])
        wide = GaussianHeatmapRenderer(16, 16, alpha=0.1).transform(packed)
        narrow = GaussianHeatmapRenderer(16, 16, alpha=2.0).transform(packed)
        assert wide.sum() > narrow.sum()


class TestSynthesizer:
    def test_predict_before_fit_raises(self):
        with pytest.raises(NotFittedError):
            MotionFrameSynthesizer().predict(np.zeros((1, 6)))

    def test_identity_prediction(self, rng):
        frame = rng.uniform(0, 1, size=(32, 32))
        packed = pack_descriptors(
            rng.uniform(8, 24, size=(2, 2)), np.broadcast_to(4.0 * np.eye(2), (2, 2, 2)).copy()
        )
        model = MotionFrameSynthesizer().fit(frame, packed)
        out = model.predict(packed)
        assert np.array_equal(out, frame)

    def test_batch_prediction_shape(self, rng):
        frame = rng.uniform(0, 1, size=(32, 32))
        packed = pack_descriptors(
            rng.uniform(8, 24, size=(2, 2)), np.broadcast_to(4.0 * np.eye(2), (2, 2, 2)).copy()
        )
        model = MotionFrameSynthesizer(sigma_interp=6.0).fit(frame, packed)
        batch = np.stack([packed, packed, packed])
        out = model.predict(batch)
        assert out.shape == (3, 32, 32)

    def test_sklearn_protocol(self):
        model = MotionFrameSynthesizer(backend="analytic", sigma_interp=4.0)
        params = model.get_params()
        assert params["backend"] == "analytic" and params["sigma_interp"] == 4.0
        assert clone(model).get_params() == params
