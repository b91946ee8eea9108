"""
Tests for dataset drivers, datasets and augmentation.
"""

import pytest
import numpy as np
import tempfile
import os

from prune_lab.core.dataset import Dataset, AugmentationPolicy, augment, augment_batch
from prune_lab.drivers import (
    BlobsDriver, RingsDriver, MixtureDriver, CsvDriver, create_driver,
    make_blobs, make_rings, make_mixture, load_csv, write_csv,
)
from prune_lab.core.errors import ParseError, ParameterError


@pytest.fixture
def csv_file():
    """Write a small well-formed CSV dataset."""
    content = "0.5,1.0,0\n-1.5,2.25,1\n3,4,2\n"
    with tempfile.NamedTemporaryFile(mode='w', delete=False, suffix='.csv') as f:
        f.write(content)
        temp_path = f.name

    yield temp_path

    if os.path.exists(temp_path):
        os.unlink(temp_path)


def write_temp(content):
    mode = "wb" if isinstance(content, bytes) else "w"
    with tempfile.NamedTemporaryFile(mode=mode, delete=False, suffix=".csv") as f:
        f.write(content)
        return f.name


def linear_classifier_accuracy(train, test=None):
    """Accuracy of a least-squares one-vs-rest linear classifier fitted on train."""
    test = train if test is None else test

    def design(data):
        return np.hstack([data.features.astype(np.float64), np.ones((len(data), 1))])

    targets = np.eye(train.class_count)[train.labels]
    coef, *_ = np.linalg.lstsq(design(train), targets, rcond=None)
    return float(np.mean(np.argmax(design(test) @ coef, axis=1) == test.labels))


class TestGenerators:
    """Test suite for the synthetic generators."""

    def test_blobs_shape_and_labels(self):
        data = make_blobs(4, 25, 3, 5.0, seed=1)
        assert data.features.shape == (100, 3)
        assert data.features.dtype == np.float32
        assert np.array_equal(data.class_counts(), [25, 25, 25, 25])

    def test_blobs_deterministic(self):
        assert make_blobs(3, 10, 2, 4.0, seed=7).equals(make_blobs(3, 10, 2, 4.0, seed=7))
        assert not make_blobs(3, 10, 2, 4.0, seed=7).equals(make_blobs(3, 10, 2, 4.0, seed=8))

    def test_blob_means_are_separated(self):
        data = make_blobs(5, 400, 2, 6.0, seed=0)
        means = np.array([data.features[data.labels == c].mean(axis=0) for c in range(5)])
        dists = [np.linalg.norm(means[a] - means[b]) for a in range(5) for b in range(a + 1, 5)]
        assert min(dists) > 5.0

    def test_blobs_invalid_dim(self):
        with pytest.raises(ParameterError):
            make_blobs(2, 10, 0, 4.0, seed=0)

    def test_rings_radii(self):
        data = make_rings(3, 200, 0.0, seed=0)
        radii = np.linalg.norm(data.features, axis=1)
        for c in range(3):
            np.testing.assert_allclose(radii[data.labels == c], c + 1, atol=1e-5)

    def test_blobs_nearest_neighbour(self):
        data = make_blobs(5, 60, 2, 10.0, seed=2)
        x = data.features.astype(np.float64)
        dists = np.linalg.norm(x[:, None, :] - x[None, :, :], axis=2)
        np.fill_diagonal(dists, np.inf)
        assert np.mean(data.labels[np.argmin(dists, axis=1)] == data.labels) >= 0.95

    def test_rings_need_a_nonlinear_rule(self):
        data = make_rings(3, 200, 0.05, seed=3)
        radius = np.linalg.norm(data.features.astype(np.float64), axis=1)
        predicted = np.clip(np.rint(radius) - 1, 0, 2)
        assert np.mean(predicted == data.labels) >= 0.99
        assert linear_classifier_accuracy(data) <= 0.6

    def test_mixture_classes(self):
        data = make_mixture(3, 2, 20, 0.1, 3.0, seed=4)
        assert data.class_count == 5
        assert np.array_equal(data.class_counts(), [20] * 5)
        assert data.features[data.labels >= 3, 0].mean() > data.features[data.labels < 3, 0].mean() + 5.0


class TestDrivers:
    """Test suite for DatasetDriver implementations."""

    def test_blobs_driver_splits_differ(self):
        driver = BlobsDriver({"class_count": 2, "per_class": 30, "test_per_class": 10})
        train = driver.load_data("train")
        test = driver.load_data("test")
        assert len(train) == 60 and len(test) == 20
        assert test.split == "test"
        assert driver.data is test

    def test_driver_without_data(self):
        driver = RingsDriver({})
        with pytest.raises(ValueError):
            driver.data
        assert len(driver) == 0

    def test_mixture_driver_defaults(self):
        driver = MixtureDriver({})
        assert driver.ring_classes == 3 and driver.blob_classes == 3
        assert len(driver.load_data("train")) == 600

    def test_create_driver(self):
        assert isinstance(create_driver({"kind": "rings"}), RingsDriver)
        assert isinstance(create_driver({}), MixtureDriver)
        with pytest.raises(ValueError):
            create_driver({"kind": "spirals"})


class TestCsv:
    """Test suite for the CSV reader and writer."""

    def test_load_csv(self, csv_file):
        data = load_csv(csv_file)
        assert data.features.shape == (3, 2)
        assert data.class_count == 3
        assert data.features[1, 1] == np.float32(2.25)

    def test_round_trip(self):
        data = make_blobs(2, 5, 3, 4.0, seed=3)
        path = write_temp("")
        try:
            write_csv(data, path)
            assert load_csv(path).equals(data)
        finally:
            os.unlink(path)

    def test_missing_file(self):
        with pytest.raises(ParseError):
            load_csv("/nonexistent/data.csv")

    @pytest.mark.parametrize("content,line", [
        ("1,2,0\n1,x,1\n", 2),
        ("1,2,0\n3,4,1.5\n", 2),
        ("1,2,0\n3,4,1\n5,6\n", 3),
        (b"1.0,2.0,0\n\xff\xfe,4.0,1\n", 2),
    ])
    def test_parse_errors_report_line(self, content, line):
        path = write_temp(content)
        try:
            with pytest.raises(ParseError) as info:
                load_csv(path)
            assert info.value.line == line
        finally:
            os.unlink(path)

    def test_csv_driver(self, csv_file):
        driver = CsvDriver({"train_path": csv_file, "test_path": csv_file})
        assert len(driver.load_data("test")) == 3
        with pytest.raises(ParseError):
            CsvDriver({}).load_data("train")


class TestAugmentation:
    """Test suite for augmented views."""

    def test_views_deterministic(self):
        policy = AugmentationPolicy(noise_sigma=0.2, scale_range=(0.5, 1.5), views_per_sample=3)
        a = augment([1.0, 2.0], policy, seed=11, index=4)
        b = augment([1.0, 2.0], policy, seed=11, index=4)
        assert len(a) == 3
        assert all(np.array_equal(x, y) for x, y in zip(a, b))

    def test_identity_policy(self):
        policy = AugmentationPolicy(noise_sigma=0.0, scale_range=(1.0, 1.0))
        views = augment([1.0, -2.0], policy, seed=0)
        assert all(np.array_equal(v, np.float32([1.0, -2.0])) for v in views)

    def test_noise_magnitude(self):
        policy = AugmentationPolicy(noise_sigma=0.1, scale_range=(1.0, 1.0))
        samples = np.random.default_rng(9).normal(size=(1000, 3)).astype(np.float32)
        deviation = [np.abs(view - s) for i, s in enumerate(samples)
                     for view in augment(s, policy, seed=21, index=i)]
        assert 0.05 <= np.mean(deviation) <= 0.15

    def test_batch_is_view_major(self):
        policy = AugmentationPolicy(noise_sigma=0.0, scale_range=(2.0, 2.0))
        features = np.array([[1.0, 0.0], [0.0, 1.0]], dtype=np.float32)
        batch = augment_batch(features, [0, 1], policy, seed=0)
        np.testing.assert_array_equal(batch, [[2, 0], [0, 2], [2, 0], [0, 2]])

    def test_invalid_policy(self):
        with pytest.raises(ParameterError):
            AugmentationPolicy(views_per_sample=1)
        with pytest.raises(ParameterError):
            AugmentationPolicy(scale_range=(1.2, 0.8))

    def test_train_split_needs_every_class(self):
        with pytest.raises(ParameterError):
            Dataset(np.zeros((2, 2)), [0, 0], class_count=2)
