import numpy as np
import pytest
from hypothesis import given, strategies as st

from stochfd.dataset import (DataError, DensitySpeedDataset, compute_weights, load_csv,
                             train_test_split, write_csv, write_weights_csv)


def _write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


class TestLoadCsv:
    def test_three_rows(self, tmp_path):
        d = load_csv(_write(tmp_path, "density,speed\n10,60\n20,50\n30,40"))
        assert len(d) == 3
        np.testing.assert_array_equal(d.density, [10, 20, 30])
        np.testing.assert_array_equal(d.speed, [60, 50, 40])

    def test_malformed_row_names_line(self, tmp_path):
        with pytest.raises(DataError, match="line 2"):
            load_csv(_write(tmp_path, "density,speed\nabc,50\n"))

    def test_negative_and_nonfinite_rows_rejected(self, tmp_path):
        with pytest.raises(DataError, match="line 3, 4"):
            load_csv(_write(tmp_path, "density,speed\n1,2\n-1,2\n3,nan\n"))

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError, match="no such file"):
            load_csv(tmp_path / "nope.csv")

    def test_empty_result(self, tmp_path):
        with pytest.raises(DataError, match="no observations"):
            load_csv(_write(tmp_path, "density,speed\n"))

    def test_custom_columns_and_weights(self, tmp_path):
        p = _write(tmp_path, "k,u,w\n1,60,0.5\n2,55,1.5\n")
        d = load_csv(p, density_column="k", speed_column="u", weight_column="w")
        np.testing.assert_array_equal(d.weights, [0.5, 1.5])

    def test_missing_column(self, tmp_path):
        with pytest.raises(DataError, match="missing column"):
            load_csv(_write(tmp_path, "rho,speed\n1,2\n"))

    def test_round_trip(self, tmp_path, traffic):
        write_csv(traffic, tmp_path / "out.csv")
        back = load_csv(tmp_path / "out.csv")
        np.testing.assert_array_equal(back.density, traffic.density)
        np.testing.assert_array_equal(back.speed, traffic.speed)


class TestDatasetType:
    def test_flow_identity(self, traffic):
        np.testing.assert_array_equal(traffic.flow, traffic.density * traffic.speed)

    def test_immutable(self, traffic):
        with pytest.raises(ValueError):
            traffic.density[0] = 1.0

    def test_rejects_bad_weights(self):
        with pytest.raises(DataError):
            DensitySpeedDataset([1.0, 2.0], [3.0, 4.0], weights=[1.0, 0.0])
        with pytest.raises(DataError):
            DensitySpeedDataset([1.0, 2.0], [3.0, 4.0], weights=[1.0])

    def test_rejects_negative_speed(self):
        with pytest.raises(DataError):
            DensitySpeedDataset([1.0], [-3.0])


class TestWeights:
    def test_single_bin(self):
        d = DensitySpeedDataset([5.0, 5.0, 5.0], [1.0, 2.0, 3.0])
        np.testing.assert_allclose(compute_weights(d), 1.0)

    def test_three_and_one(self):
        # occupied-bin mean count 2: weights 2/3 (x3) and 2, already mean one
        d = DensitySpeedDataset([0.0, 0.05, 0.1, 10.0], [1.0] * 4)
        np.testing.assert_allclose(compute_weights(d, bins=50), [2 / 3] * 3 + [2.0], rtol=1e-14)

    def test_four_bins(self):
        rho = [0.1, 0.2, 0.3, 0.4, 1.2, 1.3, 2.5, 4.0]
        w = compute_weights(DensitySpeedDataset(rho, np.ones(8)), bins=4)
        raw = np.array([1 / 4] * 4 + [1 / 2] * 2 + [1.0, 1.0])
        np.testing.assert_allclose(w, raw / raw.mean(), rtol=1e-14)

    @given(st.lists(st.floats(0, 500, allow_nan=False), min_size=1, max_size=200),
           st.integers(1, 80))
    def test_mean_one_and_positive(self, rho, bins):
        w = compute_weights(DensitySpeedDataset(rho, np.ones(len(rho))), bins=bins)
        assert np.all(w > 0)
        assert abs(w.mean() - 1.0) < 1e-12

    def test_bad_bins(self, traffic):
        with pytest.raises(ValueError):
            compute_weights(traffic, bins=0)

    def test_export(self, tmp_path, traffic):
        w = compute_weights(traffic)
        write_weights_csv(w, tmp_path / "w.csv")
        lines = (tmp_path / "w.csv").read_text().splitlines()
        assert lines[0] == "weight" and len(lines) == len(traffic) + 1
        np.testing.assert_array_equal([float(x) for x in lines[1:]], w)


class TestSplit:
    def _ten(self):
        return DensitySpeedDataset(np.arange(10.0), np.arange(10.0) + 1)

    def test_full_fraction(self):
        tr, te = train_test_split(self._ten(), seed=0, train_fraction=1.0)
        assert len(tr) == 10 and len(te) == 0
        np.testing.assert_array_equal(tr.density, np.arange(10.0))

    def test_deterministic(self):
        a = train_test_split(self._ten(), 3, 0.5)
        b = train_test_split(self._ten(), 3, 0.5)
        np.testing.assert_array_equal(a[0].density, b[0].density)

    def test_floor_sizes(self):
        tr, te = train_test_split(self._ten(), 1, 0.7)
        assert (len(tr), len(te)) == (7, 3)

    @given(st.integers(1, 60), st.floats(0.01, 1.0), st.integers(0, 2**31))
    def test_partition(self, n, frac, seed):
        d = DensitySpeedDataset(np.arange(float(n)), np.ones(n))
        tr, te = train_test_split(d, seed, frac)
        both = np.concatenate([tr.density, te.density])
        assert len(set(tr.density) & set(te.density)) == 0
        np.testing.assert_array_equal(np.sort(both), d.density)

    @pytest.mark.parametrize("frac", [0.0, -0.1, 1.5])
    def test_bad_fraction(self, frac):
        with pytest.raises(ValueError):
            train_test_split(self._ten(), 0, frac)
