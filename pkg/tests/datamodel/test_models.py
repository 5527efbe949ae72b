import numpy as np
import pytest

from src.datamodel.models import BetaType, CoefficientSpec, Dataset, SubmodelSplit


class TestDataset:
    def test_shapes(self):
        ds = Dataset(Y=np.zeros(5), X=np.ones((5, 3)))
        assert (ds.n, ds.p) == (5, 3)

    def test_arrays_are_read_only_copies(self):
        Y = np.arange(4.0)
        ds = Dataset(Y=Y, X=np.ones((4, 2)))
        Y[0] = 99.0
        assert ds.Y[0] == 0.0
        with pytest.raises(ValueError):
            ds.Y[0] = 1.0

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError, match="rows"):
            Dataset(Y=np.zeros(3), X=np.zeros((4, 2)))

    def test_single_observation_rejected(self):
        with pytest.raises(ValueError, match="n >= 2"):
            Dataset(Y=np.zeros(1), X=np.zeros((1, 2)))

    def test_non_finite_rejected(self):
        X = np.ones((3, 2))
        X[1, 1] = np.nan
        with pytest.raises(ValueError, match="finite"):
            Dataset(Y=np.zeros(3), X=X)


class TestCoefficientSpec:
    def test_type_one_preset(self):
        spec = CoefficientSpec.preset("I", seed=4)
        assert spec.beta_I == (1.0, 0.4, 0.3, 0.5, 0.3, 0.3, 0.3)
        assert spec.I == (1, 2, 3, 4, 5, 6, 7)
        assert spec.S == 7
        assert spec.beta_type is BetaType.I
        assert spec.seed == 4

    def test_type_two_spreads_positions(self):
        assert CoefficientSpec.preset(BetaType.II).I == (1, 17, 33, 49, 65, 81, 97)

    def test_type_three_has_negative_signs(self):
        assert CoefficientSpec.preset("III").beta_I == (1.0, 0.4, -0.3, -0.5, 0.3, 0.3, -0.3)

    def test_preset_tails_override(self):
        spec = CoefficientSpec.preset("I", tail_low=-1.0, tail_high=0.0)
        assert (spec.tail_low, spec.tail_high) == (-1.0, 0.0)

    def test_custom_preset_rejected(self):
        with pytest.raises(ValueError, match="custom"):
            CoefficientSpec.preset("custom")

    @pytest.mark.parametrize("kwargs,fragment", [
        ({"beta_I": (1.0, 2.0), "I": (1,)}, "beta_I"),
        ({"beta_I": (1.0, 2.0), "I": (3, 3)}, "duplicate"),
        ({"beta_I": (1.0,), "I": (0,)}, "1-based"),
        ({"beta_I": (1.0,), "I": (1,), "tail_low": 0.2, "tail_high": 0.1}, "tail_low"),
    ])
    def test_invalid_specs(self, kwargs, fragment):
        with pytest.raises(ValueError, match=fragment):
            CoefficientSpec(**kwargs)


class TestSubmodelSplit:
    def test_from_selected(self):
        split = SubmodelSplit.from_selected([4, 0, 2], 6)
        assert split.idx_Z == (0, 2, 4)
        assert split.idx_U == (1, 3, 5)
        assert (split.q, split.l, split.p) == (3, 3, 6)

    def test_full_selection_leaves_empty_complement(self):
        split = SubmodelSplit.from_selected(range(4), 4)
        assert split.l == 0

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError, match="0..4"):
            SubmodelSplit.from_selected([5], 5)

    def test_empty_working_set_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            SubmodelSplit(idx_Z=(), idx_U=(0, 1))

    def test_overlap_rejected(self):
        with pytest.raises(ValueError, match="overlap"):
            SubmodelSplit(idx_Z=(0, 1), idx_U=(1, 2))

    def test_gap_rejected(self):
        with pytest.raises(ValueError, match="partition"):
            SubmodelSplit(idx_Z=(0,), idx_U=(2,))
