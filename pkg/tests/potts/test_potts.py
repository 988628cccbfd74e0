#!/usr/bin/env python3
"""
テストモジュール: Pottsエネルギーモデルのユニットテスト
"""

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
import sys
import os

# プロジェクトルートをパスに追加
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '../..'))

from scripts.errors import InputFormatError, InvalidArgument, InvalidState, ModelMismatch
from scripts.graph import complete, new_graph, petersen
from scripts.potts import (
    ParamBounds,
    Params,
    PottsModel,
    bounds_from_dict,
    box_bounds,
    decode,
    encode,
    energy,
    feature_matrix,
    feature_row,
    flip,
    ising,
    model_from_dict,
    model_to_dict,
    params_from_dict,
    params_to_dict,
    parse_state,
    spins,
)


def three_label_model():
    return PottsModel(complete(3), 3, [0.0, 1.0, 2.0], [[1.0, 0.0, 0.5], [0.0, 1.0, 0.0], [0.5, 0.0, 1.0]])


@pytest.mark.potts
@pytest.mark.unit
class TestPottsModel:
    """PottsModelの検証テスト"""

    def test_ising_tables(self, ising_pair):
        """IsingプリセットのU, Vテーブル"""
        assert ising_pair.U.tolist() == [1.0, -1.0]
        assert ising_pair.V.tolist() == [[1.0, -1.0], [-1.0, 1.0]]
        assert ising_pair.is_ising

    def test_counts(self):
        """状態数とパラメータ数"""
        model = ising(petersen())
        assert model.n_states == 1024
        assert model.n_params == 25

    def test_shape_mismatch(self):
        """U, Vの形状不一致"""
        with pytest.raises(ModelMismatch):
            PottsModel(complete(2), 3, [0.0, 1.0], np.eye(3))
        with pytest.raises(ModelMismatch):
            PottsModel(complete(2), 2, [0.0, 1.0], np.eye(3))

    def test_asymmetric_interaction(self):
        """非対称なVの拒否"""
        with pytest.raises(InvalidArgument):
            PottsModel(complete(2), 2, [0.0, 1.0], [[0.0, 1.0], [2.0, 0.0]])

    def test_single_label(self):
        """ラベル数1の拒否"""
        with pytest.raises(InvalidArgument):
            PottsModel(complete(2), 1, [0.0], [[0.0]])


@pytest.mark.potts
@pytest.mark.unit
class TestEnergy:
    """energyとfeature_rowのテスト"""

    def test_two_node_ferromagnet(self, ising_pair, ferromagnet):
        """2頂点強磁性体のエネルギー"""
        assert energy(ising_pair, ferromagnet, (1, 1)) == -1.0
        assert energy(ising_pair, ferromagnet, (2, 2)) == -1.0
        assert energy(ising_pair, ferromagnet, (1, 2)) == 1.0

    def test_k3_all_down(self, k3_ising):
        """K3でH=(1,1,1), J=(-1,-1,-1)のとき全下向きが-6"""
        params = Params([1.0, 1.0, 1.0], [-1.0, -1.0, -1.0])
        assert energy(k3_ising, params, (2, 2, 2)) == -6.0

    def test_feature_row(self, k3_ising):
        """特徴ベクトル eps(S)"""
        assert feature_row(k3_ising, (1, 2, 1)).tolist() == [1.0, -1.0, 1.0, -1.0, 1.0, -1.0]

    def test_wrong_state_length(self, k3_ising):
        """状態長の不一致"""
        with pytest.raises(ModelMismatch):
            energy(k3_ising, Params.zeros(k3_ising), (1, 1))

    def test_wrong_params_length(self, k3_ising):
        """パラメータ長の不一致"""
        with pytest.raises(ModelMismatch):
            energy(k3_ising, Params([0.0], [0.0]), (1, 1, 1))

    def test_label_out_of_range(self, k3_ising):
        """範囲外ラベル"""
        with pytest.raises(InvalidState):
            energy(k3_ising, Params.zeros(k3_ising), (1, 3, 1))

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(-2, 2), min_size=12, max_size=12), st.floats(-3, 3))
    def test_energy_is_linear_in_theta(self, values, scale):
        """E(S; a*theta) = a*E(S; theta) かつ E = eps(S) . theta"""
        model = three_label_model()
        params = Params.from_vector(model, values[: model.n_params])
        scaled = Params.from_vector(model, scale * params.as_vector())
        for state in [(1, 2, 3), (3, 3, 1), (2, 2, 2)]:
            value = energy(model, params, state)
            assert value == pytest.approx(float(feature_row(model, state) @ params.as_vector()), abs=1e-9)
            assert energy(model, scaled, state) == pytest.approx(scale * value, abs=1e-9)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_ising_energy_in_spins(self, seed):
        """Isingモデルでは E = sum H_i s_i + sum J_k s_a s_b (ランダムな10状態)"""
        model = ising(petersen())
        rng = np.random.default_rng(seed)
        params = Params.from_vector(model, rng.uniform(-1, 1, model.n_params))
        first, second = model.graph.endpoints()
        for index in rng.choice(model.n_states, size=10, replace=False):
            state = decode(int(index), model)
            s = np.array(spins(model, state), dtype=float)
            expected = params.H @ s + params.J @ (s[first] * s[second])
            assert energy(model, params, state) == pytest.approx(expected, abs=1e-9)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2), st.floats(-2, 2), st.tuples(*[st.integers(1, 3)] * 3))
    def test_edge_term_symmetric_in_endpoints(self, edge, strength, state):
        """辺の両端のラベルを入れ替えても、その辺の相互作用エネルギーは不変"""
        model = three_label_model()
        J = np.zeros(model.n_edges)
        J[edge] = strength
        params = Params(np.zeros(model.n_vertices), J)
        a, b = model.graph.edges[edge]
        swapped = list(state)
        swapped[a - 1], swapped[b - 1] = state[b - 1], state[a - 1]
        assert energy(model, params, tuple(swapped)) == pytest.approx(energy(model, params, state), abs=1e-12)

    def test_non_integer_label(self, k3_ising):
        """小数のラベルは切り捨てずに拒否"""
        with pytest.raises(InvalidState, match="non-integer"):
            energy(k3_ising, Params.zeros(k3_ising), (1, 1.5, 2))
        assert energy(k3_ising, Params.zeros(k3_ising), (1.0, 2.0, 1.0)) == 0.0

    def test_global_flip_symmetry(self, k3_ising):
        """H=0のIsingモデルは全スピン反転で不変"""
        params = Params([0.0, 0.0, 0.0], [0.3, -0.7, 1.0])
        for state in itertools.product((1, 2), repeat=3):
            assert energy(k3_ising, params, state) == energy(k3_ising, params, flip(k3_ising, state))


@pytest.mark.potts
@pytest.mark.unit
class TestStateIndex:
    """encodeとdecodeのテスト"""

    def test_vertex_one_least_significant(self, k3_ising):
        """頂点1が最下位桁"""
        assert encode((1, 1, 1), k3_ising) == 0
        assert encode((2, 1, 1), k3_ising) == 1
        assert encode((1, 1, 2), k3_ising) == 4
        assert decode(6, k3_ising) == (1, 2, 2)

    def test_bijection(self):
        """全状態での全単射"""
        model = three_label_model()
        seen = {encode(decode(i, model), model) for i in range(model.n_states)}
        assert seen == set(range(27))

    def test_decode_out_of_range(self, k3_ising):
        """範囲外インデックス"""
        with pytest.raises(InvalidState):
            decode(8, k3_ising)
        with pytest.raises(InvalidState):
            decode(-1, k3_ising)

    def test_encode_wrong_length(self, k3_ising):
        """長さ不一致はInvalidState"""
        with pytest.raises(InvalidState):
            encode((1, 1), k3_ising)

    def test_feature_matrix_matches_rows(self):
        """feature_matrixの各行がfeature_rowと一致"""
        model = three_label_model()
        matrix = feature_matrix(model)
        for i in range(model.n_states):
            assert np.array_equal(matrix[i], feature_row(model, decode(i, model)))


@pytest.mark.potts
@pytest.mark.unit
class TestBounds:
    """ParamBoundsとbox_boundsのテスト"""

    def test_box_bounds(self):
        """対称な箱型境界"""
        bounds = box_bounds(petersen())
        assert bounds.lower().tolist() == [-1.0] * 25
        assert bounds.upper().tolist() == [1.0] * 25

    def test_clip(self, ising_pair):
        """箱への射影"""
        bounds = box_bounds(ising_pair.graph)
        assert bounds.clip([2.0, -3.0, 0.5]).tolist() == [1.0, -1.0, 0.5]

    def test_inverted_bounds(self):
        """下限が上限を超える場合"""
        with pytest.raises(InvalidArgument):
            ParamBounds([1.0], [0.0], [], [])

    def test_broadcast_pair(self, k3_ising):
        """単一の[min, max]の全頂点への展開"""
        bounds = bounds_from_dict(k3_ising, {"H": [-0.5, 0.5], "J": [[-1, 1], [-2, 2], [0, 1]]})
        assert bounds.H_max.tolist() == [0.5, 0.5, 0.5]
        assert bounds.J_min.tolist() == [-1.0, -2.0, 0.0]

    def test_wrong_bound_count(self, k3_ising):
        """境界の個数不一致"""
        with pytest.raises(InputFormatError, match="bounds.J"):
            bounds_from_dict(k3_ising, {"H": [-1, 1], "J": [[-1, 1]]})


@pytest.mark.potts
@pytest.mark.unit
class TestParsing:
    """JSON入出力と状態の解析テスト"""

    def test_spin_aliases(self, k3_ising):
        """文字列'+1'/'-1'のみがエイリアス、整数はラベル"""
        assert parse_state(k3_ising, ["+1", "-1", " +1 "]) == (1, 2, 1)
        assert parse_state(k3_ising, [1, "-1", 2]) == (1, 2, 2)
        assert spins(k3_ising, (1, 2, 1)) == (1, -1, 1)

    @pytest.mark.parametrize("alias", ["+", "-", "1", "2", "up"])
    def test_other_strings_rejected(self, k3_ising, alias):
        """'+1'/'-1'以外の文字列は拒否"""
        with pytest.raises(InputFormatError):
            parse_state(k3_ising, [alias, 1, 1])

    def test_integer_minus_one_is_not_alias(self, k3_ising):
        """整数 -1 はラベルとして扱われ範囲外"""
        with pytest.raises(InvalidState):
            parse_state(k3_ising, [1, -1, 2])

    def test_aliases_need_spin_model(self):
        """スピン写像のないモデルではエイリアス不可"""
        with pytest.raises(InputFormatError):
            parse_state(three_label_model(), ["+1", "+1", "+1"])

    def test_parse_invalid_label(self, k3_ising):
        """範囲外ラベル"""
        with pytest.raises(InvalidState):
            parse_state(k3_ising, [1, 3, 1])
        with pytest.raises(InputFormatError):
            parse_state(k3_ising, "111")

    def test_model_round_trip(self, petersen_ising):
        """モデルの辞書変換と復元"""
        bounds = box_bounds(petersen_ising.graph, h=0.5)
        model, parsed_bounds = model_from_dict(model_to_dict(petersen_ising, bounds))
        assert model.is_ising
        assert model.graph == petersen_ising.graph
        assert parsed_bounds.H_max.tolist() == [0.5] * 10

    def test_preset(self):
        """preset 'ising' の読み込み"""
        model, bounds = model_from_dict({"graph": {"n_vertices": 2, "edges": [[1, 2]]}, "preset": "ising"})
        assert model.is_ising
        assert bounds is None

    def test_unknown_preset(self):
        """未知のpreset"""
        with pytest.raises(InputFormatError, match="preset"):
            model_from_dict({"graph": {"n_vertices": 2, "edges": []}, "preset": "xy"})

    def test_missing_tables(self):
        """U/Vのない明示モデル"""
        with pytest.raises(InputFormatError, match="model.n_labels"):
            model_from_dict({"graph": {"n_vertices": 2, "edges": []}})

    def test_params_from_result(self, ising_pair, ferromagnet):
        """結果JSONからのパラメータ読み込み"""
        data = {"params": params_to_dict(ferromagnet), "accepted": True}
        assert params_from_dict(ising_pair, data) == ferromagnet

    def test_params_wrong_length(self, ising_pair):
        """パラメータ長の不一致"""
        with pytest.raises(ModelMismatch):
            params_from_dict(ising_pair, {"H": [0.0], "J": [1.0]})

    def test_flip_requires_two_labels(self):
        """3ラベルモデルでの反転は不可"""
        with pytest.raises(InvalidArgument):
            flip(three_label_model(), (1, 2, 3))

    def test_new_graph_ising(self):
        """単一辺のIsingモデルの特徴行"""
        model = ising(new_graph(2, [(2, 1)]))
        assert feature_row(model, (2, 1)).tolist() == [-1.0, 1.0, -1.0]
