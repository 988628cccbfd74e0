#!/usr/bin/env python3
"""
pytest設定とフィクスチャ定義
全テストで共通して使用されるモデル、データ集合、ヘルパーを定義
"""

import json
import math
import os
import sys
import tempfile

import numpy as np
import pytest

# プロジェクトルートをパスに追加
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from scripts.graph import complete, new_graph, petersen
from scripts.potts import Params, box_bounds, ising


@pytest.fixture
def ising_pair():
    """2頂点1辺のIsingモデル"""
    return ising(new_graph(2, [(1, 2)]))


@pytest.fixture
def ferromagnet():
    """2頂点強磁性パラメータ H=(0,0), J=(-1)"""
    return Params([0.0, 0.0], [-1.0])


@pytest.fixture
def k3_ising():
    """K3上のIsingモデル"""
    return ising(complete(3))


@pytest.fixture
def petersen_ising():
    """Petersenグラフ上のIsingモデル"""
    return ising(petersen())


@pytest.fixture
def unit_bounds():
    """|H| <= 1, |J| <= 1 の境界を返すファクトリ"""
    def make(model):
        return box_bounds(model.graph)
    return make


@pytest.fixture
def or_gate_data():
    """K3上の論理和データ集合 (-,-,-), (-,+,+), (+,-,+), (+,+,+)

    ラベル1がスピン+1、ラベル2がスピン-1
    """
    return [(2, 2, 2), (2, 1, 1), (1, 2, 1), (1, 1, 1)]


@pytest.fixture
def temp_working_directory():
    """一時作業ディレクトリのフィクスチャ"""
    with tempfile.TemporaryDirectory() as temp_dir:
        original_cwd = os.getcwd()
        try:
            os.chdir(temp_dir)
            yield temp_dir
        finally:
            os.chdir(original_cwd)


@pytest.fixture
def write_json(temp_working_directory):
    """一時ディレクトリにJSONファイルを書き出すヘルパー"""
    def write(name, payload):
        path = os.path.join(temp_working_directory, name)
        with open(path, 'w', encoding='utf-8') as f:
            json.dump(payload, f)
        return path
    return write


# マーカー定義
def pytest_configure(config):
    """pytest設定"""
    for name, text in (
        ("slow", "mark test as slow running"),
        ("integration", "mark test as integration test"),
        ("unit", "mark test as unit test"),
        ("acceptance", "mark test as end-to-end reproduction check"),
        ("graph", "mark test as graph module test"),
        ("potts", "mark test as Potts model test"),
        ("spectrum", "mark test as enumeration oracle test"),
        ("milp", "mark test as MILP solver test"),
        ("formulations", "mark test as DAS/GSM formulation test"),
        ("cli", "mark test as command line test"),
    ):
        config.addinivalue_line("markers", f"{name}: {text}")


# カスタムアサーション関数
def assert_valid_spectrum(spectrum):
    """Spectrumの不変条件をチェックするヘルパー関数"""
    energies = np.asarray(spectrum.energies)
    assert spectrum.E0 == pytest.approx(float(energies.min()))
    assert spectrum.n_ground + spectrum.n_excited == energies.size
    assert list(spectrum.ground) == sorted(spectrum.ground)
    for index in spectrum.ground:
        assert energies[index] - spectrum.E0 <= spectrum.tol
    if spectrum.n_excited:
        mask = np.ones(energies.size, dtype=bool)
        mask[list(spectrum.ground)] = False
        assert np.all(energies[mask] - spectrum.E0 > spectrum.tol)
        assert spectrum.E1 == pytest.approx(float(energies[mask].min()))
    assert spectrum.delta_E >= 0


def assert_valid_result(result, model, bounds):
    """受理された推定結果の妥当性をチェックするヘルパー関数"""
    assert result.accepted
    assert result.delta_E > 0
    assert bounds.contains(result.params, tol=1e-9)
    assert result.spectrum is not None
    assert_valid_spectrum(result.spectrum)
    if not math.isnan(result.objective):
        assert -result.objective == pytest.approx(result.delta_E, abs=1e-6)


# pytest用のヘルパー関数をグローバルに追加
pytest.assert_valid_spectrum = assert_valid_spectrum
pytest.assert_valid_result = assert_valid_result
