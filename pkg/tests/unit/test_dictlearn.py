"""
Testes unitários para o módulo dictlearn.py.
"""

import hashlib

import numpy as np
import pytest

from core import ConcatDictionary, Dictionary, normalize_columns
from errors import EmptySource, ShapeMismatch
from dictlearn import (
    dict_gradient,
    learn_component_dictionaries,
    learn_dictionary,
    load_dictionary,
    save_dictionary,
)
from formats import load_json, write_matrix
from training import TrainConfig


class TestDictGradient:
    """Testes para dict_gradient."""

    def test_example(self):
        """
        Testa o exemplo com A = 0.

        Cenário: y = (1, 2), x = (3).
        Esperado: −(y·xᵀ) = (−3, −6).
        """
        np.testing.assert_allclose(dict_gradient(np.zeros((2, 1)), [[1.0, 2.0]], [[3.0]]),
                                   [[-3.0], [-6.0]])

    def test_zero_for_exact_reconstruction(self, small_dictionary, planted_batch):
        """
        Testa sinais reconstruídos exatamente pelos códigos.

        Esperado: Gradiente nulo.
        """
        signals, codes = planted_batch
        np.testing.assert_allclose(dict_gradient(small_dictionary, signals, codes), 0.0,
                                   atol=1e-12)

    def test_shape_mismatch(self, small_dictionary):
        """
        Testa códigos com N errado.

        Esperado: ShapeMismatch.
        """
        with pytest.raises(ShapeMismatch):
            dict_gradient(small_dictionary, np.zeros((2, 20)), np.zeros((2, 5)))


class TestLearnDictionary:
    """Testes para learn_dictionary e learn_component_dictionaries."""

    def test_zero_learning_rate_keeps_dictionary(self, small_dictionary, planted_batch):
        """
        Testa lr = 0.

        Esperado: Dicionário inalterado.
        """
        signals, _ = planted_batch
        config = TrainConfig(learning_rate=0.0, batch_size=20, max_epochs=2)
        learned, costs = learn_dictionary(signals, small_dictionary, config, 0.1, fista_iters=20)
        np.testing.assert_allclose(learned.atoms, small_dictionary.atoms, atol=1e-12)
        assert costs[0] == pytest.approx(costs[-1])

    def test_columns_stay_unit_norm(self, small_dictionary, planted_batch):
        """
        Testa a renormalização após cada passo.

        Esperado: Colunas unitárias e custo registrado por época.
        """
        signals, _ = planted_batch
        config = TrainConfig(learning_rate=0.5, batch_size=10, max_epochs=3, rel_cost_tol=0.0)
        learned, costs = learn_dictionary(signals, small_dictionary, config, 0.1, fista_iters=30)
        np.testing.assert_allclose(np.linalg.norm(learned.atoms, axis=0), 1.0, atol=1e-8)
        assert len(costs) == 4

    def test_cost_decreases_from_perturbed_start(self, small_dictionary, planted_batch, rng):
        """
        Testa o aprendizado a partir de um dicionário plantado perturbado.

        Esperado: Custo lasso médio final menor que o da época 0.
        """
        signals, _ = planted_batch
        noisy = small_dictionary.atoms + 0.3 * rng.standard_normal(small_dictionary.atoms.shape)
        init = normalize_columns(Dictionary(noisy))
        config = TrainConfig(learning_rate=0.1, batch_size=10, max_epochs=5, rel_cost_tol=0.0)
        _, costs = learn_dictionary(signals, init, config, 0.1, fista_iters=50)
        assert costs[-1] < costs[0]

    def test_empty_signals(self, small_dictionary):
        """
        Testa conjunto vazio.

        Esperado: EmptySource.
        """
        with pytest.raises(EmptySource):
            learn_dictionary(np.zeros((0, 20)), small_dictionary, TrainConfig(), 0.1)

    def test_one_component_reduces_to_single(self, planted_batch):
        """
        Testa D = 1.

        Esperado: Concatenação com uma parte igual ao learn_dictionary direto.
        """
        signals, _ = planted_batch
        config = TrainConfig(learning_rate=0.1, batch_size=20, max_epochs=1, seed=2)
        concat = learn_component_dictionaries([signals], 12, config, 0.1, fista_iters=10)
        assert concat.D == 1 and concat.N == 12

    def test_component_dimensions_must_agree(self):
        """
        Testa conjuntos com M diferentes.

        Esperado: ShapeMismatch.
        """
        with pytest.raises(ShapeMismatch):
            learn_component_dictionaries([np.ones((3, 4)), np.ones((3, 5))], 2, TrainConfig(), 0.1)


class TestPersistence:
    """Testes para save_dictionary/load_dictionary."""

    def test_round_trip(self, mca_dictionary, tmp_path):
        """
        Testa a persistência de um dicionário concatenado.

        Esperado: Partes idênticas e manifesto com nomes e partição.
        """
        manifest = save_dictionary(mca_dictionary, tmp_path / "dict", names=["texto", "imagem"],
                                   config_digest="abc")
        loaded = load_dictionary(tmp_path / "dict")
        np.testing.assert_array_equal(loaded.matrix, mca_dictionary.matrix)
        document = load_json(manifest)
        assert [c["name"] for c in document["components"]] == ["texto", "imagem"]
        assert document["partition"] == [12, 12]

    def test_manifest_digests_match_files(self, mca_dictionary, tmp_path):
        """
        Testa o sha256 de cada componente no manifesto.

        Esperado: Digest igual ao SHA-256 dos bytes do arquivo gravado.
        """
        manifest = save_dictionary(mca_dictionary, tmp_path / "dict")
        for component in load_json(manifest)["components"]:
            raw = (tmp_path / "dict" / component["file"]).read_bytes()
            assert component["sha256"] == hashlib.sha256(raw).hexdigest()

    def test_single_lsam_file(self, small_dictionary, tmp_path):
        """
        Testa a leitura de uma matriz LSAM isolada.

        Esperado: ConcatDictionary com uma parte.
        """
        path = write_matrix(tmp_path / "A.lsam", small_dictionary.atoms)
        loaded = load_dictionary(path)
        assert isinstance(loaded, ConcatDictionary)
        assert loaded.partition == (30,)

    def test_name_count_mismatch(self, mca_dictionary, tmp_path):
        """
        Testa número de nomes diferente de D.

        Esperado: ShapeMismatch.
        """
        with pytest.raises(ShapeMismatch):
            save_dictionary(mca_dictionary, tmp_path, names=["a"])
