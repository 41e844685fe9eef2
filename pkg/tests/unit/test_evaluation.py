"""
Testes unitários para o módulo evaluation.py.
"""

import numpy as np
import pytest

from core import SolverConfig
from errors import MissingModel, ShapeMismatch
from evaluation import (
    ProbeClassifier,
    ProbeConfig,
    component_features,
    component_rmse,
    export_point_cloud,
    gaussian_projection,
    point_cloud,
    probe_error,
    run_benchmark,
    train_probe,
    write_benchmark_csv,
)
from formats import read_csv
from solvers import Method
from unrolled import lsalsa_init


class TestRunBenchmark:
    """Testes para run_benchmark."""

    def test_one_record_per_pair(self, small_dictionary, planted_batch, tmp_path):
        """
        Testa a grade (método, T).

        Cenário: FISTA e LSALSA inicializado, T ∈ {1, 3}.
        Esperado: 4 registros na ordem pedida, CSV bench-v1 com 4 linhas.
        """
        signals, codes = planted_batch
        models = {
            Method.FISTA: SolverConfig(alphas=[0.1]),
            (Method.LSALSA, 1): lsalsa_init(small_dictionary, [0.1], 1.0, 1),
            (Method.LSALSA, 3): lsalsa_init(small_dictionary, [0.1], 1.0, 3),
        }
        records = run_benchmark(["FISTA", "LSALSA"], [1, 3], signals, codes, models,
                                small_dictionary)
        assert [(r.method, r.T) for r in records] == [
            (Method.FISTA, 1), (Method.FISTA, 3), (Method.LSALSA, 1), (Method.LSALSA, 3)]
        assert all(r.rmse >= 0 and 0 <= r.sparsity <= 1 for r in records)
        schema, rows = read_csv(write_benchmark_csv(records, tmp_path / "bench.csv"))
        assert schema == "bench-v1" and len(rows) == 4

    def test_initialized_lsalsa_equals_salsa(self, small_dictionary, planted_batch):
        """
        Testa LSALSA inicializado contra SALSA com o mesmo T.

        Esperado: Mesmo RMSE.
        """
        signals, codes = planted_batch
        models = {Method.SALSA: SolverConfig(alphas=[0.1], mu=1.0),
                  (Method.LSALSA, 3): lsalsa_init(small_dictionary, [0.1], 1.0, 3)}
        salsa_rec, lsalsa_rec = run_benchmark(["SALSA", "LSALSA"], [3], signals, codes, models,
                                              small_dictionary)
        assert lsalsa_rec.rmse == pytest.approx(salsa_rec.rmse, abs=1e-10)

    def test_missing_model(self, small_dictionary, planted_batch):
        """
        Testa um par sem parâmetros treinados.

        Esperado: MissingModel.
        """
        signals, codes = planted_batch
        with pytest.raises(MissingModel):
            run_benchmark(["LISTA"], [5], signals, codes, {}, small_dictionary)

    def test_depth_of_params_must_match(self, small_dictionary, planted_batch):
        """
        Testa parâmetros com T diferente do pedido.

        Esperado: MissingModel.
        """
        signals, codes = planted_batch
        models = {Method.LSALSA: lsalsa_init(small_dictionary, [0.1], 1.0, 2)}
        with pytest.raises(MissingModel):
            run_benchmark(["LSALSA"], [5], signals, codes, models, small_dictionary)

    def test_timing_runs_single_threaded(self, small_dictionary, planted_batch, mocker):
        """
        Testa o limite de threads do BLAS durante a medição.

        Cenário: SALSA e FISTA com T ∈ {1, 2}.
        Esperado: threadpool_limits(limits=1) aberto uma vez por (método, T).
        """
        signals, codes = planted_batch
        limits = mocker.patch("evaluation.threadpool_limits")
        models = {Method.SALSA: SolverConfig(alphas=[0.1], mu=1.0),
                  Method.FISTA: SolverConfig(alphas=[0.1])}
        run_benchmark(["SALSA", "FISTA"], [1, 2], signals, codes, models, small_dictionary)
        assert limits.call_count == 4
        assert all(c.kwargs == {"limits": 1} for c in limits.call_args_list)
        assert limits.return_value.__enter__.call_count == 4
        assert limits.return_value.__exit__.call_count == 4


class TestProjection:
    """Testes para gaussian_projection."""

    def test_shape_and_scale(self):
        """
        Testa a escala 1/√dim_out.

        Esperado: Variância das entradas próxima de 1/dim_out.
        """
        projection = gaussian_projection(400, 100, seed=0)
        assert projection.matrix.shape == (100, 400)
        assert np.var(projection.matrix) == pytest.approx(1 / 100, rel=0.05)

    def test_dim_out_larger_than_dim_in(self):
        """
        Testa dim_out > dim_in.

        Esperado: ShapeMismatch.
        """
        with pytest.raises(ShapeMismatch):
            gaussian_projection(10, 20)

    def test_apply_checks_width(self):
        """
        Testa códigos com dimensão errada.

        Esperado: ShapeMismatch.
        """
        with pytest.raises(ShapeMismatch):
            gaussian_projection(10, 5).apply(np.ones((2, 9)))


class TestProbe:
    """Testes para train_probe e probe_error."""

    def test_separable_data(self):
        """
        Testa dados linearmente separáveis.

        Cenário: Três classes em direções ortogonais.
        Esperado: Erro de treino 0% e parada antes do limite de épocas.
        """
        rng = np.random.default_rng(0)
        labels = np.repeat(np.arange(3), 20)
        features = np.eye(3)[labels] * 2.0 + 0.05 * rng.standard_normal((60, 3))
        probe = train_probe(features, labels, 3, ProbeConfig(max_epochs=200, batch_size=8))
        assert probe.training_error == 0.0
        assert probe.epochs_run < 200
        assert probe_error(probe, features, labels) == 0.0

    def test_ties_go_to_lowest_class(self):
        """
        Testa empates no argmax.

        Esperado: Classificador nulo prevê sempre a classe 0.
        """
        probe = ProbeClassifier(np.zeros((3, 2)), np.zeros(3), ProbeConfig())
        np.testing.assert_array_equal(probe.predict(np.ones((4, 2))), 0)
        assert probe_error(probe, np.ones((4, 2)), [0, 1, 1, 2]) == 75.0

    def test_labels_out_of_range(self):
        """
        Testa rótulo ≥ número de classes.

        Esperado: ShapeMismatch.
        """
        with pytest.raises(ShapeMismatch):
            train_probe(np.ones((2, 2)), [0, 3], 3)


class TestPointCloudAndComponents:
    """Testes para nuvem de pontos e métricas por componente."""

    def test_point_cloud_csv(self, tmp_path):
        """
        Testa a exportação da nuvem.

        Esperado: Uma linha por (método, amostra) com esquema pointcloud-v1.
        """
        estimates = np.array([[0.0, 1.0], [0.0, 0.0]])
        targets = np.array([[0.0, 1.0], [1.0, 1.0]])
        sparsities, errors = point_cloud(estimates, targets)
        np.testing.assert_allclose(sparsities, [0.5, 1.0])
        np.testing.assert_allclose(errors, [0.0, 1.0])
        schema, rows = read_csv(export_point_cloud({"FISTA": (sparsities, errors)},
                                                   tmp_path / "cloud.csv"))
        assert schema == "pointcloud-v1"
        assert [row["sample_id"] for row in rows] == ["0", "1"]

    def test_component_features_split(self):
        """
        Testa a divisão dos códigos por componente.

        Esperado: Blocos com 2 e 3 colunas.
        """
        first, second = component_features(np.ones((4, 5)), (2, 3))
        assert first.shape == (4, 2) and second.shape == (4, 3)

    def test_component_rmse_zero_for_exact_codes(self, mca_dictionary):
        """
        Testa códigos que reconstroem exatamente as componentes.

        Esperado: RMSE nulo nas duas componentes.
        """
        codes = np.zeros((3, 24))
        codes[:, 1], codes[:, 15] = 1.0, -0.5
        truths = [codes[:, :12] @ mca_dictionary.parts[0].atoms.T,
                  codes[:, 12:] @ mca_dictionary.parts[1].atoms.T]
        result = component_rmse(codes, truths, mca_dictionary)
        assert result == pytest.approx({0: 0.0, 1: 0.0}, abs=1e-12)
