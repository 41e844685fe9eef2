"""
Testes unitários para o módulo training.py.

Classes de teste:
    TestPredictionLoss: Perda de predição de códigos.
    TestGradients: Backward exato contra diferenças finitas.
    TestTrain: Laço de SGD, histórico e divisão treino/validação.
    TestGridSearch: Busca exaustiva e leaderboard.
"""

import numpy as np
import pytest

from core import Dictionary, SolverConfig
from errors import EmptySource, MissingTape, ShapeMismatch
from formats import read_csv
from solvers import encode_batch
from training import (
    GridSpec,
    TrainConfig,
    batch_gradients,
    forward_batch,
    grid_search,
    lista_backward,
    lsalsa_backward,
    preset_grid,
    prediction_loss,
    split_indices,
    train,
)
from unrolled import lsalsa_init

EPS = 1e-6


@pytest.fixture
def targets(small_dictionary, planted_batch):
    """Códigos FISTA (α = 0.1) dos sinais plantados."""
    signals, _ = planted_batch
    config = SolverConfig(alphas=[0.1], max_iters=300)
    return encode_batch("FISTA", signals, config, small_dictionary)


def _activation_pattern(params, signals):
    _, tape = forward_batch(params, signals, keep_tape=True)
    layers = [u for u in tape.u if u is not None] + [getattr(tape, "output", None)]
    return tuple((a != 0).tobytes() for a in layers if a is not None)


def _finite_difference(params_at, base, positions, signals, targets):
    """
    Diferenças centrais da perda nas posições pedidas.

    Posições cujo ±EPS muda o suporte de alguma camada ficam de fora, pois
    a perda não é diferenciável ali. Retorna (posições mantidas, estimativas).
    """
    kept, estimates = [], []
    for index in positions:
        plus, minus = base.copy(), base.copy()
        plus[index] += EPS
        minus[index] -= EPS
        upper, lower = params_at(plus), params_at(minus)
        if _activation_pattern(upper, signals) != _activation_pattern(lower, signals):
            continue
        kept.append(index)
        estimates.append((prediction_loss(upper, signals, targets)
                          - prediction_loss(lower, signals, targets)) / (2 * EPS))
    return kept, np.array(estimates)


def _positions(shape, count, seed):
    flat = np.random.default_rng(seed).choice(int(np.prod(shape)), size=count, replace=False)
    return [tuple(int(i) for i in np.unravel_index(k, shape)) for k in flat]


class TestPredictionLoss:
    """Testes para prediction_loss."""

    def test_example_identity(self):
        """
        Testa o exemplo com A = I.

        Cenário: saída (0.25, 0) contra alvo (1.25, 0).
        Esperado: Perda 0.5.
        """
        params = lsalsa_init(Dictionary(np.eye(2)), [0.5], 1.0, 1)
        assert prediction_loss(params, [1.0, 0.0], [1.25, 0.0]) == pytest.approx(0.5)

    def test_zero_when_targets_are_outputs(self, lsalsa_params, planted_batch):
        """
        Testa alvos iguais às saídas do encoder.

        Esperado: Perda nula.
        """
        signals, _ = planted_batch
        outputs, _ = forward_batch(lsalsa_params, signals)
        assert prediction_loss(lsalsa_params, signals, outputs) == 0.0

    def test_count_mismatch(self, lsalsa_params, planted_batch, targets):
        """
        Testa número de alvos diferente do número de sinais.

        Esperado: ShapeMismatch.
        """
        signals, _ = planted_batch
        with pytest.raises(ShapeMismatch):
            prediction_loss(lsalsa_params, signals[:5], targets[:4])


class TestGradients:
    """Testes dos gradientes exatos."""

    def test_lsalsa_matches_finite_differences(self, small_dictionary, planted_batch, targets):
        """
        Testa ∂W_e e ∂S do LSALSA contra diferenças centrais.

        Cenário: Parâmetros perturbados, T = 3, 6 sinais, 24 entradas distintas
        de cada matriz, h = 1e-6, sem as posições vizinhas de um limiar.
        Esperado: Ao menos 20 entradas por matriz com erro relativo ≤ 1e-4.
        """
        signals, _ = planted_batch
        Y, X = signals[:6], targets[:6]
        rng = np.random.default_rng(3)
        base = lsalsa_init(small_dictionary, [0.1], 1.0, 3)
        params = base.with_matrices(base.W_e + 0.01 * rng.standard_normal(base.W_e.shape),
                                    base.S + 0.01 * rng.standard_normal(base.S.shape))
        _, gradients = batch_gradients(params, Y, X)

        kept, numeric = _finite_difference(lambda W: params.with_matrices(W, params.S),
                                           params.W_e, _positions(params.W_e.shape, 24, seed=1),
                                           Y, X)
        assert len(kept) >= 20
        np.testing.assert_allclose([gradients.W_e[p] for p in kept], numeric,
                                   rtol=1e-4, atol=1e-8)

        kept, numeric = _finite_difference(lambda S: params.with_matrices(params.W_e, S),
                                           params.S, _positions(params.S.shape, 24, seed=2),
                                           Y, X)
        assert len(kept) >= 20
        np.testing.assert_allclose([gradients.S[p] for p in kept], numeric,
                                   rtol=1e-4, atol=1e-8)

    def test_lista_matches_finite_differences(self, lista_params, planted_batch, targets):
        """
        Testa ∂W_e, ∂S̃ e ∂θ do LISTA contra diferenças centrais.

        Cenário: 24 entradas distintas de W_e e S̃ e todas as de θ.
        Esperado: Ao menos 20 coordenadas suaves por parâmetro com erro
        relativo ≤ 1e-4.
        """
        signals, _ = planted_batch
        Y, X = signals[:6], targets[:6]
        p = lista_params
        _, gradients = batch_gradients(p, Y, X)

        kept, numeric = _finite_difference(lambda W: p.with_matrices(W, p.S_tilde, p.theta),
                                           p.W_e, _positions(p.W_e.shape, 24, seed=4), Y, X)
        assert len(kept) >= 20
        np.testing.assert_allclose([gradients.W_e[i] for i in kept], numeric,
                                   rtol=1e-4, atol=1e-8)

        kept, numeric = _finite_difference(lambda S: p.with_matrices(p.W_e, S, p.theta),
                                           p.S_tilde, _positions(p.S_tilde.shape, 24, seed=5),
                                           Y, X)
        assert len(kept) >= 20
        np.testing.assert_allclose([gradients.S_tilde[i] for i in kept], numeric,
                                   rtol=1e-4, atol=1e-8)

        kept, numeric = _finite_difference(lambda theta: p.with_matrices(p.W_e, p.S_tilde, theta),
                                           p.theta, [(i,) for i in range(p.N)], Y, X)
        assert len(kept) >= 20
        np.testing.assert_allclose([gradients.theta[i] for i in kept], numeric,
                                   rtol=1e-4, atol=1e-8)

    def test_zero_at_exact_targets(self, lsalsa_params, planted_batch):
        """
        Testa o gradiente quando a saída já é o alvo.

        Esperado: Gradientes nulos.
        """
        signals, _ = planted_batch
        outputs, _ = forward_batch(lsalsa_params, signals[:4])
        _, gradients = batch_gradients(lsalsa_params, signals[:4], outputs)
        np.testing.assert_array_equal(gradients.W_e, 0.0)
        np.testing.assert_array_equal(gradients.S, 0.0)

    def test_backward_without_tape(self, lsalsa_params, lista_params, targets):
        """
        Testa o backward sem tape.

        Esperado: MissingTape para LSALSA e LISTA.
        """
        with pytest.raises(MissingTape):
            lsalsa_backward(lsalsa_params, None, None, targets[:2])
        with pytest.raises(MissingTape):
            lista_backward(lista_params, None, None, targets[:2])

    def test_backward_signals_must_match_tape(self, lsalsa_params, planted_batch, targets):
        """
        Testa sinais diferentes dos usados no forward.

        Esperado: ShapeMismatch.
        """
        signals, _ = planted_batch
        _, tape = forward_batch(lsalsa_params, signals[:3], keep_tape=True)
        with pytest.raises(ShapeMismatch):
            lsalsa_backward(lsalsa_params, tape, signals[:5], targets[:3])


class TestTrain:
    """Testes para train e split_indices."""

    def test_zero_learning_rate_keeps_params(self, lsalsa_params, planted_batch, targets):
        """
        Testa lr = 0.

        Esperado: Parâmetros inalterados, histórico plano com épocas 0 e 1
        e convergência declarada.
        """
        signals, _ = planted_batch
        config = TrainConfig(learning_rate=0.0, batch_size=10, max_epochs=5)
        trained, history = train(lsalsa_params, signals, targets, config)
        np.testing.assert_array_equal(trained.W_e, lsalsa_params.W_e)
        np.testing.assert_array_equal(trained.S, lsalsa_params.S)
        assert [r.epoch for r in history.records] == [0, 1]
        assert history.losses[0] == history.losses[1]
        assert history.converged

    def test_loss_decreases(self, lsalsa_params, planted_batch, targets):
        """
        Testa que o SGD reduz a perda de treino.

        Cenário: lr = 0.01, lotes de 10, 5 épocas.
        Esperado: Perda final menor que a inicial.
        """
        signals, _ = planted_batch
        config = TrainConfig(learning_rate=0.01, batch_size=10, max_epochs=5, rel_cost_tol=0.0)
        _, history = train(lsalsa_params, signals, targets, config)
        assert len(history.records) == 6
        assert history.losses[-1] < history.losses[0]

    def test_lista_theta_stays_nonnegative(self, lista_params, planted_batch, targets):
        """
        Testa a projeção θ ≥ 0 durante o treino do LISTA.

        Esperado: Todos os limiares ≥ 0 após o treino.
        """
        signals, _ = planted_batch
        config = TrainConfig(learning_rate=0.05, batch_size=8, max_epochs=3)
        trained, _ = train(lista_params, signals, targets, config)
        assert np.all(trained.theta >= 0)

    def test_history_csv_with_validation(self, lsalsa_params, planted_batch, targets, tmp_path):
        """
        Testa o histórico com conjunto de validação.

        Esperado: Esquema history-v1 e val_rmse preenchido.
        """
        signals, _ = planted_batch
        config = TrainConfig(learning_rate=0.001, batch_size=10, max_epochs=2)
        _, history = train(lsalsa_params, signals[:30], targets[:30], config,
                           validation=(signals[30:], targets[30:]))
        schema, rows = read_csv(history.to_csv(tmp_path / "history.csv"))
        assert schema == "history-v1"
        assert all(row["val_rmse"] != "" for row in rows)

    def test_deterministic(self, lsalsa_params, planted_batch, targets):
        """
        Testa duas execuções com a mesma seed.

        Esperado: Parâmetros finais idênticos bit a bit.
        """
        signals, _ = planted_batch
        config = TrainConfig(learning_rate=0.01, batch_size=7, max_epochs=2, seed=3)
        first, _ = train(lsalsa_params, signals, targets, config)
        second, _ = train(lsalsa_params, signals, targets, config)
        np.testing.assert_array_equal(first.S, second.S)

    def test_empty_training_set(self, lsalsa_params):
        """
        Testa conjunto de treino vazio.

        Esperado: EmptySource.
        """
        with pytest.raises(EmptySource):
            train(lsalsa_params, np.zeros((0, 20)), np.zeros((0, 30)), TrainConfig())

    def test_split_indices(self):
        """
        Testa a divisão 90/10.

        Esperado: 90 + 10 índices disjuntos cobrindo range(100), estáveis pela seed.
        """
        train_idx, val_idx = split_indices(100, seed=4)
        assert (len(train_idx), len(val_idx)) == (90, 10)
        assert sorted(np.concatenate([train_idx, val_idx]).tolist()) == list(range(100))
        np.testing.assert_array_equal(split_indices(100, seed=4)[1], val_idx)


class TestGridSearch:
    """Testes para grid_search e preset_grid."""

    def test_solver_grid_ignores_sgd_axes(self, small_dictionary, planted_batch, targets):
        """
        Testa a busca para o FISTA.

        Cenário: Dois α, dois μ e duas taxas de aprendizado.
        Esperado: Apenas 2 células (μ e SGD não se aplicam), ordenadas por RMSE.
        """
        signals, _ = planted_batch
        grid = GridSpec(alphas=[(0.1,), (0.5,)], mu=[1.0, 5.0], learning_rate=[1e-3, 1e-2])
        result = grid_search((signals[:30], targets[:30]), (signals[30:], targets[30:]),
                             grid, "FISTA", small_dictionary, depth=20)
        assert len(result.cells) == 2
        assert result.best.alphas == (0.1,)
        assert result.valid[0].val_rmse <= result.valid[1].val_rmse

    def test_failed_cells_are_recorded(self, small_dictionary, planted_batch, targets, tmp_path):
        """
        Testa uma célula cujo μ impede a fatoração.

        Cenário: LSALSA com μ ∈ {−1, 1}.
        Esperado: Uma célula com status failed ao final do leaderboard e a
        outra escolhida como melhor.
        """
        signals, _ = planted_batch
        grid = GridSpec(alphas=[(0.1,)], mu=[-1.0, 1.0], learning_rate=[1e-3], epochs=1)
        result = grid_search((signals[:30], targets[:30]), (signals[30:], targets[30:]),
                             grid, "LSALSA", small_dictionary, depth=2, seed=9)
        assert len(result.failures) == 1
        assert "FactorizationFailure" in result.failures[0].error
        assert result.best.mu == 1.0
        schema, rows = read_csv(result.to_csv(tmp_path / "leaderboard.csv"))
        assert schema == "leaderboard-v1"
        assert [row["status"] for row in rows] == ["ok", "failed"]

    def test_preset_grids(self):
        """
        Testa as grades originais.

        Esperado: 12 α simples, 256 pares no MCA.
        """
        assert len(preset_grid("single").alphas) == 12
        assert len(preset_grid("mca").alphas) == 256
        with pytest.raises(ValueError):
            preset_grid("outra")
