"""
Testes unitários para o módulo diagnostics.py.

Classes de teste:
    TestLearnedCost: f̂₁ e resíduo primal.
    TestDescentModifier: P = S⁻¹ − (μI + AᵀA).
    TestRecursionOracle: Forma fechada da recursão de u.
    TestReport: Relatório do comando diag.
"""

import numpy as np
import pytest

from core import Dictionary
from diagnostics import (
    LagrangianProbe,
    descent_modifier,
    diagnostics_report,
    learned_f1,
    max_primal_residual,
    primal_optimality_residual,
    recursion_oracle,
    splitting_from_modifier,
)
from errors import MissingParameter, MissingTape, SingularS
from unrolled import lsalsa_forward_batch, lsalsa_init


@pytest.fixture
def perturbed_params(lsalsa_params):
    """Parâmetros LSALSA com W_e e S perturbados (S mantida simétrica)."""
    rng = np.random.default_rng(11)
    noise = 0.01 * rng.standard_normal(lsalsa_params.S.shape)
    return lsalsa_params.with_matrices(
        lsalsa_params.W_e + 0.01 * rng.standard_normal(lsalsa_params.W_e.shape),
        lsalsa_params.S + 0.5 * (noise + noise.T),
    )


class TestLearnedCost:
    """Testes para learned_f1 e primal_optimality_residual."""

    def test_example_identity(self):
        """
        Testa f̂₁ em x = 0 com A = I.

        Esperado: ½‖y‖² = 0.5.
        """
        params = lsalsa_init(Dictionary(np.eye(2)), [0.1], 1.0, 1)
        assert learned_f1(LagrangianProbe(params, np.array([1.0, 0.0]), np.zeros(2))) == \
            pytest.approx(0.5)

    def test_matches_data_term_at_init(self, lsalsa_params, small_dictionary, planted_batch, rng):
        """
        Testa f̂₁ = ½‖y − Ax‖² na inicialização.

        Esperado: Igualdade em 1e-8 para x aleatórios.
        """
        signals, _ = planted_batch
        for y in signals[:5]:
            x = rng.standard_normal(30)
            exact = 0.5 * np.sum((y - small_dictionary.atoms @ x) ** 2)
            assert learned_f1(LagrangianProbe(lsalsa_params, y, x)) == pytest.approx(exact,
                                                                                    abs=1e-8)

    @pytest.mark.parametrize("which", ["init", "perturbed"])
    def test_primal_residual_vanishes(self, which, lsalsa_params, perturbed_params, planted_batch):
        """
        Testa o resíduo primal em todas as camadas.

        Cenário: Parâmetros da inicialização e parâmetros perturbados.
        Esperado: Resíduo relativo ≤ 1e-9.
        """
        params = lsalsa_params if which == "init" else perturbed_params
        signals, _ = planted_batch
        assert max_primal_residual(params, signals[:10]) <= 1e-9

    def test_probe_from_tape(self, lsalsa_params, planted_batch):
        """
        Testa o probe de uma camada do tape.

        Esperado: Resíduo absoluto pequeno na camada 2.
        """
        signals, _ = planted_batch
        _, tape = lsalsa_forward_batch(lsalsa_params, signals[:2], keep_tape=True)
        probe = LagrangianProbe.from_tape(lsalsa_params, tape, 2, sample=1)
        assert primal_optimality_residual(probe) <= 1e-9

    def test_residual_requires_layer_state(self, lsalsa_params):
        """
        Testa o resíduo sem u e d.

        Esperado: MissingTape.
        """
        with pytest.raises(MissingTape):
            primal_optimality_residual(LagrangianProbe(lsalsa_params, np.zeros(20), np.zeros(30)))

    def test_singular_splitting(self, lsalsa_params):
        """
        Testa S nula.

        Esperado: SingularS.
        """
        params = lsalsa_params.with_matrices(lsalsa_params.W_e, np.zeros((30, 30)))
        with pytest.raises(SingularS):
            learned_f1(LagrangianProbe(params, np.zeros(20), np.zeros(30)))


class TestDescentModifier:
    """Testes para descent_modifier e splitting_from_modifier."""

    def test_zero_at_init(self, lsalsa_params, small_dictionary):
        """
        Testa P na inicialização.

        Esperado: ‖P‖_F ≈ 0.
        """
        assert descent_modifier(lsalsa_params, small_dictionary).frobenius <= 1e-8

    def test_recovers_splitting(self, perturbed_params, small_dictionary):
        """
        Testa S = (P + μI + AᵀA)⁻¹.

        Esperado: S recuperada a partir de P.
        """
        modifier = descent_modifier(perturbed_params, small_dictionary)
        recovered = splitting_from_modifier(modifier.P, small_dictionary, perturbed_params.mu)
        np.testing.assert_allclose(recovered, perturbed_params.S, atol=1e-8)
        assert modifier.eig_min <= modifier.eig_max


class TestRecursionOracle:
    """Testes para recursion_oracle."""

    @pytest.mark.parametrize("depth", [1, 2, 4, 6])
    def test_matches_forward_at_init(self, depth, small_dictionary, planted_batch):
        """
        Testa a forma fechada contra o forward inicializado.

        Esperado: Desvio ≤ 1e-10.
        """
        signals, _ = planted_batch
        params = lsalsa_init(small_dictionary, [0.1], 1.0, depth)
        for y in signals[:3]:
            assert recursion_oracle(params, y) <= 1e-10

    def test_depth_limit(self, small_dictionary):
        """
        Testa T > 6.

        Esperado: ValueError.
        """
        params = lsalsa_init(small_dictionary, [0.1], 1.0, 7)
        with pytest.raises(ValueError):
            recursion_oracle(params, np.zeros(20))


class TestReport:
    """Testes para diagnostics_report."""

    def test_report_at_init(self, lsalsa_params, small_dictionary, planted_batch):
        """
        Testa o relatório com os parâmetros da inicialização.

        Esperado: Todas as chaves, resíduos e desvios próximos de zero.
        """
        signals, _ = planted_batch
        report = diagnostics_report(lsalsa_params, small_dictionary, signals[:5])
        assert set(report) == {"theorem1_residual_max", "f1hat_init_dev", "P_frobenius",
                               "P_sym_eig_min", "P_sym_eig_max", "recursion_dev"}
        assert report["theorem1_residual_max"] <= 1e-9
        assert report["f1hat_init_dev"] <= 1e-9
        assert report["P_frobenius"] <= 1e-8
        assert report["recursion_dev"] <= 1e-10

    def test_requires_lsalsa(self, lista_params, small_dictionary):
        """
        Testa parâmetros LISTA.

        Esperado: MissingParameter.
        """
        with pytest.raises(MissingParameter):
            diagnostics_report(lista_params, small_dictionary, np.zeros((1, 20)))
