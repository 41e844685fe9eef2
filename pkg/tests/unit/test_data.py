"""
Testes unitários para o módulo data.py.

Classes de teste:
    TestImages: Tons de cinza, redimensionamento e patches.
    TestIngestion: IDX e carregamento de matrizes de sinais.
    TestMixtures: Síntese e persistência de misturas.
    TestOptimalCodes: Códigos alvo, reconstrução e ajuste de α.
"""

import struct

import numpy as np
import pytest

from core import SolverConfig, lasso_cost
from data import (
    PatchSpec,
    default_optimal_config,
    export_idx,
    extract_patches,
    generate_optimal_codes,
    import_idx,
    load_mixtures,
    load_signal_matrix,
    make_mixtures,
    reassemble_patches,
    reconstruct,
    resize_bilinear,
    save_mixtures,
    to_grayscale,
    tune_alpha_for_sparsity,
)
from errors import DimensionMismatch, EmptySource, FormatError, PatchTooLarge, UnknownMethod
from formats import IDX_IMAGES_MAGIC, write_pgm
from solvers import encode_batch


class TestImages:
    """Testes das transformações de imagem."""

    def test_grayscale_weights(self):
        """
        Testa os pesos de luminância.

        Esperado: Branco vira 1 e vermelho puro vira 0.299.
        """
        np.testing.assert_allclose(to_grayscale(np.ones((1, 1, 3))), [[1.0]])
        np.testing.assert_allclose(to_grayscale(np.array([[[1.0, 0.0, 0.0]]])), [[0.299]])

    def test_resize_constant_image(self):
        """
        Testa o redimensionamento de uma imagem constante.

        Esperado: Forma pedida e valores preservados.
        """
        resized = resize_bilinear(np.full((7, 5), 0.4), 224, 224)
        assert resized.shape == (224, 224)
        np.testing.assert_allclose(resized, 0.4)

    @pytest.mark.parametrize("shape, patch, expected", [
        ((32, 32), 10, 9),
        ((224, 224), 16, 196),
    ])
    def test_patch_counts(self, shape, patch, expected):
        """
        Testa o número de patches sem sobreposição.

        Esperado: 9 patches 10×10 em 32×32 e 196 patches 16×16 em 224×224.
        """
        patches = extract_patches(np.zeros(shape), PatchSpec(patch_h=patch, patch_w=patch))
        assert patches.shape == (expected, patch * patch)

    def test_row_major_order(self):
        """
        Testa a ordem dos patches e dos pixels.

        Cenário: Imagem 4×4 com valores 0..15 e patches 2×2.
        Esperado: Primeiro patch (0, 1, 4, 5), segundo (2, 3, 6, 7).
        """
        patches = extract_patches(np.arange(16.0).reshape(4, 4), PatchSpec(patch_h=2, patch_w=2))
        np.testing.assert_array_equal(patches[0], [0, 1, 4, 5])
        np.testing.assert_array_equal(patches[1], [2, 3, 6, 7])

    def test_min_std_filter(self):
        """
        Testa o descarte de patches planos.

        Cenário: Metade esquerda constante, metade direita com ruído.
        Esperado: Apenas os patches da metade direita são mantidos.
        """
        image = np.zeros((4, 4))
        image[:, 2:] = np.random.default_rng(0).uniform(size=(4, 2))
        patches = extract_patches(image, PatchSpec(patch_h=2, patch_w=2, min_std=1e-3))
        assert len(patches) == 2

    def test_patch_too_large(self):
        """
        Testa patch maior que a imagem.

        Esperado: PatchTooLarge.
        """
        with pytest.raises(PatchTooLarge):
            extract_patches(np.zeros((8, 8)), PatchSpec(patch_h=10, patch_w=10))

    def test_reassemble_inverts_extract(self, rng):
        """
        Testa a remontagem da região coberta.

        Cenário: Imagem 32×32 e patches 10×10.
        Esperado: Região 30×30 igual à original e bordas em zero.
        """
        image = rng.uniform(size=(32, 32))
        spec = PatchSpec(patch_h=10, patch_w=10)
        rebuilt = reassemble_patches(extract_patches(image, spec), (32, 32), spec)
        np.testing.assert_array_equal(rebuilt[:30, :30], image[:30, :30])
        np.testing.assert_array_equal(rebuilt[30:], 0.0)


class TestIngestion:
    """Testes de ingestão."""

    def test_import_idx_scales_to_unit_range(self, tmp_path):
        """
        Testa a escala dos pixels IDX.

        Cenário: Uma imagem 1×2 com pixels 0 e 255.
        Esperado: Valores 0.0 e 1.0.
        """
        path = tmp_path / "img.idx"
        path.write_bytes(struct.pack(">IIII", IDX_IMAGES_MAGIC, 1, 1, 2) + bytes([0, 255]))
        np.testing.assert_array_equal(import_idx(path), [[[0.0, 1.0]]])

    def test_export_then_load_patches(self, tmp_path):
        """
        Testa export_idx seguido de load_signal_matrix com patches.

        Esperado: 4 imagens 20×20 viram 16 patches de 100 pixels.
        """
        path = export_idx(tmp_path / "imgs.idx", np.full((4, 20, 20), 0.5))
        signals = load_signal_matrix(path, PatchSpec(patch_h=10, patch_w=10))
        assert signals.shape == (16, 100)
        np.testing.assert_allclose(signals, 128 / 255)

    def test_pgm_is_flattened_without_spec(self, tmp_path):
        """
        Testa uma imagem PGM sem especificação de patches.

        Esperado: Uma linha com todos os pixels.
        """
        path = write_pgm(tmp_path / "i.pgm", np.zeros((3, 4)))
        assert load_signal_matrix(path).shape == (1, 12)

    def test_truncated_idx(self, tmp_path):
        """
        Testa IDX truncado.

        Esperado: FormatError.
        """
        path = tmp_path / "bad.idx"
        path.write_bytes(struct.pack(">IIII", IDX_IMAGES_MAGIC, 5, 2, 2) + bytes(3))
        with pytest.raises(FormatError):
            import_idx(path)


class TestMixtures:
    """Testes para make_mixtures, save_mixtures e load_mixtures."""

    def test_mixture_is_sum_of_truths(self, planted_mixture_set):
        """
        Testa y = a + b em todas as misturas.

        Esperado: Igualdade exata e Signal com componentes válidas.
        """
        m = planted_mixture_set
        np.testing.assert_array_equal(m.mixed, m.truth_a + m.truth_b)
        assert m.signal(0).component_truth is not None

    def test_deterministic_for_seed(self, rng):
        """
        Testa o sorteio pela seed.

        Esperado: Mesmos índices para a mesma seed e diferentes para outra.
        """
        a, b = rng.standard_normal((10, 4)), rng.standard_normal((8, 4))
        first, second = make_mixtures(a, b, 20, seed=3), make_mixtures(a, b, 20, seed=3)
        np.testing.assert_array_equal(first.index_a, second.index_a)
        np.testing.assert_array_equal(first.index_b, second.index_b)
        assert not np.array_equal(first.index_a, make_mixtures(a, b, 20, seed=4).index_a)

    def test_empty_source(self):
        """
        Testa fonte vazia.

        Esperado: EmptySource.
        """
        with pytest.raises(EmptySource):
            make_mixtures(np.zeros((0, 4)), np.ones((3, 4)), 5, seed=0)

    def test_dimension_mismatch(self):
        """
        Testa fontes com dimensões diferentes.

        Esperado: DimensionMismatch.
        """
        with pytest.raises(DimensionMismatch):
            make_mixtures(np.ones((3, 4)), np.ones((3, 5)), 5, seed=0)

    def test_persistence_with_digest_check(self, planted_mixture_set, tmp_path):
        """
        Testa a gravação e a verificação de integridade.

        Esperado: Leitura idêntica; arquivo adulterado gera FormatError.
        """
        save_mixtures(planted_mixture_set, tmp_path / "mix")
        loaded = load_mixtures(tmp_path / "mix")
        np.testing.assert_array_equal(loaded.mixed, planted_mixture_set.mixed)
        np.testing.assert_array_equal(loaded.index_b, planted_mixture_set.index_b)

        save_mixtures(planted_mixture_set, tmp_path / "other")
        (tmp_path / "other" / "truth_a.lsam").write_bytes(
            (tmp_path / "mix" / "truth_b.lsam").read_bytes())
        with pytest.raises(FormatError):
            load_mixtures(tmp_path / "other")


class TestOptimalCodes:
    """Testes para generate_optimal_codes, reconstruct e tune_alpha_for_sparsity."""

    def test_independent_of_worker_count(self, small_dictionary, planted_batch):
        """
        Testa o paralelismo por blocos.

        Esperado: Códigos idênticos com 1 e 3 workers.
        """
        signals, _ = planted_batch
        config = SolverConfig(alphas=[0.1], max_iters=50, stop_tol=0.0)
        single = generate_optimal_codes(signals, small_dictionary, config, workers=1)
        parallel = generate_optimal_codes(signals, small_dictionary, config, workers=3)
        np.testing.assert_array_equal(single.codes, parallel.codes)
        assert 0.0 <= single.mean_sparsity <= 1.0

    def test_mca_codes_with_salsa(self, mca_dictionary, planted_mixture_set):
        """
        Testa códigos ótimos de misturas.

        Esperado: Partição do dicionário concatenado e uma linha por mistura.
        """
        config = default_optimal_config([0.125, 0.2], "SALSA", mu=10.0)
        result = generate_optimal_codes(planted_mixture_set.mixed, mca_dictionary, config, "SALSA")
        assert result.codes.shape == (30, 24)
        assert result.code(0).partition == (12, 12)

    def test_salsa_targets_reach_lasso_optimum(self, mca_dictionary, planted_mixture_set):
        """
        Testa se os alvos SALSA são minimizadores do problema MCA.

        Cenário: α = (0.125, 0.2), μ = 10, 3000 iterações.
        Esperado: Alvos iguais ao iterado primal sem limiar de saída e
        custo médio igual ao do FISTA convergido em 1e-3 relativo.
        """
        alphas = [0.125, 0.2]
        signals = planted_mixture_set.mixed[:10]
        config = SolverConfig(alphas=alphas, mu=10.0, max_iters=3000, stop_tol=0.0)
        result = generate_optimal_codes(signals, mca_dictionary, config, "SALSA")
        raw = encode_batch("SALSA", signals, config, mca_dictionary, emit_thresholded=False)
        np.testing.assert_array_equal(result.codes, raw)

        converged = encode_batch("FISTA", signals,
                                 SolverConfig(alphas=alphas, max_iters=5000, stop_tol=1e-14),
                                 mca_dictionary)

        def mean_cost(codes):
            return np.mean([lasso_cost(x, y, mca_dictionary, alphas)
                            for x, y in zip(codes, signals)])

        assert mean_cost(result.codes) == pytest.approx(mean_cost(converged), rel=1e-3)

    def test_learned_method_rejected(self, small_dictionary):
        """
        Testa um método aprendido para códigos ótimos.

        Esperado: UnknownMethod.
        """
        with pytest.raises(UnknownMethod):
            generate_optimal_codes(np.zeros((1, 20)), small_dictionary,
                                   SolverConfig(alphas=[0.1]), "LISTA")

    def test_default_iterations(self):
        """
        Testa o número de iterações padrão.

        Esperado: 200 (FISTA), 700 (FISTA, patches grandes) e 100 (SALSA).
        """
        assert default_optimal_config([0.15]).max_iters == 200
        assert default_optimal_config([0.5], large_patches=True).max_iters == 700
        assert default_optimal_config([0.125, 0.2], "SALSA", mu=10.0).max_iters == 100

    def test_reconstruct_components(self, mca_dictionary):
        """
        Testa a reconstrução por componente.

        Esperado: Cada componente é A_i·x_i e a soma é A·x.
        """
        x = np.zeros(24)
        x[0], x[12] = 1.0, 2.0
        components, total = reconstruct(x, mca_dictionary)
        np.testing.assert_allclose(components[0], mca_dictionary.parts[0].atoms[:, 0])
        np.testing.assert_allclose(components[1], 2.0 * mca_dictionary.parts[1].atoms[:, 0])
        np.testing.assert_allclose(total, components[0] + components[1])

    def test_tune_alpha_reaches_target(self, small_dictionary, planted_batch):
        """
        Testa o ajuste de α por esparsidade.

        Cenário: Alvo de 90% de zeros.
        Esperado: Esparsidade média dos códigos com o α encontrado ≥ 0.9.
        """
        signals, _ = planted_batch
        alpha = tune_alpha_for_sparsity(signals[:10], small_dictionary, 0.9, iters=100, steps=15)
        config = SolverConfig(alphas=[alpha], max_iters=100)
        result = generate_optimal_codes(signals[:10], small_dictionary, config)
        assert result.mean_sparsity >= 0.9
