"""
Fixtures compartilhadas para os testes do toolkit de codificação esparsa.

Este módulo contém fixtures reutilizáveis para os testes unitários,
de integração e de contrato.

As fixtures incluem:
    - Gerador aleatório com seed fixa
    - Dicionários pequenos (um e dois componentes)
    - Sinais e misturas plantados com códigos conhecidos
    - Parâmetros LSALSA/LISTA inicializados
    - Arquivos de configuração de experimento em diretório temporário
"""

import os
import sys

import numpy as np
import orjson
import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from core import ConcatDictionary  # noqa: E402
from data import planted_dictionary, planted_mixtures, planted_signals  # noqa: E402
from settings import configure_logging  # noqa: E402
from unrolled import lista_init, lsalsa_init  # noqa: E402

# Barras de progresso desligadas durante os testes
configure_logging(quiet=True)


@pytest.fixture
def rng():
    """
    Gerador numpy com seed fixa.

    Retorna:
        np.random.Generator: Gerador determinístico (seed 1234).
    """
    return np.random.default_rng(1234)


@pytest.fixture
def small_dictionary():
    """
    Dicionário 20×30 com colunas unitárias.

    Retorna:
        Dictionary: Dicionário plantado (seed 0).
    """
    return planted_dictionary(20, 30, seed=0)


@pytest.fixture
def mca_dictionary():
    """
    Dicionário concatenado [A₁, A₂] com M = 16 e N_i = 12.

    Retorna:
        ConcatDictionary: Duas partes plantadas com seeds distintas.
    """
    return ConcatDictionary((planted_dictionary(16, 12, seed=1),
                             planted_dictionary(16, 12, seed=2)))


@pytest.fixture
def planted_batch(small_dictionary):
    """
    Sinais y = A·x com três átomos ativos por código.

    Retorna:
        Tuple[np.ndarray, np.ndarray]: (sinais 40×20, códigos 40×30).
    """
    return planted_signals(small_dictionary, 40, support=3, seed=5)


@pytest.fixture
def planted_mixture_set(mca_dictionary):
    """
    Misturas de duas fontes sintéticas, cada uma esparsa na sua parte.

    Retorna:
        MixtureSet: 30 misturas (seed 7).
    """
    return planted_mixtures(mca_dictionary, 30, support=2, seed=7)


@pytest.fixture
def lsalsa_params(small_dictionary):
    """Parâmetros LSALSA inicializados (α = 0.1, μ = 1, T = 3)."""
    return lsalsa_init(small_dictionary, [0.1], 1.0, 3)


@pytest.fixture
def lista_params(small_dictionary):
    """Parâmetros LISTA inicializados (α = 0.1, T = 3)."""
    return lista_init(small_dictionary, [0.1], 3)


@pytest.fixture
def write_config(tmp_path):
    """
    Grava um documento de experimento como JSON no diretório temporário.

    Retorna:
        Callable[[dict, str], Path]: Função (documento, nome) -> caminho.
    """
    def _write(document, name="experiment.json"):
        path = tmp_path / name
        path.write_bytes(orjson.dumps(document, option=orjson.OPT_SERIALIZE_NUMPY))
        return path

    return _write
