"""
Aprendizado de dicionários por componente.

Alterna codificação esparsa com FISTA (códigos tratados como constantes)
e um passo de SGD sobre o dicionário, seguido da renormalização das
colunas. Em MCA cada dicionário A_i é aprendido de forma independente
sobre os dados não misturados da sua componente e depois concatenado.
"""

import logging
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from tqdm import tqdm

from core import ConcatDictionary, Dictionary, SolverConfig, normalize_columns
from data import planted_dictionary
from errors import EmptySource, FormatError, ShapeMismatch
from formats import PathLike, digest_file, dump_json, load_json, read_matrix, write_matrix
from settings import progress_enabled
from solvers import Method, encode_batch, estimate_lipschitz
from training import TrainConfig

logger = logging.getLogger(__name__)

FISTA_ITERS = 200
"""int: Iterações do FISTA usadas para os códigos durante o aprendizado."""

DICTIONARY_MANIFEST = "dictionary.json"


def dict_gradient(dictionary: Union[Dictionary, np.ndarray], signals: np.ndarray,
                  codes: np.ndarray) -> np.ndarray:
    """
    Gradiente de (1/P)·Σ_p ½‖y^p − A·x^p‖² em relação a A, com códigos fixos.

    Args:
        dictionary (Dictionary | np.ndarray): A (M×N).
        signals (np.ndarray): Lote P×M.
        codes (np.ndarray): Códigos P×N.

    Returns:
        np.ndarray: −(1/P)·Σ_p (y^p − A·x^p)(x^p)ᵀ, matriz M×N.

    Raises:
        ShapeMismatch: Se sinais, códigos e A forem incompatíveis.

    Example:
        >>> dict_gradient(np.zeros((2, 1)), [[1.0, 2.0]], [[3.0]])
        array([[-3.],
               [-6.]])
    """
    atoms = dictionary.atoms if isinstance(dictionary, Dictionary) else np.asarray(dictionary,
                                                                                   dtype=np.float64)
    Y = np.atleast_2d(np.asarray(signals, dtype=np.float64))
    X = np.atleast_2d(np.asarray(codes, dtype=np.float64))
    M, N = atoms.shape
    if Y.shape[1] != M or X.shape[1] != N or len(Y) != len(X):
        raise ShapeMismatch(
            f"Sinais {Y.shape} e códigos {X.shape} incompatíveis com A {atoms.shape}"
        )
    residual = Y - X @ atoms.T
    return -(residual.T @ X) / len(Y)


def mean_reconstruction_cost(signals: np.ndarray, dictionary: Dictionary, alpha: float,
                             fista_iters: int = FISTA_ITERS) -> float:
    """Custo lasso médio dos códigos FISTA de todos os sinais."""
    config = SolverConfig(alphas=[alpha], max_iters=fista_iters,
                          lipschitz=estimate_lipschitz(dictionary))
    codes = encode_batch(Method.FISTA, signals, config, dictionary)
    residual = signals - codes @ dictionary.atoms.T
    costs = 0.5 * np.sum(residual * residual, axis=1) + alpha * np.sum(np.abs(codes), axis=1)
    return float(np.mean(costs))


def learn_dictionary(signals: np.ndarray, init: Dictionary, config: TrainConfig, alpha: float,
                     fista_iters: int = FISTA_ITERS) -> Tuple[Dictionary, List[float]]:
    """
    Aprende um dicionário por SGD alternado com codificação FISTA.

    Em cada época os sinais são embaralhados (seed de config); para cada
    mini-lote os códigos são recalculados do zero com FISTA, A recebe
    A − lr·dict_gradient e as colunas são renormalizadas. A taxa decai
    por lr_decay ao fim de cada época.

    Args:
        signals (np.ndarray): Sinais de treino P×M da componente.
        init (Dictionary): Dicionário inicial com colunas unitárias.
        config (TrainConfig): Taxa, decaimento, lote, épocas e seed.
        alpha (float): Peso α do termo ℓ1 na codificação.
        fista_iters (int): Iterações do FISTA por lote (200).

    Returns:
        Tuple[Dictionary, List[float]]: Dicionário final e custo lasso
            médio por época (posição 0 = dicionário inicial).

    Raises:
        EmptySource: Se não houver sinais.
        ShapeMismatch: Se os sinais não tiverem M colunas.
        ZeroColumn: Se uma coluna colapsar (taxa de aprendizado grande demais).
    """
    Y = np.atleast_2d(np.asarray(signals, dtype=np.float64))
    if not Y.size:
        raise EmptySource("Nenhum sinal para aprender o dicionário")
    if Y.shape[1] != init.M:
        raise ShapeMismatch(f"Sinais com M={Y.shape[1]} para dicionário com M={init.M}")
    rng = np.random.default_rng(config.seed)
    dictionary = init
    lr = config.learning_rate
    costs = [mean_reconstruction_cost(Y, dictionary, alpha, fista_iters)]
    logger.info("Dicionário %d×%d: custo inicial %.6g", init.M, init.N, costs[0])

    for epoch in tqdm(range(1, config.max_epochs + 1), desc="Dicionário", unit="época",
                      disable=not progress_enabled()):
        order = rng.permutation(len(Y))
        for start in range(0, len(order), config.batch_size):
            batch = Y[order[start:start + config.batch_size]]
            solver = SolverConfig(alphas=[alpha], max_iters=fista_iters,
                                  lipschitz=estimate_lipschitz(dictionary))
            codes = encode_batch(Method.FISTA, batch, solver, dictionary)
            atoms = dictionary.atoms - lr * dict_gradient(dictionary, batch, codes)
            dictionary = normalize_columns(Dictionary(atoms, init.column_norm_tolerance))
        costs.append(mean_reconstruction_cost(Y, dictionary, alpha, fista_iters))
        logger.info("Época %d: custo médio %.6g (lr=%.3g)", epoch, costs[-1], lr)
        lr *= config.lr_decay
        if abs(costs[-2] - costs[-1]) <= config.rel_cost_tol * max(abs(costs[-2]), 1e-300):
            logger.info("Custo estabilizado na época %d", epoch)
            break
    return dictionary, costs


def learn_component_dictionaries(datasets: Sequence[np.ndarray], atoms: Union[int, Sequence[int]],
                                 config: TrainConfig, alphas: Union[float, Sequence[float]],
                                 fista_iters: int = FISTA_ITERS) -> ConcatDictionary:
    """
    Aprende um dicionário por componente e concatena o resultado.

    Cada componente i usa sua própria base de sinais não misturados,
    um dicionário inicial aleatório com seed config.seed + i e seu α_i.

    Args:
        datasets (Sequence[np.ndarray]): D conjuntos de sinais P_i×M.
        atoms (int | Sequence[int]): N_i de cada dicionário.
        config (TrainConfig): Configuração compartilhada do SGD.
        alphas (float | Sequence[float]): α compartilhado ou um por componente.
        fista_iters (int): Iterações do FISTA por lote.

    Returns:
        ConcatDictionary: [A₁, …, A_D].

    Raises:
        ShapeMismatch: Se os conjuntos tiverem dimensões de sinal diferentes.
        EmptySource: Se algum conjunto estiver vazio.
    """
    datasets = [np.atleast_2d(np.asarray(d, dtype=np.float64)) for d in datasets]
    if not datasets:
        raise EmptySource("Nenhum conjunto de componente informado")
    dims = {d.shape[1] for d in datasets}
    if len(dims) != 1:
        raise ShapeMismatch(f"Conjuntos com dimensões de sinal diferentes: {sorted(dims)}")
    D = len(datasets)
    sizes = [atoms] * D if isinstance(atoms, int) else list(atoms)
    weights = [float(alphas)] * D if np.isscalar(alphas) else [float(a) for a in alphas]
    if len(sizes) != D or len(weights) != D:
        raise ShapeMismatch(f"Esperados {D} tamanhos e {D} valores de α")
    parts = []
    for i, (signals, size, alpha) in enumerate(zip(datasets, sizes, weights)):
        logger.info("Componente %d/%d: %d sinais, %d átomos", i + 1, D, len(signals), size)
        init = planted_dictionary(signals.shape[1], size, config.seed + i)
        part_config = config.model_copy(update={"seed": config.seed + i})
        learned, _ = learn_dictionary(signals, init, part_config, alpha, fista_iters)
        parts.append(learned)
    return ConcatDictionary(tuple(parts))


def save_dictionary(dictionary: Union[Dictionary, ConcatDictionary], directory: PathLike,
                    names: Optional[Sequence[str]] = None, config_digest: str = "") -> Path:
    """
    Grava cada parte como LSAM e o manifesto dictionary.json.

    Manifesto: {components: [{name, M, N, file, sha256}], partition, config_digest}.
    """
    if isinstance(dictionary, Dictionary):
        dictionary = ConcatDictionary((dictionary,))
    concat = dictionary
    names = list(names) if names else [f"component_{i}" for i in range(concat.D)]
    if len(names) != concat.D:
        raise ShapeMismatch(f"{len(names)} nomes para {concat.D} componentes")
    directory = Path(directory)
    components = []
    for name, part in zip(names, concat.parts):
        path = write_matrix(directory / f"{name}.lsam", part.atoms)
        components.append({"name": name, "M": part.M, "N": part.N, "file": path.name,
                           "sha256": digest_file(path)})
    return dump_json(directory / DICTIONARY_MANIFEST, {
        "components": components,
        "partition": list(concat.partition),
        "config_digest": config_digest,
    })


def load_dictionary(path: PathLike) -> ConcatDictionary:
    """
    Lê um dicionário gravado por save_dictionary.

    Args:
        path (PathLike): Diretório com dictionary.json, o próprio manifesto
            ou uma matriz LSAM isolada (dicionário de uma parte).

    Raises:
        FileNotFoundError: Se algum arquivo não existir.
        FormatError: Manifesto incompleto.
    """
    path = Path(path)
    if path.suffix == ".lsam":
        return ConcatDictionary((Dictionary(read_matrix(path)),))
    manifest_path = path / DICTIONARY_MANIFEST if path.is_dir() else path
    manifest = load_json(manifest_path)
    try:
        files = [c["file"] for c in manifest["components"]]
    except (KeyError, TypeError) as e:
        raise FormatError(f"Manifesto de dicionário incompleto em {manifest_path}: {e}") from e
    return ConcatDictionary(tuple(Dictionary(read_matrix(manifest_path.parent / f))
                                  for f in files))
