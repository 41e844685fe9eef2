"""
Preparação de dados: ingestão, patches, misturas, códigos ótimos e reconstrução.

Este módulo implementa o pipeline de dados dos experimentos:
    1. Ingestão de imagens IDX (família MNIST) e PGM, com pixels em [0, 1]
    2. Conversão para tons de cinza, redimensionamento bilinear e extração
       de patches sem sobreposição (com reconstrução inversa)
    3. Síntese de misturas y = a + b para MCA, com as componentes verdadeiras
    4. Geração dos códigos ótimos (alvos de treinamento) com FISTA ou SALSA
    5. Reconstrução das componentes A_i·x_i a partir de um código
    6. Geradores sintéticos "plantados" que substituem bases indisponíveis

Valores padrão dos experimentos:
    - α = 0.15 (patches 10×10) e α = 0.5 (patches 16×16)
    - MCA: α₁ = 0.125, α₂ = 0.2, μ = 10
    - Códigos ótimos: FISTA 200 iterações (700 para patches grandes), SALSA 100
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from joblib import Parallel, delayed
from pydantic import BaseModel, ConfigDict, Field

from core import (
    ComponentCode,
    ConcatDictionary,
    Dictionary,
    DictionaryLike,
    Signal,
    SolverConfig,
    as_concat,
    as_values,
    normalize_columns,
    per_sample_sparsity,
)
from errors import (
    DimensionMismatch,
    EmptySource,
    FormatError,
    PatchTooLarge,
    ShapeMismatch,
    UnknownMethod,
)
from formats import (
    IDX_IMAGES_MAGIC,
    IDX_LABELS_MAGIC,
    PathLike,
    digest_array,
    dump_json,
    load_json,
    read_idx,
    read_matrix,
    read_pgm,
    write_idx,
    write_matrix,
)
from solvers import Method, encode_batch, estimate_lipschitz

logger = logging.getLogger(__name__)

ALPHA_FASHION_MNIST = 0.15
"""float: α dos códigos ótimos para patches 10×10."""

ALPHA_ASIRRA = 0.5
"""float: α dos códigos ótimos para patches 16×16 de imagens naturais."""

MCA_ALPHAS = (0.125, 0.2)
"""Tuple[float, float]: (α₁, α₂) padrão da separação de duas componentes."""

MCA_MU = 10.0
"""float: μ padrão da separação de duas componentes."""

OPTIMAL_FISTA_ITERS = 200
OPTIMAL_FISTA_ITERS_LARGE = 700
OPTIMAL_SALSA_ITERS = 100

GRAY_WEIGHTS = np.array([0.299, 0.587, 0.114])
"""np.ndarray: Pesos de luminância (ITU-R 601) para R, G, B."""

MIXTURE_MANIFEST = "mixtures.json"


class PatchSpec(BaseModel):
    """
    Especificação de patches sem sobreposição (passo = tamanho do patch).

    Attributes:
        patch_h (int): Altura do patch.
        patch_w (int): Largura do patch.
        min_std (Optional[float]): Patches com desvio padrão abaixo deste
            valor são descartados; None mantém todos.
    """

    model_config = ConfigDict(frozen=True)

    patch_h: int = Field(ge=1)
    patch_w: int = Field(ge=1)
    min_std: Optional[float] = Field(default=None, ge=0.0)

    @property
    def stride(self) -> Tuple[int, int]:
        return self.patch_h, self.patch_w

    @property
    def size(self) -> int:
        return self.patch_h * self.patch_w


def import_idx(path: PathLike) -> np.ndarray:
    """
    Lê um arquivo IDX de imagens com pixels escalados para [0, 1].

    Args:
        path (PathLike): Arquivo IDX (magic 0x00000803).

    Returns:
        np.ndarray: Tensor float64 (n, altura, largura).

    Raises:
        FileNotFoundError: Se o arquivo não existir.
        FormatError: Magic diferente de imagens ou payload truncado.
    """
    return read_idx(path, IDX_IMAGES_MAGIC).astype(np.float64) / 255.0


def import_labels(path: PathLike) -> np.ndarray:
    """Lê um arquivo IDX de rótulos (magic 0x00000801) como inteiros."""
    return read_idx(path, IDX_LABELS_MAGIC).astype(np.int64)


def export_idx(path: PathLike, images: np.ndarray) -> Path:
    """Grava imagens em [0, 1] como IDX u8 (arredondando para o nível mais próximo)."""
    images = np.asarray(images, dtype=np.float64)
    return write_idx(path, np.round(np.clip(images, 0.0, 1.0) * 255.0).astype(np.uint8))


def to_grayscale(rgb: np.ndarray) -> np.ndarray:
    """
    Converte uma imagem RGB (..., 3) em [0, 1] para tons de cinza.

    Example:
        >>> to_grayscale(np.array([[[1.0, 0.0, 0.0]]]))
        array([[0.299]])
    """
    rgb = np.asarray(rgb, dtype=np.float64)
    if rgb.shape[-1] != 3:
        raise ShapeMismatch(f"Imagem RGB deve ter 3 canais, recebido {rgb.shape[-1]}")
    return rgb @ GRAY_WEIGHTS


def _sample_axis(size_in: int, size_out: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    coords = (np.arange(size_out) + 0.5) * (size_in / size_out) - 0.5
    coords = np.clip(coords, 0.0, size_in - 1)
    low = np.floor(coords).astype(np.int64)
    high = np.minimum(low + 1, size_in - 1)
    return low, high, coords - low


def resize_bilinear(image: np.ndarray, height: int, width: int) -> np.ndarray:
    """
    Redimensiona uma imagem 2-D por interpolação bilinear.

    Amostragem pelos centros dos pixels com bordas replicadas; o
    resultado não é garantido idêntico pixel a pixel ao de outras
    bibliotecas.
    """
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 2:
        raise ShapeMismatch(f"resize_bilinear exige imagem 2-D, recebido ndim={image.ndim}")
    y0, y1, wy = _sample_axis(image.shape[0], height)
    x0, x1, wx = _sample_axis(image.shape[1], width)
    top = image[y0][:, x0] * (1.0 - wx) + image[y0][:, x1] * wx
    bottom = image[y1][:, x0] * (1.0 - wx) + image[y1][:, x1] * wx
    return top * (1.0 - wy)[:, None] + bottom * wy[:, None]


def extract_patches(image: np.ndarray, spec: PatchSpec) -> np.ndarray:
    """
    Divide a imagem em patches sem sobreposição, em ordem de linhas.

    Pixels excedentes nas bordas inferior e direita são ignorados; cada
    patch é achatado em ordem de linhas.

    Args:
        image (np.ndarray): Imagem 2-D.
        spec (PatchSpec): Tamanho do patch e filtro opcional por desvio padrão.

    Returns:
        np.ndarray: Matriz (n_patches, patch_h·patch_w).

    Raises:
        PatchTooLarge: Se o patch for maior que a imagem.

    Example:
        >>> extract_patches(np.zeros((32, 32)), PatchSpec(patch_h=10, patch_w=10)).shape
        (9, 100)
    """
    image = np.asarray(image, dtype=np.float64)
    H, W = image.shape
    ph, pw = spec.patch_h, spec.patch_w
    if ph > H or pw > W:
        raise PatchTooLarge(f"Patch {ph}×{pw} maior que a imagem {H}×{W}")
    rows, cols = H // ph, W // pw
    covered = image[:rows * ph, :cols * pw]
    patches = covered.reshape(rows, ph, cols, pw).transpose(0, 2, 1, 3).reshape(-1, ph * pw)
    if spec.min_std is not None:
        patches = patches[patches.std(axis=1) >= spec.min_std]
    return patches


def reassemble_patches(patches: np.ndarray, image_shape: Tuple[int, int],
                       spec: PatchSpec) -> np.ndarray:
    """
    Inverso de extract_patches (sem filtro): remonta a região coberta.

    Pixels fora da região coberta ficam em zero.

    Raises:
        ShapeMismatch: Se o número ou o tamanho dos patches não corresponder.
    """
    H, W = image_shape
    ph, pw = spec.patch_h, spec.patch_w
    rows, cols = H // ph, W // pw
    patches = np.asarray(patches, dtype=np.float64)
    if patches.shape != (rows * cols, ph * pw):
        raise ShapeMismatch(
            f"Esperados {rows * cols} patches de {ph * pw} pixels, recebido {patches.shape}"
        )
    image = np.zeros((H, W))
    image[:rows * ph, :cols * pw] = (
        patches.reshape(rows, cols, ph, pw).transpose(0, 2, 1, 3).reshape(rows * ph, cols * pw)
    )
    return image


def images_to_patches(images: np.ndarray, spec: PatchSpec) -> np.ndarray:
    """Extrai e empilha os patches de um tensor (n, H, W) de imagens."""
    images = np.asarray(images, dtype=np.float64)
    if images.ndim == 2:
        images = images[None]
    blocks = [extract_patches(image, spec) for image in images]
    return np.concatenate(blocks) if blocks else np.zeros((0, spec.size))


def load_signal_matrix(path: PathLike, spec: Optional[PatchSpec] = None) -> np.ndarray:
    """
    Carrega sinais (uma amostra por linha) de LSAM, IDX ou PGM.

    Imagens IDX/PGM são divididas em patches quando spec é informado e
    achatadas caso contrário.
    """
    path = Path(path)
    if path.suffix == ".lsam":
        return read_matrix(path)
    images = read_pgm(path)[None] if path.suffix == ".pgm" else import_idx(path)
    if spec is not None:
        return images_to_patches(images, spec)
    return images.reshape(len(images), -1)


@dataclass
class MixtureSet:
    """
    Misturas de duas fontes com as componentes verdadeiras.

    Attributes:
        mixed (np.ndarray): Sinais misturados P×M (mixed = truth_a + truth_b).
        truth_a (np.ndarray): Primeira componente de cada mistura.
        truth_b (np.ndarray): Segunda componente de cada mistura.
        index_a (np.ndarray): Índices sorteados no conjunto de origem A.
        index_b (np.ndarray): Índices sorteados no conjunto de origem B.
        seed (int): Seed do sorteio.
        source_digests (Tuple[str, str]): SHA-256 dos conjuntos de origem.
    """

    mixed: np.ndarray
    truth_a: np.ndarray
    truth_b: np.ndarray
    index_a: np.ndarray
    index_b: np.ndarray
    seed: int
    source_digests: Tuple[str, str] = ("", "")

    def __len__(self) -> int:
        return len(self.mixed)

    def signal(self, i: int) -> Signal:
        return Signal(self.mixed[i], component_truth=(self.truth_a[i], self.truth_b[i]))

    @property
    def signals(self) -> List[Signal]:
        return [self.signal(i) for i in range(len(self))]


def make_mixtures(set_a: np.ndarray, set_b: np.ndarray, count: int, seed: int) -> MixtureSet:
    """
    Sorteia pares (a, b) uniformemente e forma y = a + b.

    Args:
        set_a (np.ndarray): Sinais da primeira fonte (P_a×M).
        set_b (np.ndarray): Sinais da segunda fonte (P_b×M).
        count (int): Número de misturas.
        seed (int): Seed do sorteio; índices de A e depois de B saem do mesmo gerador.

    Returns:
        MixtureSet: Misturas com componentes e procedência.

    Raises:
        EmptySource: Se algum conjunto estiver vazio.
        DimensionMismatch: Se as dimensões de sinal diferirem.
    """
    set_a = np.atleast_2d(np.asarray(set_a, dtype=np.float64))
    set_b = np.atleast_2d(np.asarray(set_b, dtype=np.float64))
    if not set_a.size or not set_b.size:
        raise EmptySource("Os conjuntos de origem das misturas não podem estar vazios")
    if set_a.shape[1] != set_b.shape[1]:
        raise DimensionMismatch(
            f"Fontes com dimensões diferentes: {set_a.shape[1]} e {set_b.shape[1]}"
        )
    rng = np.random.default_rng(seed)
    index_a = rng.integers(0, len(set_a), size=count)
    index_b = rng.integers(0, len(set_b), size=count)
    truth_a, truth_b = set_a[index_a], set_b[index_b]
    return MixtureSet(
        mixed=truth_a + truth_b,
        truth_a=truth_a,
        truth_b=truth_b,
        index_a=index_a,
        index_b=index_b,
        seed=seed,
        source_digests=(digest_array(set_a), digest_array(set_b)),
    )


def save_mixtures(mixtures: MixtureSet, directory: PathLike) -> Path:
    """Grava mixed/truth_a/truth_b como LSAM mais o manifesto mixtures.json."""
    directory = Path(directory)
    files = {"mixed": "mixed.lsam", "truth_a": "truth_a.lsam", "truth_b": "truth_b.lsam",
             "index_a": "index_a.lsam", "index_b": "index_b.lsam"}
    for name, filename in files.items():
        values = np.atleast_2d(getattr(mixtures, name)).astype(np.float64)
        write_matrix(directory / filename, values)
    return dump_json(directory / MIXTURE_MANIFEST, {
        "count": len(mixtures),
        "M": int(mixtures.mixed.shape[1]),
        "seed": mixtures.seed,
        "files": files,
        "source_digests": list(mixtures.source_digests),
        "digests": {name: digest_array(getattr(mixtures, name)) for name in
                    ("mixed", "truth_a", "truth_b")},
    })


def load_mixtures(directory: PathLike) -> MixtureSet:
    """
    Lê um MixtureSet gravado por save_mixtures.

    Raises:
        FormatError: Manifesto incompleto ou conteúdo com digest divergente.
    """
    directory = Path(directory)
    manifest = load_json(directory / MIXTURE_MANIFEST)
    try:
        files = manifest["files"]
        arrays = {name: read_matrix(directory / files[name]) for name in
                  ("mixed", "truth_a", "truth_b", "index_a", "index_b")}
        digests = manifest["digests"]
    except (KeyError, TypeError) as e:
        raise FormatError(f"Manifesto de misturas incompleto em {directory}: {e}") from e
    for name in ("mixed", "truth_a", "truth_b"):
        if digest_array(arrays[name]) != digests.get(name):
            raise FormatError(f"Digest divergente para {name} em {directory}")
    return MixtureSet(
        mixed=arrays["mixed"],
        truth_a=arrays["truth_a"],
        truth_b=arrays["truth_b"],
        index_a=arrays["index_a"].reshape(-1).astype(np.int64),
        index_b=arrays["index_b"].reshape(-1).astype(np.int64),
        seed=int(manifest["seed"]),
        source_digests=tuple(manifest.get("source_digests", ("", ""))),
    )


@dataclass
class OptimalCodes:
    """Códigos ótimos de um conjunto de sinais e a esparsidade média obtida."""

    codes: np.ndarray
    mean_sparsity: float
    method: Method
    config: SolverConfig
    partition: Tuple[int, ...] = field(default=())

    def code(self, i: int) -> ComponentCode:
        return ComponentCode(self.codes[i], self.partition)


def default_optimal_config(alphas: Sequence[float], method: Union[str, Method] = Method.FISTA,
                           mu: float = 1.0, large_patches: bool = False) -> SolverConfig:
    """SolverConfig com o número de iterações padrão para a geração de códigos ótimos."""
    method = Method.parse(method)
    if method is Method.SALSA:
        iters = OPTIMAL_SALSA_ITERS
    else:
        iters = OPTIMAL_FISTA_ITERS_LARGE if large_patches else OPTIMAL_FISTA_ITERS
    return SolverConfig(alphas=list(alphas), mu=mu, max_iters=iters, stop_tol=0.0)


def generate_optimal_codes(signals: np.ndarray, dictionary: DictionaryLike, config: SolverConfig,
                           method: Union[str, Method] = Method.FISTA,
                           workers: int = 1) -> OptimalCodes:
    """
    Resolve o problema convexo para cada sinal e devolve os códigos alvo.

    O lote é dividido em blocos contíguos processados em paralelo (joblib,
    threads) e concatenados na ordem original, de modo que o resultado
    independe do número de workers.

    Args:
        signals (np.ndarray): Sinais P×M (misturados, no caso MCA).
        dictionary (DictionaryLike): A ou [A₁, …, A_D].
        config (SolverConfig): α*, μ* e número de iterações.
        method (str | Method): FISTA (um dicionário) ou SALSA (MCA).
        workers (int): Número de threads.

    Returns:
        OptimalCodes: Códigos P×N e esparsidade média.

    Raises:
        UnknownMethod: Se o método não for FISTA nem SALSA.
    """
    method = Method.parse(method)
    if method not in (Method.FISTA, Method.SALSA):
        raise UnknownMethod(f"Códigos ótimos exigem FISTA ou SALSA, recebido {method.value}")
    concat = as_concat(dictionary)
    signals = np.atleast_2d(np.asarray(signals, dtype=np.float64))
    if method is Method.FISTA and config.lipschitz is None:
        config = config.model_copy(update={"lipschitz": estimate_lipschitz(concat)})
    chunks = np.array_split(np.arange(len(signals)), max(1, min(workers, len(signals))))
    # alvos são o iterado primal do SALSA, sem o limiar de saída dos encoders
    parts = Parallel(n_jobs=workers, prefer="threads")(
        delayed(encode_batch)(method, signals[idx], config, concat, emit_thresholded=False)
        for idx in chunks
    )
    codes = np.concatenate(parts) if parts else np.zeros((0, concat.N))
    mean_sparsity = float(np.mean(per_sample_sparsity(codes))) if len(codes) else 0.0
    logger.info("Códigos ótimos (%s, %d sinais): esparsidade média %.4f",
                method.value, len(codes), mean_sparsity)
    return OptimalCodes(codes, mean_sparsity, method, config, concat.partition)


def reconstruct(code: Union[ComponentCode, np.ndarray],
                dictionary: DictionaryLike) -> Tuple[List[np.ndarray], np.ndarray]:
    """
    Reconstrói as componentes A_i·x_i e sua soma A·x.

    Aceita um código (vetor de comprimento N) ou um lote P×N; neste caso
    cada componente é uma matriz P×M.

    Returns:
        Tuple[List[np.ndarray], np.ndarray]: D componentes e a soma.

    Raises:
        ShapeMismatch: Se o comprimento do código diferir de N.
    """
    concat = as_concat(dictionary)
    values = as_values(code)
    if values.shape[-1] != concat.N:
        raise ShapeMismatch(f"Código de comprimento {values.shape[-1]} para N={concat.N}")
    components = [
        values[..., start:start + part.N] @ part.atoms.T
        for start, part in zip(concat.offsets, concat.parts)
    ]
    return components, values @ concat.matrix.T


def planted_dictionary(M: int, N: int, seed: int = 0) -> Dictionary:
    """Dicionário com entradas normais padrão e colunas normalizadas."""
    rng = np.random.default_rng(seed)
    return normalize_columns(Dictionary(rng.standard_normal((M, N))))


def planted_codes(count: int, partition: Union[int, Sequence[int]], support: int,
                  seed: int = 0) -> np.ndarray:
    """
    Códigos esparsos com exatamente `support` entradas não nulas por bloco.

    As magnitudes são sorteadas em [0.5, 1.5] com sinal aleatório, para
    que nenhuma entrada do suporte seja desprezível.
    """
    partition = (partition,) if isinstance(partition, int) else tuple(partition)
    if any(support > n for n in partition):
        raise ValueError(f"Suporte {support} maior que algum bloco de {list(partition)}")
    rng = np.random.default_rng(seed)
    codes = np.zeros((count, sum(partition)))
    offsets = np.cumsum([0, *partition[:-1]])
    for row in codes:
        for start, size in zip(offsets, partition):
            idx = start + rng.choice(size, size=support, replace=False)
            row[idx] = rng.choice([-1.0, 1.0], size=support) * rng.uniform(0.5, 1.5, size=support)
    return codes


def planted_signals(dictionary: DictionaryLike, count: int, support: int, seed: int = 0,
                    noise: float = 0.0) -> Tuple[np.ndarray, np.ndarray]:
    """
    Sinais y = A·x (+ ruído gaussiano opcional) com códigos plantados.

    Returns:
        Tuple[np.ndarray, np.ndarray]: (sinais P×M, códigos plantados P×N).
    """
    concat = as_concat(dictionary)
    codes = planted_codes(count, concat.partition, support, seed)
    signals = codes @ concat.matrix.T
    if noise > 0:
        signals = signals + noise * np.random.default_rng(seed + 1).standard_normal(signals.shape)
    return signals, codes


def planted_mixtures(dictionary: ConcatDictionary, count: int, support: int,
                     seed: int = 0) -> MixtureSet:
    """
    Misturas de duas fontes sintéticas, cada uma esparsa na sua parte do dicionário.

    Raises:
        DimensionMismatch: Se o dicionário não tiver exatamente duas partes.
    """
    if dictionary.D != 2:
        raise DimensionMismatch(f"planted_mixtures exige D = 2, recebido {dictionary.D}")
    source_a, _ = planted_signals(dictionary.parts[0], count, support, seed)
    source_b, _ = planted_signals(dictionary.parts[1], count, support, seed + 1)
    return make_mixtures(source_a, source_b, count, seed)


def tune_alpha_for_sparsity(signals: np.ndarray, dictionary: DictionaryLike, target: float,
                            iters: int = OPTIMAL_FISTA_ITERS, steps: int = 20) -> float:
    """
    Bisseção em log α até a esparsidade média dos códigos FISTA atingir target.

    A esparsidade cresce com α; o limite superior é max|Aᵀy|, a partir do
    qual todos os códigos são nulos.

    Returns:
        float: Menor α encontrado cuja esparsidade média é ≥ target.
    """
    concat = as_concat(dictionary)
    signals = np.atleast_2d(np.asarray(signals, dtype=np.float64))
    L = estimate_lipschitz(concat)
    high = float(np.max(np.abs(signals @ concat.matrix))) or 1.0
    low = high * 1e-6

    def mean_sparsity(alpha: float) -> float:
        config = SolverConfig(alphas=[alpha] * concat.D, max_iters=iters, lipschitz=L)
        return float(np.mean(per_sample_sparsity(encode_batch(Method.FISTA, signals, config,
                                                              concat))))

    for _ in range(steps):
        middle = float(np.sqrt(low * high))
        if mean_sparsity(middle) >= target:
            high = middle
        else:
            low = middle
    logger.info("α ajustado para esparsidade %.2f: %.6g", target, high)
    return high
