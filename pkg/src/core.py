"""
Tipos de domínio e primitivas numéricas compartilhadas pelo toolkit.

Este módulo reúne tudo o que os demais módulos usam para descrever e
avaliar um problema de codificação esparsa (um dicionário) ou de análise
de componentes morfológicos (MCA, vários dicionários concatenados):
    1. Tipos imutáveis: Dictionary, ConcatDictionary, ComponentCode, Signal
    2. Configuração dos solvers: SolverConfig (pydantic)
    3. Operador de divisão S = (μI + AᵀA)⁻¹ via fatoração de Cholesky
    4. Operadores proximais: soft thresholding e prox do ℓ1 ponderado por bloco
    5. Métricas: custo lasso/MCA, RMSE e esparsidade

Convenções:
    - Dicionários são densos, A ∈ R^{M×N}, colunas (átomos) de norma unitária.
    - Códigos têm comprimento N = Σ N_i e são particionados em D blocos.
    - Lotes são matrizes com uma amostra por linha.
"""

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator
from scipy import linalg

from errors import DimensionMismatch, FactorizationFailure, PartitionMismatch, ZeroColumn

logger = logging.getLogger(__name__)

COLUMN_NORM_TOLERANCE = 1e-8
"""float: Tolerância para considerar uma coluna normalizada."""

ZERO_COLUMN_NORM = 1e-12
"""float: Norma abaixo da qual uma coluna é considerada nula."""

SPARSITY_ZERO_TOL = 1e-12
"""float: Magnitude abaixo da qual um coeficiente conta como zero."""

MIXTURE_TOLERANCE = 1e-9
"""float: Tolerância elemento a elemento para y = Σ y_i."""


def _frozen_array(values, ndim: int, name: str) -> np.ndarray:
    array = np.array(values, dtype=np.float64, copy=True)
    if array.ndim != ndim:
        raise DimensionMismatch(f"{name} deve ter {ndim} dimensão(ões), recebido {array.ndim}")
    if not np.all(np.isfinite(array)):
        raise ValueError(f"{name} contém valores não finitos")
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class Dictionary:
    """
    Dicionário de síntese A ∈ R^{M×N}.

    Attributes:
        atoms (np.ndarray): Matriz M×N (linhas = dimensão do sinal,
            colunas = átomos). Copiada e marcada como somente leitura.
        column_norm_tolerance (float): Tolerância usada por is_normalized.

    Note:
        Dicionários não normalizados são representáveis; is_normalized
        sinaliza o estado e normalize_columns produz a versão unitária.
    """

    atoms: np.ndarray
    column_norm_tolerance: float = COLUMN_NORM_TOLERANCE

    def __post_init__(self) -> None:
        atoms = _frozen_array(self.atoms, 2, "atoms")
        if atoms.shape[0] < 1 or atoms.shape[1] < 1:
            raise DimensionMismatch(f"Dicionário vazio: formato {atoms.shape}")
        object.__setattr__(self, "atoms", atoms)

    @property
    def M(self) -> int:
        return self.atoms.shape[0]

    @property
    def N(self) -> int:
        return self.atoms.shape[1]

    @cached_property
    def column_norms(self) -> np.ndarray:
        return np.linalg.norm(self.atoms, axis=0)

    @property
    def is_normalized(self) -> bool:
        return bool(np.all(np.abs(self.column_norms - 1.0) <= self.column_norm_tolerance))


@dataclass(frozen=True, eq=False)
class ConcatDictionary:
    """
    Dicionário concatenado A = [A₁, A₂, …, A_D] para MCA.

    Attributes:
        parts (Tuple[Dictionary, ...]): D dicionários com o mesmo M.

    Propriedades derivadas: offsets (deslocamentos cumulativos das colunas,
    começando em 0), partition (N_i de cada parte), matrix (A concatenada)
    e gram (AᵀA), calculadas uma única vez.
    """

    parts: Tuple[Dictionary, ...]

    def __post_init__(self) -> None:
        parts = tuple(self.parts)
        if not parts:
            raise DimensionMismatch("ConcatDictionary exige ao menos uma parte")
        rows = {part.M for part in parts}
        if len(rows) != 1:
            raise DimensionMismatch(f"Partes com dimensões de sinal diferentes: {sorted(rows)}")
        object.__setattr__(self, "parts", parts)

    @classmethod
    def of(cls, *parts: Union[Dictionary, np.ndarray]) -> "ConcatDictionary":
        return cls(tuple(p if isinstance(p, Dictionary) else Dictionary(p) for p in parts))

    @classmethod
    def from_matrix(cls, atoms: np.ndarray, partition: Sequence[int]) -> "ConcatDictionary":
        """Divide uma matriz M×N em partes segundo partition."""
        atoms = np.asarray(atoms, dtype=np.float64)
        if sum(partition) != atoms.shape[1]:
            raise PartitionMismatch(
                f"Partição {list(partition)} não soma N={atoms.shape[1]}"
            )
        bounds = np.cumsum([0, *partition])
        return cls(tuple(Dictionary(atoms[:, bounds[i]:bounds[i + 1]])
                         for i in range(len(partition))))

    @property
    def D(self) -> int:
        return len(self.parts)

    @property
    def M(self) -> int:
        return self.parts[0].M

    @property
    def N(self) -> int:
        return sum(part.N for part in self.parts)

    @property
    def partition(self) -> Tuple[int, ...]:
        return tuple(part.N for part in self.parts)

    @property
    def offsets(self) -> Tuple[int, ...]:
        return tuple(int(o) for o in np.cumsum([0, *self.partition[:-1]]))

    @cached_property
    def matrix(self) -> np.ndarray:
        matrix = np.concatenate([part.atoms for part in self.parts], axis=1)
        matrix.setflags(write=False)
        return matrix

    @cached_property
    def gram(self) -> np.ndarray:
        gram = self.matrix.T @ self.matrix
        gram.setflags(write=False)
        return gram


DictionaryLike = Union[Dictionary, ConcatDictionary]


def as_concat(dictionary: DictionaryLike) -> ConcatDictionary:
    """Vê um Dictionary simples como ConcatDictionary de uma parte."""
    if isinstance(dictionary, ConcatDictionary):
        return dictionary
    if isinstance(dictionary, Dictionary):
        return ConcatDictionary((dictionary,))
    return ConcatDictionary((Dictionary(dictionary),))


@dataclass(frozen=True, eq=False)
class ComponentCode:
    """
    Código esparso x = [x₁; x₂; …; x_D].

    Attributes:
        values (np.ndarray): Vetor de comprimento N.
        partition (Tuple[int, ...]): Comprimentos N_i dos blocos.
    """

    values: np.ndarray
    partition: Tuple[int, ...] = ()

    def __post_init__(self) -> None:
        values = _frozen_array(self.values, 1, "values")
        partition = tuple(int(n) for n in self.partition) or (values.size,)
        if sum(partition) != values.size:
            raise PartitionMismatch(
                f"Partição {list(partition)} não soma N={values.size}"
            )
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "partition", partition)

    @property
    def D(self) -> int:
        return len(self.partition)

    @property
    def offsets(self) -> Tuple[int, ...]:
        return tuple(int(o) for o in np.cumsum([0, *self.partition[:-1]]))

    def block(self, i: int) -> np.ndarray:
        start = self.offsets[i]
        return self.values[start:start + self.partition[i]]

    def blocks(self) -> List[np.ndarray]:
        return [self.block(i) for i in range(self.D)]


@dataclass(frozen=True, eq=False)
class Signal:
    """
    Sinal observado y ∈ R^M, opcionalmente com rótulo e componentes verdadeiras.

    Attributes:
        data (np.ndarray): Vetor de comprimento M.
        label (Optional[int]): Índice de classe, quando conhecido.
        component_truth (Optional[Tuple[np.ndarray, ...]]): As D componentes
            y_i de uma mistura; sua soma deve reproduzir data (±1e-9).
    """

    data: np.ndarray
    label: Optional[int] = None
    component_truth: Optional[Tuple[np.ndarray, ...]] = field(default=None)

    def __post_init__(self) -> None:
        data = _frozen_array(self.data, 1, "data")
        object.__setattr__(self, "data", data)
        if self.component_truth is not None:
            truth = tuple(_frozen_array(c, 1, "component_truth") for c in self.component_truth)
            if any(c.shape != data.shape for c in truth):
                raise DimensionMismatch("Componentes com dimensão diferente do sinal")
            if not np.allclose(np.sum(truth, axis=0), data, rtol=0.0, atol=MIXTURE_TOLERANCE):
                raise ValueError("A soma das componentes não reproduz o sinal misturado")
            object.__setattr__(self, "component_truth", truth)


class SolverConfig(BaseModel):
    """
    Configuração dos solvers iterativos (ISTA, FISTA, SALSA).

    Attributes:
        alphas (List[float]): Pesos α_i ≥ 0 de esparsidade, um por componente.
        mu (float): Penalidade μ > 0 do ADMM.
        max_iters (int): Orçamento de iterações T ≥ 1.
        stop_tol (float): Tolerância ≥ 0 na variação relativa de x; 0 força T iterações.
        lipschitz (Optional[float]): Constante L para ISTA/FISTA; estimada se ausente.
    """

    model_config = ConfigDict(frozen=True)

    alphas: List[float] = Field(min_length=1)
    mu: float = Field(default=1.0, gt=0.0)
    max_iters: int = Field(default=100, ge=1)
    stop_tol: float = Field(default=1e-6, ge=0.0)
    lipschitz: Optional[float] = Field(default=None, gt=0.0)

    @field_validator("alphas")
    @classmethod
    def _alphas_nonnegative(cls, alphas: List[float]) -> List[float]:
        if any(a < 0 for a in alphas):
            raise ValueError("todos os α_i devem ser ≥ 0")
        return [float(a) for a in alphas]


def as_values(code: Union[ComponentCode, np.ndarray, Sequence[float]]) -> np.ndarray:
    if isinstance(code, ComponentCode):
        return code.values
    return np.asarray(code, dtype=np.float64)


def as_data(signal: Union[Signal, np.ndarray, Sequence[float]]) -> np.ndarray:
    if isinstance(signal, Signal):
        return signal.data
    return np.asarray(signal, dtype=np.float64)


def normalize_columns(dictionary: Dictionary) -> Dictionary:
    """
    Escala cada coluna do dicionário para norma euclidiana unitária.

    Args:
        dictionary (Dictionary): Dicionário de entrada.

    Returns:
        Dictionary: Novo dicionário com colunas unitárias na mesma ordem.

    Raises:
        ZeroColumn: Se alguma coluna tiver norma < 1e-12.

    Example:
        >>> normalize_columns(Dictionary([[3.0], [4.0]])).atoms.ravel()
        array([0.6, 0.8])
    """
    norms = np.linalg.norm(dictionary.atoms, axis=0)
    dead = np.flatnonzero(norms < ZERO_COLUMN_NORM)
    if dead.size:
        raise ZeroColumn(f"Colunas com norma nula: {dead.tolist()}")
    return Dictionary(dictionary.atoms / norms, dictionary.column_norm_tolerance)


def build_splitting_operator(dictionary: Union[DictionaryLike, np.ndarray],
                             mu: float) -> np.ndarray:
    """
    Constrói o operador de divisão S = (μI + AᵀA)⁻¹.

    A matriz μI + AᵀA é fatorada por Cholesky e S é obtida resolvendo
    o sistema contra a identidade. S é materializada densa porque o
    LSALSA a trata como matriz livre aprendível.

    Args:
        dictionary (DictionaryLike | np.ndarray): Dicionário A (M×N).
        mu (float): Penalidade μ > 0.

    Returns:
        np.ndarray: Matriz N×N simétrica.

    Raises:
        FactorizationFailure: Se μ ≤ 0, houver entradas não finitas ou
            μI + AᵀA não for numericamente SPD.

    Example:
        >>> build_splitting_operator(np.eye(2), 1.0)
        array([[0.5, 0. ],
               [0. , 0.5]])
    """
    if isinstance(dictionary, (Dictionary, ConcatDictionary)):
        gram = as_concat(dictionary).gram
    else:
        atoms = np.asarray(dictionary, dtype=np.float64)
        gram = atoms.T @ atoms
    if not mu > 0:
        raise FactorizationFailure(f"μ deve ser positivo, recebido {mu}")
    hessian = mu * np.eye(gram.shape[0]) + gram
    try:
        factor = linalg.cho_factor(hessian, lower=False, check_finite=True)
    except (linalg.LinAlgError, ValueError) as e:
        raise FactorizationFailure(f"μI + AᵀA não é SPD: {e}") from e
    splitting = linalg.cho_solve(factor, np.eye(gram.shape[0]))
    return 0.5 * (splitting + splitting.T)


def soft_threshold(z: np.ndarray, tau: Union[float, np.ndarray]) -> np.ndarray:
    """
    Soft thresholding elemento a elemento.

    soft(z; τ) = z − τ se z > τ; 0 se |z| ≤ τ; z + τ se z < −τ.

    Args:
        z (np.ndarray): Vetor ou matriz de entrada.
        tau (float | np.ndarray): Limiar(es) ≥ 0, escalar ou broadcastável.

    Returns:
        np.ndarray: Resultado com o formato de z.

    Raises:
        ValueError: Se algum limiar for negativo.
    """
    tau = np.asarray(tau, dtype=np.float64)
    if np.any(tau < 0):
        raise ValueError("O limiar do soft thresholding deve ser ≥ 0")
    z = np.asarray(z, dtype=np.float64)
    return np.sign(z) * np.maximum(np.abs(z) - tau, 0.0)


def block_thresholds(partition: Sequence[int], alphas: Sequence[float], mu: float) -> np.ndarray:
    """
    Expande os limiares α_i/μ por bloco em um vetor de comprimento N.

    Raises:
        PartitionMismatch: Se len(alphas) ≠ número de blocos.
    """
    if len(alphas) != len(partition):
        raise PartitionMismatch(
            f"{len(alphas)} valores de α para {len(partition)} componentes"
        )
    return np.repeat(np.asarray(alphas, dtype=np.float64) / mu, partition)


def prox_weighted_l1(z: Union[ComponentCode, np.ndarray], alphas: Sequence[float], mu: float,
                     partition: Optional[Sequence[int]] = None) -> ComponentCode:
    """
    Operador proximal da soma ponderada de normas ℓ1 por componente.

    O bloco i da saída é soft_threshold(z_i, α_i/μ), que é o minimizador
    exato de Σ α_i‖x_i‖₁/μ + ½‖z − x‖².

    Args:
        z (ComponentCode | np.ndarray): Ponto de avaliação.
        alphas (Sequence[float]): Um α_i ≥ 0 por bloco.
        mu (float): Penalidade μ > 0.
        partition (Optional[Sequence[int]]): Blocos quando z é um array simples.

    Returns:
        ComponentCode: Código com a mesma partição de z.

    Raises:
        PartitionMismatch: Se o número de α diferir do número de blocos.
    """
    if isinstance(z, ComponentCode):
        partition = z.partition
    values = as_values(z)
    partition = tuple(partition) if partition else (values.size,)
    thresholds = block_thresholds(partition, alphas, mu)
    return ComponentCode(soft_threshold(values, thresholds), partition)


def lasso_cost(code: Union[ComponentCode, np.ndarray], signal: Union[Signal, np.ndarray],
               dictionary: DictionaryLike, alphas: Sequence[float]) -> float:
    """
    Custo MCA ½‖y − Ax‖² + Σ α_i‖x_i‖₁ (D = 1 é o lasso usual).

    Args:
        code (ComponentCode | np.ndarray): Código x de comprimento N.
        signal (Signal | np.ndarray): Sinal y de comprimento M.
        dictionary (DictionaryLike): Dicionário (concatenado) A.
        alphas (Sequence[float]): Pesos α_i, um por componente.

    Returns:
        float: Valor do custo.

    Raises:
        DimensionMismatch: Se x, y e A não forem compatíveis.
        PartitionMismatch: Se len(alphas) ≠ D.

    Example:
        >>> lasso_cost([0.5, 0.0], [1.0, 0.0], Dictionary(np.eye(2)), [0.5])
        0.375
    """
    concat = as_concat(dictionary)
    x = as_values(code)
    y = as_data(signal)
    if x.shape != (concat.N,) or y.shape != (concat.M,):
        raise DimensionMismatch(
            f"x{x.shape} e y{y.shape} incompatíveis com A {concat.M}×{concat.N}"
        )
    weights = block_thresholds(concat.partition, alphas, 1.0)
    residual = y - concat.matrix @ x
    return float(0.5 * residual @ residual + np.sum(weights * np.abs(x)))


def rmse(a: Union[ComponentCode, np.ndarray], b: Union[ComponentCode, np.ndarray]) -> float:
    """
    Raiz do erro quadrático médio entre dois códigos.

    Raises:
        DimensionMismatch: Se os comprimentos diferirem.
    """
    va, vb = as_values(a), as_values(b)
    if va.shape != vb.shape:
        raise DimensionMismatch(f"Comprimentos diferentes: {va.shape} vs {vb.shape}")
    return float(np.sqrt(np.mean((va - vb) ** 2)))


def sparsity(code: Union[ComponentCode, np.ndarray], zero_tol: float = SPARSITY_ZERO_TOL) -> float:
    """Fração de entradas com |x| ≤ zero_tol, em [0, 1]."""
    values = as_values(code)
    return float(np.mean(np.abs(values) <= zero_tol))


def per_sample_rmse(estimates: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """RMSE de cada linha de um lote contra as linhas correspondentes do alvo."""
    estimates = np.atleast_2d(estimates)
    targets = np.atleast_2d(targets)
    if estimates.shape != targets.shape:
        raise DimensionMismatch(f"Lotes diferentes: {estimates.shape} vs {targets.shape}")
    return np.sqrt(np.mean((estimates - targets) ** 2, axis=1))


def per_sample_sparsity(codes: np.ndarray, zero_tol: float = SPARSITY_ZERO_TOL) -> np.ndarray:
    return np.mean(np.abs(np.atleast_2d(codes)) <= zero_tol, axis=1)


def mean_rmse(estimates: np.ndarray, targets: np.ndarray) -> float:
    """RMSE por amostra, médio sobre o lote (a leitura usada nas curvas)."""
    return float(np.mean(per_sample_rmse(estimates, targets)))
