"""
Encoders desenrolados de profundidade fixa: LSALSA e LISTA.

Este módulo implementa as redes obtidas ao truncar um solver iterativo em
T iterações e tratar cada iteração como uma camada treinável:
    1. LsalsaParams / lsalsa_init: matrizes aprendíveis W_e (N×M) e S (N×N),
       inicializadas como W_e = Aᵀ e S = (μI + AᵀA)⁻¹, o que reproduz
       exatamente o SALSA truncado
    2. ListaParams / lista_init: W_e = Aᵀ/L, S̃ = I − AᵀA/L e limiares θ = α/L,
       o que reproduz exatamente o ISTA truncado
    3. Forward em lote com "tape" opcional das ativações para o backward
    4. Persistência: matrizes LSAM + manifesto JSON

A matriz S é compartilhada por todas as camadas do LSALSA; α_i e μ
são hiperparâmetros fixos.
"""

import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from core import (
    ComponentCode,
    DictionaryLike,
    Signal,
    as_concat,
    as_data,
    block_thresholds,
    build_splitting_operator,
    soft_threshold,
)
from errors import FormatError, NonFiniteActivation, ShapeMismatch
from formats import PathLike, dump_json, load_json, read_matrix, write_matrix
from solvers import estimate_lipschitz

logger = logging.getLogger(__name__)

MANIFEST_NAME = "params.json"
"""str: Nome do manifesto JSON gravado ao lado das matrizes."""


def _param_matrix(values: np.ndarray, shape: Tuple[int, ...], name: str) -> np.ndarray:
    array = np.array(values, dtype=np.float64, copy=True)
    if array.shape != shape:
        raise ShapeMismatch(f"{name} com formato {array.shape}, esperado {shape}")
    if not np.all(np.isfinite(array)):
        raise NonFiniteActivation(f"{name} contém valores não finitos")
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class LsalsaParams:
    """
    Parâmetros de uma rede LSALSA.

    Attributes:
        W_e (np.ndarray): Filtro de entrada N×M.
        S (np.ndarray): Operador de divisão N×N compartilhado entre camadas.
        alphas (Tuple[float, ...]): Pesos α_i ≥ 0 por componente.
        mu (float): Penalidade μ > 0.
        depth (int): Número de camadas T ≥ 1.
        partition (Tuple[int, ...]): Comprimentos N_i dos blocos do código.
    """

    W_e: np.ndarray
    S: np.ndarray
    alphas: Tuple[float, ...]
    mu: float
    depth: int
    partition: Tuple[int, ...]

    def __post_init__(self) -> None:
        partition = tuple(int(n) for n in self.partition)
        N = sum(partition)
        M = np.shape(self.W_e)[1] if np.ndim(self.W_e) == 2 else -1
        object.__setattr__(self, "partition", partition)
        object.__setattr__(self, "alphas", tuple(float(a) for a in self.alphas))
        object.__setattr__(self, "W_e", _param_matrix(self.W_e, (N, M), "W_e"))
        object.__setattr__(self, "S", _param_matrix(self.S, (N, N), "S"))
        if self.depth < 1:
            raise ValueError(f"A profundidade T deve ser ≥ 1, recebido {self.depth}")
        if not self.mu > 0:
            raise ValueError(f"μ deve ser positivo, recebido {self.mu}")
        if any(a < 0 for a in self.alphas):
            raise ValueError("todos os α_i devem ser ≥ 0")
        block_thresholds(partition, self.alphas, self.mu)

    @property
    def M(self) -> int:
        return self.W_e.shape[1]

    @property
    def N(self) -> int:
        return self.W_e.shape[0]

    @property
    def thresholds(self) -> np.ndarray:
        """Limiares α_i/μ expandidos para o comprimento N."""
        return block_thresholds(self.partition, self.alphas, self.mu)

    def with_matrices(self, W_e: np.ndarray, S: np.ndarray) -> "LsalsaParams":
        return replace(self, W_e=W_e, S=S)


@dataclass(frozen=True, eq=False)
class ListaParams:
    """
    Parâmetros de uma rede LISTA.

    Attributes:
        W_e (np.ndarray): Filtro de entrada N×M.
        S_tilde (np.ndarray): Matriz de inibição mútua N×N.
        theta (np.ndarray): Limiares por unidade, comprimento N, ≥ 0.
        depth (int): Número de camadas T ≥ 1.
        partition (Tuple[int, ...]): Blocos do código de saída.
    """

    W_e: np.ndarray
    S_tilde: np.ndarray
    theta: np.ndarray
    depth: int
    partition: Tuple[int, ...] = ()

    def __post_init__(self) -> None:
        N = np.shape(self.W_e)[0] if np.ndim(self.W_e) == 2 else -1
        M = np.shape(self.W_e)[1] if np.ndim(self.W_e) == 2 else -1
        partition = tuple(int(n) for n in self.partition) or (N,)
        if sum(partition) != N:
            raise ShapeMismatch(f"Partição {list(partition)} não soma N={N}")
        object.__setattr__(self, "partition", partition)
        object.__setattr__(self, "W_e", _param_matrix(self.W_e, (N, M), "W_e"))
        object.__setattr__(self, "S_tilde", _param_matrix(self.S_tilde, (N, N), "S_tilde"))
        object.__setattr__(self, "theta", _param_matrix(self.theta, (N,), "theta"))
        if self.depth < 1:
            raise ValueError(f"A profundidade T deve ser ≥ 1, recebido {self.depth}")
        if np.any(self.theta < 0):
            raise ValueError("Os limiares θ devem ser ≥ 0")

    @property
    def M(self) -> int:
        return self.W_e.shape[1]

    @property
    def N(self) -> int:
        return self.W_e.shape[0]

    def with_matrices(self, W_e: np.ndarray, S_tilde: np.ndarray,
                      theta: np.ndarray) -> "ListaParams":
        return replace(self, W_e=W_e, S_tilde=S_tilde, theta=theta)


EncoderParams = Union[LsalsaParams, ListaParams]


@dataclass
class LsalsaTape:
    """
    Ativações gravadas por um forward do LSALSA (uma linha por amostra).

    Índices: x[t] e d[t] para t = 0..T (x[0] = W_e·y, d[0] = 0);
    u[t], z[t] = x[t−1] + d[t−1] e r[t] = W_e·y + μ(u[t] − d[t−1])
    para t = 1..T (a posição 0 dessas listas fica vazia).
    """

    signals: np.ndarray
    filtered: np.ndarray
    x: List[np.ndarray] = field(default_factory=list)
    u: List[Optional[np.ndarray]] = field(default_factory=list)
    d: List[np.ndarray] = field(default_factory=list)
    z: List[Optional[np.ndarray]] = field(default_factory=list)
    r: List[Optional[np.ndarray]] = field(default_factory=list)
    output: Optional[np.ndarray] = None

    @property
    def depth(self) -> int:
        return len(self.x) - 1

    def layer(self, t: int, sample: int = 0) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Retorna (x(t), u(t), d(t−1)) de uma amostra, para t = 1..T."""
        if not 1 <= t <= self.depth:
            raise IndexError(f"Camada {t} fora de 1..{self.depth}")
        return self.x[t][sample], self.u[t][sample], self.d[t - 1][sample]


@dataclass
class ListaTape:
    """Ativações de um forward do LISTA: u[0] = 0 e z[t] = W_e·y + S̃·u[t−1]."""

    signals: np.ndarray
    filtered: np.ndarray
    u: List[np.ndarray] = field(default_factory=list)
    z: List[Optional[np.ndarray]] = field(default_factory=list)

    @property
    def depth(self) -> int:
        return len(self.u) - 1


def _as_batch(signals: Union[Signal, np.ndarray, Sequence], M: int) -> np.ndarray:
    batch = np.atleast_2d(as_data(signals) if isinstance(signals, Signal)
                          else np.asarray(signals, dtype=np.float64))
    if batch.ndim != 2 or batch.shape[1] != M:
        raise ShapeMismatch(f"Sinais com formato {batch.shape}, esperado (P, {M})")
    return batch


def _check_activation(values: np.ndarray, layer: int) -> None:
    if not np.all(np.isfinite(values)):
        raise NonFiniteActivation(f"Ativação não finita na camada {layer}")


def lsalsa_init(dictionary: DictionaryLike, alphas: Sequence[float], mu: float,
                depth: int) -> LsalsaParams:
    """
    Inicializa o LSALSA em correspondência exata com o SALSA.

    W_e = Aᵀ e S = (μI + AᵀA)⁻¹ (via build_splitting_operator).

    Args:
        dictionary (DictionaryLike): Dicionário A ou [A₁, …, A_D].
        alphas (Sequence[float]): Um α_i por componente.
        mu (float): Penalidade μ > 0.
        depth (int): Número de camadas T ≥ 1.

    Returns:
        LsalsaParams: Parâmetros cuja saída coincide com o SALSA truncado em T.

    Raises:
        FactorizationFailure: Se μI + AᵀA não for SPD.
        ValueError: Se depth < 1.
    """
    if depth < 1:
        raise ValueError(f"A profundidade T deve ser ≥ 1, recebido {depth}")
    concat = as_concat(dictionary)
    return LsalsaParams(
        W_e=concat.matrix.T,
        S=build_splitting_operator(concat, mu),
        alphas=tuple(alphas),
        mu=mu,
        depth=depth,
        partition=concat.partition,
    )


def lista_init(dictionary: DictionaryLike, alphas: Sequence[float], depth: int,
               lipschitz: Optional[float] = None) -> ListaParams:
    """
    Inicializa o LISTA a partir do ISTA: W_e = Aᵀ/L, S̃ = I − AᵀA/L, θ = α_i/L.

    Com L ≥ λmax(AᵀA) a saída coincide com T iterações do ISTA a partir de 0.
    """
    if depth < 1:
        raise ValueError(f"A profundidade T deve ser ≥ 1, recebido {depth}")
    concat = as_concat(dictionary)
    L = lipschitz if lipschitz is not None else estimate_lipschitz(concat)
    return ListaParams(
        W_e=concat.matrix.T / L,
        S_tilde=np.eye(concat.N) - concat.gram / L,
        theta=block_thresholds(concat.partition, alphas, L),
        depth=depth,
        partition=concat.partition,
    )


def lsalsa_forward_batch(params: LsalsaParams, signals: np.ndarray,
                         keep_tape: bool = False) -> Tuple[np.ndarray, Optional[LsalsaTape]]:
    """
    Forward do LSALSA sobre um lote (uma amostra por linha).

    x(0) = W_e·y, d(0) = 0; para t = 1..T:
        u(t) = prox_weighted_l1(x(t−1) + d(t−1), α, μ)
        x(t) = S(W_e·y + μ(u(t) − d(t−1)))
        d(t) = d(t−1) − u(t) + x(t)
    Saída: soft(x(T); α_i/μ) por bloco.

    Returns:
        Tuple[np.ndarray, Optional[LsalsaTape]]: Códigos P×N e, se pedido,
            as ativações de todas as camadas.

    Raises:
        ShapeMismatch: Se os sinais não tiverem M colunas.
        NonFiniteActivation: Se alguma camada produzir valores não finitos.
    """
    Y = _as_batch(signals, params.M)
    tau, mu = params.thresholds, params.mu
    S_t = params.S.T
    filtered = Y @ params.W_e.T
    x, d = filtered, np.zeros_like(filtered)
    tape = (LsalsaTape(Y, filtered, x=[x], u=[None], d=[d], z=[None], r=[None])
            if keep_tape else None)
    for t in range(1, params.depth + 1):
        z = x + d
        u = soft_threshold(z, tau)
        r = filtered + mu * (u - d)
        x = r @ S_t
        d = d - u + x
        _check_activation(x, t)
        if tape is not None:
            tape.x.append(x)
            tape.u.append(u)
            tape.d.append(d)
            tape.z.append(z)
            tape.r.append(r)
    output = soft_threshold(x, tau)
    if tape is not None:
        tape.output = output
    return output, tape


def lsalsa_forward(params: LsalsaParams, signal: Union[Signal, np.ndarray],
                   keep_tape: bool = False) -> Tuple[ComponentCode, Optional[LsalsaTape]]:
    """
    Forward do LSALSA para um único sinal.

    Args:
        params (LsalsaParams): Parâmetros da rede.
        signal (Signal | np.ndarray): Sinal y de comprimento M.
        keep_tape (bool): Grava x, u, d de todas as camadas para o backward.

    Returns:
        Tuple[ComponentCode, Optional[LsalsaTape]]: Código e tape (ou None).

    Example:
        >>> p = lsalsa_init(Dictionary(np.eye(2)), [0.5], 1.0, 1)
        >>> lsalsa_forward(p, [1.0, 0.0])[0].values
        array([0.25, 0.  ])
    """
    output, tape = lsalsa_forward_batch(params, as_data(signal), keep_tape)
    return ComponentCode(output[0], params.partition), tape


def lista_forward_batch(params: ListaParams, signals: np.ndarray,
                        keep_tape: bool = False) -> Tuple[np.ndarray, Optional[ListaTape]]:
    """
    Forward do LISTA em lote: u(0) = 0; u(t) = soft(W_e·y + S̃·u(t−1); θ); saída u(T).
    """
    Y = _as_batch(signals, params.M)
    filtered = Y @ params.W_e.T
    S_t = params.S_tilde.T
    u = np.zeros_like(filtered)
    tape = ListaTape(Y, filtered, u=[u], z=[None]) if keep_tape else None
    for t in range(1, params.depth + 1):
        z = filtered + u @ S_t
        u = soft_threshold(z, params.theta)
        _check_activation(u, t)
        if tape is not None:
            tape.u.append(u)
            tape.z.append(z)
    return u, tape


def lista_forward(params: ListaParams, signal: Union[Signal, np.ndarray],
                  keep_tape: bool = False) -> Tuple[ComponentCode, Optional[ListaTape]]:
    """Forward do LISTA para um único sinal."""
    output, tape = lista_forward_batch(params, as_data(signal), keep_tape)
    return ComponentCode(output[0], params.partition), tape


def save_params(params: EncoderParams, directory: PathLike) -> Path:
    """
    Grava os parâmetros como matrizes LSAM mais o manifesto params.json.

    Manifesto: {kind, M, N, D, partition, alphas, mu, depth, files}.

    Args:
        params (EncoderParams): Parâmetros LSALSA ou LISTA.
        directory (PathLike): Diretório de destino (criado se necessário).

    Returns:
        Path: Caminho do manifesto.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    if isinstance(params, LsalsaParams):
        files = {"W_e": "W_e.lsam", "S": "S.lsam"}
        write_matrix(directory / files["W_e"], params.W_e)
        write_matrix(directory / files["S"], params.S)
        kind, alphas, mu = "lsalsa", list(params.alphas), params.mu
    else:
        files = {"W_e": "W_e.lsam", "S_tilde": "S_tilde.lsam", "theta": "theta.lsam"}
        write_matrix(directory / files["W_e"], params.W_e)
        write_matrix(directory / files["S_tilde"], params.S_tilde)
        write_matrix(directory / files["theta"], params.theta)
        kind, alphas, mu = "lista", None, None
    manifest = {
        "kind": kind,
        "M": params.M,
        "N": params.N,
        "D": len(params.partition),
        "partition": list(params.partition),
        "alphas": alphas,
        "mu": mu,
        "depth": params.depth,
        "files": files,
    }
    return dump_json(directory / MANIFEST_NAME, manifest)


def load_params(directory: PathLike) -> EncoderParams:
    """
    Lê parâmetros gravados por save_params.

    Raises:
        FileNotFoundError: Se o manifesto ou uma matriz não existir.
        FormatError: Manifesto incompleto, tipo desconhecido ou LSAM inválido.
        ShapeMismatch: Matrizes incompatíveis com M, N do manifesto.
    """
    directory = Path(directory)
    manifest = load_json(directory / MANIFEST_NAME)
    try:
        kind = manifest["kind"]
        M, N, depth = int(manifest["M"]), int(manifest["N"]), int(manifest["depth"])
        partition = tuple(manifest["partition"])
        files = manifest["files"]
    except (KeyError, TypeError, ValueError) as e:
        raise FormatError(f"Manifesto de parâmetros incompleto em {directory}: {e}") from e
    if kind == "lsalsa":
        W_e = read_matrix(directory / files["W_e"])
        S = read_matrix(directory / files["S"])
        if W_e.shape != (N, M):
            raise ShapeMismatch(f"W_e com formato {W_e.shape}, manifesto declara {(N, M)}")
        return LsalsaParams(W_e, S, tuple(manifest["alphas"]), float(manifest["mu"]),
                            depth, partition)
    if kind == "lista":
        W_e = read_matrix(directory / files["W_e"])
        S_tilde = read_matrix(directory / files["S_tilde"])
        theta = read_matrix(directory / files["theta"]).reshape(-1)
        if W_e.shape != (N, M):
            raise ShapeMismatch(f"W_e com formato {W_e.shape}, manifesto declara {(N, M)}")
        return ListaParams(W_e, S_tilde, theta, depth, partition)
    raise FormatError(f"Tipo de parâmetros desconhecido: {kind!r}")
