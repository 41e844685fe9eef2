"""
Solvers iterativos de referência: ISTA, FISTA e SALSA.

Este módulo implementa os métodos clássicos de inferência de códigos
esparsos usados como baseline e como geradores de códigos ótimos:
    1. ISTA: gradiente proximal com passo 1/L a partir de x₀ = 0
    2. FISTA: ISTA com momento de Beck-Teboulle (sem reinício)
    3. SALSA: ADMM com divisão x = u, um ou vários dicionários
    4. dispatch_encode: superfície única para os cinco métodos do benchmark
    5. encode_batch: versão vetorizada sobre lotes (uma amostra por linha),
       com o mesmo critério de parada aplicado a cada linha

Cada solver retorna um SolverTrace com um registro por iteração
(custo, RMSE contra uma referência opcional, esparsidade e tempo
acumulado). Com stop_tol = 0 o solver executa exatamente max_iters
iterações, o que corresponde ao "número fixo de estágios" do benchmark.
"""

import logging
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Iterator, List, Optional, Tuple, Union

import numpy as np

from core import (
    ComponentCode,
    ConcatDictionary,
    DictionaryLike,
    Signal,
    SolverConfig,
    as_concat,
    as_data,
    as_values,
    block_thresholds,
    build_splitting_operator,
    soft_threshold,
    sparsity,
)
from errors import MissingParameter, NonFiniteIterate, ShapeMismatch, UnknownMethod
from formats import PathLike, write_csv

logger = logging.getLogger(__name__)

POWER_ITERATIONS = 50
"""int: Iterações máximas da estimativa de λmax(AᵀA)."""

POWER_TOLERANCE = 1e-6
"""float: Tolerância relativa da iteração de potência."""

LIPSCHITZ_INFLATION = 1.01
"""float: Margem aplicada à estimativa de L para garantir L ≥ λmax."""

TRACE_SCHEMA = "trace-v1"


class Method(str, Enum):
    """Métodos de codificação comparados pelo benchmark."""

    ISTA = "ISTA"
    FISTA = "FISTA"
    SALSA = "SALSA"
    LISTA = "LISTA"
    LSALSA = "LSALSA"

    @classmethod
    def parse(cls, name: Union[str, "Method"]) -> "Method":
        if isinstance(name, Method):
            return name
        try:
            return cls(str(name).upper())
        except ValueError as e:
            raise UnknownMethod(f"Método desconhecido: {name!r}") from e

    @property
    def learned(self) -> bool:
        return self in (Method.LISTA, Method.LSALSA)


@dataclass(frozen=True)
class TraceRecord:
    """Medidas de uma iteração de um solver."""

    iteration: int
    cost: float
    rmse: Optional[float]
    elapsed_s: float
    sparsity: float


@dataclass
class SolverTrace:
    """
    Histórico de execução de um solver.

    Attributes:
        records (List[TraceRecord]): Um registro por iteração executada.
        code (ComponentCode): Código final (saída do solver).
        iterations_run (int): Iterações executadas (≤ max_iters).
        converged (bool): True se o critério de parada foi atingido antes do orçamento.
    """

    records: List[TraceRecord] = field(default_factory=list)
    code: Optional[ComponentCode] = None
    iterations_run: int = 0
    converged: bool = False

    @property
    def costs(self) -> np.ndarray:
        return np.array([r.cost for r in self.records])

    def to_csv(self, path: PathLike) -> Path:
        """Grava o histórico com colunas iter, cost, rmse, sparsity, elapsed_s."""
        return write_csv(
            path,
            TRACE_SCHEMA,
            ["iter", "cost", "rmse", "sparsity", "elapsed_s"],
            ([r.iteration, r.cost, r.rmse, r.sparsity, r.elapsed_s] for r in self.records),
        )


@dataclass(frozen=True)
class SalsaState:
    """Variáveis (u, x, d) ao fim de uma iteração do SALSA."""

    iteration: int
    u: np.ndarray
    x: np.ndarray
    d: np.ndarray


def estimate_lipschitz(dictionary: DictionaryLike, n_iter: int = POWER_ITERATIONS,
                       tol: float = POWER_TOLERANCE, seed: int = 0) -> float:
    """
    Estima L ≥ λmax(AᵀA) por iteração de potência.

    A estimativa converge por baixo, por isso é inflada por 1.01.

    Args:
        dictionary (DictionaryLike): Dicionário A.
        n_iter (int): Iterações máximas (50).
        tol (float): Tolerância relativa de parada (1e-6).
        seed (int): Seed do vetor inicial, para determinismo.

    Returns:
        float: Constante de Lipschitz do gradiente de ½‖y − Ax‖².
    """
    gram = as_concat(dictionary).gram
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(gram.shape[0])
    v /= np.linalg.norm(v)
    estimate = 0.0
    for _ in range(n_iter):
        w = gram @ v
        norm = np.linalg.norm(w)
        if norm == 0.0:
            break
        v = w / norm
        previous, estimate = estimate, float(v @ (gram @ v))
        if abs(estimate - previous) < tol * max(1.0, previous):
            break
    return max(estimate, 1e-12) * LIPSCHITZ_INFLATION


def _relative_change(new: np.ndarray, old: np.ndarray) -> float:
    return float(np.linalg.norm(new - old) / max(np.linalg.norm(new), 1e-12))


def _check_finite(x: np.ndarray, method: str, iteration: int) -> None:
    if not np.all(np.isfinite(x)):
        raise NonFiniteIterate(
            f"{method} divergiu na iteração {iteration}; verifique L ou μ"
        )


def _lipschitz_for(concat: ConcatDictionary, config: SolverConfig) -> float:
    return config.lipschitz if config.lipschitz is not None else estimate_lipschitz(concat)


def proximal_gradient_steps(concat: ConcatDictionary, y: np.ndarray, config: SolverConfig,
                            accelerate: bool) -> Iterator[Tuple[int, np.ndarray, bool]]:
    """
    Gera os iterados de ISTA (accelerate=False) ou FISTA (accelerate=True).

    Yields:
        Tuple[int, np.ndarray, bool]: (iteração, x, convergiu).
    """
    L = _lipschitz_for(concat, config)
    gram, aty = concat.gram, concat.matrix.T @ y
    thresholds = block_thresholds(concat.partition, config.alphas, L)
    x = np.zeros(concat.N)
    z, t = x, 1.0
    method = "FISTA" if accelerate else "ISTA"
    for k in range(1, config.max_iters + 1):
        x_new = soft_threshold(z - (gram @ z - aty) / L, thresholds)
        _check_finite(x_new, method, k)
        if accelerate:
            t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
            z = x_new + ((t - 1.0) / t_new) * (x_new - x)
            t = t_new
        else:
            z = x_new
        converged = _relative_change(x_new, x) < config.stop_tol
        x = x_new
        yield k, x, converged
        if converged:
            return


def salsa_steps(concat: ConcatDictionary, y: np.ndarray, config: SolverConfig,
                splitting: Optional[np.ndarray] = None) -> Iterator[SalsaState]:
    """
    Gera os estados do SALSA (Algoritmos de um e de dois dicionários).

    Inicialização x = Aᵀy, d = 0; a cada iteração:
        u ← prox_weighted_l1(x + d, α, μ)
        x ← S(Aᵀy + μ(u − d))
        d ← d − u + x

    Raises:
        ShapeMismatch: Se splitting não for N×N.
        NonFiniteIterate: Se algum iterado deixar de ser finito.
    """
    mu = config.mu
    if splitting is None:
        splitting = build_splitting_operator(concat, mu)
    elif splitting.shape != (concat.N, concat.N):
        raise ShapeMismatch(f"S com formato {splitting.shape}, esperado {(concat.N, concat.N)}")
    thresholds = block_thresholds(concat.partition, config.alphas, mu)
    aty = concat.matrix.T @ y
    x = aty.copy()
    d = np.zeros(concat.N)
    for k in range(1, config.max_iters + 1):
        u = soft_threshold(x + d, thresholds)
        x = splitting @ (aty + mu * (u - d))
        d = d - u + x
        _check_finite(x, "SALSA", k)
        yield SalsaState(k, u, x, d)


def _run_traced(steps: Iterator, concat: ConcatDictionary, y: np.ndarray,
                alphas: List[float], emit: Callable[[np.ndarray], np.ndarray],
                reference: Optional[np.ndarray],
                converged_after: Callable[[object, np.ndarray], bool]) -> SolverTrace:
    weights = block_thresholds(concat.partition, alphas, 1.0)
    trace = SolverTrace()
    start = time.perf_counter()
    previous = None
    for step in steps:
        current = emit(step)
        residual = y - concat.matrix @ current
        trace.records.append(TraceRecord(
            iteration=len(trace.records) + 1,
            cost=float(0.5 * residual @ residual + weights @ np.abs(current)),
            rmse=None if reference is None else float(np.sqrt(np.mean((current - reference) ** 2))),
            elapsed_s=time.perf_counter() - start,
            sparsity=sparsity(current),
        ))
        previous = current
        if converged_after(step, current):
            trace.converged = True
            break
    trace.iterations_run = len(trace.records)
    trace.code = ComponentCode(previous, concat.partition)
    return trace


def ista(signal: Union[Signal, np.ndarray], dictionary: DictionaryLike, config: SolverConfig,
         reference: Optional[Union[ComponentCode, np.ndarray]] = None) -> SolverTrace:
    """
    ISTA: x ← soft(x − (1/L)Aᵀ(Ax − y); α/L) a partir de x₀ = 0.

    Args:
        signal (Signal | np.ndarray): Sinal y.
        dictionary (DictionaryLike): Dicionário (concatenado) A.
        config (SolverConfig): α_i, T, tolerância e L (estimada se ausente).
        reference (Optional): Código de referência para o RMSE por iteração.

    Returns:
        SolverTrace: Histórico e código final.

    Raises:
        NonFiniteIterate: Se o método divergir (tipicamente L pequena demais).

    Example:
        >>> cfg = SolverConfig(alphas=[0.5], lipschitz=1.0, max_iters=1)
        >>> ista([1.0, 0.0], Dictionary(np.eye(2)), cfg).code.values
        array([0.5, 0. ])
    """
    concat = as_concat(dictionary)
    y = as_data(signal)
    return _run_traced(
        proximal_gradient_steps(concat, y, config, accelerate=False), concat, y,
        config.alphas, lambda step: step[1],
        None if reference is None else as_values(reference),
        lambda step, _: step[2],
    )


def fista(signal: Union[Signal, np.ndarray], dictionary: DictionaryLike, config: SolverConfig,
          reference: Optional[Union[ComponentCode, np.ndarray]] = None) -> SolverTrace:
    """
    FISTA: passo ISTA no ponto extrapolado z_k com momento de Beck-Teboulle.

    t₁ = 1, t_{k+1} = (1 + √(1 + 4t_k²))/2 e
    z_{k+1} = x_{k+1} + ((t_k − 1)/t_{k+1})(x_{k+1} − x_k). Sem reinício.
    A primeira iteração coincide com a do ISTA.
    """
    concat = as_concat(dictionary)
    y = as_data(signal)
    return _run_traced(
        proximal_gradient_steps(concat, y, config, accelerate=True), concat, y,
        config.alphas, lambda step: step[1],
        None if reference is None else as_values(reference),
        lambda step, _: step[2],
    )


def salsa(signal: Union[Signal, np.ndarray], dictionary: DictionaryLike, config: SolverConfig,
          splitting: Optional[np.ndarray] = None, emit_thresholded: bool = True,
          reference: Optional[Union[ComponentCode, np.ndarray]] = None) -> SolverTrace:
    """
    SALSA truncado em max_iters ou até a variação relativa de x ficar abaixo de stop_tol.

    Args:
        signal (Signal | np.ndarray): Sinal y (misturado, no caso MCA).
        dictionary (DictionaryLike): Dicionário A ou [A₁, …, A_D].
        config (SolverConfig): α_i, μ, T e tolerância.
        splitting (Optional[np.ndarray]): S = (μI + AᵀA)⁻¹ pré-calculada
            para este μ; calculada por Cholesky quando ausente.
        emit_thresholded (bool): Aplica o estágio de saída soft(x; α_i/μ)
            por bloco, como o LSALSA, para comparações com o mesmo T.
        reference (Optional): Código de referência para o RMSE por iteração.

    Returns:
        SolverTrace: Histórico e código final.

    Raises:
        FactorizationFailure: Propagada da construção de S.
        NonFiniteIterate: Se algum iterado deixar de ser finito.
    """
    concat = as_concat(dictionary)
    y = as_data(signal)
    thresholds = block_thresholds(concat.partition, config.alphas, config.mu)
    if emit_thresholded:
        def emit(state: SalsaState) -> np.ndarray:
            return soft_threshold(state.x, thresholds)
    else:
        def emit(state: SalsaState) -> np.ndarray:
            return state.x
    last_x = {"x": None}

    def stop(state: SalsaState, _: np.ndarray) -> bool:
        old, last_x["x"] = last_x["x"], state.x
        if old is None:
            old = concat.matrix.T @ y
        return _relative_change(state.x, old) < config.stop_tol

    return _run_traced(
        salsa_steps(concat, y, config, splitting), concat, y, config.alphas, emit,
        None if reference is None else as_values(reference), stop,
    )


def _final(steps: Iterator) -> object:
    last = None
    for last in steps:
        if isinstance(last, tuple) and last[2]:
            break
    return last


def _salsa_code(concat: ConcatDictionary, y: np.ndarray, config: SolverConfig,
                splitting: Optional[np.ndarray], emit_thresholded: bool) -> np.ndarray:
    x_prev = concat.matrix.T @ y
    x = x_prev
    for state in salsa_steps(concat, y, config, splitting):
        x = state.x
        if _relative_change(x, x_prev) < config.stop_tol:
            break
        x_prev = x
    if emit_thresholded:
        return soft_threshold(x, block_thresholds(concat.partition, config.alphas, config.mu))
    return x


def dispatch_encode(method: Union[str, Method], signal: Union[Signal, np.ndarray], model: object,
                    dictionary: Optional[DictionaryLike] = None,
                    splitting: Optional[np.ndarray] = None,
                    emit_thresholded: bool = True) -> ComponentCode:
    """
    Codifica um sinal com qualquer um dos cinco métodos, no seu T configurado.

    Args:
        method (str | Method): ISTA, FISTA, SALSA, LISTA ou LSALSA.
        signal (Signal | np.ndarray): Sinal y.
        model (object): SolverConfig para os solvers; ListaParams ou
            LsalsaParams para os encoders aprendidos.
        dictionary (Optional[DictionaryLike]): Obrigatório para os solvers.
            Em problemas MCA, ISTA/FISTA recebem o dicionário concatenado.
        splitting (Optional[np.ndarray]): S pré-calculada para o SALSA.
        emit_thresholded (bool): Estágio de saída do SALSA truncado.

    Returns:
        ComponentCode: Estimativa do código.

    Raises:
        UnknownMethod: Nome de método inválido.
        MissingParameter: Modelo de tipo errado ou dicionário ausente.
    """
    # unrolled importa este módulo
    from unrolled import ListaParams, LsalsaParams, lista_forward, lsalsa_forward

    method = Method.parse(method)
    y = as_data(signal)
    if method is Method.LSALSA:
        if not isinstance(model, LsalsaParams):
            raise MissingParameter("LSALSA exige LsalsaParams")
        return lsalsa_forward(model, y)[0]
    if method is Method.LISTA:
        if not isinstance(model, ListaParams):
            raise MissingParameter("LISTA exige ListaParams")
        return lista_forward(model, y)[0]
    if not isinstance(model, SolverConfig):
        raise MissingParameter(f"{method.value} exige SolverConfig")
    if dictionary is None:
        raise MissingParameter(f"{method.value} exige o dicionário")
    concat = as_concat(dictionary)
    if method is Method.SALSA:
        values = _salsa_code(concat, y, model, splitting, emit_thresholded)
    else:
        steps = proximal_gradient_steps(concat, y, model, accelerate=method is Method.FISTA)
        values = _final(steps)[1]
    return ComponentCode(values, concat.partition)


def prepare_config(method: Union[str, Method], config: SolverConfig,
                   dictionary: DictionaryLike) -> SolverConfig:
    """Fixa L em uma cópia da configuração para ISTA/FISTA (custo fora do tempo medido)."""
    method = Method.parse(method)
    if method in (Method.ISTA, Method.FISTA) and config.lipschitz is None:
        return config.model_copy(update={"lipschitz": estimate_lipschitz(dictionary)})
    return config


def _row_change(new: np.ndarray, old: np.ndarray) -> np.ndarray:
    return np.linalg.norm(new - old, axis=1) / np.maximum(np.linalg.norm(new, axis=1), 1e-12)


def proximal_gradient_batch(concat: ConcatDictionary, Y: np.ndarray, config: SolverConfig,
                            accelerate: bool) -> np.ndarray:
    """
    ISTA/FISTA sobre um lote (uma amostra por linha).

    Cada linha segue exatamente a mesma sequência de iterados da versão
    por amostra: uma linha que atinge stop_tol é congelada e deixa de ser
    atualizada.
    """
    L = _lipschitz_for(concat, config)
    gram, AtY = concat.gram, Y @ concat.matrix
    thresholds = block_thresholds(concat.partition, config.alphas, L)
    X = np.zeros((len(Y), concat.N))
    Z, t = X, 1.0
    active = np.ones(len(Y), dtype=bool)
    method = "FISTA" if accelerate else "ISTA"
    for k in range(1, config.max_iters + 1):
        X_new = soft_threshold(Z - (Z @ gram - AtY) / L, thresholds)
        X_new[~active] = X[~active]
        _check_finite(X_new, method, k)
        if accelerate:
            t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
            Z = X_new + ((t - 1.0) / t_new) * (X_new - X)
            t = t_new
        else:
            Z = X_new
        active &= ~(_row_change(X_new, X) < config.stop_tol)
        X = X_new
        if not active.any():
            break
    return X


def salsa_batch(concat: ConcatDictionary, Y: np.ndarray, config: SolverConfig,
                splitting: Optional[np.ndarray] = None,
                emit_thresholded: bool = True) -> np.ndarray:
    """SALSA sobre um lote, com as mesmas regras de parada por linha do salsa()."""
    mu = config.mu
    if splitting is None:
        splitting = build_splitting_operator(concat, mu)
    elif splitting.shape != (concat.N, concat.N):
        raise ShapeMismatch(f"S com formato {splitting.shape}, esperado {(concat.N, concat.N)}")
    thresholds = block_thresholds(concat.partition, config.alphas, mu)
    AtY = Y @ concat.matrix
    X, D = AtY.copy(), np.zeros_like(AtY)
    active = np.ones(len(Y), dtype=bool)
    for k in range(1, config.max_iters + 1):
        U = soft_threshold(X[active] + D[active], thresholds)
        X_new = (AtY[active] + mu * (U - D[active])) @ splitting.T
        _check_finite(X_new, "SALSA", k)
        D[active] = D[active] - U + X_new
        done = _row_change(X_new, X[active]) < config.stop_tol
        X[active] = X_new
        active[np.flatnonzero(active)[done]] = False
        if not active.any():
            break
    return soft_threshold(X, thresholds) if emit_thresholded else X


def encode_batch(method: Union[str, Method], signals: np.ndarray, model: object,
                 dictionary: Optional[DictionaryLike] = None,
                 splitting: Optional[np.ndarray] = None,
                 emit_thresholded: bool = True) -> np.ndarray:
    """
    Codifica um lote (uma amostra por linha) e devolve uma matriz P×N.

    Equivalente a aplicar dispatch_encode a cada linha, porém vetorizado:
    os encoders aprendidos e os solvers processam o lote inteiro, com S
    e L calculadas uma única vez.

    Raises:
        UnknownMethod: Nome de método inválido.
        MissingParameter: Modelo de tipo errado ou dicionário ausente.
        ShapeMismatch: Sinais com dimensão diferente de M.
    """
    from unrolled import ListaParams, LsalsaParams, lista_forward_batch, lsalsa_forward_batch

    method = Method.parse(method)
    signals = np.asarray(signals, dtype=np.float64)
    if method is Method.LSALSA:
        if not isinstance(model, LsalsaParams):
            raise MissingParameter("LSALSA exige LsalsaParams")
        return lsalsa_forward_batch(model, signals)[0]
    if method is Method.LISTA:
        if not isinstance(model, ListaParams):
            raise MissingParameter("LISTA exige ListaParams")
        return lista_forward_batch(model, signals)[0]
    if not isinstance(model, SolverConfig):
        raise MissingParameter(f"{method.value} exige SolverConfig")
    if dictionary is None:
        raise MissingParameter(f"{method.value} exige o dicionário")
    concat = as_concat(dictionary)
    if signals.size and (signals.ndim > 2 or signals.shape[-1] != concat.M):
        raise ShapeMismatch(f"Sinais com formato {signals.shape}, esperado (P, {concat.M})")
    Y = signals.reshape(-1, concat.M) if signals.size else np.zeros((0, concat.M))
    if not len(Y):
        return np.zeros((0, concat.N))
    if method is Method.SALSA:
        return salsa_batch(concat, Y, model, splitting, emit_thresholded)
    return proximal_gradient_batch(concat, Y, model, accelerate=method is Method.FISTA)
