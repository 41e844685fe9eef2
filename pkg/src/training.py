"""
Treinamento supervisionado dos encoders desenrolados (LSALSA e LISTA).

Este módulo implementa o aprendizado dos parâmetros dos encoders a partir
de pares (sinal, código ótimo):
    1. prediction_loss: perda quadrática (1/2P)·Σ‖x* − f_e(y)‖²
    2. lsalsa_backward / lista_backward: gradientes exatos por
       retropropagação em forma fechada sobre o grafo desenrolado
    3. train: SGD em mini-lotes com decaimento da taxa por época e parada
       pela variação relativa da perda
    4. grid_search: busca exaustiva de hiperparâmetros por validação

Convenção de lote: uma amostra por linha, de modo que a camada
x(t) = S·r(t) é avaliada como X_t = R_t·Sᵀ. Os gradientes em lote são a
média dos gradientes por amostra, reduzida por produto matricial em
ordem fixa (determinístico).
"""

import itertools
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator
from tqdm import tqdm

from core import DictionaryLike, SolverConfig, as_concat, mean_rmse
from errors import (
    DivergedLoss,
    EmptySource,
    MissingParameter,
    MissingTape,
    NonFiniteActivation,
    ShapeMismatch,
    ToolkitError,
)
from formats import PathLike, write_csv
from settings import progress_enabled
from solvers import Method, encode_batch
from unrolled import (
    EncoderParams,
    ListaParams,
    ListaTape,
    LsalsaParams,
    LsalsaTape,
    lista_forward_batch,
    lista_init,
    lsalsa_forward_batch,
    lsalsa_init,
)

logger = logging.getLogger(__name__)

SEARCH_EPOCHS = 10
"""int: Épocas permitidas para cada célula da busca de hiperparâmetros."""

FINAL_EPOCHS = 100
"""int: Épocas máximas do treinamento final."""

VALIDATION_FRACTION = 0.1
"""float: Fração reservada para validação por split_indices."""

HISTORY_SCHEMA = "history-v1"
LEADERBOARD_SCHEMA = "leaderboard-v1"


class TrainConfig(BaseModel):
    """
    Configuração do SGD.

    Attributes:
        learning_rate (float): Taxa de aprendizado inicial (0 congela os parâmetros).
        lr_decay (float): Fator multiplicativo aplicado à taxa a cada época, em (0, 1].
        batch_size (int): Tamanho do mini-lote.
        max_epochs (int): Número máximo de épocas.
        rel_cost_tol (float): Parada quando a variação relativa da perda
            entre épocas fica abaixo deste valor.
        seed (int): Seed do embaralhamento.
        learn_theta (bool): Para o LISTA, atualiza também os limiares θ.
    """

    model_config = ConfigDict(frozen=True)

    learning_rate: float = Field(default=1e-3, ge=0.0)
    lr_decay: float = Field(default=1.0, gt=0.0, le=1.0)
    batch_size: int = Field(default=100, ge=1)
    max_epochs: int = Field(default=FINAL_EPOCHS, ge=1)
    rel_cost_tol: float = Field(default=1e-6, ge=0.0)
    seed: int = Field(default=0, ge=0)
    learn_theta: bool = True


class GridSpec(BaseModel):
    """
    Listas de candidatos da busca de hiperparâmetros.

    Cada entrada de alphas é uma tupla com um α por componente.
    Eixos irrelevantes para um método (μ para ISTA/FISTA/LISTA, SGD para
    os solvers) são ignorados ao montar as células.
    """

    model_config = ConfigDict(frozen=True)

    alphas: List[Tuple[float, ...]] = Field(min_length=1)
    mu: List[float] = Field(default=[1.0], min_length=1)
    batch_size: List[int] = Field(default=[100], min_length=1)
    learning_rate: List[float] = Field(default=[1e-3], min_length=1)
    lr_decay: List[float] = Field(default=[1.0], min_length=1)
    epochs: int = Field(default=SEARCH_EPOCHS, ge=1)

    @field_validator("alphas")
    @classmethod
    def _alphas_nonnegative(cls, alphas: List[Tuple[float, ...]]) -> List[Tuple[float, ...]]:
        for candidate in alphas:
            if not candidate or any(a < 0 for a in candidate):
                raise ValueError("cada candidato de α deve ser não vazio e ≥ 0")
        return [tuple(float(a) for a in candidate) for candidate in alphas]


def _decades(values: Sequence[float], exponents: Sequence[int]) -> List[float]:
    return [float(f"{v}e{n}") for n in exponents for v in values]


def preset_grid(kind: str) -> GridSpec:
    """
    Grades de candidatos da busca exaustiva de referência.

    Args:
        kind (str): "single" (um dicionário) ou "mca" (dois dicionários).

    Returns:
        GridSpec: Grade completa; execuções locais costumam subamostrá-la.

    Raises:
        ValueError: Se kind não for reconhecido.
    """
    mantissas = (1.0, 2.5, 5.0, 7.5)
    if kind == "single":
        return GridSpec(
            alphas=[(a,) for a in _decades(mantissas, (-1, 0, 1))],
            mu=[0.1, 1.0, 5.0, 10.0],
            batch_size=[100, 500, 1000],
            learning_rate=[10.0 ** -k for k in range(7, 1, -1)],
            lr_decay=[0.8, 0.99, 1.0],
        )
    if kind == "mca":
        values = _decades(mantissas, (-2, -1, 0, 1))
        return GridSpec(
            alphas=list(itertools.product(values, values)),
            mu=[0.1, 1.0, 10.0],
            batch_size=[100, 500],
            learning_rate=[10.0 ** -k for k in range(9, 2, -1)],
        )
    raise ValueError(f"Grade desconhecida: {kind!r} (use 'single' ou 'mca')")


@dataclass(frozen=True)
class LsalsaGradients:
    W_e: np.ndarray
    S: np.ndarray


@dataclass(frozen=True)
class ListaGradients:
    W_e: np.ndarray
    S_tilde: np.ndarray
    theta: np.ndarray


Gradients = Union[LsalsaGradients, ListaGradients]


@dataclass(frozen=True)
class EpochRecord:
    """Uma linha do histórico de treinamento (época 0 = parâmetros iniciais)."""

    epoch: int
    lr: float
    train_loss: float
    val_rmse: Optional[float]


@dataclass
class TrainHistory:
    records: List[EpochRecord] = field(default_factory=list)
    converged: bool = False

    @property
    def losses(self) -> np.ndarray:
        return np.array([r.train_loss for r in self.records])

    def to_csv(self, path: PathLike) -> Path:
        """Grava o histórico com colunas epoch, lr, train_loss, val_rmse."""
        return write_csv(
            path,
            HISTORY_SCHEMA,
            ["epoch", "lr", "train_loss", "val_rmse"],
            ([r.epoch, r.lr, r.train_loss, r.val_rmse] for r in self.records),
        )


def _as_rows(values: np.ndarray, width: int, name: str) -> np.ndarray:
    batch = np.atleast_2d(np.asarray(values, dtype=np.float64))
    if batch.ndim != 2 or batch.shape[1] != width:
        raise ShapeMismatch(f"{name} com formato {batch.shape}, esperado (P, {width})")
    return batch


def forward_batch(params: EncoderParams, signals: np.ndarray, keep_tape: bool = False):
    """Forward em lote do encoder correspondente ao tipo dos parâmetros."""
    if isinstance(params, LsalsaParams):
        return lsalsa_forward_batch(params, signals, keep_tape)
    if isinstance(params, ListaParams):
        return lista_forward_batch(params, signals, keep_tape)
    raise MissingParameter(f"Parâmetros de encoder inválidos: {type(params).__name__}")


def prediction_loss(params: EncoderParams, signals: np.ndarray, targets: np.ndarray) -> float:
    """
    Perda de predição de códigos (1/2P)·Σ_p ‖x*,p − f_e(y^p)‖².

    Args:
        params (EncoderParams): Parâmetros LSALSA ou LISTA.
        signals (np.ndarray): Lote P×M (ou um sinal de comprimento M).
        targets (np.ndarray): Códigos ótimos P×N.

    Returns:
        float: Valor da perda.

    Raises:
        ShapeMismatch: Se os alvos não tiverem N colunas ou P diferir.

    Example:
        >>> p = lsalsa_init(Dictionary(np.eye(2)), [0.5], 1.0, 1)
        >>> prediction_loss(p, [1.0, 0.0], [1.25, 0.0])
        0.5
    """
    targets = _as_rows(targets, params.N, "targets")
    outputs, _ = forward_batch(params, signals)
    if outputs.shape != targets.shape:
        raise ShapeMismatch(f"{outputs.shape[0]} sinais para {targets.shape[0]} alvos")
    error = outputs - targets
    return float(0.5 * np.sum(error * error) / len(targets))


def _upstream(tape_output: np.ndarray, targets: np.ndarray, N: int) -> np.ndarray:
    targets = _as_rows(targets, N, "targets")
    if targets.shape != tape_output.shape:
        raise ShapeMismatch(f"{tape_output.shape[0]} saídas para {targets.shape[0]} alvos")
    return (tape_output - targets) / len(targets)


def _check_signals(tape_signals: np.ndarray, signals: Optional[np.ndarray]) -> None:
    if signals is None:
        return
    if np.atleast_2d(np.asarray(signals, dtype=np.float64)).shape != tape_signals.shape:
        raise ShapeMismatch("Os sinais não correspondem aos gravados no tape")


def lsalsa_backward(params: LsalsaParams, tape: Optional[LsalsaTape], signals: Optional[np.ndarray],
                    targets: np.ndarray) -> LsalsaGradients:
    """
    Gradientes exatos de prediction_loss em relação a W_e e S.

    A retropropagação percorre as camadas em ordem decrescente, mantendo
    os adjuntos de x(t) e d(t). Cada camada contribui para ∂S pelo
    x-update, e cada uso de W_e·y (x(0) e todos os r(t)) contribui para
    ∂W_e. A derivada local do soft thresholding é 1 onde |z| > τ e 0
    no restante (0 no ponto de quebra), inclusive no estágio de saída.

    Args:
        params (LsalsaParams): Parâmetros usados no forward.
        tape (LsalsaTape): Ativações gravadas com keep_tape=True.
        signals (Optional[np.ndarray]): Sinais do forward; conferidos contra o tape.
        targets (np.ndarray): Códigos alvo (P×N ou um vetor de comprimento N).

    Returns:
        LsalsaGradients: dW_e (N×M) e dS (N×N).

    Raises:
        MissingTape: Se o tape estiver ausente ou incompleto.
        ShapeMismatch: Se alvos ou sinais não corresponderem ao tape.
    """
    if tape is None or tape.output is None or tape.depth != params.depth:
        raise MissingTape("lsalsa_backward exige o tape de um forward com keep_tape=True")
    _check_signals(tape.signals, signals)
    tau, mu, S = params.thresholds, params.mu, params.S

    grad_out = _upstream(tape.output, targets, params.N)
    grad_x = grad_out * (np.abs(tape.x[-1]) > tau)
    grad_d = np.zeros_like(grad_x)
    grad_S = np.zeros_like(S)
    grad_B = np.zeros_like(grad_x)
    for t in range(params.depth, 0, -1):
        # d(t) = d(t−1) − u(t) + x(t)
        grad_x = grad_x + grad_d
        grad_u = -grad_d
        # x(t) = S·r(t)
        grad_r = grad_x @ S
        grad_S += grad_x.T @ tape.r[t]
        # r(t) = W_e·y + μ(u(t) − d(t−1))
        grad_B += grad_r
        grad_u = grad_u + mu * grad_r
        grad_d = grad_d - mu * grad_r
        # u(t) = soft(x(t−1) + d(t−1))
        grad_z = grad_u * (np.abs(tape.z[t]) > tau)
        grad_x = grad_z
        grad_d = grad_d + grad_z
    grad_B += grad_x
    return LsalsaGradients(W_e=grad_B.T @ tape.signals, S=grad_S)


def lista_backward(params: ListaParams, tape: Optional[ListaTape], signals: Optional[np.ndarray],
                   targets: np.ndarray) -> ListaGradients:
    """
    Gradientes exatos de prediction_loss em relação a W_e, S̃ e θ.

    ∂soft(z; θ)/∂θ = −sign(z) onde a unidade está ativa e 0 caso contrário.

    Raises:
        MissingTape: Se o tape estiver ausente ou incompleto.
        ShapeMismatch: Se alvos ou sinais não corresponderem ao tape.
    """
    if tape is None or tape.depth != params.depth:
        raise MissingTape("lista_backward exige o tape de um forward com keep_tape=True")
    _check_signals(tape.signals, signals)
    theta, S_tilde = params.theta, params.S_tilde

    grad_u = _upstream(tape.u[-1], targets, params.N)
    grad_S = np.zeros_like(S_tilde)
    grad_theta = np.zeros_like(theta)
    grad_B = np.zeros_like(grad_u)
    for t in range(params.depth, 0, -1):
        z = tape.z[t]
        active = np.abs(z) > theta
        grad_z = grad_u * active
        grad_theta -= np.sum(np.sign(z) * grad_z, axis=0)
        grad_B += grad_z
        grad_S += grad_z.T @ tape.u[t - 1]
        grad_u = grad_z @ S_tilde
    return ListaGradients(W_e=grad_B.T @ tape.signals, S_tilde=grad_S, theta=grad_theta)


def batch_gradients(params: EncoderParams, signals: np.ndarray,
                    targets: np.ndarray) -> Tuple[float, Gradients]:
    """
    Forward com tape seguido do backward: (perda, gradiente médio) do lote.

    Raises:
        ShapeMismatch: Se sinais e alvos forem incompatíveis.
    """
    outputs, tape = forward_batch(params, signals, keep_tape=True)
    targets = _as_rows(targets, params.N, "targets")
    if outputs.shape != targets.shape:
        raise ShapeMismatch(f"{outputs.shape[0]} sinais para {targets.shape[0]} alvos")
    error = outputs - targets
    loss = float(0.5 * np.sum(error * error) / len(targets))
    if isinstance(params, LsalsaParams):
        return loss, lsalsa_backward(params, tape, None, targets)
    return loss, lista_backward(params, tape, None, targets)


def sgd_step(params: EncoderParams, gradients: Gradients, lr: float,
             learn_theta: bool = True) -> EncoderParams:
    """
    Um passo de SGD puro: θ ← θ − lr·∇. Limiares do LISTA são projetados em θ ≥ 0.
    """
    if isinstance(params, LsalsaParams):
        return params.with_matrices(params.W_e - lr * gradients.W_e, params.S - lr * gradients.S)
    theta = params.theta
    if learn_theta:
        theta = np.maximum(theta - lr * gradients.theta, 0.0)
    return params.with_matrices(
        params.W_e - lr * gradients.W_e, params.S_tilde - lr * gradients.S_tilde, theta,
    )


def _validation_rmse(params: EncoderParams,
                     validation: Optional[Tuple[np.ndarray, np.ndarray]]) -> Optional[float]:
    if validation is None:
        return None
    outputs, _ = forward_batch(params, validation[0])
    return mean_rmse(outputs, validation[1])


def train(params: EncoderParams, signals: np.ndarray, targets: np.ndarray, config: TrainConfig,
          validation: Optional[Tuple[np.ndarray, np.ndarray]] = None
          ) -> Tuple[EncoderParams, TrainHistory]:
    """
    Treina um encoder com SGD em mini-lotes.

    A cada época os índices são embaralhados por um gerador derivado de
    config.seed; cada mini-lote aplica params ← params − lr·(gradiente
    médio) e, ao fim da época, lr ← lr·lr_decay. O histórico registra a
    perda de treinamento sobre o conjunto completo (época 0 = parâmetros
    iniciais) e, se houver, o RMSE médio de validação.

    Args:
        params (EncoderParams): Parâmetros iniciais (não são modificados).
        signals (np.ndarray): Sinais de treino P×M.
        targets (np.ndarray): Códigos ótimos P×N.
        config (TrainConfig): Hiperparâmetros do SGD.
        validation (Optional[Tuple[np.ndarray, np.ndarray]]): (sinais, códigos)
            de validação para o val_rmse do histórico.

    Returns:
        Tuple[EncoderParams, TrainHistory]: Parâmetros treinados e histórico.

    Raises:
        EmptySource: Se o conjunto de treino estiver vazio.
        ShapeMismatch: Se sinais e alvos forem incompatíveis.
        DivergedLoss: Se a perda ou os parâmetros deixarem de ser finitos.

    Example:
        >>> trained, history = train(lsalsa_init(A, [0.1], 1.0, 3), Y, X, TrainConfig())
        >>> history.losses[-1] <= history.losses[0]
        True
    """
    signals = _as_rows(signals, params.M, "signals")
    targets = _as_rows(targets, params.N, "targets")
    if not len(signals):
        raise EmptySource("O conjunto de treino está vazio")
    if len(signals) != len(targets):
        raise ShapeMismatch(f"{len(signals)} sinais para {len(targets)} alvos")

    rng = np.random.default_rng(config.seed)
    history = TrainHistory()
    lr = config.learning_rate
    loss = _finite_loss(params, signals, targets, epoch=0)
    history.records.append(EpochRecord(0, lr, loss, _validation_rmse(params, validation)))

    epochs = tqdm(range(1, config.max_epochs + 1), desc="Treinamento", unit="época",
                  disable=not progress_enabled())
    for epoch in epochs:
        order = rng.permutation(len(signals))
        try:
            for start in range(0, len(order), config.batch_size):
                batch = order[start:start + config.batch_size]
                _, gradients = batch_gradients(params, signals[batch], targets[batch])
                params = sgd_step(params, gradients, lr, config.learn_theta)
        except NonFiniteActivation as e:
            raise DivergedLoss(f"Treinamento divergiu na época {epoch} (lr={lr:g}): {e}") from e

        previous, loss = loss, _finite_loss(params, signals, targets, epoch)
        history.records.append(EpochRecord(epoch, lr, loss, _validation_rmse(params, validation)))
        logger.info("Época %d: perda=%.6g lr=%.3g", epoch, loss, lr)
        lr *= config.lr_decay
        if abs(previous - loss) <= config.rel_cost_tol * max(abs(previous), 1e-300):
            history.converged = True
            logger.info("Variação relativa da perda abaixo de %g; parada na época %d",
                        config.rel_cost_tol, epoch)
            break
    return params, history


def _finite_loss(params: EncoderParams, signals: np.ndarray, targets: np.ndarray,
                 epoch: int) -> float:
    try:
        loss = prediction_loss(params, signals, targets)
    except NonFiniteActivation as e:
        raise DivergedLoss(f"Perda não finita na época {epoch}: {e}") from e
    if not np.isfinite(loss):
        raise DivergedLoss(f"Perda não finita na época {epoch}; reduza a taxa de aprendizado")
    return loss


def split_indices(count: int, seed: int,
                  validation_fraction: float = VALIDATION_FRACTION
                  ) -> Tuple[np.ndarray, np.ndarray]:
    """
    Divide range(count) em índices de treino e validação (90/10 por padrão).

    Returns:
        Tuple[np.ndarray, np.ndarray]: (treino, validação), cada um ordenado.
    """
    if not 0.0 <= validation_fraction < 1.0:
        raise ValueError("validation_fraction deve estar em [0, 1)")
    order = np.random.default_rng(seed).permutation(count)
    n_val = int(round(count * validation_fraction))
    return np.sort(order[n_val:]), np.sort(order[:n_val])


@dataclass(frozen=True)
class GridCell:
    """Resultado de uma célula da busca (val_rmse None quando falhou)."""

    index: int
    alphas: Tuple[float, ...]
    mu: Optional[float]
    batch_size: Optional[int]
    learning_rate: Optional[float]
    lr_decay: Optional[float]
    seed: int
    val_rmse: Optional[float]
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.val_rmse is not None

    def sort_key(self) -> Tuple:
        return (self.val_rmse, self.alphas, self.learning_rate or 0.0, self.index)


@dataclass
class GridResult:
    """Leaderboard completo e melhor célula (None se todas falharam)."""

    method: Method
    depth: int
    cells: List[GridCell] = field(default_factory=list)

    @property
    def valid(self) -> List[GridCell]:
        return sorted((c for c in self.cells if c.ok), key=GridCell.sort_key)

    @property
    def best(self) -> Optional[GridCell]:
        valid = self.valid
        return valid[0] if valid else None

    @property
    def failures(self) -> List[GridCell]:
        return [c for c in self.cells if not c.ok]

    def to_csv(self, path: PathLike) -> Path:
        """Grava uma linha por célula, melhores primeiro e falhas ao final."""
        header = ["rank", "cell", "method", "T", "alphas", "mu", "batch_size",
                  "learning_rate", "lr_decay", "seed", "val_rmse", "status", "error"]
        ordered = self.valid + self.failures
        rows = [
            [rank if cell.ok else None, cell.index, self.method.value, self.depth,
             list(cell.alphas), cell.mu, cell.batch_size, cell.learning_rate, cell.lr_decay,
             cell.seed, cell.val_rmse, "ok" if cell.ok else "failed", cell.error]
            for rank, cell in enumerate(ordered, start=1)
        ]
        return write_csv(path, LEADERBOARD_SCHEMA, header, rows)


def _grid_axes(grid: GridSpec, method: Method) -> List[Tuple]:
    uses_mu = method in (Method.SALSA, Method.LSALSA)
    mus: Sequence[Optional[float]] = grid.mu if uses_mu else [None]
    if not method.learned:
        return [(a, m, None, None, None) for a, m in itertools.product(grid.alphas, mus)]
    return list(itertools.product(grid.alphas, mus, grid.batch_size, grid.learning_rate,
                                  grid.lr_decay))


def grid_search(train_set: Tuple[np.ndarray, np.ndarray], val_set: Tuple[np.ndarray, np.ndarray],
                grid: GridSpec, method: Union[str, Method], dictionary: DictionaryLike,
                depth: int, seed: int = 0) -> GridResult:
    """
    Busca exaustiva de hiperparâmetros para um método e um T.

    Encoders aprendidos são inicializados a partir do dicionário e
    treinados por grid.epochs épocas; solvers são avaliados diretamente
    com exatamente T iterações. As células são ordenadas pelo RMSE médio
    de validação contra os códigos alvo; empates favorecem α menor e
    depois taxa de aprendizado menor. Cada célula usa a seed seed ⊕ índice.

    Args:
        train_set (Tuple[np.ndarray, np.ndarray]): (sinais, códigos) de treino.
        val_set (Tuple[np.ndarray, np.ndarray]): (sinais, códigos) de validação.
        grid (GridSpec): Candidatos.
        method (str | Method): Um dos cinco métodos.
        dictionary (DictionaryLike): Dicionário (concatenado) do problema.
        depth (int): Número de iterações/camadas T.
        seed (int): Seed base.

    Returns:
        GridResult: Leaderboard; best é None quando todas as células falham.

    Note:
        Erros de uma célula (divergência, fatoração) são registrados no
        leaderboard em vez de abortar a busca.
    """
    method = Method.parse(method)
    concat = as_concat(dictionary)
    result = GridResult(method=method, depth=depth)
    axes = _grid_axes(grid, method)
    logger.info("Busca %s T=%d: %d células", method.value, depth, len(axes))
    for index, (alphas, mu, batch_size, lr, decay) in enumerate(
            tqdm(axes, desc=f"Grade {method.value}", disable=not progress_enabled())):
        cell_seed = seed ^ index
        try:
            val_rmse = _evaluate_cell(method, concat, depth, train_set, val_set, alphas, mu,
                                      batch_size, lr, decay, grid.epochs, cell_seed)
            error = None
        except (ToolkitError, ArithmeticError, ValueError) as e:
            val_rmse, error = None, f"{type(e).__name__}: {e}"
            logger.warning("Célula %d falhou: %s", index, error)
        if val_rmse is not None and not np.isfinite(val_rmse):
            val_rmse, error = None, "DivergedLoss: RMSE de validação não finito"
        result.cells.append(GridCell(index, tuple(alphas), mu, batch_size, lr, decay,
                                     cell_seed, val_rmse, error))
    if result.best is None:
        logger.warning("Nenhuma célula válida em %d para %s T=%d", len(axes), method.value, depth)
    return result


def _evaluate_cell(method: Method, concat, depth: int, train_set, val_set,
                   alphas: Tuple[float, ...], mu: Optional[float], batch_size: Optional[int],
                   lr: Optional[float], decay: Optional[float], epochs: int, seed: int) -> float:
    val_signals, val_targets = val_set
    if not method.learned:
        config = SolverConfig(alphas=list(alphas), mu=mu or 1.0, max_iters=depth, stop_tol=0.0)
        estimates = encode_batch(method, val_signals, config, concat)
        return mean_rmse(estimates, val_targets)
    if method is Method.LSALSA:
        params: EncoderParams = lsalsa_init(concat, alphas, mu, depth)
    else:
        params = lista_init(concat, alphas, depth)
    config = TrainConfig(learning_rate=lr, lr_decay=decay, batch_size=batch_size,
                         max_epochs=epochs, seed=seed)
    trained, _ = train(params, train_set[0], train_set[1], config)
    outputs, _ = forward_batch(trained, val_signals)
    return mean_rmse(outputs, val_targets)

