"""
Benchmark dos métodos de codificação e probes de classificação.

Este módulo mede quão bem cada encoder aproxima os códigos ótimos com
um número fixo de estágios T:
    1. run_benchmark: RMSE médio, esparsidade e tempo por amostra para
       cada par (método, T), com o custo de preparação medido à parte
    2. gaussian_projection: projeção aleatória para reduzir a dimensão
       dos códigos antes do classificador
    3. train_probe / probe_error: regressão logística multinomial por SGD
       treinada nos códigos ótimos e avaliada nas estimativas
    4. export_point_cloud: pares (esparsidade, RMSE) por amostra em CSV
    5. component_rmse / component_features: leituras por componente em MCA
"""

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from threadpoolctl import threadpool_limits
from tqdm import tqdm

from core import (
    DictionaryLike,
    SolverConfig,
    as_concat,
    build_splitting_operator,
    per_sample_rmse,
    per_sample_sparsity,
)
from data import reconstruct
from errors import DivergedLoss, MissingModel, NonFiniteActivation, ShapeMismatch
from formats import PathLike, write_csv
from settings import progress_enabled
from solvers import Method, encode_batch, prepare_config
from unrolled import ListaParams, LsalsaParams

logger = logging.getLogger(__name__)

BENCH_SCHEMA = "bench-v1"
POINT_CLOUD_SCHEMA = "pointcloud-v1"

ModelKey = Union[Method, Tuple[Method, int]]


@dataclass
class BenchmarkRecord:
    """
    Resultado de um par (método, T).

    Attributes:
        method (Method): Método avaliado.
        T (int): Número de iterações/camadas.
        rmse (float): RMSE médio por amostra contra os códigos ótimos.
        sparsity (float): Esparsidade média das estimativas.
        seconds_per_sample (float): Tempo de codificação por amostra.
        setup_seconds (float): Preparação fora do tempo medido (fatoração de S, L).
        probe_error (Optional[float]): Erro do classificador em %, se avaliado.
        estimates (Optional[np.ndarray]): Códigos estimados, quando mantidos.
    """

    method: Method
    T: int
    rmse: float
    sparsity: float
    seconds_per_sample: float
    setup_seconds: float = 0.0
    probe_error: Optional[float] = None
    estimates: Optional[np.ndarray] = field(default=None, repr=False, compare=False)


def _resolve_model(models: Mapping, method: Method, T: int) -> object:
    model = models.get((method, T), models.get(method))
    if model is None:
        raise MissingModel(f"Nenhum modelo ou configuração para ({method.value}, T={T})")
    if isinstance(model, (LsalsaParams, ListaParams)) and model.depth != T:
        raise MissingModel(f"Parâmetros de {method.value} têm T={model.depth}, pedido T={T}")
    return model


def run_benchmark(methods: Sequence[Union[str, Method]], depths: Sequence[int], signals: np.ndarray,
                  targets: np.ndarray, models: Mapping[ModelKey, object],
                  dictionary: Optional[DictionaryLike] = None,
                  probe: Optional["ProbeClassifier"] = None, labels: Optional[np.ndarray] = None,
                  projection: Optional["GaussianProjection"] = None,
                  keep_estimates: bool = False) -> List[BenchmarkRecord]:
    """
    Codifica o conjunto de teste com cada (método, T) e agrega as métricas.

    Os solvers rodam exatamente T iterações (stop_tol = 0). A fatoração de
    S e a estimativa de L ficam fora do tempo medido e são reportadas em
    setup_seconds. Preparação e codificação rodam com BLAS limitado a uma
    thread, para que os tempos sejam comparáveis entre métodos.

    Args:
        methods (Sequence[str | Method]): Métodos a comparar.
        depths (Sequence[int]): Valores de T.
        signals (np.ndarray): Sinais de teste P×M.
        targets (np.ndarray): Códigos ótimos P×N.
        models (Mapping): SolverConfig por método (ou por (método, T)) e
            parâmetros treinados por (método, T).
        dictionary (Optional[DictionaryLike]): Obrigatório para os solvers.
        probe (Optional[ProbeClassifier]): Classificador para o erro de probe.
        labels (Optional[np.ndarray]): Rótulos do conjunto de teste.
        projection (Optional[GaussianProjection]): Aplicada antes do probe.
        keep_estimates (bool): Mantém os códigos estimados em cada registro.

    Returns:
        List[BenchmarkRecord]: Um registro por (método, T), na ordem pedida.

    Raises:
        MissingModel: Se faltar modelo para algum par.
    """
    targets = np.atleast_2d(np.asarray(targets, dtype=np.float64))
    records = []
    pairs = [(Method.parse(m), T) for m in methods for T in depths]
    for method, T in tqdm(pairs, desc="Benchmark", disable=not progress_enabled()):
        model = _resolve_model(models, method, T)
        if isinstance(model, SolverConfig) and dictionary is None:
            raise MissingModel(f"{method.value} exige o dicionário")
        with threadpool_limits(limits=1):
            setup_start = time.perf_counter()
            splitting = None
            if isinstance(model, SolverConfig):
                model = prepare_config(method, model.model_copy(update={"max_iters": T,
                                                                        "stop_tol": 0.0}),
                                       dictionary)
                if method is Method.SALSA:
                    splitting = build_splitting_operator(dictionary, model.mu)
            setup_seconds = time.perf_counter() - setup_start

            start = time.perf_counter()
            estimates = encode_batch(method, signals, model, dictionary, splitting)
            elapsed = time.perf_counter() - start

        probe_err = None
        if probe is not None and labels is not None:
            features = projection.apply(estimates) if projection is not None else estimates
            probe_err = probe_error(probe, features, labels)
        record = BenchmarkRecord(
            method=method,
            T=T,
            rmse=float(np.mean(per_sample_rmse(estimates, targets))),
            sparsity=float(np.mean(per_sample_sparsity(estimates))),
            seconds_per_sample=elapsed / max(len(estimates), 1),
            setup_seconds=setup_seconds,
            probe_error=probe_err,
            estimates=estimates if keep_estimates else None,
        )
        logger.info("%s T=%d: RMSE=%.6g esparsidade=%.4f", method.value, T, record.rmse,
                    record.sparsity)
        records.append(record)
    return records


def write_benchmark_csv(records: Iterable[BenchmarkRecord], path: PathLike) -> Path:
    """Grava os registros no esquema bench-v1."""
    header = ["method", "T", "rmse", "sparsity", "seconds_per_sample", "setup_seconds",
              "probe_error"]
    rows = ([r.method.value, r.T, r.rmse, r.sparsity, r.seconds_per_sample, r.setup_seconds,
             r.probe_error] for r in records)
    return write_csv(path, BENCH_SCHEMA, header, rows)


@dataclass(frozen=True)
class GaussianProjection:
    """Projeção aleatória G (dim_out × dim_in)."""

    matrix: np.ndarray

    def apply(self, codes: np.ndarray) -> np.ndarray:
        """Projeta um código ou um lote (uma amostra por linha)."""
        codes = np.asarray(codes, dtype=np.float64)
        if codes.shape[-1] != self.matrix.shape[1]:
            raise ShapeMismatch(f"Códigos de dimensão {codes.shape[-1]}, projeção espera "
                                f"{self.matrix.shape[1]}")
        return codes @ self.matrix.T


def gaussian_projection(dim_in: int, dim_out: int, seed: int = 0) -> GaussianProjection:
    """
    Matriz com entradas normais i.i.d. escaladas por 1/√dim_out.

    A escala preserva a norma em valor esperado: E‖Gx‖² = ‖x‖².

    Raises:
        ShapeMismatch: Se dim_out > dim_in ou alguma dimensão não for positiva.
    """
    if not 0 < dim_out <= dim_in:
        raise ShapeMismatch(f"Projeção exige 0 < dim_out ≤ dim_in, "
                            f"recebido {dim_out} e {dim_in}")
    rng = np.random.default_rng(seed)
    return GaussianProjection(rng.standard_normal((dim_out, dim_in)) / np.sqrt(dim_out))


class ProbeConfig(BaseModel):
    """
    Configuração do SGD do classificador.

    Attributes:
        learning_rate (float): Taxa inicial (0.1).
        lr_decay (float): Decaimento por época (0.9).
        max_epochs (int): Limite de épocas (500).
        batch_size (int): Tamanho do mini-lote.
        target_error (float): Erro de treino em % que encerra o treinamento.
        seed (int): Seed do embaralhamento.
    """

    model_config = ConfigDict(frozen=True)

    learning_rate: float = Field(default=0.1, gt=0.0)
    lr_decay: float = Field(default=0.9, gt=0.0, le=1.0)
    max_epochs: int = Field(default=500, ge=1)
    batch_size: int = Field(default=32, ge=1)
    target_error: float = Field(default=0.0, ge=0.0, le=100.0)
    seed: int = Field(default=0, ge=0)


@dataclass
class ProbeClassifier:
    """Regressão logística multinomial: scores = features·Wᵀ + b."""

    weights: np.ndarray
    bias: np.ndarray
    config: ProbeConfig
    training_error: float = 100.0
    epochs_run: int = 0

    @property
    def classes(self) -> int:
        return self.weights.shape[0]

    def scores(self, features: np.ndarray) -> np.ndarray:
        features = np.atleast_2d(np.asarray(features, dtype=np.float64))
        if features.shape[1] != self.weights.shape[1]:
            raise ShapeMismatch(f"Features de dimensão {features.shape[1]}, classificador "
                                f"espera {self.weights.shape[1]}")
        return features @ self.weights.T + self.bias

    def predict(self, features: np.ndarray) -> np.ndarray:
        # argmax devolve o primeiro máximo: empates vão para a classe de menor índice
        return np.argmax(self.scores(features), axis=1)


def _softmax(scores: np.ndarray) -> np.ndarray:
    shifted = np.exp(scores - np.max(scores, axis=1, keepdims=True))
    return shifted / np.sum(shifted, axis=1, keepdims=True)


def train_probe(features: np.ndarray, labels: np.ndarray, classes: int,
                config: Optional[ProbeConfig] = None) -> ProbeClassifier:
    """
    Treina o classificador por SGD na entropia cruzada softmax.

    O treino termina quando o erro de treinamento atinge
    config.target_error ou após config.max_epochs épocas.

    Args:
        features (np.ndarray): Features P×F (códigos ótimos, possivelmente projetados).
        labels (np.ndarray): Rótulos inteiros em [0, classes).
        classes (int): Número de classes.
        config (Optional[ProbeConfig]): Hiperparâmetros do SGD.

    Returns:
        ProbeClassifier: Classificador com o erro de treino alcançado.

    Raises:
        NonFiniteActivation: Features não finitas.
        ShapeMismatch: Rótulos em número errado ou fora do intervalo.
        DivergedLoss: Se a perda deixar de ser finita.
    """
    config = config or ProbeConfig()
    X = np.atleast_2d(np.asarray(features, dtype=np.float64))
    y = np.asarray(labels, dtype=np.int64).reshape(-1)
    if not np.all(np.isfinite(X)):
        raise NonFiniteActivation("As features do probe contêm valores não finitos")
    if len(X) != len(y) or np.any(y < 0) or np.any(y >= classes):
        raise ShapeMismatch(f"Rótulos devem ser {len(X)} inteiros em [0, {classes})")
    one_hot = np.eye(classes)[y]
    probe = ProbeClassifier(np.zeros((classes, X.shape[1])), np.zeros(classes), config)
    probe.training_error = probe_error(probe, X, y)
    rng = np.random.default_rng(config.seed)
    lr = config.learning_rate

    for epoch in range(1, config.max_epochs + 1):
        if probe.training_error <= config.target_error:
            break
        order = rng.permutation(len(X))
        for start in range(0, len(order), config.batch_size):
            batch = order[start:start + config.batch_size]
            probs = _softmax(probe.scores(X[batch]))
            delta = (probs - one_hot[batch]) / len(batch)
            probe.weights -= lr * delta.T @ X[batch]
            probe.bias -= lr * delta.sum(axis=0)
        if not (np.all(np.isfinite(probe.weights)) and np.all(np.isfinite(probe.bias))):
            raise DivergedLoss(f"Classificador divergiu na época {epoch} (lr={lr:g})")
        lr *= config.lr_decay
        probe.epochs_run = epoch
        probe.training_error = probe_error(probe, X, y)
    logger.info("Probe: erro de treino %.2f%% após %d épocas", probe.training_error,
                probe.epochs_run)
    return probe


def probe_error(classifier: ProbeClassifier, features: np.ndarray, labels: np.ndarray) -> float:
    """
    Erro de classificação em porcentagem (predição por argmax).

    Raises:
        ShapeMismatch: Se a dimensão das features ou o número de rótulos não corresponder.
    """
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    predictions = classifier.predict(features)
    if len(predictions) != len(labels):
        raise ShapeMismatch(f"{len(predictions)} amostras para {len(labels)} rótulos")
    if not len(labels):
        return 0.0
    return float(100.0 * np.mean(predictions != labels))


def point_cloud(estimates: np.ndarray, targets: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Esparsidade e RMSE de cada amostra: os pontos de um método na nuvem."""
    return per_sample_sparsity(estimates), per_sample_rmse(estimates, targets)


def export_point_cloud(clouds: Mapping[str, Tuple[np.ndarray, np.ndarray]],
                       path: PathLike) -> Path:
    """
    Grava uma linha por (método, amostra): method, sample_id, sparsity, rmse.

    Args:
        clouds (Mapping[str, Tuple[np.ndarray, np.ndarray]]): Para cada
            método, os vetores de esparsidade e RMSE por amostra.
        path (PathLike): CSV de destino.
    """
    rows = []
    for method, (sparsities, errors) in clouds.items():
        if len(sparsities) != len(errors):
            raise ShapeMismatch(f"{method}: {len(sparsities)} esparsidades e {len(errors)} RMSEs")
        rows.extend([str(method), i, float(s), float(e)]
                    for i, (s, e) in enumerate(zip(sparsities, errors)))
    return write_csv(path, POINT_CLOUD_SCHEMA, ["method", "sample_id", "sparsity", "rmse"], rows)


def component_features(codes: np.ndarray, partition: Sequence[int]) -> List[np.ndarray]:
    """Separa um lote de códigos P×N nos blocos P×N_i de cada componente."""
    codes = np.atleast_2d(np.asarray(codes, dtype=np.float64))
    if sum(partition) != codes.shape[1]:
        raise ShapeMismatch(f"Partição {list(partition)} não soma N={codes.shape[1]}")
    bounds = np.cumsum([0, *partition])
    return [codes[:, bounds[i]:bounds[i + 1]] for i in range(len(partition))]


def component_rmse(codes: np.ndarray, truths: Sequence[np.ndarray],
                   dictionary: DictionaryLike) -> Dict[int, float]:
    """
    RMSE médio entre cada componente reconstruída A_i·x_i e a componente verdadeira.

    Returns:
        Dict[int, float]: RMSE por índice de componente.
    """
    concat = as_concat(dictionary)
    if len(truths) != concat.D:
        raise ShapeMismatch(f"{len(truths)} componentes verdadeiras para D={concat.D}")
    components, _ = reconstruct(np.atleast_2d(codes), concat)
    return {
        i: float(np.mean(per_sample_rmse(estimate, truth)))
        for i, (estimate, truth) in enumerate(zip(components, truths))
    }
