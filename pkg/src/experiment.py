"""
Pipelines de experimento reproduzíveis.

Este módulo liga os demais módulos em comandos de lote, cada um
configurado por um único documento ExperimentConfig:
    1. dict-learn: aprende um dicionário por componente
    2. gen-codes: gera os códigos ótimos (FISTA ou SALSA) dos sinais
    3. train: treina um encoder LSALSA ou LISTA contra os códigos ótimos
    4. encode / separate: codifica e reconstrói sinais (LSAM + PGM)
    5. bench: compara métodos e profundidades (CSV bench-v1)
    6. grid: busca de hiperparâmetros (leaderboard CSV)
    7. diag: relatório JSON de diagnóstico do LSALSA

Todo comando grava run_manifest.json ao lado das saídas com o digest da
configuração, a versão do toolkit e as seeds usadas. A seed do
experimento é a única fonte de aleatoriedade: ela substitui as seeds
das seções de treinamento, do sorteio de misturas e das divisões
treino/validação.

Formatos de configuração aceitos (pela extensão): .json, .yaml/.yml e .toml.
Caminhos relativos são resolvidos a partir do diretório do arquivo.
"""

import logging
from pathlib import Path
from typing import Annotated, Any, Callable, Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np
import orjson
import yaml

try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib
from pydantic import (
    AfterValidator,
    BaseModel,
    BeforeValidator,
    ConfigDict,
    Field,
    PositiveInt,
    ValidationError,
    ValidationInfo,
)

from core import ConcatDictionary, SolverConfig, mean_rmse
from data import (
    ALPHA_FASHION_MNIST,
    MixtureSet,
    PatchSpec,
    default_optimal_config,
    generate_optimal_codes,
    import_labels,
    load_mixtures,
    load_signal_matrix,
    make_mixtures,
    reassemble_patches,
    reconstruct,
    save_mixtures,
    tune_alpha_for_sparsity,
)
from diagnostics import diagnostics_report
from dictlearn import FISTA_ITERS, learn_component_dictionaries, load_dictionary, save_dictionary
from errors import ConfigError, EmptySource, MissingParameter, ShapeMismatch, UnknownMethod
from evaluation import (
    ProbeConfig,
    component_features,
    component_rmse,
    export_point_cloud,
    gaussian_projection,
    point_cloud,
    probe_error,
    run_benchmark,
    train_probe,
    write_benchmark_csv,
)
from formats import digest_bytes, dump_json, read_matrix, write_matrix, write_pgm
from settings import DEFAULT_SEED, OUTPUT_DIR, THREADS, TOOLKIT_VERSION
from solvers import Method, encode_batch
from training import GridSpec, TrainConfig, grid_search, preset_grid, split_indices, train
from unrolled import (
    EncoderParams,
    ListaParams,
    LsalsaParams,
    lista_init,
    load_params,
    lsalsa_init,
    save_params,
)

logger = logging.getLogger(__name__)

RUN_MANIFEST = "run_manifest.json"
"""str: Nome do manifesto de execução gravado por todos os comandos."""

MAX_IMAGES = 16
"""int: Número padrão de imagens PGM gravadas por encode/separate."""

DIAG_SAMPLES = 50


def _existing_path(value: Path, info: ValidationInfo) -> Path:
    base = (info.context or {}).get("base_dir")
    path = Path(value).expanduser()
    if base is not None and not path.is_absolute():
        path = Path(base) / path
    if not path.exists():
        raise ValueError(f"caminho não encontrado: {path}")
    return path


def _method_name(value: Any) -> Method:
    try:
        return Method.parse(value)
    except UnknownMethod as e:
        raise ValueError(str(e)) from e


ExistingPath = Annotated[Path, AfterValidator(_existing_path)]
MethodName = Annotated[Method, BeforeValidator(_method_name)]


class _Section(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


class DataSection(_Section):
    """
    Origem dos sinais.

    Attributes:
        signals (Optional[Path]): Sinais de um único problema (LSAM, IDX ou PGM).
        components (List[Path]): Bases não misturadas, uma por componente.
        mixtures (Optional[Path]): Diretório de um MixtureSet gravado.
        mixture_count (int): Quando > 0 e há duas componentes, sorteia
            este número de misturas.
        codes (Optional[Path]): Códigos ótimos (LSAM) alinhados aos sinais.
        labels (Optional[Path]): Rótulos IDX para o probe de classificação.
        patch (Optional[PatchSpec]): Divide imagens IDX/PGM em patches.
        image_shape (Optional[Tuple[int, int]]): Formato das imagens de
            origem, usado para gravar reconstruções como PGM.
        limit (Optional[int]): Usa apenas os primeiros sinais.
        validation_fraction (float): Fração de validação (0.1).
        max_images (int): Limite de imagens PGM gravadas.
    """

    signals: Optional[ExistingPath] = None
    components: List[ExistingPath] = Field(default_factory=list)
    mixtures: Optional[ExistingPath] = None
    mixture_count: int = Field(default=0, ge=0)
    codes: Optional[ExistingPath] = None
    labels: Optional[ExistingPath] = None
    patch: Optional[PatchSpec] = None
    image_shape: Optional[Tuple[int, int]] = None
    limit: Optional[int] = Field(default=None, ge=1)
    validation_fraction: float = Field(default=0.1, ge=0.0, lt=1.0)
    max_images: int = Field(default=MAX_IMAGES, ge=0)


class DictionarySection(_Section):
    path: Optional[ExistingPath] = None
    atoms: List[PositiveInt] = Field(default=[100], min_length=1)
    alphas: List[float] = Field(default=[ALPHA_FASHION_MNIST], min_length=1)
    names: List[str] = Field(default_factory=list)
    fista_iters: int = Field(default=FISTA_ITERS, ge=1)
    train: TrainConfig = TrainConfig()


class CodesSection(_Section):
    """
    Solver de referência usado por gen-codes e pelos solvers de encode.

    target_sparsity, quando definido, ajusta α por bisseção (um dicionário).
    """

    method: MethodName = Method.FISTA
    alphas: List[float] = Field(default=[ALPHA_FASHION_MNIST], min_length=1)
    mu: float = Field(default=1.0, gt=0.0)
    max_iters: Optional[int] = Field(default=None, ge=1)
    large_patches: bool = False
    target_sparsity: Optional[float] = Field(default=None, ge=0.0, le=1.0)


class EncoderSection(_Section):
    method: MethodName = Method.LSALSA
    depth: int = Field(default=5, ge=1)
    alphas: Optional[List[float]] = None
    mu: float = Field(default=1.0, gt=0.0)
    params: Optional[ExistingPath] = None
    train: TrainConfig = TrainConfig()


class BenchSection(_Section):
    """
    Matriz de métodos × profundidades do benchmark.

    models lista diretórios de parâmetros treinados; cada um atende o par
    (método, T) declarado no seu manifesto. O probe é treinado sobre os
    códigos ótimos da parte de treino e avaliado nas estimativas da parte
    de teste.
    """

    methods: List[MethodName] = Field(default=[Method.FISTA], min_length=1)
    depths: List[PositiveInt] = Field(default=[1, 5, 10], min_length=1)
    alphas: Optional[List[float]] = None
    mu: Optional[float] = Field(default=None, gt=0.0)
    models: List[ExistingPath] = Field(default_factory=list)
    probe: Optional[ProbeConfig] = None
    classes: int = Field(default=10, ge=2)
    projection_dim: Optional[int] = Field(default=None, ge=1)
    point_cloud: bool = False


class GridSection(_Section):
    methods: List[MethodName] = Field(default=[Method.LSALSA], min_length=1)
    depths: List[PositiveInt] = Field(default=[5], min_length=1)
    preset: Optional[Literal["single", "mca"]] = None
    spec: Optional[GridSpec] = None


class DiagSection(_Section):
    samples: int = Field(default=DIAG_SAMPLES, ge=1)


class ExperimentConfig(_Section):
    """
    Documento completo de um experimento.

    Attributes:
        seed (int): Seed explícita do experimento.
        output_dir (str): Diretório de saída padrão.
        threads (int): Workers da geração de códigos ótimos.
        data, dictionary, codes, encoder, bench, grid, diag: Seções de cada comando.
    """

    seed: int = Field(default=DEFAULT_SEED, ge=0)
    output_dir: str = OUTPUT_DIR
    threads: int = Field(default=THREADS, ge=1)
    data: DataSection = DataSection()
    dictionary: DictionarySection = DictionarySection()
    codes: CodesSection = CodesSection()
    encoder: EncoderSection = EncoderSection()
    bench: BenchSection = BenchSection()
    grid: GridSection = GridSection()
    diag: DiagSection = DiagSection()

    @property
    def digest(self) -> str:
        """SHA-256 da forma canônica (JSON ordenado) da configuração."""
        return digest_bytes(orjson.dumps(self.model_dump(mode="json"),
                                         option=orjson.OPT_SORT_KEYS))


def _read_document(path: Path) -> Dict[str, Any]:
    raw = path.read_bytes()
    suffix = path.suffix.lower()
    try:
        if suffix == ".json":
            document = orjson.loads(raw)
        elif suffix in (".yaml", ".yml"):
            document = yaml.safe_load(raw.decode("utf-8"))
        elif suffix == ".toml":
            document = tomllib.loads(raw.decode("utf-8"))
        else:
            raise ConfigError(f"extensão não suportada: {suffix or '(nenhuma)'}", "config")
    except (orjson.JSONDecodeError, yaml.YAMLError, tomllib.TOMLDecodeError) as e:
        raise ConfigError(f"documento inválido em {path}: {e}", "config") from e
    if document is None:
        return {}
    if not isinstance(document, dict):
        raise ConfigError("o documento deve ser um mapeamento", "config")
    return document


def load_experiment_config(path, overrides: Optional[Dict[str, Any]] = None) -> ExperimentConfig:
    """
    Carrega e valida um ExperimentConfig.

    Args:
        path (PathLike): Arquivo .json, .yaml/.yml ou .toml.
        overrides (Optional[Dict[str, Any]]): Valores de topo que substituem
            os do arquivo (seed, output_dir, threads); None é ignorado.

    Returns:
        ExperimentConfig: Configuração validada com caminhos absolutos.

    Raises:
        FileNotFoundError: Se o arquivo não existir.
        ConfigError: Documento inválido; o campo é o caminho pontuado do erro
            (ex.: "bench.methods.1").

    Example:
        >>> config = load_experiment_config("exp.toml", {"seed": 7})
        >>> config.seed
        7
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"Arquivo de configuração não encontrado: {path}")
    document = _read_document(path)
    document.update({k: v for k, v in (overrides or {}).items() if v is not None})
    try:
        return ExperimentConfig.model_validate(document, context={"base_dir": path.parent})
    except ValidationError as e:
        first = e.errors()[0]
        field = ".".join(str(part) for part in first["loc"])
        raise ConfigError(first["msg"], field) from e


# ---------------------------------------------------------------------------
# Entradas
# ---------------------------------------------------------------------------


def _limit(array: np.ndarray, config: ExperimentConfig) -> np.ndarray:
    return array[:config.data.limit] if config.data.limit else array


def _mixtures(config: ExperimentConfig) -> Optional[MixtureSet]:
    data = config.data
    if data.mixtures is not None:
        return load_mixtures(data.mixtures)
    if data.mixture_count and len(data.components) == 2:
        sources = [load_signal_matrix(p, data.patch) for p in data.components]
        return make_mixtures(sources[0], sources[1], data.mixture_count, config.seed)
    return None


def _signals(config: ExperimentConfig) -> Tuple[np.ndarray, Optional[MixtureSet]]:
    """Sinais do experimento e, quando misturados, o MixtureSet de origem."""
    mixtures = _mixtures(config)
    if mixtures is not None:
        signals = mixtures.mixed
    elif config.data.signals is not None:
        signals = load_signal_matrix(config.data.signals, config.data.patch)
    else:
        raise ConfigError("defina data.signals, data.mixtures ou data.components com "
                          "data.mixture_count", "data")
    signals = _limit(signals, config)
    if not len(signals):
        raise EmptySource("Nenhum sinal carregado")
    return signals, mixtures


def _codes(config: ExperimentConfig, count: int) -> np.ndarray:
    if config.data.codes is None:
        raise ConfigError("códigos ótimos não informados (rode gen-codes)", "data.codes")
    codes = _limit(read_matrix(config.data.codes), config)
    if len(codes) != count:
        raise ShapeMismatch(f"{len(codes)} códigos para {count} sinais")
    return codes


def _dictionary(config: ExperimentConfig) -> ConcatDictionary:
    if config.dictionary.path is None:
        raise ConfigError("dicionário não informado (rode dict-learn)", "dictionary.path")
    return load_dictionary(config.dictionary.path)


def _train_config(section: TrainConfig, seed: int) -> TrainConfig:
    return section.model_copy(update={"seed": seed})


def _solver_config(config: ExperimentConfig, alphas: Optional[Sequence[float]] = None,
                   mu: Optional[float] = None) -> SolverConfig:
    codes = config.codes
    return SolverConfig(alphas=list(alphas or codes.alphas), mu=mu or codes.mu,
                        max_iters=codes.max_iters or 100)


def _encoder_model(config: ExperimentConfig,
                   dictionary: Optional[ConcatDictionary]) -> Tuple[Method, object]:
    """Encoder treinado (encoder.params) ou o solver da seção codes."""
    if config.encoder.params is not None:
        params = load_params(config.encoder.params)
        method = Method.LSALSA if isinstance(params, LsalsaParams) else Method.LISTA
        return method, params
    if dictionary is None:
        raise ConfigError("informe encoder.params ou dictionary.path", "encoder.params")
    if config.codes.method.learned:
        raise ConfigError(f"{config.codes.method.value} exige encoder.params", "codes.method")
    return config.codes.method, _solver_config(config)


def _to_images(signals: np.ndarray, config: ExperimentConfig) -> List[np.ndarray]:
    """Converte sinais em imagens para PGM; lista vazia quando o formato é desconhecido."""
    data = config.data
    M = signals.shape[1]
    if data.patch is not None and data.image_shape is not None:
        H, W = data.image_shape
        per_image = (H // data.patch.patch_h) * (W // data.patch.patch_w)
        return [reassemble_patches(signals[i:i + per_image], (H, W), data.patch)
                for i in range(0, len(signals) - per_image + 1, per_image)]
    if data.image_shape is not None and data.image_shape[0] * data.image_shape[1] == M:
        return list(signals.reshape(-1, *data.image_shape))
    if data.patch is not None:
        return list(signals.reshape(-1, data.patch.patch_h, data.patch.patch_w))
    side = int(round(np.sqrt(M)))
    if side * side == M:
        return list(signals.reshape(-1, side, side))
    logger.warning("Formato de imagem desconhecido para M=%d; PGMs não gravados", M)
    return []


def _write_images(signals: np.ndarray, directory: Path, prefix: str,
                  config: ExperimentConfig) -> List[Path]:
    images = _to_images(signals, config)[:config.data.max_images]
    return [write_pgm(directory / f"{prefix}_{i:04d}.pgm", image) for i, image in enumerate(images)]


def write_run_manifest(out: Path, command: str, config: ExperimentConfig,
                       outputs: Sequence[Path], seeds: Optional[Dict[str, int]] = None) -> Path:
    """
    Grava run_manifest.json: comando, digest da configuração, versão e seeds.

    As saídas são listadas por caminho relativo, sem digest, para que o
    manifesto não dependa de campos de tempo.
    """
    return dump_json(out / RUN_MANIFEST, {
        "command": command,
        "config_digest": config.digest,
        "toolkit_version": TOOLKIT_VERSION,
        "seeds": {"experiment": config.seed, **(seeds or {})},
        "outputs": sorted(str(Path(p).relative_to(out)) for p in outputs),
    })


# ---------------------------------------------------------------------------
# Comandos
# ---------------------------------------------------------------------------


def cmd_dict_learn(config: ExperimentConfig, out: Path) -> List[Path]:
    """
    Aprende um dicionário por componente e grava LSAM + dictionary.json.

    Usa data.components (um conjunto não misturado por componente) ou,
    na ausência deles, data.signals como componente única.

    Raises:
        EmptySource: Conjunto de sinais vazio.
        ConfigError: Nenhuma origem de sinais definida.
    """
    data, section = config.data, config.dictionary
    if data.components:
        datasets = [_limit(load_signal_matrix(p, data.patch), config) for p in data.components]
    elif data.signals is not None:
        datasets = [_limit(load_signal_matrix(data.signals, data.patch), config)]
    else:
        raise ConfigError("defina data.components ou data.signals", "data")
    for i, signals in enumerate(datasets):
        if not signals.size:
            raise EmptySource(f"Conjunto da componente {i} está vazio")
    D = len(datasets)
    atoms = section.atoms * D if len(section.atoms) == 1 else section.atoms
    alphas = section.alphas * D if len(section.alphas) == 1 else section.alphas
    dictionary = learn_component_dictionaries(datasets, atoms,
                                              _train_config(section.train, config.seed),
                                              alphas, section.fista_iters)
    directory = out / "dictionary"
    manifest = save_dictionary(dictionary, directory, section.names or None, config.digest)
    outputs = [manifest] + sorted(directory.glob("*.lsam"))
    seeds = {f"component_{i}": config.seed + i for i in range(D)}
    return outputs + [write_run_manifest(out, "dict-learn", config, outputs, seeds)]


def cmd_gen_codes(config: ExperimentConfig, out: Path) -> List[Path]:
    """
    Gera os códigos ótimos dos sinais e grava signals.lsam + codes.lsam.

    Sinais misturados também são gravados como MixtureSet em mixtures/.
    """
    signals, mixtures = _signals(config)
    dictionary = _dictionary(config)
    section = config.codes
    alphas = list(section.alphas)
    if section.target_sparsity is not None:
        if dictionary.D != 1:
            raise ConfigError("ajuste de α exige um único dicionário", "codes.target_sparsity")
        alphas = [tune_alpha_for_sparsity(signals, dictionary, section.target_sparsity)]
        logger.info("α ajustado para esparsidade %.2f: %.6g", section.target_sparsity, alphas[0])
    solver = default_optimal_config(alphas, section.method, section.mu, section.large_patches)
    if section.max_iters:
        solver = solver.model_copy(update={"max_iters": section.max_iters})
    optimal = generate_optimal_codes(signals, dictionary, solver, section.method,
                                     workers=config.threads)
    outputs = [write_matrix(out / "signals.lsam", signals),
               write_matrix(out / "codes.lsam", optimal.codes)]
    if mixtures is not None:
        save_mixtures(mixtures, out / "mixtures")
        outputs += sorted((out / "mixtures").iterdir())
    outputs.append(dump_json(out / "codes.json", {
        "method": optimal.method.value,
        "alphas": alphas,
        "mu": solver.mu,
        "max_iters": solver.max_iters,
        "count": len(optimal.codes),
        "partition": list(optimal.partition),
        "mean_sparsity": optimal.mean_sparsity,
    }))
    return outputs + [write_run_manifest(out, "gen-codes", config, outputs)]


def cmd_train(config: ExperimentConfig, out: Path) -> List[Path]:
    """
    Treina o encoder da seção encoder contra os códigos ótimos.

    Parte dos sinais (data.validation_fraction) é separada para validação.
    Com encoder.params o treino continua a partir dos parâmetros gravados;
    caso contrário o encoder é inicializado a partir do dicionário.
    """
    section = config.encoder
    if not section.method.learned:
        raise ConfigError(f"{section.method.value} não é treinável", "encoder.method")
    signals, _ = _signals(config)
    targets = _codes(config, len(signals))
    if section.params is not None:
        params: EncoderParams = load_params(section.params)
    else:
        dictionary = _dictionary(config)
        alphas = section.alphas or config.codes.alphas
        if section.method is Method.LSALSA:
            params = lsalsa_init(dictionary, alphas, section.mu, section.depth)
        else:
            params = lista_init(dictionary, alphas, section.depth)
    train_idx, val_idx = split_indices(len(signals), config.seed, config.data.validation_fraction)
    validation = (signals[val_idx], targets[val_idx]) if len(val_idx) else None
    trained, history = train(params, signals[train_idx], targets[train_idx],
                             _train_config(section.train, config.seed), validation)
    manifest = save_params(trained, out / "params")
    outputs = [manifest] + sorted((out / "params").glob("*.lsam"))
    outputs.append(history.to_csv(out / "history.csv"))
    return outputs + [write_run_manifest(out, "train", config, outputs, {"split": config.seed})]


def cmd_encode(config: ExperimentConfig, out: Path) -> List[Path]:
    """Codifica os sinais e grava códigos, reconstruções (LSAM) e imagens PGM."""
    signals, _ = _signals(config)
    dictionary = load_dictionary(config.dictionary.path) if config.dictionary.path else None
    method, model = _encoder_model(config, dictionary)
    codes = encode_batch(method, signals, model, dictionary)
    outputs = [write_matrix(out / "codes.lsam", codes)]
    if dictionary is not None:
        _, total = reconstruct(codes, dictionary)
        outputs.append(write_matrix(out / "reconstruction.lsam", total))
        outputs += _write_images(total, out / "images", "reconstruction", config)
    else:
        logger.warning("Sem dictionary.path: reconstruções não gravadas")
    return outputs + [write_run_manifest(out, "encode", config, outputs)]


def cmd_separate(config: ExperimentConfig, out: Path) -> List[Path]:
    """
    Separa sinais misturados em componentes A_i·x_i.

    Grava uma matriz LSAM e imagens PGM por componente; quando as
    componentes verdadeiras são conhecidas, separation.json traz o RMSE
    de reconstrução por componente.
    """
    signals, mixtures = _signals(config)
    dictionary = _dictionary(config)
    if dictionary.D < 2:
        raise ConfigError("separação exige um dicionário com D ≥ 2", "dictionary.path")
    method, model = _encoder_model(config, dictionary)
    codes = encode_batch(method, signals, model, dictionary)
    components, total = reconstruct(codes, dictionary)
    outputs = [write_matrix(out / "codes.lsam", codes)]
    for i, component in enumerate(components):
        outputs.append(write_matrix(out / f"component_{i}.lsam", component))
        outputs += _write_images(component, out / "images", f"component_{i}", config)
    report: Dict[str, Any] = {"method": method.value, "count": len(signals),
                              "mixture_rmse": mean_rmse(total, signals)}
    if mixtures is not None:
        truths = [_limit(mixtures.truth_a, config), _limit(mixtures.truth_b, config)]
        report["component_rmse"] = {str(k): v for k, v in
                                    component_rmse(codes, truths, dictionary).items()}
    outputs.append(dump_json(out / "separation.json", report))
    return outputs + [write_run_manifest(out, "separate", config, outputs)]


def _bench_models(config: ExperimentConfig) -> Dict[Any, object]:
    section = config.bench
    models: Dict[Any, object] = {}
    solver = _solver_config(config, section.alphas, section.mu)
    for method in section.methods:
        if not method.learned:
            models[method] = solver
    for path in section.models:
        params = load_params(path)
        method = Method.LSALSA if isinstance(params, LsalsaParams) else Method.LISTA
        models[(method, params.depth)] = params
    return models


def _component_probe_errors(probe_config: ProbeConfig, classes: int, targets: np.ndarray,
                            labels: np.ndarray, train_idx: np.ndarray, test_idx: np.ndarray,
                            partition: Sequence[int]) -> Dict[str, float]:
    """Erro de um probe treinado só nos códigos de cada componente."""
    errors = {}
    for i, block in enumerate(component_features(targets, partition)):
        probe = train_probe(block[train_idx], labels[train_idx], classes, probe_config)
        errors[str(i)] = probe_error(probe, block[test_idx], labels[test_idx])
    return errors


def cmd_bench(config: ExperimentConfig, out: Path) -> List[Path]:
    """
    Benchmark método × T contra os códigos ótimos (bench.csv).

    Com bench.probe e data.labels, um probe softmax é treinado nos códigos
    ótimos da parte de treino (projetados quando bench.projection_dim é
    definido) e avaliado nas estimativas da parte de teste.
    """
    section = config.bench
    signals, _ = _signals(config)
    targets = _codes(config, len(signals))
    dictionary = load_dictionary(config.dictionary.path) if config.dictionary.path else None
    models = _bench_models(config)
    if section.projection_dim is not None and section.projection_dim > targets.shape[1]:
        raise ConfigError(f"projeção para {section.projection_dim} dimensões com códigos de "
                          f"{targets.shape[1]}", "bench.projection_dim")

    test_idx = np.arange(len(signals))
    probe = projection = labels = None
    if section.probe is not None:
        if config.data.labels is None:
            raise ConfigError("probe exige rótulos", "data.labels")
        all_labels = _limit(import_labels(config.data.labels), config)
        if len(all_labels) != len(signals):
            raise ShapeMismatch(f"{len(all_labels)} rótulos para {len(signals)} sinais")
        train_idx, test_idx = split_indices(len(signals), config.seed,
                                            config.data.validation_fraction or 0.1)
        features = targets[train_idx]
        if section.projection_dim is not None:
            projection = gaussian_projection(targets.shape[1], section.projection_dim, config.seed)
            features = projection.apply(features)
        probe_config = section.probe.model_copy(update={"seed": config.seed})
        probe = train_probe(features, all_labels[train_idx], section.classes, probe_config)
        labels = all_labels[test_idx]

    records = run_benchmark(section.methods, section.depths, signals[test_idx], targets[test_idx],
                            models, dictionary, probe, labels, projection,
                            keep_estimates=section.point_cloud)
    outputs = [write_benchmark_csv(records, out / "bench.csv")]
    if section.point_cloud:
        clouds = {f"{r.method.value}-T{r.T}": point_cloud(r.estimates, targets[test_idx])
                  for r in records}
        outputs.append(export_point_cloud(clouds, out / "pointcloud.csv"))
    if probe is not None:
        features = targets[test_idx] if projection is None else projection.apply(targets[test_idx])
        report: Dict[str, Any] = {
            "training_error": probe.training_error,
            "epochs_run": probe.epochs_run,
            "optimal_codes_error": probe_error(probe, features, labels),
        }
        if dictionary is not None and dictionary.D > 1:
            report["component_error"] = _component_probe_errors(
                probe_config, section.classes, targets, all_labels, train_idx, test_idx,
                dictionary.partition)
        outputs.append(dump_json(out / "probe.json", report))
    return outputs + [write_run_manifest(out, "bench", config, outputs)]


def cmd_grid(config: ExperimentConfig, out: Path) -> List[Path]:
    """Busca de hiperparâmetros por (método, T); um leaderboard CSV por par."""
    section = config.grid
    if section.spec is not None:
        spec = section.spec
    elif section.preset is not None:
        spec = preset_grid(section.preset)
    else:
        raise ConfigError("defina grid.spec ou grid.preset", "grid")
    signals, _ = _signals(config)
    targets = _codes(config, len(signals))
    dictionary = _dictionary(config)
    train_idx, val_idx = split_indices(len(signals), config.seed, config.data.validation_fraction)
    if not len(val_idx):
        raise ConfigError("a busca exige validation_fraction > 0", "data.validation_fraction")
    train_set = (signals[train_idx], targets[train_idx])
    val_set = (signals[val_idx], targets[val_idx])

    outputs, summary = [], {}
    for method in section.methods:
        for depth in section.depths:
            result = grid_search(train_set, val_set, spec, method, dictionary, depth, config.seed)
            outputs.append(result.to_csv(out / f"leaderboard_{method.value}_T{depth}.csv"))
            best = result.best
            summary[f"{method.value}-T{depth}"] = None if best is None else {
                "cell": best.index, "alphas": list(best.alphas), "mu": best.mu,
                "batch_size": best.batch_size, "learning_rate": best.learning_rate,
                "lr_decay": best.lr_decay, "val_rmse": best.val_rmse,
            }
    outputs.append(dump_json(out / "grid.json", summary))
    return outputs + [write_run_manifest(out, "grid", config, outputs)]


def cmd_diag(config: ExperimentConfig, out: Path) -> List[Path]:
    """Relatório de diagnóstico de um LSALSA treinado (diagnostics.json)."""
    if config.encoder.params is None:
        raise ConfigError("diagnóstico exige parâmetros treinados", "encoder.params")
    params = load_params(config.encoder.params)
    if isinstance(params, ListaParams):
        raise MissingParameter("O diagnóstico exige parâmetros LSALSA")
    signals, _ = _signals(config)
    report = diagnostics_report(params, _dictionary(config), signals[:config.diag.samples],
                                config.seed)
    outputs = [dump_json(out / "diagnostics.json", report)]
    return outputs + [write_run_manifest(out, "diag", config, outputs)]


COMMANDS: Dict[str, Callable[[ExperimentConfig, Path], List[Path]]] = {
    "dict-learn": cmd_dict_learn,
    "gen-codes": cmd_gen_codes,
    "train": cmd_train,
    "encode": cmd_encode,
    "separate": cmd_separate,
    "bench": cmd_bench,
    "grid": cmd_grid,
    "diag": cmd_diag,
}
"""dict: Subcomandos disponíveis na CLI e suas funções."""


def run_command(name: str, config: ExperimentConfig, out: Optional[Path] = None) -> List[Path]:
    """
    Executa um comando e devolve os arquivos gravados.

    Raises:
        UnknownMethod: Se o comando não existir.
    """
    if name not in COMMANDS:
        raise UnknownMethod(f"Comando desconhecido: {name!r}")
    out = Path(out or config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    logger.info("Comando %s (seed=%d, config %s) em %s", name, config.seed, config.digest[:12], out)
    outputs = COMMANDS[name](config, out)
    logger.info("Comando %s concluído: %d arquivos", name, len(outputs))
    return outputs
