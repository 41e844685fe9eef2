"""
Formatos de arquivo do toolkit: LSAM, IDX, PGM, manifestos JSON e CSV.

Formatos suportados:
    - LSAM v1: contêiner de matrizes reais (dicionários, códigos, parâmetros).
      Bytes 0-3 "LSAM", 4-7 versão u32 LE = 1, 8-15 linhas u64 LE,
      16-23 colunas u64 LE, payload f64 LE em ordem de linhas.
    - IDX: formato binário big-endian da família MNIST (imagens u8 e rótulos).
    - PGM P5 (maxval 255): imagens isoladas em tons de cinza.
    - JSON: manifestos e relatórios gravados com orjson (chaves ordenadas).
    - CSV: tabelas versionadas por uma linha "# schema=<nome>-v1".
"""

import csv
import hashlib
import struct
from pathlib import Path
from typing import Any, Iterable, List, Sequence, Tuple, Union

import numpy as np
import orjson

from errors import FormatError

PathLike = Union[str, Path]

LSAM_MAGIC = b"LSAM"
LSAM_VERSION = 1
LSAM_HEADER = struct.Struct("<4sIQQ")
"""struct.Struct: Cabeçalho LSAM (magic, versão, linhas, colunas)."""

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


def _require_file(path: PathLike) -> Path:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Arquivo não encontrado: {path}")
    return path


def write_matrix(path: PathLike, matrix: np.ndarray) -> Path:
    """
    Grava uma matriz (ou vetor, como matriz 1×n) no formato LSAM v1.

    Args:
        path (PathLike): Caminho do arquivo de destino.
        matrix (np.ndarray): Matriz 1-D ou 2-D de valores reais.

    Returns:
        Path: Caminho gravado.

    Raises:
        FormatError: Se a matriz tiver mais de duas dimensões.
    """
    array = np.asarray(matrix, dtype=np.float64)
    if array.ndim == 1:
        array = array.reshape(1, -1)
    if array.ndim != 2:
        raise FormatError(f"LSAM aceita apenas matrizes 2-D, recebido ndim={array.ndim}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows, cols = array.shape
    header = LSAM_HEADER.pack(LSAM_MAGIC, LSAM_VERSION, rows, cols)
    payload = np.ascontiguousarray(array, dtype="<f8").tobytes(order="C")
    path.write_bytes(header + payload)
    return path


def read_matrix(path: PathLike) -> np.ndarray:
    """
    Lê uma matriz LSAM v1.

    Args:
        path (PathLike): Caminho do arquivo LSAM.

    Returns:
        np.ndarray: Matriz float64 com o formato gravado no cabeçalho.

    Raises:
        FileNotFoundError: Se o arquivo não existir.
        FormatError: Magic inválido, versão diferente de 1 ou payload truncado.
    """
    raw = _require_file(path).read_bytes()
    if len(raw) < LSAM_HEADER.size:
        raise FormatError(f"Cabeçalho LSAM truncado em {path}")
    magic, version, rows, cols = LSAM_HEADER.unpack_from(raw, 0)
    if magic != LSAM_MAGIC:
        raise FormatError(f"Magic LSAM inválido em {path}: {magic!r}")
    if version != LSAM_VERSION:
        raise FormatError(f"Versão LSAM não suportada em {path}: {version}")
    expected = rows * cols * 8
    payload = raw[LSAM_HEADER.size:]
    if len(payload) != expected:
        raise FormatError(
            f"Payload LSAM com {len(payload)} bytes em {path}, esperado {expected}"
        )
    return np.frombuffer(payload, dtype="<f8").astype(np.float64).reshape(rows, cols)


def read_idx(path: PathLike, expected_magic: int) -> np.ndarray:
    """
    Lê um arquivo IDX u8 (imagens ou rótulos) sem normalização.

    Args:
        path (PathLike): Caminho do arquivo IDX.
        expected_magic (int): 0x00000803 para imagens, 0x00000801 para rótulos.

    Returns:
        np.ndarray: Tensor uint8 com as dimensões do cabeçalho.

    Raises:
        FormatError: Magic diferente do esperado ou payload com tamanho errado.
    """
    raw = _require_file(path).read_bytes()
    if len(raw) < 4:
        raise FormatError(f"Arquivo IDX truncado: {path}")
    (magic,) = struct.unpack(">I", raw[:4])
    if magic != expected_magic:
        raise FormatError(f"Magic IDX inesperado em {path}: 0x{magic:08x}")
    ndim = magic & 0xFF
    header_size = 4 + 4 * ndim
    if len(raw) < header_size:
        raise FormatError(f"Cabeçalho IDX truncado: {path}")
    dims = struct.unpack(f">{ndim}I", raw[4:header_size])
    payload = raw[header_size:]
    if len(payload) != int(np.prod(dims)):
        raise FormatError(
            f"Payload IDX com {len(payload)} bytes em {path}, esperado {int(np.prod(dims))}"
        )
    return np.frombuffer(payload, dtype=np.uint8).reshape(dims).copy()


def write_idx(path: PathLike, tensor: np.ndarray) -> Path:
    """
    Grava um tensor uint8 em IDX (3-D imagens ou 1-D rótulos).

    Usado para fixtures de teste e para a exportação de imagens.
    """
    tensor = np.asarray(tensor, dtype=np.uint8)
    if tensor.ndim == 3:
        magic = IDX_IMAGES_MAGIC
    elif tensor.ndim == 1:
        magic = IDX_LABELS_MAGIC
    else:
        raise FormatError(f"IDX suporta tensores 1-D ou 3-D, recebido ndim={tensor.ndim}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = struct.pack(">I", magic) + struct.pack(f">{tensor.ndim}I", *tensor.shape)
    path.write_bytes(header + tensor.tobytes(order="C"))
    return path


def read_pgm(path: PathLike) -> np.ndarray:
    """
    Lê uma imagem PGM binária (P5, maxval 255) com pixels em [0, 1].

    Raises:
        FormatError: Se o arquivo não for P5 com maxval 255.
    """
    raw = _require_file(path).read_bytes()
    tokens: List[bytes] = []
    pos = 0
    while len(tokens) < 4:
        while pos < len(raw) and raw[pos:pos + 1].isspace():
            pos += 1
        if raw[pos:pos + 1] == b"#":
            while pos < len(raw) and raw[pos:pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FormatError(f"Cabeçalho PGM truncado: {path}")
        tokens.append(raw[start:pos])
    pos += 1
    if tokens[0] != b"P5" or tokens[3] != b"255":
        raise FormatError(f"Apenas PGM P5 com maxval 255 é suportado: {path}")
    width, height = int(tokens[1]), int(tokens[2])
    pixels = raw[pos:pos + width * height]
    if len(pixels) != width * height:
        raise FormatError(f"Payload PGM truncado: {path}")
    return np.frombuffer(pixels, dtype=np.uint8).reshape(height, width) / 255.0


def write_pgm(path: PathLike, image: np.ndarray) -> Path:
    """
    Grava uma imagem em [0, 1] como PGM P5 (valores fora do intervalo são saturados).
    """
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 2:
        raise FormatError(f"PGM exige imagem 2-D, recebido ndim={image.ndim}")
    pixels = np.round(np.clip(image, 0.0, 1.0) * 255.0).astype(np.uint8)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    height, width = pixels.shape
    path.write_bytes(f"P5\n{width} {height}\n255\n".encode("ascii") + pixels.tobytes())
    return path


def dump_json(path: PathLike, payload: Any) -> Path:
    """Grava JSON determinístico (chaves ordenadas, indentado)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(
        orjson.dumps(payload, option=orjson.OPT_SORT_KEYS | orjson.OPT_INDENT_2
                     | orjson.OPT_SERIALIZE_NUMPY)
    )
    return path


def load_json(path: PathLike) -> Any:
    """Lê um documento JSON; conteúdo inválido vira FormatError."""
    raw = _require_file(path).read_bytes()
    try:
        return orjson.loads(raw)
    except orjson.JSONDecodeError as e:
        raise FormatError(f"JSON inválido em {path}: {e}") from e


def digest_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def digest_array(array: np.ndarray) -> str:
    """SHA-256 do conteúdo float64 de um array, usado em manifestos."""
    return digest_bytes(np.ascontiguousarray(array, dtype="<f8").tobytes())


def digest_file(path: PathLike) -> str:
    """SHA-256 dos bytes de um arquivo existente (FileNotFoundError se faltar)."""
    return digest_bytes(_require_file(path).read_bytes())


def write_csv(path: PathLike, schema: str, header: Sequence[str],
              rows: Iterable[Sequence[Any]]) -> Path:
    """
    Grava um CSV versionado.

    A primeira linha é o comentário "# schema=<schema>", seguida do
    cabeçalho. Floats são gravados com repr para round-trip exato.

    Args:
        path (PathLike): Caminho do arquivo.
        schema (str): Identificador do esquema (ex.: "bench-v1").
        header (Sequence[str]): Nomes das colunas.
        rows (Iterable[Sequence[Any]]): Linhas de valores.

    Returns:
        Path: Caminho gravado.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as handle:
        handle.write(f"# schema={schema}\n")
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_csv_cell(value) for value in row])
    return path


def _csv_cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (list, tuple)):
        return ";".join(_csv_cell(v) for v in value)
    return str(value)


def read_csv(path: PathLike) -> Tuple[str, List[dict]]:
    """
    Lê um CSV versionado gravado por write_csv.

    Returns:
        Tuple[str, List[dict]]: Esquema declarado e linhas como dicionários
            de strings.
    """
    with open(_require_file(path), newline="", encoding="utf-8") as handle:
        first = handle.readline().strip()
        if not first.startswith("# schema="):
            raise FormatError(f"CSV sem linha de esquema: {path}")
        reader = csv.DictReader(handle)
        return first[len("# schema="):], list(reader)
