"""
Configuração de ambiente e logging do toolkit de codificação esparsa.

Este módulo centraliza as configurações lidas do ambiente (arquivo .env
incluído) e a configuração única do logging usado por todos os módulos.

Configuração via variáveis de ambiente:
    - LSALSA_OUTPUT_DIR: Diretório padrão de saída dos experimentos (default: runs)
    - LSALSA_LOG_LEVEL: Nível de log (default: INFO)
    - LSALSA_THREADS: Número de workers para codificação em lote (default: 1)
    - LSALSA_DEFAULT_SEED: Seed usada quando a configuração não define uma (default: 0)
    - LSALSA_PROGRESS: Exibe barras de progresso tqdm quando "1" (default: 1)
"""

import logging
import os

from dotenv import load_dotenv

# Carrega variáveis de ambiente do arquivo .env
load_dotenv()

TOOLKIT_VERSION = "1.0.0"
"""str: Versão gravada nos manifestos de execução."""

OUTPUT_DIR = os.getenv("LSALSA_OUTPUT_DIR", "runs")
"""str: Diretório padrão onde os comandos gravam seus artefatos."""

LOG_LEVEL = os.getenv("LSALSA_LOG_LEVEL", "INFO")
"""str: Nível de log aplicado por configure_logging."""

THREADS = int(os.getenv("LSALSA_THREADS", "1"))
"""int: Workers usados na geração de códigos ótimos em lote."""

DEFAULT_SEED = int(os.getenv("LSALSA_DEFAULT_SEED", "0"))
"""int: Seed padrão quando nenhuma outra é informada."""

PROGRESS = os.getenv("LSALSA_PROGRESS", "1") == "1"
"""bool: Habilita as barras de progresso dos laços longos."""

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def configure_logging(level: str = LOG_LEVEL, quiet: bool = False) -> None:
    """
    Configura o logging raiz do toolkit.

    Args:
        level (str): Nome do nível de log (DEBUG, INFO, WARNING...).
        quiet (bool): Quando True, só mensagens WARNING ou superiores
            são emitidas e as barras de progresso são desligadas.
    """
    global PROGRESS
    if quiet:
        level = "WARNING"
        PROGRESS = False
    logging.basicConfig(level=getattr(logging, level.upper(), logging.INFO),
                        format=LOG_FORMAT, force=True)


def progress_enabled() -> bool:
    """Indica se as barras de progresso devem ser exibidas."""
    return PROGRESS
