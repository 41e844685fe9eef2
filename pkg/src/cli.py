"""
Interface de linha de comando do toolkit.

Cada subcomando executa um pipeline de experimento descrito por um
arquivo de configuração (JSON, YAML ou TOML); as flags apenas
sobrescrevem o diretório de saída, a seed, o número de threads e a
verbosidade.

Subcomandos:
    - dict-learn: aprende os dicionários por componente
    - gen-codes: gera os códigos ótimos
    - train: treina um encoder LSALSA ou LISTA
    - encode: codifica sinais e grava reconstruções
    - separate: separa misturas em componentes
    - bench: benchmark método × T
    - grid: busca de hiperparâmetros
    - diag: diagnóstico de um LSALSA treinado

Códigos de saída:
    0: todas as saídas foram gravadas
    1: erro de configuração, de entrada ou numérico ("Erro: ...")
    130: interrompido pelo usuário

Example:
    $ python src/cli.py train --config exp.toml --out runs/lsalsa --seed 3
"""

import argparse
import logging
import sys
from typing import List, Optional

from errors import ToolkitError
from experiment import COMMANDS, load_experiment_config, run_command
from settings import configure_logging

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    """Monta o parser com um subparser por comando e as flags compartilhadas."""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True,
                        help="Arquivo do experimento (.json, .yaml, .toml)")
    common.add_argument("--out", default=None, help="Diretório de saída (sobrescreve output_dir)")
    common.add_argument("--seed", type=int, default=None,
                        help="Seed do experimento (sobrescreve seed)")
    common.add_argument("--threads", type=int, default=None,
                        help="Workers da geração de códigos")
    common.add_argument("--quiet", action="store_true",
                        help="Só avisos e erros, sem barras de progresso")

    parser = argparse.ArgumentParser(
        prog="lsalsa",
        description="Codificação esparsa e MCA com encoders desenrolados (LSALSA, LISTA).",
    )
    subparsers = parser.add_subparsers(dest="command", required=True, metavar="comando")
    for name, command in COMMANDS.items():
        summary = (command.__doc__ or "").strip().splitlines()[0]
        subparsers.add_parser(name, parents=[common], help=summary, description=summary)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """
    Ponto de entrada da CLI.

    Args:
        argv (Optional[List[str]]): Argumentos (default: sys.argv[1:]).

    Returns:
        int: Código de saída do processo.
    """
    args = build_parser().parse_args(argv)
    configure_logging(quiet=args.quiet)
    try:
        config = load_experiment_config(args.config, {"seed": args.seed, "threads": args.threads})
        outputs = run_command(args.command, config, args.out)
    except (ToolkitError, FileNotFoundError) as e:
        print(f"Erro: {args.command}: {e}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        print("\nInterrompido.", file=sys.stderr)
        return 130
    except Exception as e:
        logger.debug("Falha inesperada em %s", args.command, exc_info=True)
        print(f"Erro: {args.command}: falha inesperada ({type(e).__name__}: {e})",
              file=sys.stderr)
        return 1
    if not args.quiet:
        for path in outputs:
            print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
