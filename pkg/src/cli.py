import argparse
import json
import logging
import sys
from typing import List, Optional

from src.busca_subgrupos.exceptions import (ConfigError, DegenerateDataError,
                                            TocoAteError)
from src.services.analysis import AnalysisService, unwrap
from src.services.config import Config, RunConfig

logger = logging.getLogger(__name__)

LOG_FORMAT = ('%(asctime)s | %(levelname)-8s | %(name)-25s | '
              '%(funcName)-25s | %(message)s')

EXIT_OK = 0
EXIT_OTHER = 1
EXIT_CONFIG = 2
EXIT_DEGENERATE = 3


def exit_code_for(error: Exception) -> int:
    cause = unwrap(error)
    if isinstance(cause, ConfigError):
        return EXIT_CONFIG
    if isinstance(cause, DegenerateDataError):
        return EXIT_DEGENERATE
    return EXIT_OTHER


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="busca-subgrupos",
        description="Busca de subgrupos com ATE local extremo (tocos "
                    "max/min-ATE) com inferência righteous e honesta.")
    parser.add_argument("--log-level", default=None,
                        help="Nível de log (padrão: TOCOATE_LOG_LEVEL).")
    verbs = parser.add_subparsers(dest="verb", required=True)

    for verb, help_text in (
            ("analyze", "Executa a análise a partir de um arquivo de "
                        "configuração."),
            ("simulate", "Gera dados sintéticos pelo gerador da "
                         "configuração e analisa."),
            ("validate", "Valida configuração e dados sem rodar "
                         "permutações.")):
        sub = verbs.add_parser(verb, help=help_text)
        sub.add_argument("config", help="Arquivo JSON de configuração.")
        sub.add_argument("--seed", type=int, default=None)
        sub.add_argument("--permutations", "-B", dest="B", type=int,
                         default=None)
        sub.add_argument("--output-dir", default=None)
        sub.add_argument("--workers", type=int, default=None)
    return parser


def configure_logging(level: Optional[str]) -> None:
    logging.basicConfig(
        level=(level or Config.LOG_LEVEL).upper(),
        format=LOG_FORMAT,
        datefmt='%Y-%m-%d %H:%M:%S')


def run(args: argparse.Namespace) -> int:
    config = RunConfig.from_file(args.config).override(
        seed=args.seed, B=args.B, output_dir=args.output_dir,
        workers=args.workers)
    if args.verb == "simulate" and config.generator is None:
        raise ConfigError("'simulate' exige a chave 'generator' na "
                          "configuração.")
    service = AnalysisService(config)
    if args.verb == "validate":
        summary = service.check()
        print(json.dumps(summary, indent=2, ensure_ascii=False))
        return EXIT_OK
    _, path = service.run()
    print(path)
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level)
    try:
        return run(args)
    except TocoAteError as e:
        cause = unwrap(e)
        logger.error(f"{type(cause).__name__}: {e.message}")
        print(f"Erro: {e.message}", file=sys.stderr)
        return exit_code_for(e)
    except Exception as e:
        logger.exception(f"Erro inesperado: {e}")
        print(f"Erro inesperado: {e}", file=sys.stderr)
        return EXIT_OTHER


if __name__ == "__main__":
    sys.exit(main())
