import logging
import os
import tempfile
from typing import Callable

import pandas as pd

logger = logging.getLogger(__name__)


class FileOperator:
    @staticmethod
    def write_atomic(output_file: str, writer: Callable[[str], None],
                     suffix: str = "") -> None:
        """
        Grava um arquivo de forma atômica: o conteúdo é escrito em um arquivo
        temporário no mesmo diretório e depois renomeado para o destino.
        ``suffix`` preserva a extensão para bibliotecas que a exigem.

        Args:
            output_file (str): Caminho final do arquivo.
            writer (Callable[[str], None]): Função que recebe o caminho
                temporário e escreve o conteúdo nele.

        Raises:
            IOError: Se houver erro ao gravar ou renomear o arquivo.
        """
        directory = os.path.dirname(os.path.abspath(output_file))
        os.makedirs(directory, exist_ok=True)
        fd, tmp_path = tempfile.mkstemp(dir=directory, prefix=".tmp_",
                                        suffix=suffix)
        os.close(fd)
        try:
            writer(tmp_path)
            FileOperator.rename_file(tmp_path, output_file)
        except Exception:
            FileOperator.remove_file(tmp_path)
            raise

    @staticmethod
    def save_text_file(output_file: str, text: str) -> None:
        def _write(path: str) -> None:
            with open(path, "w", encoding="utf-8", newline="\n") as f:
                f.write(text)

        FileOperator.write_atomic(output_file, _write)
        logger.debug(f"Arquivo '{output_file}' gravado.")

    @staticmethod
    def save_frame(output_file: str, df: pd.DataFrame, sep: str = ",") -> None:
        FileOperator.write_atomic(
            output_file,
            lambda path: df.to_csv(path, index=False, sep=sep,
                                   encoding="utf-8", lineterminator="\n"))
        logger.debug(f"Tabela com {len(df)} linhas gravada em '{output_file}'.")

    @staticmethod
    def remove_file(file_name: str) -> bool:
        """
        Remove um arquivo se ele existir.

        Args:
            file_name (str): Nome do arquivo a ser removido.

        Returns:
            bool: True se o arquivo foi removido com sucesso, False se o arquivo não existir.
        """
        if os.path.exists(file_name):
            os.remove(file_name)
            logger.debug(f"Arquivo '{file_name}' removido com sucesso.")
            return True
        else:
            logger.warning(f"Aviso: O arquivo '{file_name}' não foi encontrado.")
            return False

    @staticmethod
    def rename_file(old_name: str, new_name: str) -> bool:
        """
        Renomeia um arquivo se ele existir, substituindo o destino.

        Args:
            old_name (str): Nome atual do arquivo.
            new_name (str): Novo nome para o arquivo.

        Returns:
            bool: True se o arquivo foi renomeado com sucesso, False se o arquivo não existir.
        """
        if os.path.exists(old_name):
            os.replace(old_name, new_name)
            logger.debug(f"Arquivo renomeado de '{old_name}' para '{new_name}'.")
            return True
        else:
            logger.warning(f"Aviso: O arquivo '{old_name}' não foi encontrado.")
            return False
