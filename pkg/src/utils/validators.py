import os

import pandas as pd


def is_delimited_text(path):
    """
    Verifica se o arquivo existe e tem extensão de texto delimitado (CSV/TSV/TXT).
    """
    return (
        os.path.isfile(path)
        and os.path.splitext(path)[1].lower() in (".csv", ".tsv", ".txt")
    )


def detect_separator(header_line):
    """
    Retorna o separador do arquivo a partir da linha de cabeçalho: tabulação
    se houver, senão vírgula.
    """
    return "\t" if "\t" in header_line else ","


def missing_columns(df: pd.DataFrame, columns):
    """
    Lista as colunas exigidas que não existem no DataFrame.
    """
    return [col for col in columns if col not in df.columns]


def is_binary_indicator(series: pd.Series):
    """
    Verifica se a série contém apenas 0 e 1 (valores ausentes são ignorados).
    """
    values = pd.to_numeric(series.dropna(), errors="coerce")
    return not values.isna().any() and values.isin([0, 1]).all()
