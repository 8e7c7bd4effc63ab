class TocoAteError(Exception):
    def __init__(self, message="Erro na análise de subgrupos."):
        self.message = message
        super().__init__(self.message)


class ConfigError(TocoAteError):
    def __init__(self, message="Configuração inválida."):
        super().__init__(message)


class CardinalityError(ConfigError):
    def __init__(self, message="Covariável categórica com níveis demais."):
        super().__init__(message)


class ExhaustiveCapError(ConfigError):
    def __init__(self, message="Número de atribuições excede o limite da "
                               "enumeração exaustiva."):
        super().__init__(message)


class DataLoadError(TocoAteError):
    def __init__(self, message="Falha ao carregar o arquivo de dados."):
        super().__init__(message)


class DegenerateDataError(TocoAteError):
    def __init__(self, message="Dados degenerados para a análise."):
        super().__init__(message)


class EmptyArmError(DegenerateDataError):
    def __init__(self, message="Um dos braços do experimento está vazio."):
        super().__init__(message)


class ConstantCovariateError(DegenerateDataError):
    def __init__(self, message="Covariável constante: nenhuma partição "
                               "admissível existe. Remova a coluna."):
        super().__init__(message)


class EmptySplitUniverseError(DegenerateDataError):
    def __init__(self, message="Nenhuma partição satisfaz a restrição de "
                               "tamanho mínimo."):
        super().__init__(message)


class InsufficientArmError(DegenerateDataError):
    def __init__(self, message="O nó precisa de pelo menos 2 unidades em "
                               "cada braço."):
        super().__init__(message)


class DegenerateNodeError(DegenerateDataError):
    def __init__(self, message="Nó degenerado: erro padrão igual a zero."):
        super().__init__(message)


class DegenerateSearchError(DegenerateDataError):
    def __init__(self, message="Todos os nós candidatos são degenerados."):
        super().__init__(message)


class DegenerateNullError(DegenerateDataError):
    def __init__(self, message="Nenhuma permutação produziu um valor t "
                               "definido."):
        super().__init__(message)


class StageError(TocoAteError):
    """Erro de um módulo embrulhado com o nome da etapa do pipeline."""

    def __init__(self, stage: str, cause: Exception):
        self.stage = stage
        self.cause = cause
        super().__init__(f"Etapa '{stage}': {cause}")
