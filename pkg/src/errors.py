"""
Hierarquia de exceções do toolkit.

Cada erro deriva de ToolkitError e também da exceção nativa mais próxima,
de modo que o chamador pode capturar tanto a classe específica quanto a
categoria geral (ValueError, ArithmeticError, LookupError).
"""


class ToolkitError(Exception):
    """Base de todos os erros do toolkit."""


class ZeroColumn(ToolkitError, ValueError):
    """Uma coluna do dicionário tem norma (quase) nula."""


class FactorizationFailure(ToolkitError, ArithmeticError):
    """A matriz μI + AᵀA não é numericamente SPD."""


class PartitionMismatch(ToolkitError, ValueError):
    """Número de pesos α diferente do número de blocos do código."""


class DimensionMismatch(ToolkitError, ValueError):
    """Dimensões incompatíveis entre sinal, código e dicionário."""


class ShapeMismatch(ToolkitError, ValueError):
    """Formato de matriz ou lote incompatível com os parâmetros."""


class NonFiniteIterate(ToolkitError, ArithmeticError):
    """Um solver iterativo produziu valores não finitos."""


class NonFiniteActivation(ToolkitError, ArithmeticError):
    """Uma camada do encoder desenrolado produziu valores não finitos."""


class UnknownMethod(ToolkitError, LookupError):
    """Nome de método de codificação desconhecido."""


class MissingParameter(ToolkitError, LookupError):
    """Parâmetro exigido pelo método não foi fornecido."""


class FormatError(ToolkitError, ValueError):
    """Arquivo binário ou manifesto malformado."""


class MissingTape(ToolkitError, LookupError):
    """Backward chamado sem as ativações gravadas no forward."""


class DivergedLoss(ToolkitError, ArithmeticError):
    """A perda de treinamento tornou-se não finita."""


class SingularS(ToolkitError, ArithmeticError):
    """O operador de divisão S é singular ou mal condicionado."""


class PatchTooLarge(ToolkitError, ValueError):
    """O patch é maior que a imagem."""


class EmptySource(ToolkitError, ValueError):
    """Um conjunto de origem está vazio."""


class MissingModel(ToolkitError, LookupError):
    """Não há modelo ou configuração para um par (método, T)."""


class ConfigError(ToolkitError, ValueError):
    """Configuração de experimento inválida."""

    def __init__(self, message: str, field: str = "") -> None:
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)
