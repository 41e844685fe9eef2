"""
Verificações numéricas das propriedades teóricas do LSALSA.

Operações:
    1. learned_f1: custo f̂₁(x; S) = ½xᵀ(S⁻¹ − μI)x − (W_e·y)ᵀx + ½yᵀy
    2. primal_optimality_residual: ‖S⁻¹x(t) − W_e·y − μ(u(t) − d(t−1))‖∞,
       nulo por construção do x-update em qualquer camada
    3. descent_modifier: P = S⁻¹ − (μI + AᵀA), nulo na inicialização
    4. recursion_oracle: forma fechada de u(t+1) em função de {u(j)}_{j≤t},
       comparada ao forward
    5. diagnostics_report: relatório JSON do comando diag

S⁻¹ nunca é formada explicitamente: os produtos S⁻¹·v resolvem sistemas
contra a fatoração LU de S. S com número de condição acima de 1e12 é
rejeitada com SingularS.
"""

import logging
from dataclasses import dataclass
from typing import Dict, Optional, Union

import numpy as np
from scipy import linalg

from core import DictionaryLike, Signal, as_concat, as_data, soft_threshold
from errors import MissingParameter, MissingTape, ShapeMismatch, SingularS
from unrolled import LsalsaParams, LsalsaTape, lsalsa_forward_batch, lsalsa_init

logger = logging.getLogger(__name__)

MAX_CONDITION = 1e12
"""float: Número de condição máximo aceito para S."""

MAX_RECURSION_DEPTH = 6
"""int: Maior T avaliado pelo oráculo da recursão."""


def _factor_splitting(S: np.ndarray):
    condition = np.linalg.cond(S)
    if not np.isfinite(condition) or condition > MAX_CONDITION:
        raise SingularS(f"S mal condicionada (cond ≈ {condition:.3g} > {MAX_CONDITION:g})")
    try:
        return linalg.lu_factor(S, check_finite=True)
    except (linalg.LinAlgError, ValueError) as e:
        raise SingularS(f"Falha ao fatorar S: {e}") from e


def _apply_inverse(S: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    return linalg.lu_solve(_factor_splitting(S), rhs)


@dataclass(frozen=True)
class LagrangianProbe:
    """
    Ponto de avaliação do Lagrangiano aprendido.

    Attributes:
        params (LsalsaParams): Parâmetros (W_e, S, μ).
        signal (np.ndarray): Sinal y.
        x (np.ndarray): Variável primal x(t).
        u (Optional[np.ndarray]): Variável auxiliar u(t).
        d (Optional[np.ndarray]): Multiplicador escalado d(t−1).
    """

    params: LsalsaParams
    signal: np.ndarray
    x: np.ndarray
    u: Optional[np.ndarray] = None
    d: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        N, M = self.params.N, self.params.M
        if np.shape(self.signal) != (M,) or np.shape(self.x) != (N,):
            raise ShapeMismatch(f"y{np.shape(self.signal)} ou x{np.shape(self.x)} incompatíveis "
                                f"com W_e {N}×{M}")
        for name in ("u", "d"):
            value = getattr(self, name)
            if value is not None and np.shape(value) != (N,):
                raise ShapeMismatch(f"{name} com formato {np.shape(value)}, esperado ({N},)")

    @classmethod
    def from_tape(cls, params: LsalsaParams, tape: Optional[LsalsaTape], t: int,
                  sample: int = 0) -> "LagrangianProbe":
        """Probe da camada t (1..T) de um forward gravado."""
        if tape is None or tape.depth < 1:
            raise MissingTape("O probe de camada exige o tape de um forward com keep_tape=True")
        x, u, d = tape.layer(t, sample)
        return cls(params, tape.signals[sample], x, u, d)

    @property
    def condition(self) -> float:
        """Número de condição (norma 2) de S."""
        return float(np.linalg.cond(self.params.S))


def learned_f1(probe: LagrangianProbe) -> float:
    """
    f̂₁(x; S) = ½xᵀ(S⁻¹ − μI)x − (W_e·y)ᵀx + ½yᵀy.

    Na inicialização (S = (μI + AᵀA)⁻¹, W_e = Aᵀ) coincide com ½‖y − Ax‖².

    Raises:
        SingularS: Se S for singular ou mal condicionada.

    Example:
        >>> p = lsalsa_init(Dictionary(np.eye(2)), [0.1], 1.0, 1)
        >>> learned_f1(LagrangianProbe(p, np.array([1.0, 0.0]), np.zeros(2)))
        0.5
    """
    params, x, y = probe.params, probe.x, probe.signal
    quadratic = x @ _apply_inverse(params.S, x) - params.mu * (x @ x)
    return float(0.5 * quadratic - (params.W_e @ y) @ x + 0.5 * (y @ y))


def primal_optimality_residual(probe: LagrangianProbe) -> float:
    """
    ‖S⁻¹x(t) − W_e·y − μ(u(t) − d(t−1))‖∞ para uma camada do forward.

    Raises:
        MissingTape: Se o probe não tiver u e d (não veio de um tape).
        SingularS: Se S for singular ou mal condicionada.
    """
    if probe.u is None or probe.d is None:
        raise MissingTape("O resíduo primal exige (x, u, d) de uma camada do tape")
    params = probe.params
    stationarity = (_apply_inverse(params.S, probe.x) - params.W_e @ probe.signal
                    - params.mu * (probe.u - probe.d))
    return float(np.max(np.abs(stationarity)))


def max_primal_residual(params: LsalsaParams, signals: np.ndarray) -> float:
    """
    Maior resíduo primal relativo entre todas as camadas e amostras.

    Cada resíduo é dividido por max(1, ‖W_e·y + μ(u(t) − d(t−1))‖∞).
    """
    _, tape = lsalsa_forward_batch(params, signals, keep_tape=True)
    factor = _factor_splitting(params.S)
    worst = 0.0
    for t in range(1, tape.depth + 1):
        stationarity = linalg.lu_solve(factor, tape.x[t].T).T - tape.r[t]
        scale = np.maximum(1.0, np.max(np.abs(tape.r[t]), axis=1))
        worst = max(worst, float(np.max(np.max(np.abs(stationarity), axis=1) / scale)))
    return worst


@dataclass(frozen=True)
class DescentModifier:
    """P = S⁻¹ − (μI + AᵀA), extremos do espectro da parte simétrica e ‖P‖_F."""

    P: np.ndarray
    eig_min: float
    eig_max: float
    frobenius: float


def descent_modifier(params: LsalsaParams, dictionary: DictionaryLike,
                     mu: Optional[float] = None) -> DescentModifier:
    """
    Calcula o modificador de descida aprendido P.

    Args:
        params (LsalsaParams): Parâmetros (usa S).
        dictionary (DictionaryLike): Dicionário A do problema.
        mu (Optional[float]): μ da Hessiana μI + AᵀA (padrão: params.mu).

    Returns:
        DescentModifier: P e seus diagnósticos; P = 0 na inicialização.

    Raises:
        SingularS: Se S for singular ou mal condicionada.
        ShapeMismatch: Se A não tiver N colunas.
    """
    concat = as_concat(dictionary)
    if concat.N != params.N:
        raise ShapeMismatch(f"Dicionário com N={concat.N}, parâmetros com N={params.N}")
    mu = params.mu if mu is None else mu
    inverse = _apply_inverse(params.S, np.eye(params.N))
    P = inverse - (mu * np.eye(params.N) + concat.gram)
    eigenvalues = np.linalg.eigvalsh(0.5 * (P + P.T))
    return DescentModifier(P, float(eigenvalues[0]), float(eigenvalues[-1]),
                           float(np.linalg.norm(P, "fro")))


def splitting_from_modifier(P: np.ndarray, dictionary: DictionaryLike, mu: float) -> np.ndarray:
    """Recupera S = (P + μI + AᵀA)⁻¹ a partir de P."""
    concat = as_concat(dictionary)
    hessian = P + mu * np.eye(concat.N) + concat.gram
    try:
        return linalg.solve(hessian, np.eye(concat.N))
    except (linalg.LinAlgError, ValueError) as e:
        raise SingularS(f"P + μI + AᵀA não é inversível: {e}") from e


def recursion_oracle(params: LsalsaParams, signal: Union[Signal, np.ndarray],
                     depth: Optional[int] = None) -> float:
    """
    Compara a forma fechada da recursão de u com o forward.

    Com M = I − μS e b = S·W_e·y, as camadas satisfazem
        d(t) = M(d(t−1) − u(t)) + b
    e, para t ≥ 1,
        u(t+1) = soft((2I + (I − 2μS)·Σ_{n=0}^{t−2} Mⁿ)·b
                      − (I − 2μS)·[u(t) + Σ_{j=1}^{t−1} M^{t−j}·u(j)])
    com u(1) = soft(W_e·y). Cada u(t) fechado é avaliado a partir dos
    u(j), j < t, gravados no forward.

    Args:
        params (LsalsaParams): Parâmetros (tipicamente os da inicialização).
        signal (Signal | np.ndarray): Sinal y.
        depth (Optional[int]): T avaliado (padrão: params.depth), no máximo 6.

    Returns:
        float: Maior desvio ‖u_fechado(t) − u(t)‖∞ dividido por max(1, max|u|).

    Raises:
        ValueError: Se T > 6.
        ShapeMismatch: Se o sinal não tiver M entradas.
    """
    T = params.depth if depth is None else depth
    if not 1 <= T <= MAX_RECURSION_DEPTH:
        raise ValueError(f"O oráculo da recursão aceita 1 ≤ T ≤ {MAX_RECURSION_DEPTH}, "
                         f"recebido {T}")
    y = as_data(signal)
    if y.shape != (params.M,):
        raise ShapeMismatch(f"Sinal com formato {y.shape}, esperado ({params.M},)")
    forward_params = params if params.depth == T else LsalsaParams(
        params.W_e, params.S, params.alphas, params.mu, T, params.partition)
    _, tape = lsalsa_forward_batch(forward_params, y, keep_tape=True)
    u = [None] + [tape.u[t][0] for t in range(1, T + 1)]

    I = np.eye(params.N)
    mu, S, tau = params.mu, params.S, params.thresholds
    M = I - mu * S
    K = I - 2.0 * mu * S
    filtered = params.W_e @ y
    b = S @ filtered
    powers = [I]
    for _ in range(T):
        powers.append(M @ powers[-1])

    closed = [None, soft_threshold(filtered, tau)]
    for t in range(1, T):
        drift = sum((powers[n] for n in range(t - 1)), np.zeros_like(I))
        memory = u[t] + sum((powers[t - j] @ u[j] for j in range(1, t)), np.zeros(params.N))
        closed.append(soft_threshold((2.0 * I + K @ drift) @ b - K @ memory, tau))

    scale = max(1.0, max(float(np.max(np.abs(u[t]))) for t in range(1, T + 1)))
    deviation = max(float(np.max(np.abs(closed[t] - u[t]))) for t in range(1, T + 1))
    return deviation / scale


def diagnostics_report(params: LsalsaParams, dictionary: DictionaryLike, signals: np.ndarray,
                       seed: int = 0) -> Dict[str, float]:
    """
    Relatório do comando diag.

    Chaves: theorem1_residual_max (resíduo primal relativo máximo com os
    parâmetros dados), f1hat_init_dev (desvio relativo máximo entre f̂₁ e
    ½‖y − Ax‖² na inicialização, em x aleatório), P_frobenius,
    P_sym_eig_min, P_sym_eig_max e recursion_dev (oráculo na inicialização,
    T = min(params.depth, 6)).

    Raises:
        MissingParameter: Se params não for LsalsaParams.
    """
    if not isinstance(params, LsalsaParams):
        raise MissingParameter("O diagnóstico exige parâmetros LSALSA")
    concat = as_concat(dictionary)
    signals = np.atleast_2d(np.asarray(signals, dtype=np.float64))
    rng = np.random.default_rng(seed)
    depth = min(params.depth, MAX_RECURSION_DEPTH)
    init = lsalsa_init(concat, params.alphas, params.mu, depth)

    f1_dev = 0.0
    for y in signals:
        x = rng.standard_normal(concat.N)
        residual = y - concat.matrix @ x
        exact = 0.5 * residual @ residual
        value = learned_f1(LagrangianProbe(init, y, x))
        f1_dev = max(f1_dev, abs(value - exact) / max(1.0, abs(exact)))

    modifier = descent_modifier(params, concat)
    report = {
        "theorem1_residual_max": max_primal_residual(params, signals),
        "f1hat_init_dev": f1_dev,
        "P_frobenius": modifier.frobenius,
        "P_sym_eig_min": modifier.eig_min,
        "P_sym_eig_max": modifier.eig_max,
        "recursion_dev": max((recursion_oracle(init, y) for y in signals), default=0.0),
    }
    logger.info("Diagnóstico: %s", report)
    return report
