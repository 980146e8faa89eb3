"""Pydantic contracts shared across the package.

These are the typed records that cross module boundaries and land on disk:
process and mechanism specs read from JSON, estimand descriptions, and the
estimate / test / pooled results written by the CLI. Numerical work happens
on numpy arrays inside the sub-packages; only the boundaries are pydantic.

Order matters: types referenced as field types are defined before the models
that use them, so Pydantic resolves them without forward-ref rebuilds.
"""

from datetime import datetime
from enum import Enum
from typing import Literal

from pydantic import BaseModel, Field, computed_field, field_validator, model_validator


class MechanismKind(str, Enum):
    BERNOULLI_CONSTANT = "bernoulli-constant"
    BERNOULLI_PIECEWISE = "bernoulli-piecewise"
    HISTORY_DEPENDENT = "history-dependent"


class ProcessFamily(str, Enum):
    AR1 = "ar1"
    MA1 = "ma1"


class NoiseKind(str, Enum):
    GAUSSIAN = "gaussian-standard"
    CAUCHY = "cauchy-standard"


class TestMethod(str, Enum):
    EXACT = "exact-randomization"
    CONSERVATIVE = "conservative-clt"


class PoolMethod(str, Enum):
    POOLED_EXACT = "pooled-exact"
    POOLED_CONSERVATIVE = "pooled-conservative"
    FISHER = "fisher"


class TieRule(str, Enum):
    STRICT = "strict"
    ADD_ONE = "add-one"


class Alternative(str, Enum):
    TWO_SIDED = "two-sided"
    GREATER = "greater"
    LESS = "less"


class BoundaryRule(str, Enum):
    """Reading of the stepped-effect boundary rule for t in [p+1, p+q]."""

    LAG_MINUS_ONE = "t-p-1"
    LITERAL = "t-p+1"


class Side(str, Enum):
    BUY = "buy"
    SELL = "sell"


class ExecutionMethod(str, Enum):
    A = "A"  # control
    B = "B"  # treatment


class Violation(BaseModel):
    """One broken experiment invariant. `index` is the time label t when the
    violation is local to one observation, None for structural problems."""

    rule: str
    index: int | None = None
    message: str


class PotentialProcessSpec(BaseModel):
    """Parameters of a potential AR(1) / MA(1) outcome process.

    Arm-specific drift and scale are `mu0`/`mu1` and `sigma0`/`sigma1`. With
    `impulse` set the treatment enters as an impulse to the innovation:
    the drift is `mu + sigma * m(w)` with `m(1) = mu1`, `m(0) = mu0`, and a
    single scale (`sigma0 == sigma1`). `sigma0 = sigma1 = 0` is accepted for
    deterministic checks; `simulate` warns on such specs and power curves
    refuse them.
    """

    family: ProcessFamily = ProcessFamily.AR1
    mu0: float = 0.0
    mu1: float = 0.0
    phi: float = 0.0
    theta: float = 0.0
    sigma0: float = Field(default=1.0, ge=0.0)
    sigma1: float = Field(default=1.0, ge=0.0)
    noise: NoiseKind = NoiseKind.GAUSSIAN
    y0: float = 0.0
    mu: float = 0.0
    impulse: bool = False

    @model_validator(mode="after")
    def _impulse_has_one_scale(self) -> "PotentialProcessSpec":
        if self.impulse and self.sigma0 != self.sigma1:
            raise ValueError(
                f"impulse processes use a single scale; got sigma0={self.sigma0}, "
                f"sigma1={self.sigma1}"
            )
        return self

    @property
    def is_degenerate(self) -> bool:
        return self.sigma0 == 0.0 and self.sigma1 == 0.0

    def drift(self, w: int) -> float:
        arm = self.mu1 if w == 1 else self.mu0
        if self.impulse:
            return self.mu + self.sigma0 * arm
        return arm

    def scale(self, w: int) -> float:
        return self.sigma1 if w == 1 else self.sigma0


class Breakpoint(BaseModel):
    """Start of a probability regime. `start` is a time label t (int) or an
    ISO timestamp resolved against the experiment's calendar."""

    start: int | str
    pi: float


class MechanismSpec(BaseModel):
    """JSON form of an assignment mechanism."""

    kind: MechanismKind
    pi: float | None = None
    breakpoints: list[Breakpoint] = Field(default_factory=list)
    rule: Literal["outcome-sign"] | None = None
    base: float | None = None
    shift: float | None = None

    @model_validator(mode="after")
    def _fields_match_kind(self) -> "MechanismSpec":
        if self.kind is MechanismKind.BERNOULLI_CONSTANT and self.pi is None:
            raise ValueError("bernoulli-constant mechanism needs `pi`")
        if self.kind is MechanismKind.BERNOULLI_PIECEWISE and not self.breakpoints:
            raise ValueError("bernoulli-piecewise mechanism needs `breakpoints`")
        if self.kind is MechanismKind.HISTORY_DEPENDENT and (
            self.rule is None or self.base is None or self.shift is None
        ):
            raise ValueError("history-dependent mechanism needs `rule`, `base`, `shift`")
        return self


class EstimandSpec(BaseModel):
    """Which causal effect is estimated and tested.

    Lag/step mode uses `p` and `q`; m-period mode sets `m` together with the
    target and comparison treatment suffixes (each of length m + 1). Weights
    are always uniform: 2^-p for lag effects, 2^-(p+q) for stepped effects.
    """

    p: int = Field(default=0, ge=0)
    q: int = Field(default=0, ge=0)
    weights: Literal["uniform"] = "uniform"
    proxy: Literal["lagged-outcome"] | None = None
    standardized: bool = False
    m: int | None = Field(default=None, ge=0)
    w_target: tuple[int, ...] | None = None
    w_comparison: tuple[int, ...] | None = None

    @model_validator(mode="after")
    def _one_mode(self) -> "EstimandSpec":
        if self.m is None:
            if self.w_target is not None or self.w_comparison is not None:
                raise ValueError("treatment suffixes are only used in m-period mode")
            if self.standardized and (self.q or self.proxy):
                raise ValueError("standardized statistics are defined for q = 0 without proxy")
            return self
        if self.p or self.q or self.proxy or self.standardized:
            raise ValueError("m-period mode excludes p, q, proxy and standardized")
        if self.w_target is None or self.w_comparison is None:
            raise ValueError("m-period mode needs w_target and w_comparison")
        for name, suffix in (("w_target", self.w_target), ("w_comparison", self.w_comparison)):
            if len(suffix) != self.m + 1:
                raise ValueError(f"{name} must have length m + 1 = {self.m + 1}, got {len(suffix)}")
            if any(v not in (0, 1) for v in suffix):
                raise ValueError(f"{name} must be binary, got {suffix}")
        if self.w_target == self.w_comparison:
            raise ValueError("w_target and w_comparison must differ")
        return self

    @property
    def is_m_period(self) -> bool:
        return self.m is not None

    @property
    def horizon(self) -> int:
        """Number of leading times without a contribution (T_eff = T - horizon)."""
        return self.m if self.m is not None else self.p

    @property
    def label(self) -> str:
        if self.m is not None:
            return f"m{self.m}"
        name = "v" if self.standardized else "tau"
        tag = f"{name}_p{self.p}"
        if self.q:
            tag += f"_q{self.q}"
        if self.proxy:
            tag += "_proxy"
        return tag


class PerTimeContribution(BaseModel):
    t: int
    tau_hat: float
    sigma2_hat: float


class EstimateResult(BaseModel):
    """Temporal average of per-t contributions plus its variance-bound aggregate.

    `gamma_hat = (T - p)^-2 * sum(sigma2_hat)` so `sqrt(gamma_hat)` is the
    (conservative) standard error of `tau_bar_hat`.
    """

    estimand: EstimandSpec
    unit_id: str | None = None
    per_t: list[PerTimeContribution] = Field(default_factory=list)
    tau_bar_hat: float
    gamma_hat: float = Field(ge=0.0)
    T_effective: int
    ci_level: float = 0.95
    ci_z: float = 1.959963984540054

    @computed_field
    @property
    def p(self) -> int:
        return self.estimand.p

    @computed_field
    @property
    def q(self) -> int:
        return self.estimand.q

    @computed_field
    @property
    def ci_low(self) -> float:
        return self.tau_bar_hat - self.ci_z * self.gamma_hat ** 0.5

    @computed_field
    @property
    def ci_high(self) -> float:
        return self.tau_bar_hat + self.ci_z * self.gamma_hat ** 0.5


class TrueLagEffect(BaseModel):
    p: int = Field(ge=0)
    tau_bar: float
    T_effective: int


class SimulationSummary(BaseModel):
    """Sidecar of `tsexp simulate`: what was drawn and the true average lag effects."""

    spec: PotentialProcessSpec
    mechanism: MechanismSpec
    T: int
    seed: int
    noise_seed: int
    path_seed: int
    true_effects: list[TrueLagEffect] = Field(default_factory=list)


class ArmSummary(BaseModel):
    """Per-arm counts and mean outcomes (control = A, treatment = B)."""

    unit_id: str | None = None
    n_control: int
    n_treated: int
    mean_control: float | None
    mean_treated: float | None


class TestResult(BaseModel):
    """Outcome of one hypothesis test.

    For the exact test `statistic` is the observed average estimate and
    `p_value` has denominator `replicates` (or `replicates + 1` under the
    add-one rule). For the conservative test `statistic` is the Z-tilde value;
    both are None when every variance-bound term is zero.
    """

    __test__ = False  # not a pytest class

    method: TestMethod
    statistic: float | None
    p_value: float | None
    estimate: float | None = None
    gamma_hat: float | None = None
    replicates: int | None = None
    seed: int | None = None
    tie_rule: TieRule | None = None
    alternative: Alternative = Alternative.TWO_SIDED
    conservative: bool = False
    estimand: EstimandSpec
    unit_id: str | None = None
    note: str | None = None
    null_draws: list[float] | None = Field(default=None, exclude=True)

    @field_validator("p_value")
    @classmethod
    def _p_in_unit_interval(cls, v: float | None) -> float | None:
        if v is not None and not (0.0 <= v <= 1.0):
            raise ValueError(f"p_value must lie in [0, 1], got {v}")
        return v


class UnitSummary(BaseModel):
    unit_id: str
    tau_bar_hat: float | None = None
    gamma_hat: float | None = None
    p_value: float | None = None
    weight: float | None = None
    T_effective: int | None = None


class PooledResult(BaseModel):
    """Multi-unit result; mirrors the "Overall" row of a per-market table."""

    method: PoolMethod
    tau_bar_pooled: float | None
    statistic: float | None
    p_value: float
    weights_used: dict[str, float] = Field(default_factory=dict)
    per_unit: list[UnitSummary] = Field(default_factory=list)
    excluded_units: list[str] = Field(default_factory=list)
    replicates: int | None = None
    seed: int | None = None
    estimand: EstimandSpec | None = None
    null_draws: list[float] | None = Field(default=None, exclude=True)

    @field_validator("weights_used")
    @classmethod
    def _weights_positive(cls, v: dict[str, float]) -> dict[str, float]:
        for unit_id, weight in v.items():
            if not (weight > 0.0 and weight < float("inf")):
                raise ValueError(f"weight for unit {unit_id!r} must be positive and finite, got {weight}")
        return v


class Trade(BaseModel):
    trade_time: datetime
    price: float
    volume_fraction: float


class OrderRecord(BaseModel):
    """One randomized order and the fills that executed it.

    Numerical invariants (positive mid, fractions summing to one, fills after
    the randomization time) are checked by `slippage.check_order` so that the
    failure carries the order id.
    """

    order_id: str
    randomization_time: datetime
    side: Side
    mid_price: float
    method: ExecutionMethod
    trades: list[Trade] = Field(min_length=1)

    @property
    def treatment(self) -> int:
        return 1 if self.method is ExecutionMethod.B else 0
