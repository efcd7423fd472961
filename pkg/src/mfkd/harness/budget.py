"""Budget-metered table lookups standing in for network training."""

from dataclasses import dataclass, field

from mfkd.space import Architecture, arch_at


@dataclass(frozen=True)
class Fidelity:
    """Which benchmark columns an evaluation reads and how it is tagged in the log."""

    tag: str
    acc_column: str
    cost_column: str


LOW = Fidelity("low", "val_acc_low", "cost_low")
LOW_LOGISTIC = Fidelity("low", "val_acc_low_logistic", "cost_low")
HIGH = Fidelity("high", "val_acc_high", "cost_high")

FIDELITIES = {"low": LOW, "high": HIGH, "low_logistic": LOW_LOGISTIC}


@dataclass(frozen=True)
class EvalRecord:
    arch: Architecture
    fidelity: str
    val_acc: float
    cost: float
    spent_after: float
    over_budget: bool = False
    index: int = -1


@dataclass
class BudgetMeter:
    """Seconds spent against a limit, plus the log of every evaluation charged to it."""

    limit: float
    spent: float = 0.0
    records: list = field(default_factory=list)

    def __post_init__(self):
        if self.spent < 0:
            raise ValueError("spent budget cannot be negative")

    @property
    def exhausted(self) -> bool:
        return self.spent >= self.limit

    @property
    def remaining(self) -> float:
        return self.limit - self.spent

    def charge(self, cost: float) -> float:
        if cost < 0:
            raise ValueError("evaluation cost cannot be negative")
        self.spent += cost
        return self.spent


def evaluate_index(bench, meter: BudgetMeter, index: int, fidelity: Fidelity) -> EvalRecord:
    index = int(index)
    if not 0 <= index < bench.size:
        raise KeyError(f"unknown architecture index {index}")
    val = float(bench.column(fidelity.acc_column)[index])
    cost = float(bench.column(fidelity.cost_column)[index])
    started_over = meter.spent >= meter.limit
    spent = meter.charge(cost)
    record = EvalRecord(arch_at(index, bench.spec), fidelity.tag, val, cost, spent,
                        over_budget=started_over or spent > meter.limit, index=index)
    meter.records.append(record)
    return record


def evaluate(bench, meter: BudgetMeter, arch, fidelity="high") -> EvalRecord:
    """Look up ``arch`` at the given fidelity and debit its cost.

    Evaluating past the limit is allowed; such records carry ``over_budget``.
    """
    if isinstance(fidelity, str):
        try:
            fidelity = FIDELITIES[fidelity]
        except KeyError:
            raise ValueError(f"unknown fidelity {fidelity!r}") from None
    return evaluate_index(bench, meter, bench.index(arch), fidelity)
