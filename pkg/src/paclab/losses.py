"""Loss rules and exact task-loss evaluators.

Three tasks, three evaluators:
  distribution    -> total variation to the target distribution
  classification  -> 0/1 risk, and excess risk over the Bayes labeler
  real-valued     -> expected g(|h(x) - y|) for a pointwise loss rule g

All evaluators return exact rationals. The one place irrationals could
enter (the square-root inverse of the squared loss) is pinned to a
dyadic approximation rounded so that g(stored) <= requested level; that
keeps "risk of the zero hypothesis <= level" an exact inequality.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Tuple

from .dist import SparseDist, tv
from .errors import BadRange, EtaAboveGmax
from .families import (
    BinaryHypothesis,
    FiniteClass,
    RealHypothesis,
    RealTaskContext,
    TASK_CLASSIFICATION,
    TASK_DISTRIBUTION,
    TASK_REAL,
)

DYADIC_BITS = 40  # resolution of stored irrational inverse values


class LossRule:
    """Pointwise loss g(|h(x)-y|) with g(0)=0 and g positive somewhere."""

    name = "abstract"

    @property
    def g_max(self) -> Fraction:
        """min(sup_{a>0} g(a), 1): the largest usable level."""
        raise NotImplementedError

    def g(self, t: Fraction) -> Fraction:
        raise NotImplementedError

    def g_inverse(self, y: Fraction) -> Fraction:
        """Least t >= 0 with g(t) = y, possibly rounded down dyadically."""
        raise NotImplementedError

    def to_json_obj(self):
        return {"kind": self.name}


class AbsoluteLoss(LossRule):
    name = "absolute"

    @property
    def g_max(self) -> Fraction:
        return Fraction(1)

    def g(self, t: Fraction) -> Fraction:
        return abs(Fraction(t))

    def g_inverse(self, y) -> Fraction:
        y = Fraction(y)
        if not 0 <= y <= self.g_max:
            raise EtaAboveGmax(f"level {y} outside [0, {self.g_max}]")
        return y


class SquaredLoss(LossRule):
    name = "squared"

    @property
    def g_max(self) -> Fraction:
        return Fraction(1)

    def g(self, t: Fraction) -> Fraction:
        t = Fraction(t)
        return t * t

    def g_inverse(self, y) -> Fraction:
        # floor(sqrt(y) * 2^B) / 2^B, so g(value) <= y exactly.
        y = Fraction(y)
        if not 0 <= y <= self.g_max:
            raise EtaAboveGmax(f"level {y} outside [0, {self.g_max}]")
        scale = 1 << DYADIC_BITS
        num = y.numerator * scale * scale
        root = math.isqrt(num // y.denominator)
        return Fraction(root, scale)


@dataclass(frozen=True)
class CappedLinearLoss(LossRule):
    cap: Fraction

    @property
    def name(self):
        return f"capped-linear({self.cap})"

    @property
    def g_max(self) -> Fraction:
        return min(Fraction(self.cap), Fraction(1))

    def g(self, t: Fraction) -> Fraction:
        return min(abs(Fraction(t)), Fraction(self.cap))

    def g_inverse(self, y) -> Fraction:
        y = Fraction(y)
        if not 0 <= y <= self.g_max:
            raise EtaAboveGmax(f"level {y} outside [0, {self.g_max}]")
        return y

    def to_json_obj(self):
        c = Fraction(self.cap)
        return {"kind": "capped-linear", "cap": f"{c.numerator}/{c.denominator}"}


def loss_rule_from_json(obj: dict) -> LossRule:
    kind = obj.get("kind")
    if kind == "absolute":
        return AbsoluteLoss()
    if kind == "squared":
        return SquaredLoss()
    if kind == "capped-linear":
        return CappedLinearLoss(Fraction(obj["cap"]))
    raise BadRange(f"unknown loss rule {kind!r}")


# ---------------------------------------------------------------------------
# exact evaluators
# ---------------------------------------------------------------------------

def zero_one_risk(h: BinaryHypothesis, p: SparseDist) -> Fraction:
    """Pr_{(x,y)~p}[h(x) != y], exact."""
    out = Fraction(0)
    for atom, mass in p.items:
        x, y = atom
        if h(x) != y:
            out += mass
    return out


def bayes_labeler(p: SparseDist) -> BinaryHypothesis:
    """Label each point by its more likely label; ties go to 0."""
    mass1, mass0 = {}, {}
    for atom, mass in p.items:
        x, y = atom
        (mass1 if y == 1 else mass0)[x] = (mass1 if y == 1 else mass0).get(x, Fraction(0)) + mass
    ones = [x for x in mass1 if mass1[x] > mass0.get(x, Fraction(0))]
    return BinaryHypothesis.from_set(ones)


def zero_one_excess(h: BinaryHypothesis, p: SparseDist) -> Fraction:
    """Risk of h beyond the Bayes labeler's risk."""
    return zero_one_risk(h, p) - zero_one_risk(bayes_labeler(p), p)


def real_risk(loss: LossRule, ctx: RealTaskContext, h: RealHypothesis, p: SparseDist) -> Fraction:
    """E_{(x,b)~p} g(|h(x) - y(b)|), with bit labels decoded through ctx."""
    out = Fraction(0)
    for atom, mass in p.items:
        x, b = atom
        out += mass * loss.g(abs(h(x) - ctx.y_of_bit(b)))
    return out


def task_loss(cls_or_task, out, target: SparseDist, loss: Optional[LossRule] = None,
              real_ctx: Optional[RealTaskContext] = None) -> Fraction:
    """Uniform entry point: loss of a learner output against a target.

    Accepts either a FiniteClass (task and real context inferred) or a
    task-kind string.
    """
    if isinstance(cls_or_task, FiniteClass):
        task = cls_or_task.task
        real_ctx = real_ctx or cls_or_task.real_ctx
    else:
        task = cls_or_task
    if task == TASK_DISTRIBUTION:
        return tv(out, target)
    if task == TASK_CLASSIFICATION:
        return zero_one_excess(out, target)
    if task == TASK_REAL:
        if loss is None or real_ctx is None:
            raise BadRange("real task loss needs a loss rule and context")
        return real_risk(loss, real_ctx, out, target)
    raise BadRange(f"unknown task {task!r}")


def opt_loss(cls: FiniteClass, target: SparseDist, loss: Optional[LossRule] = None) -> Tuple[Fraction, int]:
    """Least loss over the class against the target, with the witness index."""
    best, best_i = None, -1
    for i, member in enumerate(cls.members):
        val = task_loss(cls, member, target, loss=loss)
        if best is None or val < best:
            best, best_i = val, i
    if best is None:
        raise BadRange("opt over an empty class")
    return best, best_i


def hypotheses_of_class(cls: FiniteClass) -> list:
    """Labelers induced by a class of labeled distributions: h(x)=1 exactly
    where the member puts strictly more mass on label 1 than on label 0.
    Duplicates are dropped, keeping the first (lowest-index) occurrence."""
    seen = set()
    out = []
    for member in cls.members:
        mass: dict = {}
        for atom, p in member.items:
            x, y = atom
            mass[(x, y)] = mass.get((x, y), Fraction(0)) + p
        ones = tuple(sorted(x for (x, y) in mass
                            if y == 1 and mass[(x, 1)] > mass.get((x, 0), Fraction(0))))
        if ones not in seen:
            seen.add(ones)
            out.append(BinaryHypothesis(ones))
    return out
