"""Competitive-ratio accounting, scaling fits and reproducible benchmark sweeps."""
from __future__ import annotations

import csv
import io
import math
import os
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from decimal import Decimal, localcontext
from fractions import Fraction
from typing import Callable, Optional, Sequence

from . import adversaries as adv
from .algorithms import (DetNpConfig, DetNpPolicy, GreedyPolicy, KillRestartPolicy, NsjfPolicy,
                         RngPolicy, UnknownNPolicy, derive_seed, run_det_nonpreemptive,
                         run_greedy, run_kill_restart, run_kill_restart_unknown_n,
                         run_rand_multi, run_rand_single)
from .baselines import BRUTE_FORCE_MAX_N, brute_force_opt_np, run_srpt
from .core import Instance, Model, Schedule, total_flow
from .engine import Policy
from .nsjf import run_nsjf

AUTO, SRPT, BRUTE_FORCE, WITNESS, SUM_P = "auto", "srpt", "brute-force", "witness", "sum-p"
BASELINES = (AUTO, SRPT, BRUTE_FORCE, WITNESS, SUM_P)


def decimal_str(value: Fraction, digits: int = 20) -> str:
    with localcontext() as ctx:
        ctx.prec = digits
        d = Decimal(value.numerator) / Decimal(value.denominator)
    return format(d, "f")


@dataclass(frozen=True)
class Ratio:
    value: Fraction
    baseline: str
    baseline_flow: Fraction
    exact: bool

    @property
    def kind(self) -> str:
        return "exact" if self.exact else "bound"

    def decimal(self, digits: int = 20) -> str:
        return decimal_str(self.value, digits)


def baseline_flow(instance: Instance, baseline: str) -> tuple[str, Fraction, bool]:
    """Returns (baseline actually used, its flow, whether it equals OPT for the ratio's model)."""
    if baseline == AUTO:
        if instance.n <= BRUTE_FORCE_MAX_N:
            baseline = BRUTE_FORCE
        elif instance.m == 1:
            baseline = SRPT
        elif "witness_flow" in instance.meta:
            baseline = WITNESS
        else:
            baseline = SUM_P
    if baseline == BRUTE_FORCE:
        return baseline, brute_force_opt_np(instance)[1], True
    if baseline == SRPT:
        flow = total_flow(instance, run_srpt(instance, migratory=True)).total
        return baseline, flow, instance.m == 1
    if baseline == WITNESS:
        if "witness_flow" not in instance.meta:
            raise ValueError("instance carries no witness; it was not generated")
        return baseline, Fraction(instance.meta["witness_flow"]), False
    if baseline == SUM_P:
        return baseline, sum((j.size for j in instance.jobs), Fraction(0)), False
    raise ValueError(f"unknown baseline {baseline!r}")


def compute_ratio(alg_flow: Fraction, instance: Instance, baseline: str = AUTO) -> Ratio:
    used, base, exact = baseline_flow(instance, baseline)
    if base == 0:
        if alg_flow != 0:
            raise ValueError("baseline flow is zero; ratio undefined")
        value = Fraction(1)
    else:
        value = Fraction(alg_flow) / base
    return Ratio(value, used, base, exact)


@dataclass(frozen=True)
class Fit:
    slope: float
    intercept: float
    r2: float


def fit_scaling(points: Sequence[tuple[float, float]]) -> Fit:
    """Least squares of ln(ratio) on ln(n)."""
    if len(points) < 3:
        raise ValueError("need at least three points")
    if any(x <= 0 or y <= 0 for x, y in points):
        raise ValueError("points must be positive")
    xs = [math.log(float(x)) for x, _ in points]
    ys = [math.log(float(y)) for _, y in points]
    mx, my = sum(xs) / len(xs), sum(ys) / len(ys)
    sxx = sum((x - mx) ** 2 for x in xs)
    if sxx == 0:
        raise ValueError("degenerate x variance")
    sxy = sum((x - mx) * (y - my) for x, y in zip(xs, ys))
    syy = sum((y - my) ** 2 for y in ys)
    slope = sxy / sxx
    r2 = 1.0 if syy == 0 else sxy * sxy / (sxx * syy)
    return Fit(slope, my - slope * mx, r2)


# -- registries ----------------------------------------------------------------

def _nsjf(instance: Instance, seed: int) -> Schedule:
    return run_nsjf(instance.jobs, instance.m)


ALGORITHMS: dict[str, Callable[[Instance, int], Schedule]] = {
    "greedy": lambda inst, seed: run_greedy(inst),
    "nsjf": _nsjf,
    "rand-single": lambda inst, seed: run_rand_single(inst, RngPolicy(seed)),
    "rand-multi": lambda inst, seed: run_rand_multi(inst, RngPolicy(seed)),
    "det-np": lambda inst, seed: run_det_nonpreemptive(inst),
    "kill-restart": lambda inst, seed: run_kill_restart(inst),
    "kill-restart-unknown": lambda inst, seed: run_kill_restart_unknown_n(inst),
    "srpt": lambda inst, seed: run_srpt(inst, migratory=True),
    "srpt-nonmig": lambda inst, seed: run_srpt(inst, migratory=False),
}

POLICIES: dict[str, Callable[[int, int], Policy]] = {
    "greedy": lambda n, m: GreedyPolicy(),
    "nsjf": lambda n, m: NsjfPolicy(),
    "det-np": lambda n, m: DetNpPolicy(DetNpConfig(n, m)),
    "kill-restart": lambda n, m: KillRestartPolicy(n, m),
    "kill-restart-unknown": lambda n, m: UnknownNPolicy(m),
}


def random_instance(n: int, m: int, seed: int, load: float = 0.9) -> Instance:
    """Sizes in {1/4, ..., 4}; releases on a quarter grid sized for the target load."""
    rng = random.Random(seed)
    horizon = max(1, math.ceil(n * 2.125 / (m * load)))
    pairs = [(Fraction(rng.randint(0, 4 * horizon), 4), Fraction(rng.randint(1, 16), 4))
             for _ in range(n)]
    return Instance.build(m, pairs, meta={"family": "random", "n": n, "m": m, "seed": seed})


FAMILIES: dict[str, Callable[[int, int, int], Instance]] = {
    "single-rand-lb": lambda n, m, seed: adv.gen_single_rand_lb(n, seed).instance,
    "multi-lb": lambda n, m, seed: adv.gen_multi_lb(n, m, seed).instance,
    "multi-restart-lb": lambda n, m, seed: adv.gen_multi_restart_lb(n, m, seed).instance,
    "random": random_instance,
}


def generate(family: str, n: int, m: int, seed: int) -> Optional[adv.GeneratedFamily]:
    """The full family object (with witness) for generator families, None for random."""
    if family == "single-rand-lb":
        if m != 1:
            raise ValueError("single-rand-lb is a single-machine family")
        return adv.gen_single_rand_lb(n, seed)
    if family == "multi-lb":
        return adv.gen_multi_lb(n, m, seed)
    if family == "multi-restart-lb":
        return adv.gen_multi_restart_lb(n, m, seed)
    if family == "random":
        return None
    raise ValueError(f"unknown family {family!r}")


# -- bench ---------------------------------------------------------------------------

COLUMNS = ["family", "alg", "n", "m", "seed", "alg_flow", "baseline", "baseline_flow", "ratio", "kind"]


def _bench_row(task: tuple) -> dict:
    alg, family, n, m, rep, seed, exact = task
    rep_seed = derive_seed(seed, rep)
    instance = FAMILIES[family](n, m, derive_seed(rep_seed, "gen"))
    schedule = ALGORITHMS[alg](instance, derive_seed(rep_seed, "alg"))
    flow = total_flow(instance, schedule).total
    ratio = compute_ratio(flow, instance)
    show = str if exact else decimal_str
    return {"family": family, "alg": alg, "n": n, "m": m, "seed": rep_seed,
            "alg_flow": show(flow), "baseline": ratio.baseline,
            "baseline_flow": show(ratio.baseline_flow),
            "ratio": str(ratio.value) if exact else ratio.decimal(), "kind": ratio.kind,
            "_key": (n, rep)}


def workers_from_env(default: int = 1) -> int:
    raw = os.environ.get("FLOWLAB_THREADS")
    if not raw:
        return default
    value = int(raw)
    if value < 1:
        raise ValueError("FLOWLAB_THREADS must be positive")
    return value


def bench(alg: str, family: str, ns: Sequence[int], m: int, reps: int, seed: int,
          exact: bool = False, workers: Optional[int] = None) -> list[dict]:
    if alg not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {alg!r}")
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}")
    tasks = [(alg, family, n, m, rep, seed, exact) for n in ns for rep in range(reps)]
    workers = workers or workers_from_env()
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_bench_row, tasks))
    else:
        rows = [_bench_row(t) for t in tasks]
    rows.sort(key=lambda r: r["_key"])
    for row in rows:
        del row["_key"]
    return rows


def rows_to_csv(rows: Sequence[dict]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=COLUMNS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def fit_csv(text: str, x: str = "n", y: str = "ratio") -> Fit:
    rows = list(csv.DictReader(io.StringIO(text)))
    return fit_scaling([(float(Fraction(r[x])), float(Fraction(r[y]))) for r in rows])


MODEL_OF = {
    "greedy": Model.NON_PREEMPTIVE, "nsjf": Model.NON_PREEMPTIVE,
    "rand-single": Model.NON_PREEMPTIVE, "rand-multi": Model.NON_PREEMPTIVE,
    "det-np": Model.NON_PREEMPTIVE, "kill-restart": Model.KILL_RESTART,
    "kill-restart-unknown": Model.KILL_RESTART, "srpt": Model.MIGRATORY,
    "srpt-nonmig": Model.PREEMPTIVE,
}
