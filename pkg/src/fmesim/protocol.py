"""Repeat-until-success Monte Carlo over the write / detect / read cycle.

Each trial runs the cycled pulse sequence once: write pulse, detection gate,
and, on a click, read-out of the heralded spin state into the output photon
qubit.  On no click the read fields re-pump the ensemble, modeled as a
perfect reset, and the next trial starts fresh; a cycle is repeated until a
click or until max_trials is exhausted (an explicit no-success result, not
an error).

Randomness is drawn from counter-based streams keyed by (master seed, sweep
row, run index, trial index), so any partitioning of runs over workers
produces bit-identical statistics.  The batched driver and the single-trial
path consume the same stream and agree exactly.

The write stage is computed once per configuration (it is trial-invariant)
and each trial only samples the click decision and the click branch.  The
write engine is selectable: "perturbative" uses the short-time expansion
(with double-excitation corrections when the cutoff allows, so multi-photon
false heralds are represented), "exact" uses the dense evolution of the
pair-creation Hamiltonian.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from math import sqrt

import numpy as np

from . import herald as herald_mod
from . import retrieval as retrieval_mod
from . import write_dynamics as wd
from .herald import DetectorModel, HeraldBranch, HeraldOutcome
from .hilbert import vacuum_state
from .retrieval import FmeQubitState, ReadParams
from .rng import TrialStream, trial_uniform_grid
from .write_dynamics import SystemParams

ENGINES = ("perturbative", "exact")

_BATCH_WINDOW = 64
_BATCH_WINDOW_MAX = 4096
_RUN_CHUNK = 8192


@dataclass(frozen=True)
class TimingSequence:
    """Cycle timing (seconds) and the retry budget."""

    tau_write: float
    detection_gate: float
    tau_read: float
    cycle_period: float
    max_trials: int

    def __post_init__(self):
        for name in ("tau_write", "detection_gate", "tau_read", "cycle_period"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")
        if self.tau_write + self.detection_gate + self.tau_read > self.cycle_period:
            raise ValueError(
                "tau_write + detection_gate + tau_read must fit in cycle_period"
            )
        if self.max_trials < 1:
            raise ValueError("max_trials must be >= 1")


@dataclass(frozen=True)
class TrialRecord:
    trial_index: int
    clicked: bool
    false_herald: bool
    output: FmeQubitState | None

    def __post_init__(self):
        if self.clicked != (self.output is not None):
            raise ValueError("output must be present exactly when clicked")


@dataclass(frozen=True)
class RunRecord:
    """Outcome of one repeat-until-success run."""

    trials_used: int
    final: TrialRecord

    @property
    def succeeded(self) -> bool:
        return self.final.clicked


@dataclass(frozen=True)
class ProtocolSetup:
    system: SystemParams
    detector: DetectorModel
    timing: TimingSequence
    read: ReadParams
    engine: str = "perturbative"
    cutoff: int = 2

    def __post_init__(self):
        if self.engine not in ENGINES:
            raise ValueError(f"engine must be one of {ENGINES}, got {self.engine!r}")
        if self.cutoff < 1:
            raise ValueError("cutoff must be >= 1")
        if self.timing.tau_write != self.system.tau_write:
            raise ValueError("timing.tau_write must equal system.tau_write")


@dataclass(frozen=True)
class ProtocolStats:
    """Aggregates over completed runs; uncertainties are 1-sigma standard
    errors from the run count."""

    n_runs: int
    n_trials: int
    n_success: int
    p_click_per_trial: float
    p_click_stderr: float
    mean_trials_to_success: float
    mean_trials_stderr: float
    false_herald_fraction: float
    mean_concurrence: float
    concurrence_stderr: float
    mean_fidelity_bell: float
    fidelity_stderr: float
    photon_yield: float

    def to_dict(self) -> dict:
        return {
            "n_runs": self.n_runs,
            "n_trials": self.n_trials,
            "n_success": self.n_success,
            "p_click_per_trial": self.p_click_per_trial,
            "p_click_stderr": self.p_click_stderr,
            "mean_trials_to_success": self.mean_trials_to_success,
            "mean_trials_stderr": self.mean_trials_stderr,
            "false_herald_fraction": self.false_herald_fraction,
            "mean_concurrence": self.mean_concurrence,
            "concurrence_stderr": self.concurrence_stderr,
            "mean_fidelity_bell": self.mean_fidelity_bell,
            "fidelity_stderr": self.fidelity_stderr,
            "photon_yield": self.photon_yield,
        }


class ProtocolEngine:
    """Trial-invariant write/herald/retrieve tables for one setup.

    Precomputes the write-stage state, the click probability, the click
    branch distribution, and the retrieved output per branch, so a trial
    reduces to two uniforms (click decision, branch selection).
    """

    def __init__(self, setup: ProtocolSetup):
        self.setup = setup
        rates = wd.derive_rates(setup.system)
        if setup.engine == "perturbative":
            order = 2 if setup.cutoff >= 2 else 1
            self.write_state = wd.perturbative_state(rates, setup.cutoff, order=order)
        else:
            h = wd.build_effective_hamiltonian(rates, setup.cutoff)
            self.write_state = wd.evolve_exact(
                h, setup.timing.tau_write, vacuum_state(setup.cutoff)
            )
        det = setup.detector
        self.branches: list[HeraldBranch] = herald_mod.click_branches(self.write_state, det)
        self.p_click = float(sum(b.probability for b in self.branches))
        if self.p_click > 0.0:
            self.branch_cdf = np.cumsum(
                [b.probability / self.p_click for b in self.branches]
            )
        else:
            self.branch_cdf = np.array([])
        self.false_fraction = (
            sum(b.probability for b in self.branches if b.false_herald) / self.p_click
            if self.p_click > 0.0
            else 0.0
        )
        self.outputs = [
            retrieval_mod.retrieve_fme(
                HeraldOutcome(
                    clicked=True,
                    conditional_state=b.state,
                    click_probability=self.p_click,
                    false_herald_probability=self.false_fraction,
                    branch=b,
                ),
                setup.read,
            )
            for b in self.branches
        ]

    def pick_branch(self, selector: float) -> int:
        idx = int(np.searchsorted(self.branch_cdf, selector, side="right"))
        return min(idx, len(self.branches) - 1)

    def record_for(self, trial_index: int, clicked: bool, selector: float) -> TrialRecord:
        if not clicked:
            return TrialRecord(trial_index, False, False, None)
        idx = self.pick_branch(selector)
        branch = self.branches[idx]
        return TrialRecord(trial_index, True, branch.false_herald, self.outputs[idx])


def run_trial(
    setup: ProtocolSetup,
    stream: TrialStream,
    trial_index: int = 0,
    engine: ProtocolEngine | None = None,
) -> TrialRecord:
    """One write/detect(/read) cycle; pure function of the stream address."""
    engine = ProtocolEngine(setup) if engine is None else engine
    u_click, u_branch = stream.uniforms(trial_index)
    clicked = u_click < engine.p_click
    return engine.record_for(trial_index, clicked, u_branch)


def run_until_success(
    setup: ProtocolSetup,
    stream: TrialStream,
    max_trials: int | None = None,
    engine: ProtocolEngine | None = None,
) -> RunRecord:
    """Repeat trials until a click; explicit no-success after max_trials."""
    engine = ProtocolEngine(setup) if engine is None else engine
    limit = setup.timing.max_trials if max_trials is None else max_trials
    if limit < 1:
        raise ValueError("max_trials must be >= 1")
    for trial in range(limit):
        record = run_trial(setup, stream, trial, engine=engine)
        if record.clicked:
            return RunRecord(trials_used=trial + 1, final=record)
    return RunRecord(trials_used=limit, final=TrialRecord(limit - 1, False, False, None))


def _run_batch(
    setup: ProtocolSetup, seed: int, row: int, run_lo: int, run_hi: int
) -> list[RunRecord]:
    """Vectorized run_until_success over a contiguous run-index range.

    Identical results to the scalar path because both read the same
    counter-based stream addresses.
    """
    engine = ProtocolEngine(setup)
    max_trials = setup.timing.max_trials
    runs = np.arange(run_lo, run_hi, dtype=np.int64)
    found: dict[int, RunRecord] = {}
    active = runs
    t0 = 0
    window = _BATCH_WINDOW
    while active.size and t0 < max_trials:
        n_t = min(window, max_trials - t0)
        u = trial_uniform_grid(seed, row, active, t0, n_t)
        hits = u[:, :, 0] < engine.p_click
        any_hit = hits.any(axis=1)
        first = np.argmax(hits, axis=1)
        for idx in np.nonzero(any_hit)[0]:
            trial = t0 + int(first[idx])
            record = engine.record_for(trial, True, float(u[idx, first[idx], 1]))
            found[int(active[idx])] = RunRecord(trials_used=trial + 1, final=record)
        active = active[~any_hit]
        t0 += n_t
        window = min(window * 2, _BATCH_WINDOW_MAX)
    for run in active:
        found[int(run)] = RunRecord(
            trials_used=max_trials,
            final=TrialRecord(max_trials - 1, False, False, None),
        )
    return [found[int(r)] for r in runs]


def _batch_worker(args) -> list[RunRecord]:
    return _run_batch(*args)


def run_protocol(
    setup: ProtocolSetup,
    seed: int,
    n_runs: int,
    row: int = 0,
    workers: int = 1,
    progress=None,
) -> list[RunRecord]:
    """All runs for one configuration; worker count never changes results.

    progress, if given, is called as progress(runs_done, n_runs) after each
    completed chunk (reporting only; results are unaffected).
    """
    if n_runs < 1:
        raise ValueError("n_runs must be >= 1")
    chunks = [
        (setup, seed, row, lo, min(lo + _RUN_CHUNK, n_runs))
        for lo in range(0, n_runs, _RUN_CHUNK)
    ]
    records: list[RunRecord] = []
    if workers <= 1 or len(chunks) == 1:
        for chunk in chunks:
            records.extend(_batch_worker(chunk))
            if progress is not None:
                progress(len(records), n_runs)
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for part in pool.map(_batch_worker, chunks):
                records.extend(part)
                if progress is not None:
                    progress(len(records), n_runs)
    return records


def from_trial_stream(records: list[TrialRecord]) -> RunRecord:
    """Collapse an ordered trial stream (one run) into its RunRecord."""
    if not records:
        raise ValueError("empty trial stream")
    for rec in records[:-1]:
        if rec.clicked:
            raise ValueError("click before the final trial of the stream")
    return RunRecord(trials_used=len(records), final=records[-1])


def aggregate(runs: list[RunRecord]) -> ProtocolStats:
    """Unbiased sample means and standard errors, reduced in run order."""
    if not runs:
        raise ValueError("aggregate requires at least one completed run")
    n_runs = len(runs)
    n_trials = sum(r.trials_used for r in runs)
    successes = [r for r in runs if r.succeeded]
    n_success = len(successes)
    clicks = n_success  # one click ends each successful run
    p_click = clicks / n_trials
    p_click_stderr = sqrt(p_click * (1.0 - p_click) / n_trials)

    if n_success:
        trials = [r.trials_used for r in successes]
        mean_trials = sum(trials) / n_success
        var = sum((t - mean_trials) ** 2 for t in trials) / max(n_success - 1, 1)
        mean_trials_stderr = sqrt(var / n_success)
        false_fraction = sum(1 for r in successes if r.final.false_herald) / n_success
        photon_yield = (
            sum(r.final.output.retrieval_efficiency for r in successes) / n_success
        )
    else:
        mean_trials = float("nan")
        mean_trials_stderr = float("nan")
        false_fraction = float("nan")
        photon_yield = float("nan")

    true_outputs = [
        r.final.output for r in successes if not r.final.false_herald
    ]
    if true_outputs:
        conc = [retrieval_mod.concurrence(q) for q in true_outputs]
        fid = [retrieval_mod.fidelity_to_bell(q) for q in true_outputs]
        mean_conc = sum(conc) / len(conc)
        mean_fid = sum(fid) / len(fid)
        n_out = len(true_outputs)
        conc_var = sum((c - mean_conc) ** 2 for c in conc) / max(n_out - 1, 1)
        fid_var = sum((f - mean_fid) ** 2 for f in fid) / max(n_out - 1, 1)
        conc_stderr = sqrt(conc_var / n_out)
        fid_stderr = sqrt(fid_var / n_out)
    else:
        mean_conc = float("nan")
        mean_fid = float("nan")
        conc_stderr = float("nan")
        fid_stderr = float("nan")

    return ProtocolStats(
        n_runs=n_runs,
        n_trials=n_trials,
        n_success=n_success,
        p_click_per_trial=p_click,
        p_click_stderr=p_click_stderr,
        mean_trials_to_success=mean_trials,
        mean_trials_stderr=mean_trials_stderr,
        false_herald_fraction=false_fraction,
        mean_concurrence=mean_conc,
        concurrence_stderr=conc_stderr,
        mean_fidelity_bell=mean_fid,
        fidelity_stderr=fid_stderr,
        photon_yield=photon_yield,
    )


def sweep(
    setups: list[ProtocolSetup], seed: int, n_runs: int, workers: int = 1
) -> list[ProtocolStats]:
    """One ProtocolStats row per setup; rows are independent (row index keys
    the random streams, so reordering setups reorders rows unchanged)."""
    if not setups:
        raise ValueError("sweep requires at least one setup")
    return [
        aggregate(run_protocol(s, seed, n_runs, row=i, workers=workers))
        for i, s in enumerate(setups)
    ]
