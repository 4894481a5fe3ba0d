"""Cohort containers for one treatment line and posterior draw storage.

Each treatment line (LoT) is modeled independently, so a cohort holds exactly
the longitudinal records, survival records, and covariates of one line.  All
containers are immutable after construction and safe to share.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

EVENT_CENSORED = 0
EVENT_DEATH = 1
EVENT_NEXT_LOT = 2


@dataclass(frozen=True)
class LongitudinalRecord:
    """One biomarker measurement: months since line start, raw value (g/L)."""

    patient_id: str
    biomarker_id: int
    time: float
    value: float


@dataclass(frozen=True)
class SurvivalRecord:
    """Observed follow-up for one patient in one treatment line.

    event: 0 = censored, 1 = death, 2 = transition to the next line.
    covariates are the preprocessed baseline covariates (already logged,
    standardized, and imputed upstream).
    """

    patient_id: str
    time: float
    event: int
    covariates: np.ndarray

    def __post_init__(self):
        object.__setattr__(
            self, "covariates", np.asarray(self.covariates, dtype=float).reshape(-1)
        )


@dataclass(frozen=True)
class LotCohort:
    """All data for one treatment line: one joint model per instance.

    `terminal` marks the last line, where transition to a next line cannot
    occur (death and censoring only).
    """

    lot_index: int
    terminal: bool
    longitudinal: tuple[LongitudinalRecord, ...]
    survival: tuple[SurvivalRecord, ...]
    covariate_names: tuple[str, ...]
    biomarker_ids: tuple[int, ...] = (1, 2)

    def __post_init__(self):
        object.__setattr__(self, "longitudinal", tuple(self.longitudinal))
        object.__setattr__(self, "survival", tuple(self.survival))
        object.__setattr__(self, "covariate_names", tuple(self.covariate_names))
        object.__setattr__(self, "biomarker_ids", tuple(self.biomarker_ids))

    @property
    def patient_ids(self) -> tuple[str, ...]:
        return tuple(rec.patient_id for rec in self.survival)

    @property
    def n_patients(self) -> int:
        return len(self.survival)

    @property
    def event_ids(self) -> tuple[int, ...]:
        return (EVENT_DEATH,) if self.terminal else (EVENT_DEATH, EVENT_NEXT_LOT)

    def records_for(self, biomarker_id: int) -> list[LongitudinalRecord]:
        return [r for r in self.longitudinal if r.biomarker_id == biomarker_id]

    def subset(self, patient_ids) -> "LotCohort":
        keep = set(patient_ids)
        return LotCohort(
            lot_index=self.lot_index,
            terminal=self.terminal,
            longitudinal=tuple(r for r in self.longitudinal if r.patient_id in keep),
            survival=tuple(r for r in self.survival if r.patient_id in keep),
            covariate_names=self.covariate_names,
            biomarker_ids=self.biomarker_ids,
        )


def validate_cohort(cohort: LotCohort) -> list[str]:
    """Check every cohort invariant; returns one message per violation.

    Violations are data, not exceptions: an empty list means the cohort is
    well formed.  The check is order-independent over record permutations.
    """
    violations = []
    seen = set()
    for rec in cohort.survival:
        if rec.patient_id in seen:
            violations.append(f"patient {rec.patient_id}: duplicate survival record")
        seen.add(rec.patient_id)
        if not rec.time > 0:
            violations.append(f"patient {rec.patient_id}: survival time must be positive")
        if rec.event not in (EVENT_CENSORED, EVENT_DEATH, EVENT_NEXT_LOT):
            violations.append(f"patient {rec.patient_id}: event must be 0, 1, or 2")
        if cohort.terminal and rec.event == EVENT_NEXT_LOT:
            violations.append(
                f"patient {rec.patient_id}: competing transition in terminal LoT"
            )
        if rec.covariates.shape != (len(cohort.covariate_names),):
            violations.append(
                f"patient {rec.patient_id}: covariate vector length "
                f"{rec.covariates.shape[0]} != {len(cohort.covariate_names)}"
            )
    known = {r.patient_id for r in cohort.survival}
    flagged_unknown = set()
    for rec in cohort.longitudinal:
        if rec.patient_id not in known and rec.patient_id not in flagged_unknown:
            violations.append(
                f"patient {rec.patient_id}: longitudinal records without a survival record"
            )
            flagged_unknown.add(rec.patient_id)
        if rec.biomarker_id not in cohort.biomarker_ids:
            violations.append(
                f"patient {rec.patient_id}: unknown biomarker id {rec.biomarker_id}"
            )
        if rec.time < 0:
            violations.append(f"patient {rec.patient_id}: negative measurement time")
        if not rec.value > 0:
            violations.append(
                f"patient {rec.patient_id}: non-positive biomarker value {rec.value!r}"
            )
    return sorted(violations)


@dataclass(frozen=True)
class PosteriorDraws:
    """Matrix of sampled unconstrained parameter states with chain tags."""

    draws: np.ndarray  # (n_total, dim)
    chains: np.ndarray  # (n_total,) chain index per row, contiguous blocks
    iterations: np.ndarray  # (n_total,) iteration index within chain
    names: tuple[str, ...]
    log_density: np.ndarray  # (n_total,)

    def __post_init__(self):
        draws = np.asarray(self.draws, dtype=float)
        object.__setattr__(self, "draws", draws)
        object.__setattr__(self, "chains", np.asarray(self.chains, dtype=int))
        object.__setattr__(self, "iterations", np.asarray(self.iterations, dtype=int))
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "log_density", np.asarray(self.log_density, dtype=float))
        if draws.ndim != 2 or draws.shape[1] != len(self.names):
            raise ValueError("draws must be (n_total, len(names))")
        if len(set(self.names)) != len(self.names):
            raise ValueError("parameter names must be unique")
        if not np.all(np.isfinite(draws)):
            raise ValueError("draws must be finite")
        # chains grouped contiguously: chain id may not reappear after a switch
        ids = self.chains
        if len(ids) and np.any(np.diff(np.flatnonzero(np.diff(ids) != 0)) == 0):
            raise ValueError("chain blocks must be contiguous")
        if len(ids):
            first = {c: np.flatnonzero(ids == c)[0] for c in np.unique(ids)}
            for c, start in first.items():
                block = np.flatnonzero(ids == c)
                if not np.array_equal(block, np.arange(start, start + len(block))):
                    raise ValueError("chain blocks must be contiguous")

    @property
    def n_total(self) -> int:
        return self.draws.shape[0]

    @property
    def dim(self) -> int:
        return self.draws.shape[1]

    @property
    def chain_ids(self) -> np.ndarray:
        return np.unique(self.chains)

    def column(self, name: str) -> np.ndarray:
        return self.draws[:, self.names.index(name)]

    def by_chain(self) -> np.ndarray:
        """Stack draws as (n_chains, n_iter, dim); chains must be equal length."""
        ids = self.chain_ids
        per = [self.draws[self.chains == c] for c in ids]
        lengths = {p.shape[0] for p in per}
        if len(lengths) != 1:
            raise ValueError("chains have unequal lengths")
        return np.stack(per)

    @classmethod
    def from_single_point(cls, vector, names, log_density=0.0, n_copies=1) -> "PosteriorDraws":
        """Degenerate draw set holding one state; used for point-parameter runs."""
        vector = np.asarray(vector, dtype=float)
        return cls(
            draws=np.tile(vector, (n_copies, 1)),
            chains=np.zeros(n_copies, dtype=int),
            iterations=np.arange(n_copies),
            names=tuple(names),
            log_density=np.full(n_copies, float(log_density)),
        )

    def to_csv(self, path) -> None:
        """Write one row per draw: chain, iter, log_density, then parameters.

        Full double precision (17 significant digits), bit-stable ordering.
        """
        with open(path, "w", newline="") as fh:
            self._write(fh)

    def _write(self, fh: io.TextIOBase) -> None:
        fh.write(",".join(["chain", "iter", "log_density", *self.names]) + "\n")
        for i in range(self.n_total):
            cells = [str(int(self.chains[i])), str(int(self.iterations[i]))]
            cells.append(format(self.log_density[i], ".17g"))
            cells.extend(format(x, ".17g") for x in self.draws[i])
            fh.write(",".join(cells) + "\n")

    @classmethod
    def from_csv(cls, path) -> "PosteriorDraws":
        with open(path, "r", newline="") as fh:
            header = fh.readline().strip().split(",")
            if header[:3] != ["chain", "iter", "log_density"]:
                raise ValueError("draws CSV must start with chain,iter,log_density")
            body = np.loadtxt(fh, delimiter=",", ndmin=2)
        if body.size == 0:
            raise ValueError("draws CSV has no rows")
        return cls(
            draws=body[:, 3:],
            chains=body[:, 0].astype(int),
            iterations=body[:, 1].astype(int),
            names=tuple(header[3:]),
            log_density=body[:, 2],
        )
