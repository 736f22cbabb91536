"""Right-censored survival data with an exposure and an instrument.

The on-disk format is CSV with a mandatory header whose first four columns
are exactly ``time,status,exposure,instrument``; any further columns are
baseline covariates.  Status codes are 0 (censored) and 1 (event) in
single-cause mode, plus 2 (competing event) in competing-risk mode.

Datasets are immutable after construction, and every estimator in the
package iterates subjects in a canonical order (lexicographic in the full
record), so permuting input rows reproduces results exactly.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .errors import (
    BadStatusCode,
    InputError,
    InvalidTime,
    MissingColumn,
    NoEvents,
    NonFiniteValue,
)

SINGLE_CAUSE = "single-cause"
COMPETING_RISK = "competing-risk"

_REQUIRED = ("time", "status", "exposure", "instrument")


@dataclass(frozen=True)
class SubjectRecord:
    """One subject: follow-up time, status code, exposure, instrument and
    baseline covariates."""

    time: float
    status: int
    exposure: float
    instrument: float
    covariates: tuple[float, ...] = ()


class SurvivalDataset:
    """Columnar, immutable container for right-censored subjects.

    Parameters
    ----------
    time, status, exposure, instrument : array-like, shape (n,)
        Follow-up times, status codes and the two key regressors.
    covariates : array-like, shape (n, q), optional
        Baseline covariate columns (may be empty).
    covariate_names : sequence of str
        One name per covariate column.
    cause_mode : str
        ``"single-cause"`` (status in {0, 1}) or ``"competing-risk"``
        (status in {0, 1, 2}).
    """

    def __init__(self, time, status, exposure, instrument, covariates=None,
                 covariate_names=(), cause_mode=SINGLE_CAUSE):
        if cause_mode not in (SINGLE_CAUSE, COMPETING_RISK):
            raise InputError(f"unknown cause_mode {cause_mode!r}")
        time = np.ascontiguousarray(time, dtype=np.float64)
        status = np.ascontiguousarray(status, dtype=np.int64)
        exposure = np.ascontiguousarray(exposure, dtype=np.float64)
        instrument = np.ascontiguousarray(instrument, dtype=np.float64)
        n = time.shape[0]
        if n == 0:
            raise InputError("dataset must contain at least one subject")
        for name, col in (("time", time), ("status", status),
                          ("exposure", exposure), ("instrument", instrument)):
            if col.shape != (n,):
                raise InputError(f"column {name!r} has shape {col.shape}, expected ({n},)")
        covariate_names = tuple(str(c) for c in covariate_names)
        if covariates is None:
            covariates = np.empty((n, 0), dtype=np.float64)
        covariates = np.ascontiguousarray(covariates, dtype=np.float64)
        if covariates.ndim != 2 or covariates.shape[0] != n:
            raise InputError(f"covariates have shape {covariates.shape}, expected ({n}, q)")
        if covariates.shape[1] != len(covariate_names):
            raise InputError(
                f"{covariates.shape[1]} covariate columns but "
                f"{len(covariate_names)} names")
        if len(set(covariate_names)) != len(covariate_names):
            raise InputError("covariate names must be unique")
        for name in covariate_names:
            if name in _REQUIRED:
                raise InputError(f"covariate name {name!r} collides with a required column")

        for name, col in (("time", time), ("exposure", exposure),
                          ("instrument", instrument)):
            bad = np.flatnonzero(~np.isfinite(col))
            if bad.size:
                raise NonFiniteValue(f"column {name!r}, row {bad[0]}: non-finite value")
        bad = np.flatnonzero(~np.isfinite(covariates))
        if bad.size:
            i, j = np.unravel_index(bad[0], covariates.shape)
            raise NonFiniteValue(f"column {covariate_names[j]!r}, row {i}: non-finite value")

        allowed = (0, 1) if cause_mode == SINGLE_CAUSE else (0, 1, 2)
        bad = np.flatnonzero(~np.isin(status, allowed))
        if bad.size:
            raise BadStatusCode(
                f"row {bad[0]}: status {status[bad[0]]} not in {allowed} "
                f"({cause_mode})")
        bad = np.flatnonzero(time < 0)
        if bad.size:
            raise InvalidTime(f"row {bad[0]}: negative time {time[bad[0]]}")
        bad = np.flatnonzero((time == 0) & (status != 0))
        if bad.size:
            raise InvalidTime(
                f"row {bad[0]}: event at time 0 (time 0 is only allowed for censoring)")

        for arr in (time, status, exposure, instrument, covariates):
            arr.flags.writeable = False
        self._time = time
        self._status = status
        self._exposure = exposure
        self._instrument = instrument
        self._covariates = covariates
        self._covariate_names = covariate_names
        self._cause_mode = cause_mode
        # Canonical iteration order: lexicographic in the full record so that
        # floating-point summations are independent of input row order.
        keys = [covariates[:, j] for j in range(covariates.shape[1] - 1, -1, -1)]
        keys += [instrument, exposure, status, time]
        self._canonical_order = np.lexsort(tuple(keys))
        self._canonical_order.flags.writeable = False

    # -- basic accessors ---------------------------------------------------

    @property
    def n(self) -> int:
        return self._time.shape[0]

    @property
    def time(self) -> np.ndarray:
        return self._time

    @property
    def status(self) -> np.ndarray:
        return self._status

    @property
    def exposure(self) -> np.ndarray:
        return self._exposure

    @property
    def instrument(self) -> np.ndarray:
        return self._instrument

    @property
    def covariates(self) -> np.ndarray:
        return self._covariates

    @property
    def covariate_names(self) -> tuple[str, ...]:
        return self._covariate_names

    @property
    def cause_mode(self) -> str:
        return self._cause_mode

    @property
    def canonical_order(self) -> np.ndarray:
        """Row indices sorted by (time, status, exposure, instrument,
        covariates); all internal summations run in this order."""
        return self._canonical_order

    def covariate(self, name: str) -> np.ndarray:
        try:
            j = self._covariate_names.index(name)
        except ValueError:
            raise MissingColumn(f"no covariate named {name!r}") from None
        return self._covariates[:, j]

    def column(self, name: str) -> np.ndarray:
        """Fetch any column by name (required or covariate)."""
        base = {"time": self._time, "status": self._status,
                "exposure": self._exposure, "instrument": self._instrument}
        if name in base:
            return base[name]
        return self.covariate(name)

    def subject(self, i: int) -> SubjectRecord:
        return SubjectRecord(
            time=float(self._time[i]),
            status=int(self._status[i]),
            exposure=float(self._exposure[i]),
            instrument=float(self._instrument[i]),
            covariates=tuple(float(v) for v in self._covariates[i]),
        )

    @property
    def subjects(self) -> tuple[SubjectRecord, ...]:
        return tuple(self.subject(i) for i in range(self.n))

    @property
    def censoring_rate(self) -> float:
        return float(np.mean(self._status == 0))

    # -- construction / serialization --------------------------------------

    @classmethod
    def from_records(cls, records, covariate_names=(), cause_mode=SINGLE_CAUSE):
        records = list(records)
        cov = np.array([r.covariates for r in records], dtype=np.float64)
        if cov.size == 0:
            cov = np.empty((len(records), 0))
        return cls(
            time=[r.time for r in records],
            status=[r.status for r in records],
            exposure=[r.exposure for r in records],
            instrument=[r.instrument for r in records],
            covariates=cov,
            covariate_names=covariate_names,
            cause_mode=cause_mode,
        )

    def to_csv(self, target) -> None:
        """Write the dataset back out; floats use shortest round-trip repr
        so that parsing the output reproduces this dataset exactly."""
        own = isinstance(target, (str, bytes)) or hasattr(target, "__fspath__")
        fh = open(target, "w", newline="") if own else target
        try:
            writer = csv.writer(fh)
            writer.writerow(list(_REQUIRED) + list(self._covariate_names))
            for i in range(self.n):
                row = [repr(float(self._time[i])), str(int(self._status[i])),
                       repr(float(self._exposure[i])),
                       repr(float(self._instrument[i]))]
                row += [repr(float(v)) for v in self._covariates[i]]
                writer.writerow(row)
        finally:
            if own:
                fh.close()

    def __eq__(self, other):
        if not isinstance(other, SurvivalDataset):
            return NotImplemented
        return (self._cause_mode == other._cause_mode
                and self._covariate_names == other._covariate_names
                and np.array_equal(self._time, other._time)
                and np.array_equal(self._status, other._status)
                and np.array_equal(self._exposure, other._exposure)
                and np.array_equal(self._instrument, other._instrument)
                and np.array_equal(self._covariates, other._covariates))

    def __repr__(self):
        return (f"SurvivalDataset(n={self.n}, covariates={list(self._covariate_names)}, "
                f"cause_mode={self._cause_mode!r})")


def load_csv(source, cause_mode=SINGLE_CAUSE) -> SurvivalDataset:
    """Parse a CSV byte/text stream or path into a :class:`SurvivalDataset`.

    Blank lines are ignored.  The header is mandatory and its first four
    columns must be exactly ``time,status,exposure,instrument``.
    """
    if isinstance(source, bytes):
        fh, own = io.StringIO(source.decode("utf-8-sig")), False
    elif isinstance(source, str) and "\n" in source:
        fh, own = io.StringIO(source), False
    elif hasattr(source, "read"):
        fh, own = source, False
    else:
        fh, own = open(source, "r", newline="", encoding="utf-8-sig"), True
    try:
        reader = csv.reader(fh)
        header = None
        for row in reader:
            if not row or all(not f.strip() for f in row):
                continue
            header = [f.strip() for f in row]
            break
        if header is None:
            raise MissingColumn("empty input: no header row")
        if len(header) < len(_REQUIRED) or tuple(header[:4]) != _REQUIRED:
            missing = [c for c in _REQUIRED if c not in header[:4]]
            raise MissingColumn(
                f"header must start with {','.join(_REQUIRED)}; "
                f"got {','.join(header) or '(nothing)'}"
                + (f" (missing {', '.join(missing)})" if missing else ""))
        covariate_names = tuple(header[4:])

        times, statuses, exposures, instruments, covs = [], [], [], [], []
        for row in reader:
            if not row or all(not f.strip() for f in row):
                continue
            line = reader.line_num
            if len(row) != len(header):
                raise InputError(
                    f"line {line}: {len(row)} fields, expected {len(header)}")
            times.append(_parse_float(row[0], "time", line))
            statuses.append(_parse_status(row[1], line))
            exposures.append(_parse_float(row[2], "exposure", line))
            instruments.append(_parse_float(row[3], "instrument", line))
            covs.append([_parse_float(v, covariate_names[j], line)
                         for j, v in enumerate(row[4:])])
        if not times:
            raise InputError("no data rows found")
        cov = np.asarray(covs, dtype=np.float64)
        if cov.size == 0:
            cov = np.empty((len(times), 0))
        return SurvivalDataset(times, statuses, exposures, instruments,
                               covariates=cov, covariate_names=covariate_names,
                               cause_mode=cause_mode)
    finally:
        if own:
            fh.close()


def _parse_float(field: str, column: str, line: int) -> float:
    try:
        value = float(field)
    except ValueError:
        raise NonFiniteValue(
            f"line {line}, column {column!r}: {field!r} is not a number") from None
    if not np.isfinite(value):
        raise NonFiniteValue(
            f"line {line}, column {column!r}: non-finite value {field!r}")
    return value


def _parse_status(field: str, line: int) -> int:
    try:
        value = float(field)
    except ValueError:
        raise BadStatusCode(
            f"line {line}, column 'status': {field!r} is not a status code") from None
    if not value.is_integer():
        raise BadStatusCode(
            f"line {line}, column 'status': {field!r} is not an integer code")
    return int(value)


class EventGrid:
    """Distinct event times for one cause plus at-risk bookkeeping.

    The grid carries, in the dataset's canonical order, the index arrays the
    estimators need: for grid time ``t_k``, subjects at canonical positions
    ``risk_start[k]:`` are at risk (follow-up time >= t_k, so a subject
    censored exactly at an event time still counts), and
    ``event_positions[event_offsets[k]:event_offsets[k+1]]`` had the event.
    """

    def __init__(self, ds: SurvivalDataset, cause: int = 1):
        if cause not in (1, 2):
            raise InputError(f"cause must be 1 or 2, got {cause}")
        if cause == 2 and ds.cause_mode != COMPETING_RISK:
            raise InputError("cause-2 grid requires a competing-risk dataset")
        order = ds.canonical_order
        ts = ds.time[order]
        st = ds.status[order]
        is_event = st == cause
        times = np.unique(ts[is_event])
        if times.size == 0:
            raise NoEvents(f"no cause-{cause} events in the dataset")
        risk_start = np.searchsorted(ts, times, side="left")
        # positions (in canonical order) of the event subjects, grouped by time
        ev_pos = np.flatnonzero(is_event)
        ev_pos = ev_pos[np.argsort(ts[ev_pos], kind="stable")]
        event_offsets = np.searchsorted(ts[ev_pos], times, side="left")
        event_offsets = np.append(event_offsets, ev_pos.size)
        for arr in (times, risk_start, ev_pos, event_offsets):
            arr.flags.writeable = False
        self.times = times
        self.cause = cause
        self.n = ds.n
        self.order = order                  # canonical order (row indices)
        self.sorted_times = ts
        self.risk_start = risk_start        # (m,) int
        self.event_positions = ev_pos       # (#events,) int, canonical positions
        self.event_offsets = event_offsets  # (m+1,) int

    @property
    def m(self) -> int:
        return self.times.shape[0]

    def risk_count(self, k: int) -> int:
        return self.n - int(self.risk_start[k])

    def event_rows(self, k: int) -> frozenset[int]:
        """Original row indices of the subjects with the event at times[k]."""
        pos = self.event_positions[self.event_offsets[k]:self.event_offsets[k + 1]]
        return frozenset(int(r) for r in self.order[pos])

    def risk_rows(self, k: int) -> frozenset[int]:
        """Original row indices of the subjects at risk at times[k]."""
        return frozenset(int(r) for r in self.order[self.risk_start[k]:])

    @property
    def event_index(self) -> dict[float, frozenset[int]]:
        return {float(t): self.event_rows(k) for k, t in enumerate(self.times)}

    @property
    def risk_index(self) -> dict[float, frozenset[int]]:
        return {float(t): self.risk_rows(k) for k, t in enumerate(self.times)}


def build_event_grid(ds: SurvivalDataset, cause: int = 1) -> EventGrid:
    """Collapse tied event times of the given cause into a sorted grid.

    Raises :class:`NoEvents` when the dataset has no event of that cause.
    """
    return EventGrid(ds, cause=cause)
