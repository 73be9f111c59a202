"""
Forward simulation of the four-fold coincidence counting experiment and
analysis of count tables (measured or simulated).

A count table holds, for each of the four analyzer settings, the nine
outcome rows. Raw counts of +1/-1 outcomes are suppressed by the
detection efficiencies; ``correct_counts`` undoes that, after which each
setting is normalized to an outcome grid and combined into S.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Iterable, TextIO

import numpy as np

from .analyzer import DetectionModel, expected_counts, joint_probabilities
from .bell import SETTING_LABELS, SIGNS, VALUES, BellSettings, combine, expectation
from .qstate import OUTCOMES, make_noisy_state, outcome_index

log = logging.getLogger(__name__)

LAB_SETTINGS = BellSettings(alpha=-16.0, alpha_prime=4.0, beta=-6.0, beta_prime=14.0)
# The printed "beta = 6" reading, kept for comparison with the default.
LAB_SETTINGS_AS_PRINTED = BellSettings(alpha=-16.0, alpha_prime=4.0, beta=6.0, beta_prime=14.0)

CSV_FIELDS = [
    "setting_label",
    "alpha_deg",
    "beta_deg",
    "outcome_a",
    "outcome_b",
    "mean_counts",
    "n_intervals",
    "interval_s",
]

CROSS_CHECK_REL_TOL = 0.30


class DataError(ValueError):
    """Malformed or inconsistent experimental input."""


@dataclass(frozen=True)
class ExperimentConfig:
    settings: BellSettings = LAB_SETTINGS
    p: float = 0.69
    det: DetectionModel = field(default_factory=DetectionModel)
    corrected_rate: float = 520.35  # corrected coincidences per 60 s per setting
    n_intervals: int = 12
    interval_s: float = 60.0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise DataError(f"p must lie in [0, 1], got {self.p!r}")
        if int(self.n_intervals) != self.n_intervals or self.n_intervals < 2:
            raise DataError(f"n_intervals must be an integer >= 2, got {self.n_intervals!r}")
        if not (math.isfinite(self.corrected_rate) and self.corrected_rate > 0):
            raise DataError(f"corrected_rate must be positive, got {self.corrected_rate!r}")
        if not (math.isfinite(self.interval_s) and self.interval_s > 0):
            raise DataError(f"interval_s must be positive, got {self.interval_s!r}")

    @property
    def corrected_per_interval(self) -> float:
        return self.corrected_rate * self.interval_s / 60.0

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        """Build from the JSON config layout (field names as in this class)."""
        if not isinstance(data, dict):
            raise DataError("config must be a JSON object")
        unknown = set(data) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise DataError(f"unknown config field(s): {', '.join(sorted(unknown))}")
        kw = dict(data)
        try:
            if "settings" in kw:
                kw["settings"] = _settings_from_json(kw["settings"])
            if "det" in kw:
                det = kw["det"]
                if not isinstance(det, dict):
                    raise DataError("field 'det' must be an object with eta_a, eta_b")
                kw["det"] = DetectionModel(**det)
            for name in ("p", "corrected_rate", "interval_s"):
                if name in kw:
                    kw[name] = float(kw[name])
            for name in ("n_intervals", "seed"):
                if name in kw:
                    kw[name] = int(kw[name])
            return cls(**kw)
        except DataError:
            raise
        except (TypeError, ValueError) as exc:
            raise DataError(f"invalid config: {exc}") from exc

    def to_dict(self) -> dict:
        out = asdict(self)
        out["settings"] = asdict(self.settings)
        out["det"] = asdict(self.det)
        return out


def _settings_from_json(value) -> BellSettings:
    if isinstance(value, dict):
        keys = ("alpha", "alpha_prime", "beta", "beta_prime")
        missing = [k for k in keys if k not in value]
        if missing:
            raise DataError(f"settings missing field(s): {', '.join(missing)}")
        return BellSettings(*(float(value[k]) for k in keys))
    if isinstance(value, (list, tuple)) and len(value) == 4:
        return BellSettings(*map(float, value))
    raise DataError("settings must be {alpha, alpha_prime, beta, beta_prime} or a list of four angles")


@dataclass(frozen=True)
class CountRow:
    setting_label: str
    alpha_deg: float
    beta_deg: float
    outcome_a: int
    outcome_b: int
    mean_counts: float
    n_intervals: int
    interval_s: float
    intervals: tuple[float, ...] | None = None


@dataclass(frozen=True)
class CountTable:
    rows: tuple[CountRow, ...]

    def __post_init__(self):
        object.__setattr__(self, "rows", tuple(self.rows))
        for i, row in enumerate(self.rows):
            if row.mean_counts < 0 or (row.intervals and min(row.intervals) < 0):
                raise DataError(f"row {i}: counts must be nonnegative")

    def labels(self) -> list[str]:
        seen = []
        for row in self.rows:
            if row.setting_label not in seen:
                seen.append(row.setting_label)
        return seen

    def setting_rows(self, label: str) -> dict[tuple[int, int], CountRow]:
        """The nine outcome rows of one setting keyed by (outcome_a, outcome_b)."""
        rows = {}
        for row in self.rows:
            if row.setting_label != label:
                continue
            key = (row.outcome_a, row.outcome_b)
            if key in rows:
                raise DataError(f"setting {label!r}: duplicate outcome row {key}")
            rows[key] = row
        missing = [(a, b) for a in OUTCOMES for b in OUTCOMES if (a, b) not in rows]
        if missing:
            raise DataError(f"setting {label!r}: missing outcome rows {missing}")
        angles = {(r.alpha_deg, r.beta_deg) for r in rows.values()}
        if len(angles) != 1:
            raise DataError(f"setting {label!r}: rows disagree on analyzer angles {sorted(angles)}")
        return rows

    def angles(self, label: str) -> tuple[float, float]:
        row = next(iter(self.setting_rows(label).values()))
        return row.alpha_deg, row.beta_deg

    def mean_grid(self, label: str) -> np.ndarray:
        grid = np.zeros((3, 3))
        for (a, b), row in self.setting_rows(label).items():
            grid[outcome_index(a), outcome_index(b)] = row.mean_counts
        return grid

    def interval_grid(self, label: str) -> np.ndarray | None:
        """Per-interval counts as an (n, 3, 3) array, or None when only means are stored."""
        rows = self.setting_rows(label)
        lengths = {len(r.intervals) if r.intervals else 0 for r in rows.values()}
        if lengths == {0}:
            return None
        if len(lengths) != 1:
            raise DataError(f"setting {label!r}: rows carry different numbers of intervals")
        n = lengths.pop()
        out = np.zeros((n, 3, 3))
        for (a, b), row in rows.items():
            out[:, outcome_index(a), outcome_index(b)] = row.intervals
        return out

    def n_intervals(self, label: str) -> int:
        counts = {r.n_intervals for r in self.setting_rows(label).values()}
        if len(counts) != 1:
            raise DataError(f"setting {label!r}: rows disagree on n_intervals")
        return counts.pop()

    def settings(self) -> BellSettings:
        """Recover (a, a', b, b') from the four labelled settings, checking consistency."""
        labels = set(self.labels())
        if labels != set(SETTING_LABELS):
            raise DataError(
                f"expected setting labels {list(SETTING_LABELS)}, got {sorted(labels)}"
            )
        ang = {label: self.angles(label) for label in SETTING_LABELS}
        settings = BellSettings(
            alpha=ang["ab"][0],
            alpha_prime=ang["a'b"][0],
            beta=ang["ab"][1],
            beta_prime=ang["ab'"][1],
        )
        for label, pair in settings.pairs().items():
            if not np.allclose(ang[label], pair, atol=1e-9):
                raise DataError(
                    f"setting {label!r} has angles {ang[label]}, inconsistent with {pair} "
                    "implied by the other settings"
                )
        return settings

    def to_csv(self, stream: TextIO) -> None:
        n_cols = max((len(r.intervals) for r in self.rows if r.intervals), default=0)
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(CSV_FIELDS + [f"c{k + 1}" for k in range(n_cols)])
        for r in self.rows:
            line = [
                r.setting_label,
                _fmt(r.alpha_deg),
                _fmt(r.beta_deg),
                _fmt_outcome(r.outcome_a),
                _fmt_outcome(r.outcome_b),
                _fmt(r.mean_counts),
                str(r.n_intervals),
                _fmt(r.interval_s),
            ]
            extra = [_fmt(c) for c in r.intervals] if r.intervals else []
            writer.writerow(line + extra + [""] * (n_cols - len(extra)))

    @classmethod
    def from_csv(cls, stream: TextIO) -> "CountTable":
        reader = csv.reader(stream)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError("count CSV is empty") from None
        missing = [f for f in CSV_FIELDS if f not in header]
        if missing:
            raise DataError(f"count CSV header missing column(s): {', '.join(missing)}")
        pos = {name: header.index(name) for name in CSV_FIELDS}
        interval_cols = sorted(
            (int(h[1:]), i) for i, h in enumerate(header) if h.startswith("c") and h[1:].isdigit()
        )
        rows = []
        for lineno, raw in enumerate(reader, start=2):
            if not any(cell.strip() for cell in raw):
                continue
            if len(raw) < len(header):
                raw = raw + [""] * (len(header) - len(raw))

            def get(name, conv, _raw=raw, _lineno=lineno):
                text = _raw[pos[name]].strip()
                try:
                    return conv(text)
                except (TypeError, ValueError):
                    raise DataError(f"line {_lineno}, field {name!r}: cannot parse {text!r}") from None

            intervals = [raw[i].strip() for _, i in interval_cols]
            intervals = [c for c in intervals if c]
            try:
                parsed = tuple(float(c) for c in intervals) if intervals else None
            except ValueError:
                raise DataError(f"line {lineno}: per-interval counts must be numeric") from None
            row = CountRow(
                setting_label=get("setting_label", _label),
                alpha_deg=get("alpha_deg", _finite),
                beta_deg=get("beta_deg", _finite),
                outcome_a=get("outcome_a", _outcome),
                outcome_b=get("outcome_b", _outcome),
                mean_counts=get("mean_counts", _finite),
                n_intervals=get("n_intervals", int),
                interval_s=get("interval_s", _finite),
                intervals=parsed,
            )
            if row.mean_counts < 0:
                raise DataError(f"line {lineno}, field 'mean_counts': counts must be nonnegative")
            if parsed and len(parsed) != row.n_intervals:
                raise DataError(
                    f"line {lineno}: {len(parsed)} interval columns but n_intervals={row.n_intervals}"
                )
            rows.append(row)
        if not rows:
            raise DataError("count CSV has no data rows")
        return cls(tuple(rows))


def _label(text: str) -> str:
    if not text:
        raise ValueError("empty label")
    return text


def _finite(text: str) -> float:
    value = float(text)
    if not math.isfinite(value):
        raise ValueError("non-finite")
    return value


def _outcome(text: str) -> int:
    value = int(text.replace("+", ""))
    if value not in OUTCOMES:
        raise ValueError("outcome code")
    return value


def _fmt(x: float) -> str:
    # shortest repr that round-trips exactly
    return repr(float(x))


def _fmt_outcome(o: int) -> str:
    return f"{o:+d}" if o else "0"


def _split_rngs(seed: int, n: int) -> list[np.random.Generator]:
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def simulate_counts(cfg: ExperimentConfig) -> CountTable:
    """Draw Poisson raw counts for every setting, outcome, and interval.

    Each setting gets its own child generator split from ``cfg.seed``, so
    the result does not depend on evaluation order.
    """
    state = make_noisy_state(cfg.p)
    rows = []
    pairs = cfg.settings.pairs()
    for label, rng in zip(SETTING_LABELS, _split_rngs(cfg.seed, len(SETTING_LABELS))):
        alpha, beta = pairs[label]
        grid = joint_probabilities(state, alpha, beta)
        means = expected_counts(grid, cfg.det, cfg.corrected_per_interval)
        draws = rng.poisson(means, size=(cfg.n_intervals, 3, 3)).astype(float)
        for a in OUTCOMES:
            for b in OUTCOMES:
                series = draws[:, outcome_index(a), outcome_index(b)]
                rows.append(
                    CountRow(
                        setting_label=label,
                        alpha_deg=float(alpha),
                        beta_deg=float(beta),
                        outcome_a=a,
                        outcome_b=b,
                        mean_counts=float(series.mean()),
                        n_intervals=cfg.n_intervals,
                        interval_s=cfg.interval_s,
                        intervals=tuple(series.tolist()),
                    )
                )
    return CountTable(tuple(rows))


def efficiency_factor(outcome_a: int, outcome_b: int, det: DetectionModel) -> float:
    return float(det.factors()[outcome_index(outcome_a), outcome_index(outcome_b)])


def correct_counts(table: CountTable, det: DetectionModel) -> CountTable:
    """Divide every row by eta_A^[A != 0] * eta_B^[B != 0] (means and per-interval counts)."""
    rows = []
    for row in table.rows:
        f = efficiency_factor(row.outcome_a, row.outcome_b, det)
        intervals = tuple(c / f for c in row.intervals) if row.intervals else None
        rows.append(replace(row, mean_counts=row.mean_counts / f, intervals=intervals))
    return CountTable(tuple(rows))


def probability_table(corrected: CountTable) -> dict[str, np.ndarray]:
    """Normalize each setting's corrected counts into an outcome grid."""
    grids = {}
    for label in corrected.labels():
        counts = corrected.mean_grid(label)
        total = counts.sum()
        if total <= 0:
            raise DataError(f"setting {label!r}: corrected total is zero")
        grids[label] = counts / total
    return grids


@dataclass(frozen=True)
class BellEstimate:
    S: float
    sigma: float
    E: dict[str, tuple[float, float]]
    method: str
    settings: BellSettings
    efficiencies: tuple[float, float]
    S_signed: float
    cross_check_sigma: float | None = None

    def to_dict(self) -> dict:
        return {
            "S": self.S,
            "sigma": self.sigma,
            "E": {k: {"value": v, "sigma": s} for k, (v, s) in self.E.items()},
            "method": self.method,
            "settings": asdict(self.settings),
            "efficiencies": {"eta_a": self.efficiencies[0], "eta_b": self.efficiencies[1]},
            "S_signed": self.S_signed,
            "cross_check_sigma": self.cross_check_sigma,
        }


def _correlation_from_counts(corrected) -> np.ndarray:
    """E from corrected count grids, vectorized over leading axes."""
    total = corrected.sum(axis=(-2, -1))
    signed = np.einsum("i,...ij,j->...", VALUES, corrected, VALUES)
    with np.errstate(invalid="ignore", divide="ignore"):
        return signed / total


def _poisson_sigma_E(raw_mean: np.ndarray, factors: np.ndarray, n_intervals: int) -> float:
    """Delta-method error of E when each raw interval average is Poisson/n."""
    corrected = raw_mean / factors
    total = corrected.sum()
    e = float(VALUES @ corrected @ VALUES / total)
    weight = np.outer(VALUES, VALUES)
    grad = (weight - e) / total
    var_corr = raw_mean / n_intervals / factors**2
    return float(np.sqrt(np.sum(grad**2 * var_corr)))


def estimate_bell(
    table: CountTable,
    det: DetectionModel,
    method: str = "bootstrap",
    n_boot: int = 1000,
    seed: int = 0,
) -> BellEstimate:
    """Combine four settings into S with an uncertainty.

    Args:
        table: raw counts for the settings ab, ab', a'b, a'b'.
        det: efficiencies used to correct the raw counts.
        method: ``"bootstrap"`` (resample intervals), ``"interval-scatter"``
            (spread of per-interval correlations), or ``"poisson-propagation"``.
            Bootstrap and scatter need per-interval counts and fall back to
            Poisson propagation without them.
        n_boot: bootstrap replicates.
        seed: bootstrap seed.
    """
    if method not in ("bootstrap", "interval-scatter", "poisson-propagation"):
        raise ValueError(f"unknown uncertainty method {method!r}")
    settings = table.settings()
    factors = det.factors()
    probs = probability_table(correct_counts(table, det))
    e_values = {label: expectation(probs[label]) for label in SETTING_LABELS}
    s_signed = combine(e_values)

    poisson_e = {
        label: _poisson_sigma_E(table.mean_grid(label), factors, table.n_intervals(label))
        for label in SETTING_LABELS
    }
    poisson_s = float(np.sqrt(sum(v**2 for v in poisson_e.values())))

    intervals = {label: table.interval_grid(label) for label in SETTING_LABELS}
    if method != "poisson-propagation" and any(v is None for v in intervals.values()):
        log.warning("no per-interval counts; falling back to Poisson propagation")
        method = "poisson-propagation"

    if method == "poisson-propagation":
        sigma_e, sigma = poisson_e, poisson_s
    elif method == "interval-scatter":
        sigma_e = {}
        for label in SETTING_LABELS:
            per_interval = _correlation_from_counts(intervals[label] / factors)
            per_interval = per_interval[np.isfinite(per_interval)]
            sigma_e[label] = float(np.std(per_interval, ddof=1) / np.sqrt(per_interval.size))
        sigma = float(np.sqrt(sum(v**2 for v in sigma_e.values())))
    else:
        boot_e = {}
        for label, rng in zip(SETTING_LABELS, _split_rngs(seed, len(SETTING_LABELS))):
            counts = intervals[label]
            n = counts.shape[0]
            idx = rng.integers(0, n, size=(n_boot, n))
            resampled = counts[idx].mean(axis=1) / factors
            boot_e[label] = _correlation_from_counts(resampled)
        sigma_e = {label: float(np.nanstd(v, ddof=1)) for label, v in boot_e.items()}
        boot_s = sum(SIGNS[label] * boot_e[label] for label in SETTING_LABELS)
        sigma = float(np.nanstd(boot_s, ddof=1))

    if method != "poisson-propagation" and poisson_s > 0:
        rel = abs(sigma - poisson_s) / poisson_s
        if rel > CROSS_CHECK_REL_TOL:
            log.warning(
                "%s sigma %.4g differs from Poisson propagation %.4g by %.0f%%",
                method, sigma, poisson_s, 100 * rel,
            )

    return BellEstimate(
        S=abs(s_signed),
        sigma=sigma,
        E={label: (e_values[label], sigma_e[label]) for label in SETTING_LABELS},
        method=method,
        settings=settings,
        efficiencies=(det.eta_a, det.eta_b),
        S_signed=s_signed,
        cross_check_sigma=poisson_s,
    )


def table_from_means(
    label: str,
    alpha: float,
    beta: float,
    means: dict[tuple[int, int], float],
    n_intervals: int = 12,
    interval_s: float = 60.0,
) -> CountTable:
    """Single-setting table from interval-averaged counts keyed by (outcome_a, outcome_b)."""
    rows = [
        CountRow(label, float(alpha), float(beta), a, b, float(means[(a, b)]), n_intervals, interval_s)
        for a in OUTCOMES
        for b in OUTCOMES
    ]
    return CountTable(tuple(rows))


def concat(tables: Iterable[CountTable]) -> CountTable:
    return CountTable(tuple(row for t in tables for row in t.rows))
