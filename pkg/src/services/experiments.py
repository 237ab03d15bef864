"""Experiment runner: parameter sweeps, analytics-vs-Monte-Carlo validation and CRLB studies."""

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Any, Callable, Iterable, Optional, TextIO

import numpy as np
import pandas as pd

from src.config import get_settings
from src.config.experiment import ExperimentConfig, Fig4Mechanism
from src.core.capacity import check_rate_monotonicity
from src.core.crlb_toa import (
    RangingLink,
    WaveformShape,
    WaveformSpec,
    crlb_distance_variance,
    mean_square_bandwidth,
    simulate_toa_estimation,
)
from src.core.ec_engine import (
    direct_effective_capacity,
    effective_capacity,
    effective_capacity_spectral,
    expected_discount,
    mean_service_rate,
    mgf_state_cond,
)
from src.core.errors import ConfigError
from src.core.montecarlo import (
    McConfig,
    estimate_conditional_mgf,
    queue_delay_validation,
    summarize,
)
from src.core.params import (
    MgfMode,
    ProbMode,
    SystemParams,
    fraunhofer_distance,
    validate,
    with_decision_threshold,
    with_fraunhofer,
)
from src.core.ranging import error_probability_report
from src.core.regime_markov import (
    FAR_STATES,
    RELIABLE_STATES,
    StateId,
    s7_discrepancy,
    state_distribution,
    state_prob_cond,
)
from src.logger import get_file_logger
from src.metrics import validation_checks_total

logger = logging.getLogger(__name__)

SIGMA_FLOOR = 1e-6
CSV_FLOAT_FORMAT = "%.17g"
SPECTRAL_TOLERANCE = 1e-10
SPECTRAL_SIGMA_RANGE = (0.5, 20.0)
SPECTRAL_THETA_RANGE = (1e-3, 1.0)
DEFINITIONAL_TOLERANCE = 1e-6
SMALL_THETA = 1e-6
SMALL_THETA_TOLERANCE = 1e-3
EC_RELATIVE_TOLERANCE = 0.02


class SweepVariable(str, Enum):
    SIGMA_D = "sigma_d"
    D_MAX = "d_max"
    D_F = "d_F"  # realized by rescaling L_t at fixed L_r and lambda
    DECISION_THRESHOLD = "decision_threshold"  # scheduler switch at fixed apertures
    THETA = "theta"
    GAMMA = "gamma"  # CRLB grid, not a SystemParams field


@dataclass
class SweepSpec:
    """One swept variable over an increasing grid."""

    variable: SweepVariable
    grid: list[float]
    outputs: list[str] = field(default_factory=list)

    def __post_init__(self):
        if not self.grid:
            raise ConfigError(f"{self.variable.value} grid is empty")
        if any(b <= a for a, b in zip(self.grid, self.grid[1:])):
            raise ConfigError(f"{self.variable.value} grid must be strictly increasing")

    def point(self, params: SystemParams, value: float) -> SystemParams:
        """Parameters at one grid value."""
        if self.variable == SweepVariable.SIGMA_D:
            return validate(params.model_copy(update={"sigma_d_m": max(value, SIGMA_FLOOR)}))
        if self.variable == SweepVariable.D_MAX:
            return validate(params.model_copy(update={"d_max_m": value}))
        if self.variable == SweepVariable.D_F:
            return with_fraunhofer(params, value)
        if self.variable == SweepVariable.DECISION_THRESHOLD:
            return with_decision_threshold(params, value)
        if self.variable == SweepVariable.THETA:
            return validate(params.model_copy(update={"theta": value}))
        raise ConfigError(f"{self.variable.value} is not a link parameter")

    def points(self, params: SystemParams) -> list[SystemParams]:
        return [self.point(params, v) for v in self.grid]

    @property
    def floored(self) -> list[float]:
        """Grid values replaced by the sigma floor."""
        if self.variable != SweepVariable.SIGMA_D:
            return []
        return [v for v in self.grid if v < SIGMA_FLOOR]


@dataclass
class SweepTable:
    """A CSV table plus the '#' metadata lines written above it."""

    frame: pd.DataFrame
    metadata: list[str]

    def write(self, handle: TextIO) -> None:
        for line in self.metadata:
            handle.write(f"# {line}\n")
        self.frame.to_csv(
            handle,
            index=False,
            float_format=CSV_FLOAT_FORMAT,
            lineterminator="\n",
            na_rep="",
        )


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    expected_fail: bool = False

    @property
    def outcome(self) -> str:
        if self.expected_fail:
            return "expected-fail (paper literal)"
        return "pass" if self.passed else "FAIL"


@dataclass
class ValidationReport:
    checks: list[CheckResult]
    metadata: dict[str, Any]

    @property
    def ok(self) -> bool:
        return all(c.passed or c.expected_fail for c in self.checks)

    @property
    def failures(self) -> list[CheckResult]:
        return [c for c in self.checks if not (c.passed or c.expected_fail)]

    def to_text(self) -> str:
        width = max(len(c.name) for c in self.checks)
        lines = [f"{k}: {v}" for k, v in self.metadata.items()]
        lines += [f"{c.name.ljust(width)}  {c.outcome:<8}  {c.detail}" for c in self.checks]
        lines.append(f"{len(self.checks) - len(self.failures)}/{len(self.checks)} checks passed")
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "metadata": self.metadata,
            "checks": [{**asdict(c), "outcome": c.outcome} for c in self.checks],
        }


def _ec_column(theta: float) -> str:
    return f"ec_theta_{theta:g}"


def _consistent(params: SystemParams) -> SystemParams:
    """Same link under the mode pair the Monte Carlo oracle can confirm."""
    return params.model_copy(
        update={"prob_mode": ProbMode.GEOMETRIC_PRIOR, "mgf_mode": MgfMode.NORMALIZED}
    )


class ExperimentService:
    """Runs the figure sweeps, the validation suite and the CRLB study for one configuration."""

    def __init__(
        self,
        config: ExperimentConfig,
        samples: Optional[int] = None,
        seed: Optional[int] = None,
        workers: Optional[int] = None,
    ):
        self.settings = get_settings()
        self.config = config
        self.params = validate(config.params)
        self.workers = workers or self.settings.sweep_workers
        self.mc = McConfig.from_settings(
            samples if samples is not None else config.monte_carlo.samples,
            seed if seed is not None else config.monte_carlo.seed,
        )

    def _map(self, fn: Callable, items: Iterable) -> list:
        """Evaluate sweep points concurrently; results keep the grid order."""
        with ThreadPoolExecutor(max_workers=self.workers) as pool:
            return list(pool.map(fn, items))

    def _metadata(self, command: str, params: Optional[SystemParams] = None) -> list[str]:
        params = params or self.params
        return [
            f"command={command}",
            f"prob_mode={params.prob_mode.value} mgf_mode={params.mgf_mode.value} "
            f"ff_mgf_upper={params.ff_mgf_upper.value}",
            f"mc_samples={self.mc.n_samples} seed={self.mc.seed}",
        ]

    def _ec_values(self, params: SystemParams, thetas: list[float]) -> list[float]:
        dist = state_distribution(params)
        return [
            effective_capacity(theta, params, diagnostics=False, dist=dist).ec_bits_per_use
            for theta in thetas
        ]

    def _mc_spot_checks(
        self, frame: pd.DataFrame, rows: list[int], columns: list[tuple[str, list[SystemParams], float]]
    ) -> None:
        """Fill '<column>_mc' and '<column>_mc_se' at the given rows only."""
        for column, _, _ in columns:
            frame[f"{column}_mc"] = np.nan
            frame[f"{column}_mc_se"] = np.nan
        for row in rows:
            for column, params, theta in columns:
                point = params[row]
                estimate = summarize(point, self.mc, [theta]).ec[theta]
                frame.loc[row, f"{column}_mc"] = estimate.value
                frame.loc[row, f"{column}_mc_se"] = estimate.std_err

    @staticmethod
    def _endpoints(grid: list[float]) -> list[int]:
        return sorted({0, len(grid) - 1})

    def run_fig2(self) -> SweepTable:
        """False-far and false-near probabilities against sigma_d."""
        spec = SweepSpec(SweepVariable.SIGMA_D, self.config.fig2.sigma_grid, ["p_false_far", "p_false_near"])
        points = spec.points(self.params)

        def evaluate(point: SystemParams) -> dict:
            report = error_probability_report(point)
            mc = summarize(point, self.mc)
            return {
                "sigma_d": point.sigma_d_m,
                "p_false_far": report.p_false_far_joint,
                "p_false_near": report.p_false_near_joint,
                "p_false_far_mc": mc.false_far.value,
                "p_false_near_mc": mc.false_near.value,
                "mc_se": max(mc.false_far.std_err, mc.false_near.std_err),
            }

        frame = pd.DataFrame(self._map(evaluate, points))
        frame["sigma_d"] = spec.grid
        return SweepTable(frame, self._metadata("fig2") + self._floor_note(spec))

    def run_fig3(self) -> SweepTable:
        """EC against the cell radius d_max, one column per theta."""
        cfg = self.config.fig3
        spec = SweepSpec(SweepVariable.D_MAX, cfg.d_max_grid, [_ec_column(t) for t in cfg.thetas])
        points = spec.points(self.params)
        rows = self._map(lambda p: self._ec_values(p, cfg.thetas), points)

        frame = pd.DataFrame(rows, columns=spec.outputs)
        frame.insert(0, "d_max", spec.grid)
        if not self._paper_literal:
            self._mc_spot_checks(
                frame, self._endpoints(spec.grid), [(_ec_column(t), points, t) for t in cfg.thetas]
            )
        return SweepTable(frame, self._metadata("fig3"))

    def run_fig4(self) -> SweepTable:
        """EC against the NF/FF boundary, one column per sigma_d.

        The threshold mechanism moves only the scheduler's switch, so the analytic
        value is the joint-law EC; the aperture mechanism rescales L_t and keeps
        the state model.
        """
        cfg = self.config.fig4
        threshold_mode = cfg.mechanism == Fig4Mechanism.THRESHOLD
        variable = SweepVariable.DECISION_THRESHOLD if threshold_mode else SweepVariable.D_F
        spec = SweepSpec(variable, cfg.d_f_grid)
        theta = self.params.theta
        series = [SweepSpec(SweepVariable.SIGMA_D, [s]).point(self.params, s) for s in cfg.sigma_series]
        columns = [f"ec_sigma_{s:g}" for s in cfg.sigma_series]

        def ec(point: SystemParams) -> float:
            if threshold_mode:
                return direct_effective_capacity(theta, point)
            return effective_capacity(theta, point, diagnostics=False).ec_bits_per_use

        def evaluate(value: float) -> list[float]:
            return [ec(spec.point(base, value)) for base in series]

        frame = pd.DataFrame(self._map(evaluate, spec.grid), columns=columns)
        frame.insert(0, "d_F", spec.grid)
        frame.insert(1, "aperture_tx_m", [spec.point(self.params, v).aperture_tx_m for v in spec.grid])
        if threshold_mode or not self._paper_literal:
            checks = [
                (column, [spec.point(base, v) for v in spec.grid], theta)
                for column, base in zip(columns, series)
            ]
            self._mc_spot_checks(frame, self._endpoints(spec.grid), checks)

        if threshold_mode:
            note = (
                f"d_F column is the scheduler threshold; physical d_F={fraunhofer_distance(self.params):.6g} m "
                "and apertures fixed; EC from the joint law"
            )
        else:
            note = "d_F varied through L_t at fixed L_r and lambda"
        metadata = self._metadata("fig4") + [f"theta={theta:g} mechanism={cfg.mechanism.value}", note]
        return SweepTable(frame, metadata)

    def run_fig5(self) -> SweepTable:
        """EC against sigma_d, one column per theta."""
        cfg = self.config.fig5
        spec = SweepSpec(SweepVariable.SIGMA_D, cfg.sigma_grid, [_ec_column(t) for t in cfg.thetas])
        points = spec.points(self.params)
        rows = self._map(lambda p: self._ec_values(p, cfg.thetas), points)

        frame = pd.DataFrame(rows, columns=spec.outputs)
        frame.insert(0, "sigma_d", spec.grid)
        if not self._paper_literal:
            self._mc_spot_checks(
                frame, self._endpoints(spec.grid), [(_ec_column(t), points, t) for t in cfg.thetas]
            )
        return SweepTable(frame, self._metadata("fig5") + self._floor_note(spec))

    def run_crlb(self) -> SweepTable:
        """CRLB against the matched-filter estimator over a gamma grid."""
        cfg = self.config.crlb
        try:
            waveform = WaveformSpec(WaveformShape(cfg.shape), cfg.bandwidth_hz, cfg.rolloff)
        except ValueError as e:
            raise ConfigError(f"invalid waveform: {e}") from e
        gammas = SweepSpec(SweepVariable.GAMMA, cfg.gammas).grid
        beta2 = mean_square_bandwidth(waveform)

        def evaluate(gamma: float) -> dict:
            # Same seed at every gamma: common random numbers across the grid
            rng = np.random.default_rng(self.mc.seed)
            sim = simulate_toa_estimation(
                waveform, cfg.distance_m, gamma, cfg.sample_rate_hz, cfg.n_trials, rng, cfg.n_fft
            )
            bound = crlb_distance_variance(RangingLink(gamma, beta2))
            ratio = sim.variance / bound
            return {
                "gamma": gamma,
                "crlb_var": bound,
                "empirical_var": sim.variance,
                "ratio": ratio,
                # sample variance of n Gaussian draws has relative SE sqrt(2/(n-1))
                "ratio_se": math.sqrt(2.0 / (cfg.n_trials - 1)) * ratio,
                "bias": sim.bias,
            }

        frame = pd.DataFrame(self._map(evaluate, gammas))
        metadata = [
            "command=crlb",
            f"shape={waveform.shape.value} bandwidth_hz={waveform.bandwidth_hz:g} "
            f"sample_rate_hz={cfg.sample_rate_hz:g} distance_m={cfg.distance_m:g}",
            f"n_trials={cfg.n_trials} seed={self.mc.seed} beta2_hz2={beta2!r}",
        ]
        return SweepTable(frame, metadata)

    def run_ec(self) -> dict:
        """Single-point EC with every diagnostic."""
        theta = self.params.theta
        result = effective_capacity(theta, self.params)
        document = result.to_dict()
        document["ec_spectral"] = effective_capacity_spectral(theta, self.params, result=result)
        document["mean_service_rate"] = mean_service_rate(self.params)
        document["expected_discount"] = expected_discount(theta, self.params)
        document["params"] = json.loads(self.params.model_dump_json())
        return document

    @property
    def _paper_literal(self) -> bool:
        return self.params.prob_mode == ProbMode.PAPER_LITERAL

    @staticmethod
    def _floor_note(spec: SweepSpec) -> list[str]:
        if not spec.floored:
            return []
        values = ", ".join(f"{v:g}" for v in spec.floored)
        return [f"sigma_d={values} evaluated as {SIGMA_FLOOR:g} m in analytic and MC paths"]

    def run_validate(self) -> ValidationReport:
        """Analytics-vs-Monte-Carlo agreement plus the internal consistency checks."""
        return Validator(self).run()


class Validator:
    """Oracle-agreement suite for one configuration."""

    def __init__(self, service: ExperimentService):
        self.service = service
        self.params = _consistent(service.params)
        self.literal = service.params.prob_mode == ProbMode.PAPER_LITERAL
        self.multiplier = service.settings.validation_se_multiplier
        self.thetas = service.config.validate_.thetas
        self.checks: list[CheckResult] = []

    def _record(self, name: str, passed: bool, detail: str, expected_fail: bool = False) -> None:
        check = CheckResult(name, bool(passed), detail, expected_fail)
        self.checks.append(check)
        validation_checks_total.labels(check=name, outcome=check.outcome).inc()
        file_logger = get_file_logger()
        if file_logger is not None:
            file_logger.write_check(name, check.outcome, detail)
        log = logger.info if check.passed or expected_fail else logger.warning
        log(f"check {name}: {check.outcome} ({detail})")

    def _agreement(self, name: str, analytic: float, estimate, relative: Optional[float] = None) -> None:
        gap = abs(estimate.value - analytic)
        passed = estimate.agrees_with(analytic, self.multiplier)
        if relative is not None and analytic != 0:
            passed = passed or gap <= relative * abs(analytic)
        self._record(
            name,
            passed,
            f"analytic={analytic:.10g} mc={estimate.value:.10g} se={estimate.std_err:.3g}",
        )

    def run(self) -> ValidationReport:
        params = self.params
        mc = self.service.mc
        thetas = [float(t) for t in self.thetas]
        dist = state_distribution(params)
        summary = summarize(params, mc, thetas, self.service.settings.mc_workers)

        for state in StateId:
            self._agreement(f"state_prob_{state.name}", dist.prob(state), summary.state_probs[state - 1])

        errors = error_probability_report(params)
        self._agreement("p_false_far", errors.p_false_far_joint, summary.false_far)
        self._agreement("p_false_near", errors.p_false_near_joint, summary.false_near)

        for theta in thetas:
            result = effective_capacity(theta, params, diagnostics=False, dist=dist)
            for state in RELIABLE_STATES:
                self._agreement(
                    f"mgf_{state.name}_theta_{theta:g}",
                    result.mgfs.value(state),
                    summary.state_mgfs[theta][state - 1],
                )
            self._agreement(
                f"ec_theta_{theta:g}", result.ec_bits_per_use, summary.ec[theta], EC_RELATIVE_TOLERANCE
            )
            self._check_definitional(theta, result)
            self._check_spectral(theta, result)

        mean_service = mean_service_rate(params)
        self._agreement("mean_service", mean_service, summary.mean_service)
        self._check_small_theta(mean_service)
        self._check_spectral_configurations()
        self._check_conditional_mgf()
        self._check_s7()
        self._check_monotonicity()
        if self.service.config.validate_.include_queue:
            self._check_queue()

        metadata = {
            "prob_mode": self.service.params.prob_mode.value,
            "mgf_mode": self.service.params.mgf_mode.value,
            "mc_samples": mc.n_samples,
            "seed": mc.seed,
            "sigma_d_m": params.sigma_d_m,
        }
        return ValidationReport(self.checks, metadata)

    def _check_definitional(self, theta: float, result) -> None:
        direct = expected_discount(theta, self.params)
        gap = abs(result.log_mgf_sum - direct) / abs(direct)
        self._record(
            f"definitional_theta_{theta:g}",
            gap <= DEFINITIONAL_TOLERANCE,
            f"sum P_i M_i={result.log_mgf_sum:.12g} E[e^-theta s]={direct:.12g} rel={gap:.2e}",
        )

    def _check_spectral(self, theta: float, result) -> None:
        spectral = effective_capacity_spectral(theta, self.params, result=result)
        gap = abs(spectral - result.ec_bits_per_use)
        self._record(
            f"spectral_theta_{theta:g}",
            gap <= SPECTRAL_TOLERANCE * max(1.0, abs(result.ec_bits_per_use)),
            f"sum form={result.ec_bits_per_use:.12g} spectral={spectral:.12g}",
        )

    def _check_spectral_configurations(self) -> None:
        count = self.service.config.validate_.spectral_configurations
        if count < 1:
            return
        rng = np.random.default_rng(self.service.mc.seed)
        sigmas = rng.uniform(*SPECTRAL_SIGMA_RANGE, count)
        thetas = np.exp(rng.uniform(*np.log(SPECTRAL_THETA_RANGE), count))
        worst = 0.0
        for sigma, theta in zip(sigmas, thetas):
            point = validate(self.params.model_copy(update={"sigma_d_m": float(sigma)}))
            result = effective_capacity(float(theta), point, diagnostics=False)
            spectral = effective_capacity_spectral(float(theta), point, result=result)
            gap = abs(spectral - result.ec_bits_per_use) / max(1.0, abs(result.ec_bits_per_use))
            worst = max(worst, gap)
        self._record(
            "spectral_random_configurations",
            worst <= SPECTRAL_TOLERANCE,
            f"{count} configurations, worst gap={worst:.3e}",
        )

    def _check_small_theta(self, mean_service: float) -> None:
        ec = effective_capacity(SMALL_THETA, self.params, diagnostics=False).ec_bits_per_use
        gap = abs(ec - mean_service) / mean_service
        self._record(
            "small_theta_limit",
            gap <= SMALL_THETA_TOLERANCE,
            f"EC({SMALL_THETA:g})={ec:.10g} E[s]={mean_service:.10g} rel={gap:.2e}",
        )

    def _check_conditional_mgf(self) -> None:
        d = self.service.config.validate_.conditional_distance_m
        theta = self.params.theta
        analytic = mgf_state_cond(StateId.S1, d, theta, self.params)
        estimate = estimate_conditional_mgf(StateId.S1, d, theta, self.params, self.service.mc)
        self._agreement(f"conditional_mgf_S1_d_{d:g}", analytic, estimate)

    def _check_s7(self) -> None:
        rng = np.random.default_rng(self.service.mc.seed)
        d_f = fraunhofer_distance(self.params)
        distances = rng.uniform(d_f, self.params.d_max_m, 100)
        source = self.service.params if self.literal else self.params
        sums = sum(np.asarray(state_prob_cond(s, distances, source)) for s in FAR_STATES)
        worst = float(np.max(np.abs(sums - 1.0)))
        surplus = s7_discrepancy(self.params)
        self._record(
            "s7_consistency",
            worst <= 1e-10,
            f"max |sum_FF Pr(S_i|d) - 1|={worst:.3e} literal surplus={surplus:.3e}",
            expected_fail=self.literal and worst > 1e-10,
        )

    def _check_monotonicity(self) -> None:
        report = check_rate_monotonicity(self.params)
        self._record(
            "rate_monotonicity",
            report.monotone,
            f"worst increase={report.worst_increase:.3e} boundary jump={report.boundary_jump:.3e}",
        )

    def _check_queue(self) -> None:
        cfg = self.service.config.queue
        ec = effective_capacity(cfg.theta, self.params, diagnostics=False).ec_bits_per_use
        rng = np.random.default_rng(self.service.mc.seed)
        fraction = max((f for f in cfg.arrival_fractions if f <= 0.95), default=0.95)
        report = queue_delay_validation(self.params, cfg.theta, fraction, cfg.horizon, rng, ec=ec)
        self._record(
            f"queue_tail_{fraction:g}",
            report.decay_bound_met,
            f"slope={report.slope:.5g} bound={-0.9 * cfg.theta:.5g} stable={report.stable}",
        )


