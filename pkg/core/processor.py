"""Pipeline orchestration: estimate, cover, quasi-balls, partition, extend, audit."""

import json
import math
import threading
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np

from config import settings
from config.registry import AUDITS, DEFAULT_AUDITS, GENERATORS, INPUT_FUNCTIONS, audit_ceiling
from config.settings import (
    AUTO_DELTA_THETA_CEILING,
    DEFAULT_ALPHA,
    DEFAULT_BALL_SAMPLE_CENTERS,
    DEFAULT_F_SAMPLES,
    DEFAULT_P,
    DEFAULT_SEED,
    EXIT_AUDIT_FAILURE,
    EXIT_ERROR,
    EXIT_PASS,
    validate_alpha,
    validate_delta,
    validate_epsilon,
    validate_p,
    validate_threads,
)
from core.audits import (
    AuditReport,
    audit_ball_lemmas,
    audit_gradient_inequality,
    audit_lp_bounds,
    audit_maximal_boundedness,
    audit_oscillation_lemma,
    audit_scale_bounds,
    audit_sharp_bounds,
    audit_sharp_gradient,
    audit_trace_equivalence,
    default_ball_samples,
    family_subset_pairs,
    plain_json,
)
from core.errors import ConfigError, StageError, WhitneyExtError
from core.extension import ExtensionBundle, canonical_gradient
from core.generators import generate
from core.partition import Partition, verify_partition
from core.quasi_balls import QuasiBallFamily, verify_family
from core.session_manager import ConstructionSession
from core.space import (
    MetricMeasureSpace,
    RegularSubset,
    ScalarField,
    SpaceParams,
    choose_regularity_scale,
    estimate_regularity,
)
from core.whitney import WhitneyCover, verify_cover
from utils.file_utils import (
    ensure_directory_exists,
    read_mask,
    read_space,
    write_audit_reports,
    write_cover,
    write_family,
    write_field,
    write_json,
    write_mask,
    write_partition,
    write_space,
)
from utils.logging_utils import StageTimer
from utils.system_utils import check_available_memory_for_space, get_system_info


class PipelineState:
    """Thread-safe pipeline state: whether a run is active and whether it should stop."""

    def __init__(self):
        self._lock = threading.Lock()
        self._running = False
        self._should_stop = False

    def set_running(self, running: bool) -> None:
        with self._lock:
            self._running = running
            if not running:
                self._should_stop = False

    def is_running(self) -> bool:
        with self._lock:
            return self._running

    def stop(self) -> None:
        """Signal that the run should stop before its next stage."""
        with self._lock:
            self._should_stop = True

    def should_stop(self) -> bool:
        with self._lock:
            return self._should_stop


# ---------------------------------------------------------------------------
# Run configuration
# ---------------------------------------------------------------------------

@dataclass
class RunConfig:
    """One pipeline run, parsed from a JSON document."""

    space: Dict[str, Any]
    mask: Any = None
    p: float = DEFAULT_P
    alpha: float = DEFAULT_ALPHA
    delta: Any = "auto"
    epsilon: Any = "auto"
    input_function: Dict[str, Any] = field(default_factory=lambda: {"name": "random", "params": {}})
    audits: List[str] = field(default_factory=lambda: list(DEFAULT_AUDITS))
    output_dir: str = ""
    ceilings: Dict[str, float] = field(default_factory=dict)
    seed: int = DEFAULT_SEED
    f_samples: int = DEFAULT_F_SAMPLES
    refine: bool = False
    threads: Optional[int] = None
    sequential: bool = False

    @classmethod
    def from_dict(cls, data: Dict[str, Any], base_dir: Optional[Path] = None) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError("run configuration must be a JSON object")
        unknown = set(data) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise ConfigError(f"unknown configuration keys: {', '.join(sorted(unknown))}")
        if "space" not in data:
            raise ConfigError("configuration needs a 'space' source")

        ok, p = validate_p(data.get("p", DEFAULT_P))
        if not ok:
            raise ConfigError(f"p > 1 required, got {data.get('p')}")
        ok, alpha = validate_alpha(data.get("alpha", DEFAULT_ALPHA))
        if not ok:
            raise ConfigError(f"alpha must be positive, got {data.get('alpha')}")
        ok, delta = validate_delta(data.get("delta", "auto"))
        if not ok:
            raise ConfigError(f"delta must be 'auto' or positive, got {data.get('delta')}")
        ok, epsilon = validate_epsilon(data.get("epsilon", "auto"))
        if not ok:
            raise ConfigError(f"epsilon must be 'auto' or in (0, 1], got {data.get('epsilon')}")

        threads = data.get("threads")
        if threads is not None:
            ok, threads = validate_threads(threads)
            if not ok:
                raise ConfigError(f"threads must be a positive integer, got {data.get('threads')}")

        base_dir = Path(base_dir) if base_dir else Path.cwd()
        config = cls(
            space=_resolve_source(data["space"], base_dir, "space"),
            mask=_resolve_mask_source(data.get("mask"), base_dir),
            p=p,
            alpha=alpha,
            delta=delta,
            epsilon=epsilon,
            input_function=dict(data.get("input_function") or {"name": "random", "params": {}}),
            audits=list(data.get("audits", DEFAULT_AUDITS)),
            output_dir=str(data.get("output_dir") or settings.get_output_directory()),
            ceilings=dict(data.get("ceilings") or {}),
            seed=int(data.get("seed", DEFAULT_SEED)),
            f_samples=int(data.get("f_samples", DEFAULT_F_SAMPLES)),
            refine=bool(data.get("refine", False)),
            threads=threads,
            sequential=bool(data.get("sequential", False)),
        )
        config.validate()
        return config

    @classmethod
    def load(cls, path: str) -> "RunConfig":
        try:
            with open(path, "r", encoding="utf-8") as handle:
                data = json.load(handle)
        except (IOError, OSError) as e:
            raise ConfigError(f"cannot read configuration {path}: {e}")
        except json.JSONDecodeError as e:
            raise ConfigError(f"configuration {path} is not valid JSON: {e}")
        return cls.from_dict(data, base_dir=Path(path).resolve().parent)

    def validate(self) -> None:
        for name in self.audits:
            if name not in AUDITS:
                raise ConfigError(f"unknown audit '{name}'")
        for name in self.ceilings:
            if name not in AUDITS:
                raise ConfigError(f"ceiling given for unknown audit '{name}'")
        name = self.input_function.get("name")
        if name not in INPUT_FUNCTIONS:
            raise ConfigError(f"unknown input function '{name}'")
        if self.f_samples < 0:
            raise ConfigError("f_samples must be non-negative")

    def with_overrides(self, **overrides) -> "RunConfig":
        """Copy with command-line overrides applied (None values are ignored)."""
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["p"] = "inf" if math.isinf(self.p) else self.p
        return data


def _resolve_source(source: Any, base_dir: Path, what: str) -> Dict[str, Any]:
    if isinstance(source, str):
        source = {"file": source}
    if not isinstance(source, dict):
        raise ConfigError(f"{what} source must be a generator or a file")
    if "file" in source:
        path = Path(source["file"])
        if not path.is_absolute():
            path = base_dir / path
        if not path.exists():
            raise ConfigError(f"{what} file not found: {path}")
        return {"file": str(path)}
    generator = source.get("generator")
    if generator not in GENERATORS:
        raise ConfigError(f"unknown generator '{generator}'")
    return {"generator": generator, "params": dict(source.get("params") or {})}


def _resolve_mask_source(source: Any, base_dir: Path) -> Any:
    if source is None or source in ("generator", "all"):
        return source
    if isinstance(source, list):
        return {"ids": [int(i) for i in source]}
    if isinstance(source, dict) and "ids" in source:
        return {"ids": [int(i) for i in source["ids"]]}
    return _resolve_source(source, base_dir, "mask")


# ---------------------------------------------------------------------------
# Stage helpers shared with the file-based subcommands
# ---------------------------------------------------------------------------

def load_space_source(source: Dict[str, Any], logger=None) -> Tuple[MetricMeasureSpace, Optional[np.ndarray], Optional[float]]:
    """Space, generator mask (if any) and recommended delta (if any) for a space source."""
    if "file" in source:
        return read_space(source["file"], logger=logger), None, None
    generated = generate(source["generator"], logger=logger, **source.get("params", {}))
    return generated.space, generated.mask, generated.recommended_delta


def resolve_mask(space: MetricMeasureSpace, generated_mask: Optional[np.ndarray], source: Any) -> np.ndarray:
    if source is None or source == "generator":
        if generated_mask is None:
            raise ConfigError("the space source provides no subset; give a mask")
        return generated_mask
    if source == "all":
        return np.ones(space.n, dtype=bool)
    if "ids" in source:
        return space.mask_from_ids(source["ids"])
    return read_mask(source["file"], space.n)


def resolve_regularity(space: MetricMeasureSpace, mask: np.ndarray, delta: Any, logger=None) -> RegularSubset:
    """estimate_regularity at a fixed delta, or the largest admissible scale for "auto"."""
    if delta == "auto":
        return choose_regularity_scale(space, mask, AUTO_DELTA_THETA_CEILING, logger=logger)
    return estimate_regularity(space, mask, float(delta), logger=logger)


def make_input_function(space: MetricMeasureSpace, mask: np.ndarray, choice: Dict[str, Any],
                        seed: int = DEFAULT_SEED) -> ScalarField:
    """The named input function u on S."""
    name = choice.get("name")
    if name not in INPUT_FUNCTIONS:
        raise ConfigError(f"unknown input function '{name}'")
    given = dict(choice.get("params") or {})
    params = {**INPUT_FUNCTIONS[name]["parameters"], **given}
    ids = np.flatnonzero(mask)

    if name == "constant":
        values = np.full(ids.size, float(params["c"]))
    elif name == "coordinate":
        if not space.is_euclidean:
            raise ConfigError("the coordinate input function needs a Euclidean space")
        axis = int(params["axis"])
        if not 0 <= axis < space.coords.shape[1]:
            raise ConfigError(f"axis {axis} out of range for {space.coords.shape[1]}-dimensional points")
        values = space.coords[ids, axis].astype(np.float64)
    elif name == "random":
        rng = np.random.default_rng(int(given.get("seed", seed)))
        values = rng.uniform(-1.0, 1.0, size=ids.size)
    else:
        values = np.isin(ids, np.asarray(params["ids"], dtype=np.int64)).astype(np.float64)
    return ScalarField(ids, values)


def random_fields(ids: np.ndarray, count: int, seed: int, stream: int) -> List[ScalarField]:
    """count seeded fields uniform in [-1, 1] on ids; stream separates independent uses of one seed."""
    rng = np.random.default_rng([int(seed), int(stream)])
    return [ScalarField(ids, rng.uniform(-1.0, 1.0, size=ids.size)) for _ in range(count)]


def build_bundle(space: MetricMeasureSpace, mask: np.ndarray, cover: WhitneyCover, family: QuasiBallFamily,
                 partition: Partition, u: ScalarField) -> ExtensionBundle:
    """Extend u and its canonical generalized gradient."""
    g = canonical_gradient(space, mask, u)
    return ExtensionBundle.build(space, mask, cover, family, partition, u, g)


@dataclass
class AuditContext:
    space: MetricMeasureSpace
    mask: np.ndarray
    params: SpaceParams
    bundle: ExtensionBundle
    p: float
    alpha: float
    seed: int
    f_samples: int
    ceilings: Dict[str, float]


def _run_scale_bounds(ctx: AuditContext, ceiling):
    return audit_scale_bounds(ctx.space, ctx.params, seed=ctx.seed, ceiling=ceiling)


def _run_gradient_inequality(ctx: AuditContext, ceiling):
    return audit_gradient_inequality(ctx.space, ctx.bundle, ceiling=ceiling)


def _run_oscillation_lemma(ctx: AuditContext, ceiling):
    pairs = family_subset_pairs(ctx.bundle.family, seed=ctx.seed)
    return audit_oscillation_lemma(ctx.space, ctx.mask, ctx.bundle.u, ctx.bundle.g, pairs,
                                   seed=ctx.seed, ceiling=ceiling)


def _run_lp_bounds(ctx: AuditContext, ceiling):
    samples = random_fields(np.flatnonzero(ctx.mask), ctx.f_samples, ctx.seed, stream=1)
    return audit_lp_bounds(ctx.space, ctx.mask, ctx.bundle, samples, ctx.p, ceiling=ceiling)


def _run_sharp_bounds(ctx: AuditContext, ceiling):
    return audit_sharp_bounds(ctx.space, ctx.mask, ctx.bundle, ctx.alpha, ceiling=ceiling,
                              restriction_ceiling=audit_ceiling("sharp_bounds", key="restriction_ceiling"))


def _run_ball_lemmas(ctx: AuditContext, ceiling):
    samples = default_ball_samples(ctx.space, ctx.mask, ctx.bundle.cover, DEFAULT_BALL_SAMPLE_CENTERS, seed=ctx.seed)
    return audit_ball_lemmas(ctx.space, ctx.mask, ctx.bundle, ctx.alpha, samples, ceiling=ceiling)


def _run_trace_equivalence(ctx: AuditContext, ceiling):
    return audit_trace_equivalence(ctx.space, ctx.mask, ctx.bundle, ctx.p, ctx.alpha, ceiling=ceiling,
                                   lower_ceiling=audit_ceiling("trace_equivalence", key="lower_ceiling"))


def _run_maximal_boundedness(ctx: AuditContext, ceiling):
    samples = [ctx.bundle.u_tilde] + random_fields(np.arange(ctx.space.n), ctx.f_samples, ctx.seed, stream=2)
    return audit_maximal_boundedness(ctx.space, samples, ctx.p, ceiling=ceiling)


def _run_sharp_gradient(ctx: AuditContext, ceiling):
    return audit_sharp_gradient(ctx.space, ctx.bundle.u_tilde, ceiling=ceiling)


AUDIT_RUNNERS: Dict[str, Callable[[AuditContext, Optional[float]], AuditReport]] = {
    "scale_bounds": _run_scale_bounds,
    "gradient_inequality": _run_gradient_inequality,
    "oscillation_lemma": _run_oscillation_lemma,
    "lp_bounds": _run_lp_bounds,
    "sharp_bounds": _run_sharp_bounds,
    "ball_lemmas": _run_ball_lemmas,
    "trace_equivalence": _run_trace_equivalence,
    "maximal_boundedness": _run_maximal_boundedness,
    "sharp_gradient": _run_sharp_gradient,
}


def run_audits(ctx: AuditContext, names: List[str], logger=None) -> List[AuditReport]:
    reports = []
    for name in names:
        ceiling = audit_ceiling(name, ctx.ceilings)
        with StageTimer(logger, f"audit {name}"):
            report = AUDIT_RUNNERS[name](ctx, ceiling)
        if logger:
            status = "pass" if report.passed else "FAIL"
            logger.info(f"  {name}: observed {report.observed_constant:.6g} [{status}]")
        reports.append(report)
    return reports


def trivial_reports(names: List[str], ceilings: Dict[str, float]) -> List[AuditReport]:
    """Reports for S = X, where the extension is the identity."""
    return [AuditReport(name=name, observed_constant=0.0, ceiling=audit_ceiling(name, ceilings),
                        details={'trivial': True}, note="S = X: identity extension")
            for name in names]


def verify_construction(space: MetricMeasureSpace, mask: np.ndarray, cover: WhitneyCover,
                        params: Optional[SpaceParams] = None, family: Optional[QuasiBallFamily] = None,
                        partition: Optional[Partition] = None, logger=None) -> Dict[str, Dict[str, Any]]:
    """Verification reports of whichever construction stages are given, keyed by stage."""
    construction = {'cover': verify_cover(space, mask, cover, params).to_dict()}
    if family is not None:
        construction['family'] = verify_family(space, mask, cover, family).to_dict()
    if partition is not None:
        construction['partition'] = verify_partition(space, mask, cover, partition).to_dict()
    if logger:
        for stage, report in construction.items():
            if not report['passed']:
                logger.warning(f"{stage} verification reported violations")
    return construction


def construction_passed(construction: Optional[Dict[str, Dict[str, Any]]]) -> bool:
    """True when every verification report of a construction (cover, family, partition) passed."""
    return all(report.get('passed', True) for report in (construction or {}).values())


def exit_code_for(reports: List[AuditReport], *constructions: Optional[Dict[str, Dict[str, Any]]]) -> int:
    """Audit failure when an audit or a construction verification failed."""
    ok = all(r.passed for r in reports) and all(construction_passed(c) for c in constructions)
    return EXIT_PASS if ok else EXIT_AUDIT_FAILURE


# ---------------------------------------------------------------------------
# Pipeline
# ---------------------------------------------------------------------------

@dataclass
class PipelineResult:
    config: RunConfig
    space: MetricMeasureSpace
    mask: np.ndarray
    params: Optional[SpaceParams]
    regular: RegularSubset
    bundle: Optional[ExtensionBundle]
    u: ScalarField
    g: ScalarField
    u_tilde: ScalarField
    g_tilde: ScalarField
    reports: List[AuditReport]
    construction: Dict[str, Any] = field(default_factory=dict)

    @property
    def exit_code(self) -> int:
        return exit_code_for(self.reports, self.construction)


class PipelineRunner:
    """Runs the construction and audit chain for one RunConfig."""

    def __init__(self, config: RunConfig, logger=None, session: Optional[ConstructionSession] = None):
        self.config = config
        self.logger = logger
        self.session = session or ConstructionSession(logger=logger)
        self._state = PipelineState()

    def stop(self) -> None:
        self._state.stop()

    def _stage(self, name: str, action: Callable[[], Any]) -> Any:
        if self._state.should_stop():
            raise StageError(name, RuntimeError("run stopped"))
        try:
            with StageTimer(self.logger, name):
                return action()
        except StageError:
            raise
        except (WhitneyExtError, ValueError, ArithmeticError, OSError, MemoryError) as e:
            raise StageError(name, e) from e

    def execute(self) -> PipelineResult:
        """Run every stage in memory; nothing is written."""
        config = self.config
        if self._state.is_running():
            raise StageError("start", RuntimeError("a run is already in progress"))
        self._state.set_running(True)
        try:
            if self.logger:
                self.logger.debug(f"System info: {get_system_info()}")

            space, generated_mask, _ = self._stage("space", lambda: load_space_source(config.space, self.logger))
            mask = self._stage("mask", lambda: resolve_mask(space, generated_mask, config.mask))
            check_available_memory_for_space(space.n, self.logger)
            if self.logger:
                self.logger.info(f"Space: {space.n} points, |S| = {int(mask.sum())}")

            if mask.all():
                return self._identity_result(space, mask)

            self.session.recreate_if_needed(space, mask)
            params = self._stage("estimate", self.session.get_params)
            regular = self._stage("regularity", lambda: resolve_regularity(space, mask, config.delta, self.logger))
            if self.logger:
                self.logger.info(f"C_d = {params.C_d:.6g}, C_rd = {params.C_rd:.6g}, "
                                 f"delta = {regular.delta:.6g}, theta = {regular.theta:.6g}")

            cover = self._stage("cover", self.session.get_cover)
            family = self._stage("quasi_balls", lambda: self.session.get_family(regular, config.epsilon))
            partition = self._stage("partition", self.session.get_partition)
            if self.logger:
                self.logger.info(f"Whitney balls: {len(cover)}, epsilon = {family.epsilon:.6g}, "
                                 f"gamma1 = {family.gamma1:.4g}, gamma2 = {family.gamma2:.4g}, gamma3 = {family.gamma3}")

            construction = self._stage("verify", lambda: verify_construction(
                space, mask, cover, params, family, partition, logger=self.logger))

            u = self._stage("input", lambda: make_input_function(space, mask, config.input_function, config.seed))
            bundle = self._stage("extend", lambda: build_bundle(space, mask, cover, family, partition, u))

            ctx = AuditContext(space=space, mask=mask, params=params, bundle=bundle, p=config.p,
                               alpha=config.alpha, seed=config.seed, f_samples=config.f_samples,
                               ceilings=config.ceilings)
            reports = self._stage("audit", lambda: run_audits(ctx, config.audits, self.logger))
            return PipelineResult(config=config, space=space, mask=mask, params=params, regular=regular,
                                  bundle=bundle, u=u, g=bundle.g, u_tilde=bundle.u_tilde, g_tilde=bundle.g_tilde,
                                  reports=reports, construction=construction)
        finally:
            self._state.set_running(False)

    def _identity_result(self, space: MetricMeasureSpace, mask: np.ndarray) -> PipelineResult:
        config = self.config
        if self.logger:
            self.logger.info("S = X: the extension is the identity, audits are trivial")
        u = self._stage("input", lambda: make_input_function(space, mask, config.input_function, config.seed))
        g = self._stage("extend", lambda: canonical_gradient(space, mask, u))
        delta = math.inf if config.delta == "auto" else float(config.delta)
        regular = RegularSubset(mask=mask, delta=delta, theta=1.0)
        return PipelineResult(config=config, space=space, mask=mask, params=None, regular=regular, bundle=None,
                              u=u, g=g, u_tilde=u, g_tilde=g, reports=trivial_reports(config.audits, config.ceilings))

    def write_outputs(self, result: PipelineResult) -> None:
        """Dumps and reports into config.output_dir."""
        out = Path(self.config.output_dir)
        if not ensure_directory_exists(str(out)):
            raise StageError("write", OSError(f"cannot create output directory {out}"))

        def write_all():
            write_space(str(out / settings.SPACE_FILE), result.space)
            write_mask(str(out / settings.MASK_FILE), result.mask)
            if result.bundle is not None:
                write_cover(str(out / settings.COVER_FILE), result.bundle.cover)
                write_family(str(out / settings.FAMILY_FILE), result.bundle.family)
                write_partition(str(out / settings.PARTITION_FILE), result.bundle.partition)
            write_field(str(out / settings.U_FILE), result.u)
            write_field(str(out / settings.G_FILE), result.g)
            write_field(str(out / settings.U_TILDE_FILE), result.u_tilde)
            write_field(str(out / settings.G_TILDE_FILE), result.g_tilde)
            write_json(str(out / settings.PARAMS_FILE), describe_result(result))
            write_audit_reports(str(out / settings.AUDITS_JSON_FILE), str(out / settings.AUDITS_CSV_FILE),
                                result.reports, run=out.name)

        self._stage("write", write_all)
        if self.logger:
            self.logger.debug(f"Outputs written to {out}")


def describe_result(result: PipelineResult) -> Dict[str, Any]:
    """Deterministic summary of the construction for params.json."""
    regular = result.regular
    summary: Dict[str, Any] = {
        'config': result.config.to_dict(),
        'points': result.space.n,
        'subset_size': int(result.mask.sum()),
        'regularity': {'delta': regular.delta, 'theta': regular.theta,
                       'witness': list(regular.theta_witness) if regular.theta_witness else None},
        'space': result.params.to_dict() if result.params is not None else None,
        'construction': result.construction,
    }
    if result.bundle is not None:
        summary['cover'] = {'balls': len(result.bundle.cover), 'fallback_balls': result.bundle.cover.fallback_count}
        summary['family'] = result.bundle.family.constants()
        summary['partition'] = {'lipschitz_constant': result.bundle.partition.lipschitz_constant}
    return plain_json(summary)


def run_pipeline(config: RunConfig, logger=None) -> Tuple[int, List[AuditReport]]:
    """Execute, write dumps and reports, and return (exit code, reports)."""
    if config.refine:
        # Import here to avoid circular imports
        from core.refinement import run_refinement
        return run_refinement(config, logger)

    runner = PipelineRunner(config, logger=logger)
    try:
        result = runner.execute()
        runner.write_outputs(result)
    except StageError as e:
        if logger:
            logger.error(str(e), e.cause)
        return EXIT_ERROR, []

    code = result.exit_code
    if logger:
        failed = [r.name for r in result.reports if not r.passed]
        if failed:
            logger.warning(f"Audits failed: {', '.join(failed)}")
        else:
            logger.info(f"All {len(result.reports)} audits passed")
    return code, result.reports
