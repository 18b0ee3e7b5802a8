"""Subcommand handlers. Each takes the parsed arguments and a Logger and returns an exit code."""

import json
from pathlib import Path
from typing import Any, Dict, List, Optional

from config import settings
from config.registry import AUDITS, DEFAULT_AUDITS
from config.settings import (
    EXIT_AUDIT_FAILURE,
    EXIT_ERROR,
    EXIT_PASS,
    validate_alpha,
    validate_delta,
    validate_epsilon,
    validate_p,
)
from core.errors import ConfigError
from core.extension import ExtensionBundle, canonical_gradient
from core.generators import generate
from core.kernels import KERNEL_RUNTIME
from core.partition import build_partition
from core.processor import (
    AuditContext,
    RunConfig,
    build_bundle,
    construction_passed,
    exit_code_for,
    make_input_function,
    resolve_regularity,
    run_audits,
    run_pipeline,
    trivial_reports,
    verify_construction,
)
from core.quasi_balls import build_quasi_balls, build_tuned_family, family_from_sets
from core.space import estimate_doubling
from core.whitney import WhitneyCover, build_whitney, verify_cover
from utils.file_utils import (
    ensure_directory_exists,
    merge_report_csvs,
    read_cover_balls,
    read_family_sets,
    read_field,
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


def _parse_value(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def parse_params(pairs: Optional[List[str]]) -> Dict[str, Any]:
    """KEY=VALUE pairs with JSON values (plain strings when not JSON)."""
    params = {}
    for pair in pairs or []:
        if "=" not in pair:
            raise ConfigError(f"expected KEY=VALUE, got '{pair}'")
        key, value = pair.split("=", 1)
        params[key.strip()] = _parse_value(value.strip())
    return params


def _out_dir(args) -> Path:
    out = Path(args.out) if args.out else settings.get_output_directory()
    if not ensure_directory_exists(str(out)):
        raise ConfigError(f"cannot create output directory {out}")
    return out


def _load_space_and_mask(args, logger):
    space = read_space(args.space, logger=logger)
    mask = read_mask(args.mask, space.n)
    return space, mask


def _load_cover(args, space, mask) -> WhitneyCover:
    balls, anchors = read_cover_balls(args.cover)
    return WhitneyCover.from_balls(space, mask, balls, anchors)


def _checked(validator, value, message):
    ok, parsed = validator(value)
    if not ok:
        raise ConfigError(message.format(value))
    return parsed


def configure_runtime(args, logger=None) -> None:
    threads = getattr(args, "threads", None)
    sequential = getattr(args, "sequential", False)
    KERNEL_RUNTIME.configure(sequential=sequential or None, threads=threads)
    if logger:
        logger.debug(f"Kernel runtime: {KERNEL_RUNTIME.get_info()}")


def cmd_run(args, logger) -> int:
    config = RunConfig.load(args.config)
    config = config.with_overrides(seed=args.seed, threads=args.threads,
                                   sequential=True if args.sequential else None,
                                   output_dir=args.out)
    KERNEL_RUNTIME.configure(sequential=config.sequential, threads=config.threads)
    out = Path(config.output_dir)
    if not ensure_directory_exists(str(out)):
        logger.error(f"Cannot create output directory {out}")
        return EXIT_ERROR

    with open(out / settings.LOG_FILE, "w", encoding="utf-8") as log_handle:
        logger.set_sink(lambda line: log_handle.write(line + "\n"))
        try:
            logger.info(f"Running {args.config} into {out}")
            code, _ = run_pipeline(config, logger)
        finally:
            logger.set_sink(None)
    return code


def cmd_gen_space(args, logger) -> int:
    params = parse_params(args.param)
    generated = generate(args.generator, logger=logger, **params)
    out = _out_dir(args)
    write_space(str(out / settings.SPACE_FILE), generated.space)
    if generated.mask is not None:
        write_mask(str(out / settings.MASK_FILE), generated.mask)
    write_json(str(out / settings.GENERATOR_INFO_FILE),
               {'generator': args.generator, 'params': params,
                'recommended_delta': generated.recommended_delta, 'info': generated.info})
    subset = "no subset" if generated.mask is None else f"|S| = {int(generated.mask.sum())}"
    logger.info(f"Generated {args.generator}: {generated.space.n} points, {subset}")
    return EXIT_PASS


def cmd_estimate(args, logger) -> int:
    space, mask = _load_space_and_mask(args, logger)
    delta = _checked(validate_delta, args.delta, "delta must be 'auto' or positive, got {}")
    params = estimate_doubling(space, logger=logger)
    regular = resolve_regularity(space, mask, delta, logger=logger)
    logger.info(f"C_d = {params.C_d:.6g}, C_rd = {params.C_rd:.6g}, "
                f"delta = {regular.delta:.6g}, theta = {regular.theta:.6g}")
    if args.out:
        out = _out_dir(args)
        write_json(str(out / settings.PARAMS_FILE), {
            'space': params.to_dict(),
            'regularity': {'delta': regular.delta, 'theta': regular.theta,
                           'witness': list(regular.theta_witness) if regular.theta_witness else None},
        })
    return EXIT_PASS


def cmd_cover(args, logger) -> int:
    space, mask = _load_space_and_mask(args, logger)
    if args.cover:
        cover = _load_cover(args, space, mask)
    else:
        cover = build_whitney(space, mask, logger=logger)
    report = verify_cover(space, mask, cover)
    out = _out_dir(args)
    if not args.cover:
        write_cover(str(out / settings.COVER_FILE), cover)
    write_json(str(out / settings.COVER_REPORT_FILE), report.to_dict())
    logger.info(f"Whitney cover: {len(cover)} balls, multiplicity {report.multiplicity}, "
                f"{'valid' if report.passed else 'INVALID'}")
    if not report.passed:
        logger.warning(f"Cover violations: sandwich {report.sandwich_violations}, "
                       f"meeting S {report.balls_meeting_subset}, uncovered {report.uncovered}")
        return EXIT_AUDIT_FAILURE
    return EXIT_PASS


def cmd_extend(args, logger) -> int:
    space, mask = _load_space_and_mask(args, logger)
    cover = _load_cover(args, space, mask)
    delta = _checked(validate_delta, args.delta, "delta must be 'auto' or positive, got {}")
    epsilon = _checked(validate_epsilon, args.epsilon, "epsilon must be 'auto' or in (0, 1], got {}")
    regular = resolve_regularity(space, mask, delta, logger=logger)
    if epsilon == "auto":
        family = build_tuned_family(space, mask, cover, regular.delta, logger=logger)
    else:
        family = build_quasi_balls(space, mask, cover, epsilon, regular.delta, logger=logger)
    partition = build_partition(space, mask, cover, logger=logger)

    if args.u:
        u = read_field(args.u)
    else:
        choice = json.loads(args.input) if args.input else {"name": "random", "params": {}}
        u = make_input_function(space, mask, choice, args.seed if args.seed is not None else settings.DEFAULT_SEED)
    bundle = build_bundle(space, mask, cover, family, partition, u)

    out = _out_dir(args)
    write_family(str(out / settings.FAMILY_FILE), family)
    write_partition(str(out / settings.PARTITION_FILE), partition)
    write_field(str(out / settings.U_FILE), bundle.u)
    write_field(str(out / settings.G_FILE), bundle.g)
    write_field(str(out / settings.U_TILDE_FILE), bundle.u_tilde)
    write_field(str(out / settings.G_TILDE_FILE), bundle.g_tilde)
    logger.info(f"Extended u from {int(mask.sum())} to {space.n} points (epsilon = {family.epsilon:.6g})")
    construction = verify_construction(space, mask, cover, family=family, partition=partition, logger=logger)
    return EXIT_PASS if construction_passed(construction) else EXIT_AUDIT_FAILURE


def cmd_audit(args, logger) -> int:
    space, mask = _load_space_and_mask(args, logger)
    p = _checked(validate_p, args.p, "p > 1 required, got {}")
    alpha = _checked(validate_alpha, args.alpha, "alpha must be positive, got {}")
    names = args.audits or list(DEFAULT_AUDITS)
    unknown = [name for name in names if name not in AUDITS]
    if unknown:
        raise ConfigError(f"unknown audit '{unknown[0]}'")

    if mask.all():
        logger.info("S = X: the extension is the identity, audits are trivial")
        reports = trivial_reports(names, {})
        construction: Dict[str, Dict[str, Any]] = {}
    else:
        cover = _load_cover(args, space, mask)
        epsilon, delta, sets = read_family_sets(args.family)
        family = family_from_sets(space, mask, cover, epsilon, delta, sets)
        partition = build_partition(space, mask, cover, logger=logger)
        u = read_field(args.u)
        g = read_field(args.g) if args.g else canonical_gradient(space, mask, u)
        bundle = ExtensionBundle.build(space, mask, cover, family, partition, u, g)
        ctx = AuditContext(space=space, mask=mask, params=estimate_doubling(space, logger=logger), bundle=bundle,
                           p=p, alpha=alpha, seed=args.seed if args.seed is not None else settings.DEFAULT_SEED,
                           f_samples=args.f_samples, ceilings={})
        construction = verify_construction(space, mask, cover, ctx.params, family, partition, logger=logger)
        reports = run_audits(ctx, names, logger)

    out = _out_dir(args)
    write_audit_reports(str(out / settings.AUDITS_JSON_FILE), str(out / settings.AUDITS_CSV_FILE),
                        reports, run=out.name)
    return exit_code_for(reports, construction)


def cmd_report(args, logger) -> int:
    paths = []
    for item in args.inputs:
        path = Path(item)
        paths.append(str(path / settings.AUDITS_CSV_FILE) if path.is_dir() else str(path))
    missing = [p for p in paths if not Path(p).exists()]
    if missing:
        raise ConfigError(f"report file not found: {missing[0]}")
    out = Path(args.out) if args.out else Path(settings.MERGED_REPORT_FILE)
    if out.suffix != ".csv":
        ensure_directory_exists(str(out))
        out = out / settings.MERGED_REPORT_FILE
    rows = merge_report_csvs(paths, str(out))
    logger.info(f"Merged {len(paths)} reports into {out} ({rows} rows)")
    return EXIT_PASS


COMMANDS = {
    "run": cmd_run,
    "gen-space": cmd_gen_space,
    "estimate": cmd_estimate,
    "cover": cmd_cover,
    "extend": cmd_extend,
    "audit": cmd_audit,
    "report": cmd_report,
}
