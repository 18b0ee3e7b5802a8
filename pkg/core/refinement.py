"""Two-level refinement runs: the same geometry at resolution L and 2L."""

import math
from dataclasses import replace
from pathlib import Path
from typing import Any, Dict, List, Sequence, Tuple

from config.settings import EXIT_ERROR
from core.audits import AuditReport
from core.errors import ConfigError, StageError

_DEFAULT_RESOLUTION = {
    'fat_cantor': lambda level: 4 ** (level + 1),
    'fat_sierpinski': lambda level: 3 ** (level + 1),
}


def refine_space_source(source: Dict[str, Any]) -> Dict[str, Any]:
    """Generator parameters describing the same geometry with twice the points per axis."""
    if "generator" not in source:
        raise ConfigError("refinement needs a generated space, not a file")
    name = source["generator"]
    params = dict(source.get("params") or {})
    spacing = float(params.get("spacing", 1.0))
    if name == "grid":
        params["dims"] = [2 * int(d) for d in params.get("dims", [16])]
    elif name in _DEFAULT_RESOLUTION:
        level = int(params.get("level", 0))
        resolution = params.get("resolution")
        resolution = _DEFAULT_RESOLUTION[name](level) if resolution is None else int(resolution)
        params["resolution"] = 2 * resolution
    else:
        raise ConfigError(f"no refinement rule for generator '{name}'")
    params["spacing"] = spacing / 2.0
    return {"generator": name, "params": params}


def refined_config(config):
    """The RunConfig for the finer level, writing into <output_dir>/refined."""
    if config.mask not in (None, "generator", "all"):
        raise ConfigError("refinement needs the generator mask (or all points)")
    if config.input_function.get("name") == "indicator":
        raise ConfigError("the indicator input function names point ids and cannot be refined")
    return replace(config, space=refine_space_source(config.space), refine=False,
                   output_dir=str(Path(config.output_dir) / "refined"))


def refinement_ratio(coarse: float, fine: float) -> float:
    """fine / coarse, with 0/0 = 1 and x/0 = inf."""
    if coarse == 0.0:
        return 1.0 if fine == 0.0 else math.inf
    if math.isinf(coarse) and math.isinf(fine):
        return 1.0
    return fine / coarse


def attach_refinement_ratios(coarse: Sequence[AuditReport], fine: Sequence[AuditReport]) -> List[AuditReport]:
    """Fill refinement_ratio on the coarse reports, plus one ratio per sub-inequality in details."""
    fine_by_name = {r.name: r for r in fine}
    for report in coarse:
        partner = fine_by_name.get(report.name)
        if partner is None:
            continue
        report.refinement_ratio = refinement_ratio(report.observed_constant, partner.observed_constant)
        report.details['refined_observed_constant'] = partner.observed_constant
        mine, theirs = report.sub_constants(), partner.sub_constants()
        shared = sorted(set(mine) & set(theirs))
        if shared:
            report.details['refined_sub_constants'] = {key: theirs[key] for key in shared}
            report.details['refinement_ratios'] = {key: refinement_ratio(mine[key], theirs[key]) for key in shared}
    return list(coarse)


def run_refinement(config, logger=None) -> Tuple[int, List[AuditReport]]:
    """Run the configuration at two resolutions and report the coarse run with refinement ratios."""
    # Import here to avoid circular imports
    from core.processor import PipelineRunner, exit_code_for

    try:
        fine_config = refined_config(config)
    except ConfigError as e:
        if logger:
            logger.error("Refinement is not possible for this configuration", e)
        return EXIT_ERROR, []

    coarse_runner = PipelineRunner(replace(config, refine=False), logger=logger)
    fine_runner = PipelineRunner(fine_config, logger=logger)
    try:
        if logger:
            logger.info("Refinement: coarse level")
        coarse = coarse_runner.execute()
        if logger:
            logger.info("Refinement: fine level")
        fine = fine_runner.execute()
        attach_refinement_ratios(coarse.reports, fine.reports)
        fine_runner.write_outputs(fine)
        coarse_runner.write_outputs(coarse)
    except StageError as e:
        if logger:
            logger.error(str(e), e.cause)
        return EXIT_ERROR, []

    if logger:
        for report in coarse.reports:
            if report.refinement_ratio is None:
                continue
            logger.info(f"  {report.name}: refinement ratio {report.refinement_ratio:.4g}")
            for key, ratio in report.details.get('refinement_ratios', {}).items():
                logger.debug(f"    {key}: {ratio:.4g}")
    return exit_code_for(coarse.reports, coarse.construction, fine.construction), coarse.reports
