import logging
import os
from configparser import ConfigParser
from dataclasses import dataclass

from exceptions import ArgumentError
from experiments import ExperimentConfig, SyntheticConfig

logger = logging.getLogger(__name__)

DEFAULT_PROPS = os.path.join(os.path.dirname(os.path.abspath(__file__)), "properties", "lab_props.ini")

SECTIONS = ("defaults", "solver", "evaluation", "experiment", "synthetic", "selftest")


def read_props(path=None):
    """
    Read the lab properties file.

    Args:
        path (str): Path to an .ini file; defaults to properties/lab_props.ini.

    Returns:
        ConfigParser: The parsed file, with every known section present.
    """
    path = path or DEFAULT_PROPS
    config = ConfigParser()
    if not config.read(path):
        raise ArgumentError(f"cannot read properties file {path}")
    for section in SECTIONS:
        if not config.has_section(section):
            config.add_section(section)
    logger.debug("read properties from %s", path)
    return config


def parse_list(value, cast=float):
    try:
        return [cast(tok.strip()) for tok in value.split(",") if tok.strip()]
    except ValueError as e:
        raise ArgumentError(f"cannot parse list {value!r}: {e}")


def _get(section, key, cast, fallback):
    try:
        return cast(section.get(key, fallback))
    except (TypeError, ValueError) as e:
        raise ArgumentError(f"[{section.name}] {key}: {e}")


def get_seed(config):
    return _get(config["defaults"], "seed", int, "0")


def get_threads(config):
    return _get(config["defaults"], "threads", int, "1")


def get_solver_tol(config):
    return _get(config["solver"], "tol", float, "1e-12")


def get_mc_samples(config):
    return _get(config["evaluation"], "mc_samples", int, "100000")


def get_experiment_config(config, **overrides):
    """
    Build an ExperimentConfig from the [experiment] section.

    Args:
        config (ConfigParser): Parsed properties.
        **overrides: Command-line values; None entries are ignored.

    Returns:
        ExperimentConfig: The validated configuration.
    """
    section = config["experiment"]
    values = {
        "alpha_grid": tuple(parse_list(section.get("alpha_grid", "0.5,1.0"))),
        "n_permutations": _get(section, "n_permutations", int, "200"),
        "fixed_threshold_percents": tuple(parse_list(section.get("fixed_threshold_percents", ""), int)),
        "cdf_name": section.get("random_threshold_cdf", "f1"),
        "capacity_rounding": section.get("capacity_rounding", "floor"),
        "seed": get_seed(config),
        "threads": get_threads(config),
    }
    values.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig(**values)


def get_synthetic_config(config):
    section = config["synthetic"]
    return SyntheticConfig(
        inventory_min=_get(section, "inventory_min", int, "20"),
        inventory_max=_get(section, "inventory_max", int, "400"),
        order_log_mean=_get(section, "order_log_mean", float, "1.5"),
        order_log_sigma=_get(section, "order_log_sigma", float, "1.0"),
        demand_factor=_get(section, "demand_factor", float, "1.5"),
        min_warehouses=_get(section, "min_warehouses", int, "1"),
    )


def get_synthetic_scale(config):
    section = config["synthetic"]
    return _get(section, "n_skus", int, "974"), _get(section, "n_warehouses", int, "21")


@dataclass(frozen=True)
class SelftestConfig:
    single_sequences: int = 10000
    structured_sequences: int = 1000
    rational_sequences: int = 10000
    max_length: int = 30
    denominator: int = 1000
    multi_instances: int = 1000
    synthetic_skus: int = 974
    synthetic_warehouses: int = 21

    def __post_init__(self):
        for name in (
            "single_sequences",
            "structured_sequences",
            "rational_sequences",
            "multi_instances",
            "synthetic_skus",
            "synthetic_warehouses",
        ):
            if getattr(self, name) < 1:
                raise ArgumentError(f"selftest {name} must be >= 1")
        if self.max_length < 1 or self.denominator < 2:
            raise ArgumentError("selftest max_length must be >= 1 and denominator >= 2")


def get_selftest_config(config, scale=1.0):
    """Suite sizes from [selftest], multiplied by scale (at least one of each)."""
    section = config["selftest"]
    defaults = SelftestConfig()

    def count(key):
        return max(1, int(_get(section, key, int, str(getattr(defaults, key))) * scale))

    return SelftestConfig(
        single_sequences=count("single_sequences"),
        structured_sequences=count("structured_sequences"),
        rational_sequences=count("rational_sequences"),
        max_length=_get(section, "max_length", int, "30"),
        denominator=_get(section, "denominator", int, "1000"),
        multi_instances=count("multi_instances"),
        synthetic_skus=count("synthetic_skus"),
        synthetic_warehouses=_get(section, "synthetic_warehouses", int, "21"),
    )
