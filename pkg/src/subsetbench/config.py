"""Experiment configuration: the config dataclass, TOML loading with
strict key checking, and the scenario-grid presets.

Presets:

- ``synthetic-full``: the complete 270-cell grid (3 dimension regimes x 9
  correlation/position cells x 10 SNR values), 100 replications, 3-minute
  subset-search budget per k.
- ``semisynthetic``: 6 cells (2 dimension regimes x 3 SNR values) built
  from an expression matrix, 100 replications, 10-minute budget per k.
- ``desk``: a 4-cell representative subset at 20 replications and a 30 s
  budget per k, sized for a workstation.
- ``custom``: scenarios listed in the config file.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Union

import tomli

from .datagen import (
    SNR_GRID,
    BetaSpec,
    CovarianceSpec,
    Placement,
    ScenarioSpec,
    Structure,
)
from .errors import ConfigError
from .model import Method
from .semisynthetic import SemiSyntheticSpec

PRESETS = ("synthetic-full", "semisynthetic", "desk", "custom")

DEFAULT_ALPHAS = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)

PRESET_REPLICATIONS = {
    "synthetic-full": 100,
    "semisynthetic": 100,
    "desk": 20,
    "custom": 100,
}
PRESET_BUDGET_MS = {
    "synthetic-full": 180_000,
    "semisynthetic": 600_000,
    "desk": 30_000,
    "custom": 180_000,
}

SEMISYN_TAUS = (0.42, 1.22, 3.52)

AnySpec = Union[ScenarioSpec, SemiSyntheticSpec]


@dataclass(frozen=True)
class ExperimentConfig:
    master_seed: int = 1
    preset: str = "desk"
    scenarios: tuple = ()
    methods: tuple = (Method.BSS, Method.FSS, Method.LASSO, Method.ENET)
    enet_alphas: tuple = DEFAULT_ALPHAS
    lambda_grid_size: int = 1000
    k_min: int = 1
    k_max: int = 15
    bss_time_budget_ms: Optional[int] = None
    bss_restarts: int = 50
    replications: Optional[int] = None
    output_dir: str = "results"
    workers: int = 1
    deterministic: bool = True
    expression_path: Optional[str] = None

    def __post_init__(self):
        if self.preset not in PRESETS:
            raise ConfigError("experiment.preset", f"unknown preset {self.preset!r}")
        if self.k_min < 1 or self.k_max < self.k_min:
            raise ConfigError("experiment.k_min", "need 1 <= k_min <= k_max")
        if self.lambda_grid_size < 2:
            raise ConfigError("experiment.lambda_grid_size", "need at least 2")
        if self.workers < 1:
            raise ConfigError("experiment.workers", "need at least 1 worker")
        if not self.methods:
            raise ConfigError("experiment.methods", "need at least one method")
        for a in self.enet_alphas:
            if not (0.0 < a <= 1.0):
                raise ConfigError("experiment.enet_alphas", f"alpha {a} not in (0, 1]")
        object.__setattr__(
            self, "methods", tuple(Method(m) for m in self.methods)
        )
        object.__setattr__(self, "enet_alphas", tuple(float(a) for a in self.enet_alphas))
        object.__setattr__(self, "scenarios", tuple(self.scenarios))

    @property
    def effective_replications(self) -> int:
        if self.replications is not None:
            return self.replications
        return PRESET_REPLICATIONS[self.preset]

    @property
    def effective_budget_ms(self) -> int:
        if self.bss_time_budget_ms is not None:
            return self.bss_time_budget_ms
        return PRESET_BUDGET_MS[self.preset]

    @property
    def k_range(self) -> range:
        return range(self.k_min, self.k_max + 1)


_DIMENSIONS = (("lowdim", 1000, 100), ("highdim", 100, 1000), ("middim", 500, 500))

_RHOS = (0.35, 0.7)


def _synthetic_cells():
    """The nine correlation/position cells of one dimension regime."""
    cells = [("identity", CovarianceSpec(Structure.IDENTITY), Placement.CONSECUTIVE)]
    for structure in (Structure.TOEPLITZ, Structure.BLOCK):
        for rho in _RHOS:
            for placement in (Placement.CONSECUTIVE, Placement.EQUISPACED):
                name = f"{structure.value.lower()}-{rho:g}-{placement.value.lower()}"
                cells.append((name, CovarianceSpec(structure, rho=rho), placement))
    return cells


def synthetic_scenario(
    regime: str, cell_name: str, covariance: CovarianceSpec,
    placement: Placement, tau: float, replications: int,
) -> ScenarioSpec:
    n, p = {name: (n, p) for name, n, p in _DIMENSIONS}[regime]
    return ScenarioSpec(
        scenario_id=f"{regime}_{cell_name}_tau{tau:g}",
        n=n,
        p=p,
        covariance=covariance,
        beta=BetaSpec(p=p, s=10, placement=placement, value=1.0),
        tau=tau,
        replications=replications,
    )


def full_synthetic_grid(replications: int) -> list:
    """All 270 synthetic cells."""
    specs = []
    for regime, _, _ in _DIMENSIONS:
        for cell_name, covariance, placement in _synthetic_cells():
            for tau in SNR_GRID:
                specs.append(
                    synthetic_scenario(
                        regime, cell_name, covariance, placement, tau, replications
                    )
                )
    return specs


def desk_grid(replications: int) -> list:
    """Four representative cells: high-dimensional block/Toeplitz and
    low-dimensional block settings, each at one characteristic SNR."""
    cells = [
        ("highdim", "block-0.35-equispaced",
         CovarianceSpec(Structure.BLOCK, rho=0.35), Placement.EQUISPACED, 1.22),
        ("highdim", "toeplitz-0.7-consecutive",
         CovarianceSpec(Structure.TOEPLITZ, rho=0.7), Placement.CONSECUTIVE, 2.07),
        ("lowdim", "block-0.7-equispaced",
         CovarianceSpec(Structure.BLOCK, rho=0.7), Placement.EQUISPACED, 0.71),
        ("lowdim", "block-0.7-consecutive",
         CovarianceSpec(Structure.BLOCK, rho=0.7), Placement.CONSECUTIVE, 0.42),
    ]
    return [
        synthetic_scenario(regime, name, cov, placement, tau, replications)
        for regime, name, cov, placement, tau in cells
    ]


def semisynthetic_grid(expression_path: str, replications: int) -> list:
    """Six semi-synthetic cells: two dimension regimes x three SNRs."""
    if not expression_path:
        raise ConfigError(
            "experiment.expression_path", "required for the semisynthetic preset"
        )
    specs = []
    for regime, p_sub, n_sub in (("lowdim", 100, 594), ("highdim", 1000, 100)):
        for tau in SEMISYN_TAUS:
            specs.append(
                SemiSyntheticSpec(
                    scenario_id=f"semisyn_{regime}_tau{tau:g}",
                    p_sub=p_sub,
                    n_sub=n_sub,
                    tau=tau,
                    expression_path=expression_path,
                    replications=replications,
                )
            )
    return specs


def enumerate_grid(preset: str, config: ExperimentConfig) -> list:
    """Scenario list for a preset, with replications fixed per config."""
    reps = config.effective_replications
    if preset == "synthetic-full":
        return full_synthetic_grid(reps)
    if preset == "desk":
        return desk_grid(reps)
    if preset == "semisynthetic":
        return semisynthetic_grid(config.expression_path, reps)
    if preset == "custom":
        if not config.scenarios:
            raise ConfigError("scenario", "custom preset needs at least one scenario")
        if config.replications is None:
            return list(config.scenarios)
        return [replace(s, replications=config.replications) for s in config.scenarios]
    raise ConfigError("experiment.preset", f"unknown preset {preset!r}")


_EXPERIMENT_KEYS = {
    "master_seed", "preset", "methods", "enet_alphas", "lambda_grid_size",
    "k_min", "k_max", "bss_time_budget_ms", "bss_restarts", "replications",
    "output_dir", "workers", "deterministic", "expression_path",
}

_SCENARIO_KEYS = {
    "kind", "scenario_id", "n", "p", "structure", "rho", "block_size",
    "placement", "s", "beta_value", "tau", "replications",
    "p_sub", "n_sub",
}


def _check_keys(table: dict, allowed: set, path: str):
    for key in table:
        if key not in allowed:
            raise ConfigError(f"{path}.{key}", "unknown key")


def _parse_scenario(table: dict, index: int, config_defaults: dict) -> AnySpec:
    path = f"scenario[{index}]"
    _check_keys(table, _SCENARIO_KEYS, path)
    kind = table.get("kind", "synthetic")
    reps = table.get("replications", config_defaults.get("replications") or 100)
    try:
        if kind == "semisynthetic":
            return SemiSyntheticSpec(
                scenario_id=table["scenario_id"],
                p_sub=table["p_sub"],
                n_sub=table["n_sub"],
                tau=table["tau"],
                expression_path=config_defaults.get("expression_path") or "",
                replications=reps,
            )
        if kind != "synthetic":
            raise ConfigError(f"{path}.kind", f"unknown kind {kind!r}")
        structure = Structure(table.get("structure", "IDENTITY"))
        covariance = CovarianceSpec(
            structure,
            rho=table.get("rho", 0.0),
            block_size=table.get("block_size", 10),
        )
        p = table["p"]
        beta = BetaSpec(
            p=p,
            s=table.get("s", 10),
            placement=Placement(table.get("placement", "CONSECUTIVE")),
            value=table.get("beta_value", 1.0),
        )
        return ScenarioSpec(
            scenario_id=table["scenario_id"],
            n=table["n"],
            p=p,
            covariance=covariance,
            beta=beta,
            tau=table["tau"],
            replications=reps,
        )
    except KeyError as exc:
        raise ConfigError(f"{path}.{exc.args[0]}", "missing required key") from exc
    except (ValueError, TypeError) as exc:
        raise ConfigError(path, str(exc)) from exc


def load_config(path) -> ExperimentConfig:
    """Parse a TOML experiment config; unknown keys are errors."""
    with open(path, "rb") as fh:
        try:
            data = tomli.load(fh)
        except tomli.TOMLDecodeError as exc:
            raise ConfigError(str(path), f"invalid TOML: {exc}") from exc
    _check_keys(data, {"experiment", "scenario"}, "")
    experiment = data.get("experiment", {})
    _check_keys(experiment, _EXPERIMENT_KEYS, "experiment")
    scenario_tables = data.get("scenario", [])
    if isinstance(scenario_tables, dict):
        scenario_tables = [scenario_tables]
    scenarios = tuple(
        _parse_scenario(tbl, i, experiment) for i, tbl in enumerate(scenario_tables)
    )
    try:
        return ExperimentConfig(scenarios=scenarios, **experiment)
    except TypeError as exc:
        raise ConfigError("experiment", str(exc)) from exc
