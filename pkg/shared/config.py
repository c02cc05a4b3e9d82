"""Experiment configuration: YAML files over environment defaults."""

import hashlib
import os
from dataclasses import asdict, dataclass, field, fields, is_dataclass, replace
from pathlib import Path

import yaml

from shared.errors import ConfigError

EXPERIMENTS = ("effective", "gse", "trap", "check")
STATE_KINDS = ("vacuum", "coherent", "mixture", "number", "almost_periodic")
FAMILIES = ("discrete", "nelson", "polaron")


def parse_complex(value) -> complex:
    """[re, im], a plain real, or a string complex() accepts."""
    if isinstance(value, bool):
        raise ConfigError(f"not a complex number: {value!r}")
    if isinstance(value, (int, float, complex)):
        return complex(value)
    if isinstance(value, (list, tuple)) and len(value) == 2:
        try:
            return complex(float(value[0]), float(value[1]))
        except (TypeError, ValueError) as e:
            raise ConfigError(f"not a complex number: {value!r}") from e
    if isinstance(value, str):
        try:
            return complex(value.replace(" ", ""))
        except ValueError as e:
            raise ConfigError(f"not a complex number: {value!r}") from e
    raise ConfigError(f"not a complex number: {value!r}")


def parse_complex_vector(values) -> tuple[complex, ...]:
    if values is None:
        return ()
    if not isinstance(values, (list, tuple)):
        raise ConfigError(f"expected a list of complex numbers, got {values!r}")
    return tuple(parse_complex(v) for v in values)


def _section(cls, data, name: str):
    if data is None:
        data = {}
    if is_dataclass(data):
        return data
    if not isinstance(data, dict):
        raise ConfigError(f"section {name!r} must be a mapping, got {type(data).__name__}")
    unknown = sorted(set(data) - {f.name for f in fields(cls)})
    if unknown:
        raise ConfigError(f"unknown keys in {name!r}: {', '.join(unknown)}")
    try:
        return cls(**data)
    except TypeError as e:
        raise ConfigError(f"{name}: {e}") from e


@dataclass(frozen=True)
class GridConfig:
    half_width: float = 5.0
    points: int = 64
    boundary: str = "dirichlet"

    def __post_init__(self):
        if self.boundary not in ("dirichlet", "periodic"):
            raise ConfigError(f"boundary must be dirichlet or periodic, got {self.boundary!r}")
        if int(self.points) < 8:
            raise ConfigError(f"grid needs at least 8 points per axis, got {self.points}")
        if not float(self.half_width) > 0:
            raise ConfigError(f"half_width must be positive, got {self.half_width}")


@dataclass(frozen=True)
class PotentialConfig:
    kind: str = "zero"
    strength: float = 1.0
    exponent: float = 2.0
    wavenumber: float = 1.0
    softening: float = 1.0
    file: str | None = None

    def params(self) -> dict:
        if self.kind == "power":
            return {"strength": self.strength, "exponent": self.exponent}
        if self.kind == "cosine":
            return {"strength": self.strength, "wavenumber": self.wavenumber}
        if self.kind == "soft_coulomb":
            return {"strength": self.strength, "softening": self.softening}
        if self.kind == "zero":
            return {}
        return {"strength": self.strength}


@dataclass(frozen=True)
class ModesConfig:
    family: str = "discrete"
    k: tuple = ()
    coupling: tuple = ()
    omega: tuple | None = None
    k_max: float = 1.0
    points: int = 3
    coupling_strength: float = 1.0
    mass: float = 1.0
    form_factor: str = "inverse_sqrt_omega"
    uv_cutoff: float | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown mode family {self.family!r}; known: {', '.join(FAMILIES)}")
        object.__setattr__(self, "k", tuple(tuple(float(c) for c in _as_list(v)) for v in self.k))
        object.__setattr__(self, "coupling", parse_complex_vector(self.coupling))
        if self.omega is not None:
            object.__setattr__(self, "omega", tuple(float(w) for w in self.omega))
        if self.family == "discrete" and len(self.k) != len(self.coupling):
            raise ConfigError(f"{len(self.k)} wave vectors for {len(self.coupling)} couplings")


def _as_list(value) -> list:
    return list(value) if isinstance(value, (list, tuple)) else [value]


@dataclass(frozen=True)
class ModelConfig:
    dim: int = 1
    n_particles: int = 1
    grid: GridConfig = field(default_factory=GridConfig)
    potential: PotentialConfig = field(default_factory=PotentialConfig)
    modes: ModesConfig = field(default_factory=ModesConfig)
    phase_origin: tuple | None = None

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ConfigError(f"dim must be 1, 2 or 3, got {self.dim}")
        if self.n_particles not in (1, 2):
            raise ConfigError(f"n_particles must be 1 or 2, got {self.n_particles}")
        object.__setattr__(self, "grid", _section(GridConfig, self.grid, "model.grid"))
        object.__setattr__(
            self, "potential", _section(PotentialConfig, self.potential, "model.potential")
        )
        object.__setattr__(self, "modes", _section(ModesConfig, self.modes, "model.modes"))
        if self.phase_origin is not None:
            origin = tuple(float(c) for c in _as_list(self.phase_origin))
            if len(origin) != self.dim:
                raise ConfigError(f"phase_origin has {len(origin)} coordinates for d={self.dim}")
            object.__setattr__(self, "phase_origin", origin)


@dataclass(frozen=True)
class AtomConfig:
    weight: float
    point: tuple

    def __post_init__(self):
        if not self.weight > 0:
            raise ConfigError(f"atom weight must be positive, got {self.weight}")
        object.__setattr__(self, "point", parse_complex_vector(self.point))


@dataclass(frozen=True)
class StateConfig:
    kind: str = "vacuum"
    amplitudes: tuple = ()
    atoms: tuple = ()
    occupation: tuple = ()
    b: tuple = ()

    def __post_init__(self):
        if self.kind not in STATE_KINDS:
            raise ConfigError(f"unknown state kind {self.kind!r}; known: {', '.join(STATE_KINDS)}")
        object.__setattr__(self, "amplitudes", parse_complex_vector(self.amplitudes))
        object.__setattr__(self, "b", parse_complex_vector(self.b))
        object.__setattr__(self, "occupation", tuple(int(m) for m in self.occupation))
        atoms = tuple(_section(AtomConfig, a, "state.atoms") for a in self.atoms)
        object.__setattr__(self, "atoms", atoms)
        if self.kind == "mixture":
            if len(atoms) < 2:
                raise ConfigError("a mixture state needs at least two atoms")
            total = sum(a.weight for a in atoms)
            if abs(total - 1.0) > 1e-12:
                raise ConfigError(f"atom weights sum to {total:.15g}, not 1")


@dataclass(frozen=True)
class CutoffConfig:
    kind: str = "adequate"
    fixed: int = 8
    truncation_tol: float = 1e-8
    margin: int = 2
    ceiling: int = 64

    def __post_init__(self):
        if self.kind not in ("fixed", "adequate"):
            raise ConfigError(f"cutoff kind must be fixed or adequate, got {self.kind!r}")
        if self.ceiling > 64:
            raise ConfigError(f"per-mode cutoff ceiling is at most 64, got {self.ceiling}")


@dataclass(frozen=True)
class SweepConfig:
    eps: tuple = (1.0, 0.5, 0.25, 0.125)
    cutoffs: CutoffConfig = field(default_factory=CutoffConfig)

    def __post_init__(self):
        eps = tuple(float(e) for e in _as_list(self.eps))
        if not eps:
            raise ConfigError("the eps sweep is empty")
        if any(not e > 0 for e in eps):
            raise ConfigError(f"every eps must be positive, got {eps}")
        object.__setattr__(self, "eps", eps)
        object.__setattr__(self, "cutoffs", _section(CutoffConfig, self.cutoffs, "sweep.cutoffs"))


@dataclass(frozen=True)
class RunConfig:
    experiment: str = "check"
    output_dir: str = field(default_factory=lambda: os.getenv("QCLAB_OUTPUT_DIR", "out"))
    seed: int = field(default_factory=lambda: int(os.getenv("QCLAB_SEED", "0")))
    max_dimension: int = field(
        default_factory=lambda: int(os.getenv("QCLAB_MAX_DIMENSION", "2000000"))
    )
    tolerance: float = 1e-6
    eigen_tol: float = 1e-10
    probes: int = 16
    samples: int = 200
    figures: bool = True

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(
                f"unknown experiment {self.experiment!r}; known: {', '.join(EXPERIMENTS)}"
            )
        if self.max_dimension < 1:
            raise ConfigError(f"max_dimension must be positive, got {self.max_dimension}")


@dataclass(frozen=True)
class TrapConfig:
    potential: PotentialConfig = field(
        default_factory=lambda: PotentialConfig(kind="harmonic", strength=1.0)
    )
    coupling_strength: float = 4.0
    mass: float = 1.0
    form_factor: str = "inverse_sqrt_omega"
    k_max: float | None = None
    min_points: int = 8
    interior_fraction: float = 0.8
    max_outside: float = 0.01
    cutoff_ceiling: int = 128

    def __post_init__(self):
        object.__setattr__(self, "potential", _section(PotentialConfig, self.potential, "trap.potential"))
        if not 0 < self.interior_fraction <= 1:
            raise ConfigError(f"interior_fraction must be in (0, 1], got {self.interior_fraction}")
        if not 0 < self.cutoff_ceiling <= 256:
            raise ConfigError(f"trap cutoff ceiling must be in (0, 256], got {self.cutoff_ceiling}")


@dataclass(frozen=True)
class PolaronConfig:
    dim: int = 2
    k_max: float = 1.5
    points: int = 7
    rho: float = 0.8
    alpha1: float = 1.0
    half_width: float = 6.0
    grid_points: int = 24
    alphas: tuple = (0.25, 1.0)

    def __post_init__(self):
        if self.dim < 2:
            raise ConfigError(f"polaron checks run in d >= 2, got {self.dim}")
        object.__setattr__(self, "alphas", tuple(float(a) for a in _as_list(self.alphas)))


@dataclass(frozen=True)
class GseConfig:
    tol: float = 1e-10
    max_iterations: int = 200
    restarts: int = 2
    refine_atoms: int = 0
    workers: int = 4
    relative_limit: float = 5e-2
    brute_force: bool = False


@dataclass(frozen=True)
class ExperimentConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    state: StateConfig = field(default_factory=StateConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    run: RunConfig = field(default_factory=RunConfig)
    trap: TrapConfig | None = None
    polaron: PolaronConfig | None = None
    gse: GseConfig = field(default_factory=GseConfig)
    source: str | None = field(default=None, compare=False)

    @classmethod
    def from_dict(cls, data: dict, source: str | None = None) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError("configuration must be a mapping of sections")
        known = {"model", "state", "sweep", "run", "trap", "polaron", "gse"}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown sections: {', '.join(unknown)}")
        return cls(
            model=_section(ModelConfig, data.get("model"), "model"),
            state=_section(StateConfig, data.get("state"), "state"),
            sweep=_section(SweepConfig, data.get("sweep"), "sweep"),
            run=_section(RunConfig, data.get("run"), "run"),
            trap=_section(TrapConfig, data["trap"], "trap") if "trap" in data else None,
            polaron=_section(PolaronConfig, data["polaron"], "polaron") if "polaron" in data else None,
            gse=_section(GseConfig, data.get("gse"), "gse"),
            source=source,
        )

    def with_overrides(
        self, output_dir: str | None = None, seed: int | None = None, eps: list[float] | None = None
    ) -> "ExperimentConfig":
        run, sweep = self.run, self.sweep
        if output_dir is not None:
            run = replace(run, output_dir=str(output_dir))
        if seed is not None:
            run = replace(run, seed=int(seed))
        if eps:
            sweep = replace(sweep, eps=tuple(eps))
        return replace(self, run=run, sweep=sweep)

    def to_dict(self) -> dict:
        data = _plain(asdict(self))
        data.pop("source", None)
        return {k: v for k, v in data.items() if v is not None}

    @property
    def config_hash(self) -> str:
        dump = yaml.safe_dump(self.to_dict(), sort_keys=True)
        return hashlib.sha256(dump.encode()).hexdigest()


def _plain(value):
    if isinstance(value, complex):
        return [value.real, value.imag]
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


def load_config(path: str | Path | None = None) -> ExperimentConfig:
    if path is None:
        return ExperimentConfig()
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text())
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    except yaml.YAMLError as e:
        raise ConfigError(f"malformed YAML in {path}: {e}") from e
    return ExperimentConfig.from_dict(data or {}, source=str(path))
