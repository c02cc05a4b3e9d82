"""Run reports: assertions keyed by invariant ID, per-eps metrics and artifact paths."""

import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import yaml

from shared.errors import ArgumentError

log = logging.getLogger("qclab.report")

# documented in docs/invariants.md
INVARIANTS = {
    "FOCK-CCR": "[a_n, a_n^dag] = eps on states below the cutoff",
    "FOCK-DISPLACE": "coherent states are approximate eigenvectors of a_n and match the Weyl oracle",
    "FOCK-OVERLAP": "coherent overlap formula",
    "FOCK-NUMBER": "<dGamma(1)> = ||f||^2 and <dGamma(omega)> = sum omega |f|^2 for Xi(f)",
    "FOCK-NORM": "||a^dag(g) Psi||^2 = ||a(g) Psi||^2 + eps ||g||^2 ||Psi||^2 below the cutoff",
    "FOCK-NELSON-BOUND": "||a(g) Psi|| <= ||omega^{-1/2} g|| ||dGamma(omega)^{1/2} Psi||",
    "FOCK-FORM-BOUND": "|<Psi|A(x)|Psi>| <= 2 ||g(x)|| ||(dGamma(1) + 1)^{1/4} Psi||^2",
    "MODEL-HERMITIAN": "assembled operators are Hermitian",
    "MODEL-FLOOR": "sigma(H) >= sigma(H0) - N^2 ||omega^{-1/2} lambda||^2",
    "MODEL-ZERO-COUPLING": "with lambda = 0 the ground energy of H is sigma(H0)",
    "MODEL-INTERACTION-BOUND": "relative bound of sum_j A(x_j) by dGamma(omega)^{1/2}",
    "MODEL-TRANSLATION": "shifting U and the phase origin by one site keeps the spectrum",
    "EFF-TRACE": "<psi (x) Psi|H|psi (x) Psi> = <psi|H_eps|psi> + c_eps ||psi||^2",
    "EFF-COHERENT": "partial trace over Xi(f) equals the classical potential of delta_f",
    "EFF-VACUUM": "the vacuum produces V = 0 and c_eps = 0",
    "EFF-ALMOST-PERIODIC": "classical potential of delta_f reproduces V_b",
    "EFF-BOUNDED": "sup |V_mu| <= 2 ||lambda|| sum_i alpha_i ||z_i||",
    "EFF-MIXTURE-RATE": "log sup |V_eps - V_mu| decays in 1/eps with slope <= -0.9 D, or vanishes",
    "EFF-RESOLVENT-MONOTONE": "resolvent distance to H_eff(mu) decreases along the sweep, or vanishes",
    "EFF-RESOLVENT-BOUND": "resolvent distance <= sup |V_eps - V_mu| / ((floor_a + zeta)(floor_b + zeta))",
    "POL-BOUNDED-PART": "sup |W^<_z| <= C_< / 2 + (2 pi)^{-d} ||z||^2 / 2",
    "POL-FORM": "|<psi|W^>_z|psi>| <= alpha <psi|-Laplacian|psi> + ||z||^2 ||psi||^2 C'_> / alpha",
    "POL-FLOOR": "sigma(-Laplacian + V_z) >= -(8 N^2 C'_> + N alpha1) ||z||^2 - N C_< / alpha1",
    "SPEC-LANCZOS-ORACLE": "Lanczos ground energy matches dense diagonalization",
    "SPEC-BRUTE-FORCE": "alternating minimization matches brute-force search over single atoms",
    "SPEC-RESOLVENT": "resolvent distance is zero on equal operators and obeys the triangle inequality",
    "GSE-TRACE": "the alternating minimization energy trace is non-increasing",
    "GSE-UPPER": "quantum ground energy <= classical infimum",
    "GSE-FLOOR": "classical and quantum energies respect the coupling floor",
    "GSE-GAP-MONOTONE": "the ground energy gap decreases along the sweep",
    "GSE-EXTRAPOLATION": "Richardson-extrapolated gap is small against the gap of H0",
    "GSE-REFINE": "multi-atom measures do not undercut the single-atom minimizer",
    "TRAP-REPRODUCE": "partial trace over Xi(f_W) reproduces the mollified trap",
    "TRAP-RESOLVENT": "resolvent distance to H0 + W shrinks by >= 1.5 per halving",
    "TRAP-ENERGY": "c_eps strictly increases as eps decreases",
    "TRAP-MOLLIFY": "L2 mollification error on [-1, 1] shrinks by >= 1.8 per halving",
}


@dataclass
class Assertion:
    invariant: str
    passed: bool
    detail: str
    value: float | None = None
    limit: float | None = None

    def __post_init__(self):
        if self.invariant not in INVARIANTS:
            raise ArgumentError(f"unknown invariant ID {self.invariant!r}")
        self.passed = bool(self.passed)
        if self.value is not None:
            self.value = float(self.value)
        if self.limit is not None:
            self.limit = float(self.limit)


@dataclass
class RunReport:
    experiment: str
    config_hash: str
    seed: int
    assertions: list[Assertion] = field(default_factory=list)
    metrics: list[dict] = field(default_factory=list)
    artifacts: list[str] = field(default_factory=list)
    flags: list[str] = field(default_factory=list)

    def check(
        self,
        invariant: str,
        passed: bool,
        detail: str,
        value: float | None = None,
        limit: float | None = None,
    ) -> Assertion:
        assertion = Assertion(invariant, passed, detail, value, limit)
        self.assertions.append(assertion)
        if not assertion.passed:
            log.warning("[%s] FAILED: %s", invariant, detail)
        return assertion

    def flag(self, message: str):
        if message not in self.flags:
            log.warning("%s", message)
            self.flags.append(message)

    def add_artifact(self, path: Path):
        self.artifacts.append(str(path))

    @property
    def failures(self) -> list[Assertion]:
        return [a for a in self.assertions if not a.passed]

    @property
    def passed(self) -> bool:
        return not self.failures

    @property
    def exit_code(self) -> int:
        return 0 if self.passed else 3

    def summary(self) -> str:
        failed = sorted({a.invariant for a in self.failures})
        status = "PASS" if self.passed else f"FAIL ({', '.join(failed)})"
        return f"{self.experiment}: {len(self.assertions)} assertions, {status}"

    def to_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "config_hash": self.config_hash,
            "seed": self.seed,
            "passed": self.passed,
            "flags": list(self.flags),
            "assertions": [asdict(a) for a in self.assertions],
            "metrics": [{k: _scalar(v) for k, v in row.items()} for row in self.metrics],
            "artifacts": list(self.artifacts),
        }

    def write(self, path: Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(yaml.safe_dump(self.to_dict(), sort_keys=False))
        return path


def _scalar(value):
    if hasattr(value, "item"):
        return value.item()
    return value
