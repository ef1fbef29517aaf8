"""Offspring-and-mark laws and the potential-level analytics derived from them.

A law is the single source of environment randomness: one draw produces the
number of children of a node together with one real mark per child. Only
finite-support laws are admitted, so the log-Laplace transform

    psi(t) = log sum_i p_i sum_{a in marks_i} exp(-t a)

and its derivatives are exact finite sums. The walk is recurrent when the law
is calibrated to psi(1) = 0 with psi'(1) < 0, and the scaling regime is read
off the second zero kappa of psi on (1, infinity).
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "LawError",
    "MarkLaw",
    "make_mark_law",
    "psi_evaluate",
    "psi_prime",
    "solve_kappa",
    "regime_of",
    "PotentialReport",
    "validate_law",
    "make_two_point",
    "make_constant_bias",
    "load_law",
    "dump_law",
    "KAPPA_T_MAX",
]

KAPPA_T_MAX = 64.0

PROB_TOL = 1e-12
CALIBRATION_TOL = 1e-9


class LawError(ValueError):
    """Raised when a law violates a structural precondition.

    The ``code`` attribute carries a stable machine-readable tag:
    NOT_NORMALIZED, SUBCRITICAL or ASSUMPTION_VIOLATION.
    """

    def __init__(self, code: str, message: str):
        super().__init__(f"{code}: {message}")
        self.code = code


@dataclass(frozen=True)
class MarkLaw:
    """Finite-support law of (offspring count, marks).

    atoms: tuple of (probability, marks) pairs; each atom is one realization,
    its offspring count being len(marks). Probabilities sum to one.
    """

    atoms: tuple[tuple[float, tuple[float, ...]], ...]

    @property
    def mean_offspring(self) -> float:
        return sum(p * len(m) for p, m in self.atoms)

    @property
    def max_offspring(self) -> int:
        return max(len(m) for p, m in self.atoms)

    @property
    def has_negative_mark(self) -> bool:
        return any(a < 0 for _, m in self.atoms for a in m)

    def is_lattice(self, tol: float = 1e-12) -> bool:
        """True when all marks lie on an arithmetic progression.

        Finite-support laws with <= 2 distinct marks are always lattice; this
        is reported as a warning by validate_law, never an error.
        """
        marks = sorted({a for _, m in self.atoms for a in m})
        if len(marks) <= 2:
            return True
        diffs = [a - marks[0] for a in marks[1:]]
        d = min(diffs)
        return all(abs(x / d - round(x / d)) < tol for x in diffs)

    def tables(self):
        """Flat numpy tables consumed by the environment kernel.

        Returns (atom_cum, atom_off, atom_len, marks_flat): cumulative atom
        probabilities (last entry forced to 1.0), per-atom offset/length into
        the flattened mark array.
        """
        cum = np.cumsum([p for p, _ in self.atoms])
        cum[-1] = 1.0
        lens = np.array([len(m) for _, m in self.atoms], dtype=np.int64)
        off = np.concatenate([[0], np.cumsum(lens)[:-1]]).astype(np.int64)
        flat = np.array([a for _, m in self.atoms for a in m], dtype=np.float64)
        return cum.astype(np.float64), off, lens, flat


def make_mark_law(atoms) -> MarkLaw:
    """Validate and freeze a list of (probability, marks) atoms."""
    if not atoms:
        raise LawError("NOT_NORMALIZED", "no atoms")
    norm = []
    for p, marks in atoms:
        if p <= 0:
            raise LawError("NOT_NORMALIZED", f"non-positive atom probability {p}")
        norm.append((float(p), tuple(float(a) for a in marks)))
    total = sum(p for p, _ in norm)
    if abs(total - 1.0) > PROB_TOL:
        raise LawError("NOT_NORMALIZED", f"probabilities sum to {total!r}")
    law = MarkLaw(tuple(norm))
    if law.mean_offspring <= 1.0:
        raise LawError(
            "SUBCRITICAL", f"mean offspring {law.mean_offspring} must exceed 1"
        )
    return law


def psi_evaluate(law: MarkLaw, t):
    """log sum_i p_i sum_{a in marks_i} exp(-t a); exact finite sum."""
    t_arr = np.asarray(t, dtype=np.float64)
    s = np.zeros_like(t_arr, dtype=np.float64)
    for p, marks in law.atoms:
        for a in marks:
            s = s + p * np.exp(-t_arr * a)
    out = np.log(s)
    return float(out) if np.isscalar(t) or out.ndim == 0 else out


def psi_prime(law: MarkLaw, t: float) -> float:
    """Analytic derivative of psi at t."""
    s = 0.0
    ds = 0.0
    for p, marks in law.atoms:
        for a in marks:
            w = p * math.exp(-t * a)
            s += w
            ds += -a * w
    return ds / s


def _require_assumption1(law: MarkLaw) -> None:
    p1 = psi_evaluate(law, 1.0)
    if abs(p1) > CALIBRATION_TOL:
        raise LawError("ASSUMPTION_VIOLATION", f"psi(1) = {p1!r}, expected 0")
    d1 = psi_prime(law, 1.0)
    if d1 >= 0:
        raise LawError("ASSUMPTION_VIOLATION", f"psi'(1) = {d1!r}, expected < 0")


def solve_kappa(law: MarkLaw, t_max: float = KAPPA_T_MAX) -> float:
    """Second zero of psi on (1, t_max]; math.inf when there is none.

    psi is convex with psi(1) = 0 and psi'(1) < 0, so it is negative just
    right of 1 and has at most one further zero. A geometric-ish scan brackets
    the sign change, then Brent refinement brings |psi(kappa)| below 1e-12.
    """
    from scipy.optimize import brentq

    _require_assumption1(law)
    t = 1.0 + 1e-9
    step = 0.05
    while t < t_max:
        t_next = min(t + step, t_max)
        if psi_evaluate(law, t_next) > 0.0:
            root = brentq(lambda u: psi_evaluate(law, u), t, t_next, xtol=5e-16)
            return float(root)
        t = t_next
        step *= 1.25
    if law.has_negative_mark and psi_prime(law, t_max) > 0:
        warnings.warn(
            "kappa exceeds the search bracket t_max=%g; reporting INF "
            "(documented limitation)" % t_max
        )
    return math.inf


def regime_of(kappa: float, tol: float = 1e-9) -> str:
    if abs(kappa - 2.0) <= tol:
        return "CRITICAL"
    return "SUBDIFFUSIVE" if kappa < 2.0 else "DIFFUSIVE"


def _c0_finite_sum(law: MarkLaw) -> float:
    # E[sum_{x != y, |x|=|y|=1} e^{-V(x)-V(y)}] / (1 - e^{psi(2)})
    num = 0.0
    for p, marks in law.atoms:
        s1 = sum(math.exp(-a) for a in marks)
        s2 = sum(math.exp(-2 * a) for a in marks)
        num += p * (s1 * s1 - s2)
    return num / (1.0 - math.exp(psi_evaluate(law, 2.0)))


@dataclass
class PotentialReport:
    """Assumption checks and regime classification for one law."""

    kappa: float
    psi_prime_1: float
    regime: str
    c0: float | None
    psi_grid: np.ndarray = field(repr=False)
    psi_values: np.ndarray = field(repr=False)
    lattice: bool = False
    notes: tuple[str, ...] = ()

    def psi_at(self, t):
        return psi_evaluate(self._law, t)


def validate_law(law: MarkLaw, t_grid=None) -> PotentialReport:
    """Full assumption audit: calibration, drift, kappa, regime, c0.

    Moment conditions beyond these are automatic for finite-support laws with
    bounded offspring and are reported as trivially satisfied.
    """
    _require_assumption1(law)
    kappa = solve_kappa(law)
    if t_grid is None:
        t_grid = np.linspace(0.25, min(KAPPA_T_MAX, max(4.0, (kappa if math.isfinite(kappa) else 4.0) + 2)), 33)
    grid = np.asarray(t_grid, dtype=np.float64)
    values = psi_evaluate(law, grid)
    notes = ["moment conditions: trivially satisfied (finite support, bounded offspring)"]
    lattice = law.is_lattice()
    if lattice:
        warnings.warn("law is lattice-supported; scaling constants may need care")
        notes.append("lattice support detected (warning only)")
    c0 = _c0_finite_sum(law) if kappa > 2.0 else None
    rep = PotentialReport(
        kappa=kappa,
        psi_prime_1=psi_prime(law, 1.0),
        regime=regime_of(kappa),
        c0=c0,
        psi_grid=grid,
        psi_values=values,
        lattice=lattice,
        notes=tuple(notes),
    )
    rep._law = law
    return rep


# ----------------------------------------------------------------------------
# Desk families


def make_two_point(p: float, b: float | None = None) -> MarkLaw:
    """Binary tree whose marks are i.i.d. two-point: -1 w.p. p, b w.p. 1-p.

    When b is omitted it is set by the calibration 2(p e + (1-p)e^{-b}) = 1,
    which requires p < 1/(2e).
    """
    if b is None:
        x = (0.5 - p * math.e) / (1.0 - p)
        if x <= 0:
            raise LawError("ASSUMPTION_VIOLATION", f"p={p} too large to calibrate")
        b = -math.log(x)
    return make_mark_law(
        [
            (p * p, (-1.0, -1.0)),
            (p * (1 - p), (-1.0, b)),
            ((1 - p) * p, (b, -1.0)),
            ((1 - p) * (1 - p), (b, b)),
        ]
    )


def make_constant_bias(lam: float, n: int = 2) -> MarkLaw:
    """Deterministic n-ary tree with constant mark log(lam)."""
    return make_mark_law([(1.0, (math.log(lam),) * n)])


def _shift_calibrate(atoms):
    law = make_mark_law(atoms)
    c = psi_evaluate(law, 1.0)
    return [(p, tuple(a + c for a in m)) for p, m in law.atoms]


def load_law(source) -> MarkLaw:
    """Load a law from a JSON file path, file object or already-parsed dict.

    Formats: {"family": "two_point", "p": ...[, "b": ...]},
    {"family": "constant_bias", "lam": ..., "n": ...}, or
    {"atoms": [{"p": ..., "marks": [...]}, ...][, "calibrate": true]} where
    the calibrate flag shifts every mark by psi(1) to restore calibration.
    """
    if isinstance(source, (str, bytes)) or hasattr(source, "__fspath__"):
        with open(source) as fh:
            doc = json.load(fh)
    elif hasattr(source, "read"):
        doc = json.load(source)
    else:
        doc = source
    fam = doc.get("family")
    if fam == "two_point":
        return make_two_point(doc["p"], doc.get("b"))
    if fam == "constant_bias":
        return make_constant_bias(doc["lam"], doc.get("n", 2))
    if fam is not None:
        raise LawError("NOT_NORMALIZED", f"unknown family {fam!r}")
    atoms = [(a["p"], tuple(a["marks"])) for a in doc["atoms"]]
    if doc.get("calibrate"):
        atoms = _shift_calibrate(atoms)
    return make_mark_law(atoms)


def dump_law(law: MarkLaw, path) -> None:
    doc = {"atoms": [{"p": p, "marks": list(m)} for p, m in law.atoms]}
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")
