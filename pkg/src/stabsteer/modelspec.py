"""JSON model-spec files: the single ingestion path for models, errors, and
simulation jobs.

A spec file carries the register size, the stabilizer potential, optional
Hamiltonian terms, jump content (dressed rates, raw Pauli channels, an
m-matrix over the canonical single-site flip basis, or explicit gamma
blocks), error records, and a simulation section.  Parsing is strict:
unknown keys and out-of-range sites are rejected with field diagnostics.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from dataclasses import dataclass, field

import numpy as np

from .correct import ErrorSpec
from .errors import SpecFileError
from .evolve import SimulationConfig
from .lindblad import (
    LindbladModel,
    close_jump_basis,
    from_m_matrix,
    merge_models,
    single_site_flip_basis,
)
from .pauli import PauliParseError, PauliString, PauliSum, parse_pauli
from .potential import (
    StabilizerPotential,
    all_dressings,
    chain_potential,
    projected_jump,
    torus_potential,
)

SCHEMA_VERSION = 1


def _require_keys(record, allowed, required, where):
    unknown = set(record) - set(allowed)
    if unknown:
        raise SpecFileError(f"{where}: unknown keys {sorted(unknown)}")
    missing = set(required) - set(record)
    if missing:
        raise SpecFileError(f"{where}: missing keys {sorted(missing)}")


def _parse_pauli(text, n, where):
    try:
        return parse_pauli(text, n)
    except PauliParseError as exc:
        raise SpecFileError(f"{where}: {exc}") from exc


@dataclass
class ModelSpec:
    qubits: int
    potential: StabilizerPotential
    hamiltonian: PauliSum
    jumps: list                       # raw records, validated
    errors: list                      # ErrorSpec values
    simulation: SimulationConfig | None
    geometry: dict | None = None
    symmetries: list = field(default_factory=list)   # PauliStrings to check
    raw: dict = field(default_factory=dict)

    def build_model(self) -> LindbladModel:
        """Assemble the Lindbladian described by the jump records."""
        n = self.qubits
        pot = self.potential
        model = LindbladModel(pot, [], np.zeros((0, 0)), self.hamiltonian)
        for rec in self.jumps:
            kind = rec["kind"]
            if kind == "dressed":
                p = _parse_pauli(rec["pauli"], n, "jumps")
                outcomes = {int(a): int(v) for a, v in rec["outcomes"].items()}
                jump = projected_jump(p, outcomes, pot)
                jumps, gamma = close_jump_basis(
                    [jump], np.array([[rec["rate"]]], dtype=complex)
                )
                part = LindbladModel(pot, jumps, gamma, PauliSum(n))
            elif kind == "raw":
                p = _parse_pauli(rec["pauli"], n, "jumps")
                dressings = all_dressings(p.unsigned(), pot)
                m = len(dressings)
                gamma = np.full((m, m), rec["rate"], dtype=complex)
                part = LindbladModel(pot, dressings, gamma, PauliSum(n))
            elif kind == "m_matrix":
                basis = single_site_flip_basis(pot)
                m_mat = np.zeros((len(basis), len(basis)), dtype=complex)
                for i, j, re_v, im_v in rec["entries"]:
                    m_mat[int(i), int(j)] = re_v + 1j * im_v
                part = from_m_matrix(basis, m_mat, pot)
            elif kind == "gamma_block":
                jumps = []
                for jr in rec["basis"]:
                    p = _parse_pauli(jr["pauli"], n, "jumps.basis")
                    outcomes = {int(a): int(v) for a, v in jr["outcomes"].items()}
                    jumps.append(projected_jump(p, outcomes, pot))
                gamma = np.zeros((len(jumps), len(jumps)), dtype=complex)
                for i, j, re_v, im_v in rec["entries"]:
                    gamma[int(i), int(j)] = re_v + 1j * im_v
                jumps, gamma = close_jump_basis(jumps, gamma)
                part = LindbladModel(pot, jumps, gamma, PauliSum(n))
            else:
                raise SpecFileError(f"jumps: unknown kind {kind!r}")
            model = merge_models(model, part)
        return model

    def to_dict(self) -> dict:
        return json.loads(json.dumps(self.raw, sort_keys=True))

    def config_hash(self) -> str:
        return hashlib.sha256(
            json.dumps(self.raw, sort_keys=True).encode()
        ).hexdigest()[:16]


def _parse_geometry(geo, qubits):
    _require_keys(geo, {"kind", "mu", "pbc", "dims"}, {"kind", "mu"}, "geometry")
    kind = geo["kind"]
    if kind == "chain":
        return chain_potential(qubits, geo["mu"], pbc=geo.get("pbc", True))
    if kind == "torus":
        dims = geo.get("dims")
        if not dims or int(dims[0]) * int(dims[1]) != qubits:
            raise SpecFileError("geometry: torus dims must multiply to qubits")
        return torus_potential(int(dims[0]), int(dims[1]), geo["mu"])
    raise SpecFileError(f"geometry: unknown kind {kind!r}")


def parse_model_spec(data) -> ModelSpec:
    """Parse a spec dict (or JSON text / file path) into a ModelSpec."""
    if isinstance(data, (str, os.PathLike)):
        text = open(data).read() if os.path.exists(str(data)) else str(data)
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise SpecFileError(f"not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise SpecFileError("spec root must be an object")
    allowed = {
        "schema_version", "qubits", "geometry", "phi", "hamiltonian",
        "jumps", "errors", "simulation", "symmetries",
    }
    _require_keys(data, allowed, {"schema_version", "qubits"}, "root")
    if data["schema_version"] != SCHEMA_VERSION:
        raise SpecFileError(
            f"schema_version {data['schema_version']} unsupported "
            f"(expected {SCHEMA_VERSION})"
        )
    n = int(data["qubits"])
    if n < 1:
        raise SpecFileError("qubits must be positive")

    if "phi" in data:
        terms = []
        for rec in data["phi"]:
            _require_keys(rec, {"pauli", "mu"}, {"pauli", "mu"}, "phi")
            terms.append((_parse_pauli(rec["pauli"], n, "phi"), float(rec["mu"])))
        potential = StabilizerPotential(n, terms)
        geometry = data.get("geometry")
    elif "geometry" in data:
        potential = _parse_geometry(data["geometry"], n)
        geometry = data["geometry"]
    else:
        potential = StabilizerPotential(n, [])
        geometry = None

    ham = PauliSum(n)
    for rec in data.get("hamiltonian", []):
        _require_keys(rec, {"pauli", "coeff"}, {"pauli", "coeff"}, "hamiltonian")
        ham.add(float(rec["coeff"]), _parse_pauli(rec["pauli"], n, "hamiltonian"))

    jumps = []
    for rec in data.get("jumps", []):
        kind = rec.get("kind")
        if kind == "dressed":
            _require_keys(rec, {"kind", "pauli", "outcomes", "rate"},
                          {"kind", "pauli", "outcomes", "rate"}, "jumps")
        elif kind == "raw":
            _require_keys(rec, {"kind", "pauli", "rate"},
                          {"kind", "pauli", "rate"}, "jumps")
        elif kind == "m_matrix":
            _require_keys(rec, {"kind", "entries"}, {"kind", "entries"}, "jumps")
        elif kind == "gamma_block":
            _require_keys(rec, {"kind", "basis", "entries"},
                          {"kind", "basis", "entries"}, "jumps")
        else:
            raise SpecFileError(f"jumps: unknown kind {kind!r}")
        jumps.append(rec)

    errors = []
    for rec in data.get("errors", []):
        kind = rec.get("kind")
        if kind in ("hamiltonian_pauli", "incoherent_pauli"):
            _require_keys(rec, {"kind", "pauli", "strength", "variant"},
                          {"kind", "pauli", "strength"}, "errors")
            errors.append(ErrorSpec(
                kind, _parse_pauli(rec["pauli"], n, "errors"),
                float(rec["strength"]),
            ))
        elif kind == "incoherent_general":
            _require_keys(rec, {"kind", "terms", "strength"},
                          {"kind", "terms", "strength"}, "errors")
            terms = []
            for t in rec["terms"]:
                _require_keys(t, {"coeff", "pauli"}, {"coeff", "pauli"},
                              "errors.terms")
                c = t["coeff"]
                cval = complex(c[0], c[1]) if isinstance(c, list) else complex(c)
                terms.append((cval, _parse_pauli(t["pauli"], n, "errors")))
            errors.append(ErrorSpec(kind, terms, float(rec["strength"])))
        else:
            raise SpecFileError(f"errors: unknown kind {kind!r}")

    sim = None
    if "simulation" in data:
        rec = dict(data["simulation"])
        _require_keys(
            rec,
            {"integrator", "t_final", "dt", "rtol", "atol", "observables",
             "seed", "n_traj"},
            set(), "simulation",
        )
        obs = []
        for ob in rec.pop("observables", []):
            _require_keys(ob, {"name", "pauli"}, {"name", "pauli"},
                          "simulation.observables")
            obs.append((
                ob["name"],
                PauliSum.from_pairs(
                    [(1.0, _parse_pauli(ob["pauli"], n, "simulation"))], n
                ),
            ))
        sim = SimulationConfig(observables=obs, **rec)

    symmetries = [
        _parse_pauli(text, n, "symmetries") for text in data.get("symmetries", [])
    ]
    return ModelSpec(
        n, potential, ham, jumps, errors, sim, geometry, symmetries, data
    )


def model_to_jump_records(model: LindbladModel) -> list:
    """Serialize a model's dissipative content as one gamma_block record."""
    basis = [
        {
            "pauli": str(j.base),
            "outcomes": {str(a): v for a, v in j.outcomes},
        }
        for j in model.basis
    ]
    entries = []
    for i in range(len(model.basis)):
        for j in range(len(model.basis)):
            g = model.gamma[i, j]
            if abs(g) > 1e-14:
                entries.append([i, j, float(g.real), float(g.imag)])
    return [{"kind": "gamma_block", "basis": basis, "entries": entries}]


def spec_dict_for_model(model: LindbladModel, base_spec: ModelSpec) -> dict:
    """A new spec dict describing `model` (used by the correction command)."""
    out = {
        "schema_version": SCHEMA_VERSION,
        "qubits": model.n_qubits,
        "phi": [
            {"pauli": str(s), "mu": mu}
            for s, mu in zip(model.potential.stabilizers, model.potential.mus)
        ],
        "hamiltonian": [
            {"pauli": str(p.unsigned()), "coeff": float((c * p.letter_phase()).real)}
            for c, p in model.hamiltonian.items()
            if abs(c) > 1e-14
        ],
        "jumps": model_to_jump_records(model),
    }
    if base_spec.raw.get("simulation"):
        out["simulation"] = base_spec.raw["simulation"]
    if base_spec.raw.get("symmetries"):
        out["symmetries"] = base_spec.raw["symmetries"]
    return out


def write_atomic(path, text: str):
    """Write via a temp file and rename, so readers never see partial output."""
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-stabsteer-")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
