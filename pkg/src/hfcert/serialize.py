"""Versioned JSON documents for integrals, Gram matrices and results.

Complex numbers are two-element arrays [re, im]; the eri tensor is a
row-major flat array over (j, k, l, m). Floats are written with Python's
shortest round-trip repr and non-finite values become null, so identical
inputs give byte-identical files.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from typing import Any, Dict, Optional, Tuple

import numpy as np

from .conditions import ConditionReport, ContractionCheck
from .errors import InvalidInputError
from .grassmann import GrassmannPoint
from .integrals import Issue, IntegralSet
from .kantorovich import DisplacementCheck, KantorovichCertificate, NewtonTrace
from .matnorm import Violation, WeightSet
from .ortho import OrthoResult, PropagationCheck

INTEGRALSET = "integralset.v1"
GRAM = "gram.v1"
CONDITIONS = "conditions.v1"
CERTIFICATE = "certificate.v1"
TRACE = "trace.v1"
REPORT = "report.v1"


def plain(obj: Any) -> Any:
    """Recursively convert numpy and complex values to JSON-ready values."""
    if isinstance(obj, dict):
        return {str(k): plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return plain(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, (complex, np.complexfloating)):
        return [plain(obj.real), plain(obj.imag)]
    return obj


def encode_complex(a) -> Any:
    a = np.asarray(a, dtype=complex)
    return plain(np.stack([a.real, a.imag], axis=-1))


def decode_complex(data, shape=None, name="array") -> np.ndarray:
    """Accept nested [re, im] pairs or plain real numbers."""
    try:
        arr = np.asarray(data, dtype=float)
    except (TypeError, ValueError) as exc:
        raise InvalidInputError(f"{name}: not a numeric array") from exc
    if shape is not None and arr.shape == tuple(shape):
        out = arr.astype(complex)
    elif arr.ndim >= 1 and arr.shape[-1] == 2 and (shape is None or arr.shape[:-1] == tuple(shape)):
        out = arr[..., 0] + 1j * arr[..., 1]
    else:
        raise InvalidInputError(f"{name}: expected shape {shape} (complex as [re, im]), "
                                f"got {arr.shape}")
    if not np.all(np.isfinite(out)):
        raise InvalidInputError(f"{name}: non-finite entries")
    return out


def dumps(doc: Dict[str, Any]) -> str:
    return json.dumps(plain(doc), indent=2, allow_nan=False, ensure_ascii=False) + "\n"


def write_atomic(path: str, text: str) -> None:
    """Write via a temporary file in the same directory and rename."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".json")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_json(path: str) -> Dict[str, Any]:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise InvalidInputError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InvalidInputError(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise InvalidInputError(f"{path}: top level must be an object")
    return doc


def _require_schema(doc, expected):
    schema = doc.get("schema")
    if schema != expected:
        raise InvalidInputError(f"unsupported schema {schema!r}, expected {expected!r}")


# integral sets

def integralset_to_doc(integrals: IntegralSet, weights: Optional[WeightSet] = None
                       ) -> Dict[str, Any]:
    doc = {
        "schema": INTEGRALSET,
        "nu": integrals.nu,
        "n_elec": integrals.n_elec,
        "charges": integrals.charges,
        "positions": integrals.positions,
        "h": encode_complex(integrals.h),
        "kinetic": encode_complex(integrals.kinetic),
        "attraction": encode_complex(integrals.attraction),
        "eri": encode_complex(integrals.eri.reshape(-1)),
    }
    if weights is not None:
        doc["weights"] = weights.w
        if weights.points is not None:
            doc["points"] = weights.points
    return doc


def integralset_from_doc(doc: Dict[str, Any]) -> Tuple[IntegralSet, Optional[WeightSet]]:
    _require_schema(doc, INTEGRALSET)
    try:
        nu = int(doc["nu"])
        n_elec = int(doc["n_elec"])
        charges = np.asarray(doc.get("charges", []), dtype=float)
        n_nuc = charges.size
        positions = np.asarray(doc.get("positions", np.zeros((n_nuc, 3))), dtype=float)
        h = decode_complex(doc["h"], (nu, nu), "h")
        kinetic = decode_complex(doc["kinetic"], (nu, nu), "kinetic")
        attraction = decode_complex(doc["attraction"], (n_nuc, nu, nu), "attraction")
        eri = decode_complex(doc["eri"], (nu**4,), "eri").reshape((nu,) * 4)
    except KeyError as exc:
        raise InvalidInputError(f"missing field {exc.args[0]!r}") from exc
    except (TypeError, ValueError) as exc:
        raise InvalidInputError(str(exc)) from exc
    if nu < 1:
        raise InvalidInputError("nu must be positive")
    integrals = IntegralSet(nu, n_elec, h, kinetic, attraction, eri, charges, positions)
    weights = None
    if "weights" in doc:
        weights = WeightSet(np.asarray(doc["weights"], dtype=float), doc.get("points"))
        if weights.nu != nu:
            raise InvalidInputError("weights dimension differs from nu")
    return integrals, weights


def gram_to_doc(gram) -> Dict[str, Any]:
    g = np.asarray(gram, dtype=complex)
    return {"schema": GRAM, "nu": g.shape[0], "gram": encode_complex(g)}


def gram_from_doc(doc: Dict[str, Any]) -> np.ndarray:
    _require_schema(doc, GRAM)
    try:
        nu = int(doc["nu"])
        return decode_complex(doc["gram"], (nu, nu), "gram")
    except KeyError as exc:
        raise InvalidInputError(f"missing field {exc.args[0]!r}") from exc


# results

def validation_doc(issues, violations) -> Dict[str, Any]:
    return {
        "integrals_valid": not issues,
        "integral_issues": [
            {"check": i.check, "indices": list(i.indices), "magnitude": i.magnitude}
            for i in issues
        ],
        "weights_valid": violations is not None and not violations,
        "weight_violations": None if violations is None else [
            {"clause": v.clause, "indices": list(v.indices), "margin": v.margin}
            for v in violations
        ],
    }


def conditions_to_doc(report: ConditionReport, check: Optional[ContractionCheck] = None,
                      include_factors: bool = True) -> Dict[str, Any]:
    doc: Dict[str, Any] = {"schema": CONDITIONS, "constants": report.constants(),
                           "feasibility": dict(report.feasibility)}
    if include_factors:
        doc["v_inv"] = report.v_inv
        doc["u_inv"] = report.u_inv
        doc["u_breve_inv"] = report.u_breve_inv
    if check is not None:
        doc["contraction_check"] = {
            "passed": check.passed,
            "trials": check.trials,
            "worst_ratios": dict(check.worst_ratios),
            "failures": list(check.failures),
        }
    return doc


def certificate_to_doc(cert: KantorovichCertificate) -> Dict[str, Any]:
    return {
        "schema": CERTIFICATE,
        "valid": cert.valid,
        "gates": dict(cert.gates),
        "margins": dict(cert.margins),
        "failed_gates": cert.failed_gates(),
        "c_star": cert.c_star,
        "eps": cert.eps,
        "eps_hat": cert.eps_hat,
        "big_c": cert.big_c,
        "big_d": cert.big_d,
        "big_l": cert.big_l,
        "theta": cert.theta,
        "tau_star": cert.tau_star,
        "tau_star_star": cert.tau_star_star,
        "g": cert.g,
        "r": cert.r,
        "displacement_bound": cert.displacement_bound,
        "ball_within_domain": cert.ball_within_domain,
    }


def trace_to_doc(trace: NewtonTrace, residual: Optional[float] = None) -> Dict[str, Any]:
    p = trace.final_point
    return {
        "schema": TRACE,
        "converged": trace.converged,
        "recenter": trace.recenter,
        "iterations": len(trace.iterates) - 1,
        "iterates": [
            {"xi": encode_complex(s.xi), "gradient_norm": s.grad_norm,
             "step_norm": s.step_norm}
            for s in trace.iterates
        ],
        "quadratic_constants": trace.quadratic_constants(),
        "final_density": encode_complex(p.p),
        "commutator_residual": residual,
    }


def displacement_to_doc(check: DisplacementCheck) -> Dict[str, Any]:
    return {"passed": check.passed, "measured": check.measured, "bound": check.bound,
            "uniqueness_radius": check.uniqueness_radius}


def ortho_to_doc(result: OrthoResult, propagation: Optional[PropagationCheck] = None
                 ) -> Dict[str, Any]:
    ch = result.chain
    doc = {
        "c": encode_complex(result.c),
        "s": encode_complex(result.s),
        "norms": result.norms,
        "eps0": ch.eps0, "eps1": ch.eps1, "eps2": ch.eps2, "eps3": ch.eps3, "eps4": ch.eps4,
        "s_weighted_norm": result.s_weighted_norm,
        "orthonormality_error": result.orthonormality_error,
    }
    if propagation is not None:
        doc["propagation"] = {
            "passed": propagation.passed,
            "measured_primed": propagation.measured_primed,
            "predicted": propagation.predicted,
            "measured": propagation.measured,
            "within": propagation.within,
        }
    return doc
