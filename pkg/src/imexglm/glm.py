"""General linear method tableaus, order conditions, and the B-construction.

A method with s internal stages and r external values propagates
``y_i^[n] ~= sum_k q[k][i] h^k y^(k)(t_n)``; the tableau blocks are

* ``A`` (s x s, lower triangular here): implicit stage coupling,
* ``U`` (s x r): external-to-stage weights,
* ``B`` (r x s): stage-to-external weights,
* ``V`` (r x r): external propagation (power bounded, Ve = e),
* ``qvecs`` ((p+1) x r): the error-expansion vectors q_0 .. q_p.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .matkit import lu_solve, poly_eval, poly_integrate, poly_mul

__all__ = [
    "GlmTableau",
    "stage_order_residual",
    "order_residual",
    "glm_stability_matrix",
    "build_B",
    "tableau_to_json",
    "tableau_from_json",
]


@dataclass
class GlmTableau:
    """Coefficients of a general linear method plus its order metadata."""

    c: np.ndarray
    A: np.ndarray
    U: np.ndarray
    B: np.ndarray
    V: np.ndarray
    qvecs: np.ndarray
    p: int
    q: int
    name: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).reshape(-1)
        self.A = np.asarray(self.A, dtype=float)
        self.U = np.asarray(self.U, dtype=float)
        self.B = np.asarray(self.B, dtype=float)
        self.V = np.asarray(self.V, dtype=float)
        self.qvecs = np.asarray(self.qvecs, dtype=float)
        s, r = self.s, self.r
        if self.A.shape != (s, s):
            raise ValueError("A must be (s, s)")
        if self.U.shape != (s, r):
            raise ValueError("U must be (s, r)")
        if self.B.shape != (r, s):
            raise ValueError("B must be (r, s)")
        if self.V.shape != (r, r):
            raise ValueError("V must be (r, r)")
        if self.qvecs.shape != (self.p + 1, r):
            raise ValueError("qvecs must be (p+1, r)")
        if self.q not in (self.p - 1, self.p):
            raise ValueError("stage order q must be p-1 or p")
        if np.any(np.abs(np.triu(self.A, 1)) > 0):
            raise ValueError("A must be lower triangular")

    @property
    def s(self) -> int:
        return self.c.size

    @property
    def r(self) -> int:
        return self.V.shape[0]


def _cpow(c, k):
    # c**k with the c**0 = e convention
    return np.ones_like(c) if k == 0 else c**k


def stage_order_residual(tab: GlmTableau, k: int) -> np.ndarray:
    """Residual of the stage-order condition at power k (length s).

    c^k - k A c^(k-1) - k! U q_k, with c^0 = e and the k A c^(k-1) term
    absent at k = 0.  Zero through k = q for a method of stage order q.
    """
    if k < 0:
        raise ValueError("k must be >= 0")
    res = _cpow(tab.c, k) - math.factorial(k) * (tab.U @ tab.qvecs[k])
    if k >= 1:
        res = res - k * (tab.A @ _cpow(tab.c, k - 1))
    return res


def order_residual(tab: GlmTableau, k: int) -> np.ndarray:
    """Residual of the order condition at power k (length r).

    sum_{l=0..k} (k!/l!) q_{k-l} - k B c^(k-1) - k! V q_k.  Zero through
    k = p for a method of order p.
    """
    if k < 0:
        raise ValueError("k must be >= 0")
    kfac = math.factorial(k)
    res = -kfac * (tab.V @ tab.qvecs[k])
    for ell in range(k + 1):
        res = res + (kfac // math.factorial(ell)) * tab.qvecs[k - ell]
    if k >= 1:
        res = res - k * (tab.B @ _cpow(tab.c, k - 1))
    return res


def glm_stability_matrix(tab: GlmTableau, z: complex) -> np.ndarray:
    """S(z) = V + z B (I - z A)^(-1) U (r x r, complex).

    Raises SingularMatrixError at resolvent poles (z = 1/a_ii).
    """
    s = tab.s
    eye = np.eye(s)
    resolvent_u = lu_solve(eye - z * tab.A, tab.U.astype(complex))
    return tab.V + z * (tab.B @ resolvent_u)


def _lagrange_denoms(c):
    s = c.size
    phi_at_own = np.empty(s)
    polys = []
    for j in range(s):
        poly = np.array([1.0])
        for i in range(s):
            if i != j:
                poly = poly_mul(poly, np.array([-c[i], 1.0]))
        polys.append(poly)
        phi_at_own[j] = poly_eval(poly, c[j])
    if np.min(np.abs(phi_at_own)) == 0.0:
        raise ValueError("abscissae must be distinct")
    return polys, phi_at_own


def build_B(A, V, c) -> np.ndarray:
    """Stage-to-external matrix making the order conditions hold.

    With phi_j(x) = prod_{i != j} (x - c_i),

        B0[i,j] = Int_0^{1+c_i} phi_j / phi_j(c_j)
        B1[i,j] = phi_j(1 + c_i) / phi_j(c_j)
        B2[i,j] = Int_0^{c_i} phi_j / phi_j(c_j)
        B = B0 - A B1 - V B2 + V A

    Monomial expansion of phi_j is integrated exactly; for any lower
    triangular A and any V with Ve = e, the result satisfies the order
    conditions alongside the stage-order q-vectors.
    """
    A = np.asarray(A, dtype=float)
    V = np.asarray(V, dtype=float)
    c = np.asarray(c, dtype=float).reshape(-1)
    s = c.size
    polys, denoms = _lagrange_denoms(c)
    B0 = np.empty((s, s))
    B1 = np.empty((s, s))
    B2 = np.empty((s, s))
    for j in range(s):
        anti = poly_integrate(polys[j])
        B0[:, j] = poly_eval(anti, 1.0 + c) / denoms[j]
        B1[:, j] = poly_eval(polys[j], 1.0 + c) / denoms[j]
        B2[:, j] = poly_eval(anti, c) / denoms[j]
    return B0 - A @ B1 - V @ B2 + V @ A


def tableau_to_json(tab: GlmTableau) -> str:
    """Serialize to the JSON schema {c, A, U, B, V, qvecs, p, q, r, s}.

    Row-major nested lists; repr-exact floats so a round trip is
    bit-identical.
    """
    doc = {
        "c": tab.c.tolist(),
        "A": tab.A.tolist(),
        "U": tab.U.tolist(),
        "B": tab.B.tolist(),
        "V": tab.V.tolist(),
        "qvecs": tab.qvecs.tolist(),
        "p": tab.p,
        "q": tab.q,
        "r": tab.r,
        "s": tab.s,
    }
    if tab.name:
        doc["name"] = tab.name
    return json.dumps(doc, indent=2, sort_keys=True)


def tableau_from_json(text: str) -> GlmTableau:
    doc = json.loads(text)
    required = {"c", "A", "U", "B", "V", "qvecs", "p", "q", "r", "s"}
    missing = required - set(doc)
    if missing:
        raise ValueError("tableau JSON missing keys: %s" % ", ".join(sorted(missing)))
    tab = GlmTableau(
        c=np.array(doc["c"], dtype=float),
        A=np.array(doc["A"], dtype=float),
        U=np.array(doc["U"], dtype=float),
        B=np.array(doc["B"], dtype=float),
        V=np.array(doc["V"], dtype=float),
        qvecs=np.array(doc["qvecs"], dtype=float),
        p=int(doc["p"]),
        q=int(doc["q"]),
        name=doc.get("name", ""),
    )
    if tab.s != int(doc["s"]) or tab.r != int(doc["r"]):
        raise ValueError("declared s/r disagree with array shapes")
    return tab
