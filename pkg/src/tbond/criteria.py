"""Window-level verdicts for the regularity, multi-regularity and rank criteria.

A verdict says whether the local premises hold for every interior center of
the window. For periodic inputs whose window margin covers the radii involved
this coincides with the premises on the infinite set; a failure at one
``rho0`` never disproves regularity, since the criteria only ask for *some*
radius.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .bonding import is_t_bonded
from .cluster import DEFAULT_CANDIDATE_CAP, Classification, classify, cluster_at
from .errors import MarginError
from .geom import affine_rank, invert
from .pointset import PointSet
from .symmetry import same_elements, stabilization_test

SCHEMA_VERSION = "tbond.verdict/1"
CAVEAT = "window-level verdict: consistent with the criterion on this window"


@dataclass
class CriterionVerdict:
    kind: str
    passed: bool | str
    rho0: float | None
    t: float
    m: int | None = None
    evidence: dict[str, Any] = field(default_factory=dict)
    caveat: str = CAVEAT

    @property
    def set_level(self) -> str:
        return "consistent" if self.passed is True else "inconclusive"

    def to_dict(self):
        return {
            "schema": SCHEMA_VERSION,
            "kind": self.kind,
            "passed": self.passed,
            "set_level": self.set_level,
            "rho0": self.rho0,
            "t": self.t,
            "m": self.m,
            "caveat": self.caveat,
            "evidence": self.evidence,
        }


def _require_margin(ps: PointSet, level: float):
    if len(ps.interior_indices(level)) == 0:
        raise MarginError(
            "window has no center with enough margin; enlarge the window",
            needed=float(level),
            max_depth=float(ps.depths.max()),
        )


def _class_summary(cls: Classification):
    return [
        {
            "representative": c.representative.index,
            "size": len(c),
            "cluster_size": len(c.representative),
            "rank": c.representative.rank,
            "fingerprint": c.fingerprint,
        }
        for c in cls
    ]


def _sample(items, k, seed):
    items = list(items)
    if len(items) <= k:
        return items
    return sorted(random.Random(seed).sample(items, k))


def transitivity_check(ps: PointSet, cls: Classification, max_pairs: int = 64, seed: int = 0) -> dict:
    """Apply sampled class witnesses to the whole window and test membership.

    Only points whose image stays inside the window are tested; everything
    there must be a point of the set if the witness extends to a symmetry.
    """
    pairs = [(k, c) for k, cc in enumerate(cls) for c in cc.member_centers if c != cc.representative.index]
    pairs = _sample(pairs, max_pairs, seed)
    eps = ps.tol.eps_geom
    failures, tested, worst = [], 0, 0.0
    for k, c in pairs:
        g = cls[k].witness[c]
        for h in (g, invert(g)):
            images = h.apply(ps.points)
            inside = ps.window.depth(images) >= eps
            if not np.any(inside):
                continue
            dist, _ = ps.tree.query(images[inside])
            tested += int(inside.sum())
            worst = max(worst, float(dist.max()))
            if dist.max() > eps:
                failures.append({"class": k, "center": c, "missing": int((dist > eps).sum())})
    return {
        "pairs_checked": len(pairs),
        "points_tested": tested,
        "max_residual": worst,
        "failures": failures,
        "ok": not failures,
    }


def check_regularity(
    ps: PointSet,
    t: float,
    rho0: float,
    jobs: int = 1,
    sample: int = 64,
    seed: int = 0,
    cap: int = DEFAULT_CANDIDATE_CAP,
) -> CriterionVerdict:
    """One class of (rho0+t)-clusters plus equal stabilizers at rho0 and rho0+t for one center."""
    level = rho0 + t
    _require_margin(ps, level)
    cls = classify(ps, level, jobs=jobs, cap=cap)
    rep = cls[0].representative.index
    stab = stabilization_test(ps, rep, rho0, t, cap)
    passed = cls.count == 1 and stab.equal
    evidence: dict[str, Any] = {
        "N_rho0_plus_t": cls.count,
        "interior_count": cls.interior_count,
        "boundary_excluded": cls.excluded_count,
        "classes": _class_summary(cls),
        "stabilization": {
            "center": rep,
            "equal": stab.equal,
            "element_sets_equal": same_elements(stab.lower, stab.upper),
            "order_rho0": stab.lower.order_descriptor,
            "order_rho0_plus_t": stab.upper.order_descriptor,
            "hull_dim_rho0": stab.lower.hull.dim,
            "hull_dim_rho0_plus_t": stab.upper.hull.dim,
        },
    }
    reasons = []
    if cls.count != 1:
        reasons.append(f"N(rho0 + t) = {cls.count} != 1")
    if not stab.equal:
        reasons.append("stabilizers differ between rho0 and rho0 + t")
    evidence["reasons"] = reasons
    if passed:
        centers = _sample(cls[0].member_centers, sample, seed)
        ranks = sorted({cluster_at(ps, c, rho0).rank for c in centers})
        evidence["rank_conclusion"] = {"sampled": len(centers), "ranks_rho0": ranks, "full": ranks == [ps.dim]}
        evidence["transitivity"] = transitivity_check(ps, cls, sample, seed)
    return CriterionVerdict("regular", passed, float(rho0), float(t), 1 if passed else None, evidence)


def check_m_regularity(
    ps: PointSet,
    t: float,
    rho0: float,
    jobs: int = 1,
    cap: int = DEFAULT_CANDIDATE_CAP,
) -> CriterionVerdict:
    """N(rho0) = N(rho0+t) = m and equal stabilizers for one representative per class."""
    level = rho0 + t
    _require_margin(ps, level)
    low = classify(ps, rho0, level=level, jobs=jobs, cap=cap)
    high = classify(ps, level, jobs=jobs, cap=cap)
    stabs = []
    for c in high:
        st = stabilization_test(ps, c.representative.index, rho0, t, cap)
        stabs.append(
            {
                "center": c.representative.index,
                "equal": st.equal,
                "order_rho0": st.lower.order_descriptor,
                "order_rho0_plus_t": st.upper.order_descriptor,
            }
        )
    same_counts = low.count == high.count
    passed = same_counts and all(s["equal"] for s in stabs)
    evidence: dict[str, Any] = {
        "N_rho0": low.count,
        "N_rho0_plus_t": high.count,
        "interior_count": high.interior_count,
        "boundary_excluded": high.excluded_count,
        "classes": _class_summary(high),
        "stabilization": stabs,
        "decomposition": [sorted(c.member_centers) for c in high],
    }
    reasons = []
    if not same_counts:
        reasons.append(f"N(rho0) = {low.count} != N(rho0 + t) = {high.count}")
    if not all(s["equal"] for s in stabs):
        reasons.append("stabilizers differ for some class representative")
    evidence["reasons"] = reasons
    return CriterionVerdict("m_regular", passed, float(rho0), float(t), high.count if passed else None, evidence)


def check_rank_stabilization(ps: PointSet, t: float) -> CriterionVerdict:
    """Cluster ranks at radii ``k*t`` for ``k = 1..d+1`` over interior centers."""
    d = ps.dim
    top = (d + 1) * t
    _require_margin(ps, top)
    centers = ps.interior_indices(top)
    hull = affine_rank(ps.points, ps.tol)
    levels = []
    per_level = []
    for k in range(1, d + 2):
        ranks = np.array([cluster_at(ps, int(c), k * t).rank for c in centers])
        distinct = sorted(set(ranks.tolist()))
        per_level.append(ranks)
        levels.append(
            {
                "k": k,
                "rho": k * t,
                "ranks": distinct,
                "center_independent": len(distinct) == 1,
                "rank": distinct[0] if len(distinct) == 1 else None,
            }
        )
    premise_strict = all(lv["center_independent"] for lv in levels[: max(d - 1, 1)])
    premise_extended = all(lv["center_independent"] for lv in levels[:d])
    stab_k = None
    for k in range(d):
        a, b = levels[k], levels[k + 1]
        if a["center_independent"] and b["center_independent"] and a["rank"] == b["rank"]:
            stab_k = k + 1
            break
    conclusion = stab_k is not None and all(np.all(r == d) for r in per_level[stab_k - 1 :])
    full_hull = hull.dim == d
    passed = bool(full_hull and premise_strict and conclusion)
    reasons = []
    if not full_hull:
        reasons.append(f"affine hull of the set has dimension {hull.dim} < {d}")
    if not premise_strict:
        reasons.append("ranks depend on the center below radius (d-1)t")
    if stab_k is None:
        reasons.append("no k <= d with d(kt) = d((k+1)t)")
    elif not conclusion:
        reasons.append("ranks stabilize below the full dimension")
    evidence = {
        "profile": levels,
        "interior_count": int(len(centers)),
        "premise_k_le_d_minus_1": premise_strict,
        "premise_k_le_d": premise_extended,
        "stabilization_k": stab_k,
        "final_rank": int(per_level[-1].max()),
        "set_hull_dim": hull.dim,
        "t_bonded": is_t_bonded(ps, t).to_dict() | {"component_labels": None},
        "reasons": reasons,
    }
    return CriterionVerdict("rank_stabilization", passed, None, float(t), None, evidence)
