#!/usr/bin/env python3
"""Regenerate the certified problem fixtures under tests/fixtures/.

Each fixture couples a composite-prox problem (as a loadable config) with
independently computed reference certificates.  Two-dimensional references
are certified by two methods (grid search plus a closed form or an exact
one-dimensional analysis); mutual agreement within combined radii is
asserted here before anything is written.

Usage:  python3 tools/make_fixtures.py [--imaging]
"""

import argparse
import json
import math
import os

import numpy as np

from proxsplit.imaging import MeasurementModel, identity_basis, recovery_problem
from proxsplit.linops import LinearOperator
from proxsplit.oracle import (
    Certificate,
    grid_oracle,
    long_run_reference,
    ref_ball_halfspace_through_center,
    ref_project_affine,
    ref_project_ball,
    ref_project_box,
    ref_project_halfspace,
    ref_shrink_l2,
    scalar_oracle,
    scalar_pieces_from_problem,
)
from proxsplit.solver import problem_from_config

FIXTURE_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), "..",
                           "tests", "fixtures")

ROT30 = [[math.cos(math.pi / 6), -math.sin(math.pi / 6)],
         [math.sin(math.pi / 6), math.cos(math.pi / 6)]]


def closed(x, note):
    x = np.asarray(x, dtype=float)
    radius = 1e-9 * (1.0 + float(np.linalg.norm(x)))
    return Certificate(x, "closed_form", radius, {"note": note})


def scalar_from_problem(cfg):
    problem = problem_from_config(cfg)
    return scalar_oracle(scalar_pieces_from_problem(problem))


def term(weight, function, operator, shift=None):
    t = {"weight": weight, "function": function, "operator": operator}
    if shift is not None:
        t["shift"] = list(shift)
    return t


def ident(dim):
    return {"kind": "identity", "dim": dim}


def fixtures():
    entries = []

    def add(name, cfg, certs, tags=(), bounds=(-5.0, 5.0)):
        entries.append({"name": name, "problem": cfg, "certs": certs,
                        "tags": list(tags), "bounds": bounds})

    add("disk_projection",
        {"z": [3.0, 4.0],
         "terms": [term(1.0, {"kind": "ball", "center": [0.0, 0.0], "radius": 1.0},
                        ident(2))]},
        [closed(ref_project_ball([3.0, 4.0], [0.0, 0.0], 1.0), "radial ball projection")])

    add("box_projection",
        {"z": [2.0, -1.0],
         "terms": [term(1.0, {"kind": "box", "lo": [0.0, 0.0], "hi": [1.0, 1.0]},
                        ident(2))]},
        [closed(ref_project_box([2.0, -1.0], [0.0, 0.0], [1.0, 1.0]), "componentwise clamp")])

    add("halfspace_projection",
        {"z": [1.0, 1.0],
         "terms": [term(1.0, {"kind": "halfspace", "normal": [1.0, 1.0], "offset": 1.0},
                        ident(2))]},
        [closed(ref_project_halfspace([1.0, 1.0], [1.0, 1.0], 1.0), "halfspace formula")])

    # the diagonal {x1 = x2} parametrized by t gives an exact 1-D analysis
    diag_t = scalar_oracle([(-math.inf, math.inf, 1.0, -1.0, 0.5)])
    t_star = float(diag_t.reference_x[0])
    add("affine_projection",
        {"z": [1.0, 0.0],
         "terms": [term(1.0, {"kind": "affine", "matrix": [[1.0, -1.0]], "rhs": [0.0]},
                        ident(2))]},
        [closed(ref_project_affine([1.0, 0.0], [[1.0, -1.0]], [0.0]), "least-squares projection"),
         Certificate(np.array([t_star, t_star]), "scalar_analysis",
                     math.sqrt(2.0) * diag_t.guaranteed_radius,
                     {"note": "parametrized along the diagonal x = (t, t)"})])

    soft_cfg = {"z": [3.0], "terms": [term(1.0, {"kind": "norm1"}, ident(1))]}
    add("soft_threshold_1d", soft_cfg, [scalar_from_problem(soft_cfg)])

    add("block_shrink",
        {"z": [3.0, 4.0], "terms": [term(1.0, {"kind": "norm2"}, ident(2))]},
        [closed(ref_shrink_l2([3.0, 4.0], 1.0), "radial shrink by the unit weight")],
        tags=["smooth"])

    two_abs_cfg = {"z": [3.0], "terms": [term(0.5, {"kind": "norm1"}, ident(1)),
                                         term(0.5, {"kind": "norm1"}, ident(1))]}
    add("two_abs_weighted", two_abs_cfg, [scalar_from_problem(two_abs_cfg)],
        tags=["smooth"])

    scaled_abs_cfg = {"z": [1.0],
                      "terms": [term(1.0, {"kind": "norm1"},
                                     {"kind": "matrix", "rows": [[2.0]]})]}
    add("scaled_abs", scaled_abs_cfg, [scalar_from_problem(scaled_abs_cfg)],
        tags=["nontrivial_L"])

    add("shifted_box",
        {"z": [2.0, 0.0],
         "terms": [term(1.0, {"kind": "box", "lo": [0.0, 0.0], "hi": [1.0, 1.0]},
                        ident(2), shift=[0.5, 0.5])]},
        [closed(ref_project_box([2.0, 0.0], [0.5, 0.5], [1.5, 1.5]),
                "clamp onto the shifted box")],
        tags=["nonzero_r"])

    add("disk_halfplane",
        {"z": [1.0, 1.0],
         "terms": [term(0.5, {"kind": "ball", "center": [0.0, 0.0], "radius": 1.0},
                        ident(2)),
                   term(0.5, {"kind": "halfspace", "normal": [1.0, 0.0], "offset": 0.0},
                        ident(2))]},
        [closed(ref_ball_halfspace_through_center([1.0, 1.0], [0.0, 0.0], 1.0, [1.0, 0.0]),
                "halfspace-then-ball composition, variational inequality checked")])

    add("halfspace_preimage",
        {"z": [1.0, 1.0],
         "terms": [term(1.0, {"kind": "halfspace", "normal": [1.0], "offset": 1.0},
                        {"kind": "matrix", "rows": [[1.0, 1.0]]})]},
        [closed(ref_project_halfspace([1.0, 1.0], [1.0, 1.0], 1.0),
                "preimage of a scalar halfspace is a halfspace")],
        tags=["nontrivial_L"])

    q = np.array(ROT30)
    r12 = np.array([0.3, -0.2])
    add("rotated_ball",
        {"z": [2.0, 1.0],
         "terms": [term(1.0, {"kind": "ball", "center": [0.0, 0.0], "radius": 1.0},
                        {"kind": "matrix", "rows": ROT30}, shift=list(r12))]},
        [closed(ref_project_ball([2.0, 1.0], q.T @ r12, 1.0),
                "isometric preimage of a shifted ball is a ball")],
        tags=["nontrivial_L", "nonzero_r"])

    scaled_shifted_cfg = {
        "z": [2.0],
        "terms": [term(1.0, {"kind": "norm2"}, {"kind": "matrix", "rows": [[1.5]]},
                       shift=[0.6])]}
    add("scaled_shifted_norm", scaled_shifted_cfg,
        [scalar_from_problem(scaled_shifted_cfg)],
        tags=["nontrivial_L", "nonzero_r", "smooth"])

    elastic_cfg = {"z": [3.0],
                   "terms": [term(1.0, {"kind": "elastic_net", "alpha": 1.0, "beta": 0.5},
                                  ident(1))]}
    add("elastic_net_1d", elastic_cfg, [scalar_from_problem(elastic_cfg)],
        tags=["smooth"])

    # separable 2-D mix: per-coordinate exact analysis, then a 2-D grid check
    mixed_cfg = {
        "z": [1.5, -0.5],
        "terms": [
            term(0.4, {"kind": "box", "lo": [-1.0, -2.0], "hi": [1.0, 0.5]}, ident(2)),
            term(0.3, {"kind": "norm1"}, {"kind": "diagonal", "entries": [1.0, 2.0]},
                 shift=[0.2, -0.1]),
            term(0.3, {"kind": "elastic_net", "alpha": 0.5, "beta": 1.0}, ident(2)),
        ],
    }
    coords = []
    radii = []
    for k in range(2):
        cfg_k = {
            "z": [mixed_cfg["z"][k]],
            "terms": [
                term(0.4, {"kind": "box", "lo": [[-1.0, -2.0][k]], "hi": [[1.0, 0.5][k]]},
                     ident(1)),
                term(0.3, {"kind": "norm1"},
                     {"kind": "matrix", "rows": [[[1.0, 2.0][k]]]},
                     shift=[[0.2, -0.1][k]]),
                term(0.3, {"kind": "elastic_net", "alpha": 0.5, "beta": 1.0}, ident(1)),
            ],
        }
        cert_k = scalar_from_problem(cfg_k)
        coords.append(float(cert_k.reference_x[0]))
        radii.append(cert_k.guaranteed_radius)
    add("separable_mix_2d", mixed_cfg,
        [Certificate(np.array(coords), "scalar_analysis",
                     float(np.linalg.norm(radii)) + 1e-12,
                     {"note": "coordinatewise exact analysis of a separable objective"})],
        tags=["nontrivial_L", "nonzero_r"])

    add("orthant_halfspaces_3d",
        {"z": [1.0, 1.0, 1.0],
         "terms": [
             term(1.0 / 3.0, {"kind": "halfspace", "normal": [1.0, 0.0, 0.0], "offset": 0.0},
                  ident(3)),
             term(1.0 / 3.0, {"kind": "halfspace", "normal": [0.0, 1.0, 0.0], "offset": 0.0},
                  ident(3)),
             term(1.0 / 3.0, {"kind": "halfspace", "normal": [0.0, 0.0, 1.0], "offset": 0.5},
                  ident(3)),
         ]},
        [closed(np.minimum([1.0, 1.0, 1.0], [0.0, 0.0, 0.5]),
                "axis-aligned halfspaces project componentwise")],
        bounds=(-3.0, 3.0))

    interval_cfg = {
        "z": [1.0],
        "terms": [term(1.0, {"kind": "ball", "center": [0.5], "radius": 0.25},
                       {"kind": "matrix", "rows": [[2.0]]}, shift=[0.1])]}
    add("scaled_interval_1d", interval_cfg,
        [scalar_from_problem(interval_cfg),
         closed([0.425], "preimage interval [0.175, 0.425], nearest endpoint")],
        tags=["nontrivial_L", "nonzero_r"])

    three_term_cfg = {
        "z": [-2.0],
        "terms": [term(0.5, {"kind": "norm1"}, ident(1)),
                  term(0.25, {"kind": "norm1"}, ident(1), shift=[1.0]),
                  term(0.25, {"kind": "elastic_net", "alpha": 1.0, "beta": 1.0}, ident(1))]}
    add("three_term_1d", three_term_cfg, [scalar_from_problem(three_term_cfg)],
        tags=["nonzero_r", "smooth"])

    return entries


def build(write_imaging):
    os.makedirs(FIXTURE_DIR, exist_ok=True)
    count = 0
    for entry in fixtures():
        problem = problem_from_config(entry["problem"])
        certs = list(entry["certs"])
        if problem.dim <= 3:
            certs.append(grid_oracle(problem, bounds=entry["bounds"]))
        refs = [c.reference_x for c in certs]
        radii = [c.guaranteed_radius for c in certs]
        for i in range(len(certs)):
            for j in range(i + 1, len(certs)):
                gap = float(np.linalg.norm(refs[i] - refs[j]))
                if gap > radii[i] + radii[j]:
                    raise SystemExit(f"{entry['name']}: certificates disagree by {gap}")
        if problem.dim <= 2 and len(certs) < 2:
            raise SystemExit(f"{entry['name']}: needs two independent methods")
        payload = {
            "name": entry["name"],
            "problem": entry["problem"],
            "tags": entry["tags"],
            "certificates": [c.to_config() for c in certs],
        }
        path = os.path.join(FIXTURE_DIR, f"{entry['name']}.json")
        with open(path, "w", encoding="utf-8") as f:
            json.dump(payload, f, indent=1)
            f.write("\n")
        best = min(radii)
        print(f"wrote {entry['name']}: {len(certs)} certificates, tightest radius {best:.2e}")
        count += 1
    print(f"{count} problem fixtures")
    if write_imaging:
        build_imaging()


def build_imaging():
    shape = (32, 32)
    rng = np.random.default_rng(7)
    truth = np.zeros(shape)
    truth[:16, :16] = 0.2
    truth[:16, 16:] = 0.8
    truth[16:, :16] = 0.5
    truth[16:, 16:] = 0.35
    noise_amplitude = 0.08
    noisy = truth + noise_amplitude * rng.standard_normal(shape)
    # the sparsity weight must stay below the per-coefficient data pull
    # (about w1 / 32 here), otherwise the exact solution collapses to zero
    weights = [0.9, 0.004, 0.096]
    model = MeasurementModel([LinearOperator.identity(truth.size)], [noisy.ravel()], shape)
    problem = recovery_problem(model, identity_basis(shape), weights)
    cert = long_run_reference(problem, tol=1e-12, max_iter=10 ** 6)
    cert.details.update({
        "truth": "quadrant blocks 0.2 / 0.8 / 0.5 / 0.35",
        "noise_seed": 7,
        "noise_amplitude": noise_amplitude,
    })
    payload = {
        "name": "imaging_longrun_32x32",
        "shape": list(shape),
        "weights": weights,
        "basis": "identity",
        "measurement": noisy.ravel().tolist(),
        "certificate": cert.to_config(),
    }
    path = os.path.join(FIXTURE_DIR, "imaging_longrun_32x32.json")
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=1)
        f.write("\n")
    print(f"wrote imaging_longrun_32x32: disagreement "
          f"{cert.details['schedule_disagreement']:.2e}")


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--imaging", action="store_true",
                        help="also regenerate the long-run imaging certificate")
    args = parser.parse_args()
    build(args.imaging)
