"""Smoke test for the icp_lab extension module."""

import json

import icp_lab


def close(a, b, tol=1e-6):
    return abs(a - b) <= tol


def main():
    ids = {row["id"] for row in icp_lab.catalog_list()}
    assert {"sbit", "hbit", "qubit", "polygon:3"} <= ids, ids

    sbit = icp_lab.Theory.lookup("sbit")
    assert sbit.observed_dimension() == 2
    probs = sbit.probabilities("X", [1.0, 1.0, 1.0])
    assert close(sum(probs), 1.0)

    cert = icp_lab.demo("sbit")
    assert cert["report"]["violated"] is True
    ens = icp_lab.Ensemble.from_json(json.dumps(cert))
    report = ens.evaluate()
    assert close(report.extractable, 2.0)
    assert report.violated

    again = icp_lab.Ensemble.from_json(ens.to_json()).evaluate()
    assert close(again.extractable, report.extractable, 1e-12)

    rac = icp_lab.Ensemble.from_json(json.dumps(icp_lab.demo("qubit-rac")))
    ledger = rac.proof_chain()
    assert ledger["all_hold"], ledger["first_failure"]

    _, _, h = icp_lab.pgnst_min_entropy_sum(3.0)
    assert h < 1.0

    assert icp_lab.polygon_violation(5).violated
    assert icp_lab.composite_gbit_extractable(5)["violated"]

    rows = icp_lab.axiom_suite("shannon", 100, seed=1)
    assert all(r["passed"] for r in rows)

    best, _ = icp_lab.maximize_extractable("qubit", ["X", "Z"], max_evals=20000, restarts=2)
    assert best.extractable <= 1.0 + 1e-9

    print(f"icp_lab {icp_lab.__version__}: smoke test passed "
          f"(sbit extractable {report.extractable}, pgnst(3) H~ {h:.6f}, "
          f"qubit best {best.extractable:.4f})")


if __name__ == "__main__":
    main()
