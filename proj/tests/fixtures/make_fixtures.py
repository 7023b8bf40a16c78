#!/usr/bin/env python3
"""Regenerates companies.txt and responses.jsonl (deterministic).

400 fictional companies; 313 canned responses are well formed, the other 87
are malformed in assorted ways (missing section, empty text, transport error).
"""
import json
import random
from pathlib import Path

HERE = Path(__file__).resolve().parent
rng = random.Random(7)

prefixes = ["Nor", "Vel", "Tri", "Quan", "Lum", "Astra", "Kel", "Oro", "Zen", "Brava", "Cyra", "Mira", "Pel",
            "Sola", "Terra", "Ves", "Xan", "Yor", "Dal", "Fen"]
suffixes = ["vex", "tron", "lytics", "path", "grid", "wise", "nova", "loop", "forge", "mint", "scope", "sync"]
kinds = ["Inc", "Labs", "Systems", "Group", "Technologies", "Health", "Logistics", "Energy", "Foods", "Analytics"]

audiences = ["small retailers", "hospitals", "farmers", "freight carriers", "city governments", "banks",
             "software teams", "schools", "factories", "restaurants", "insurers", "utilities"]
pains = ["lose revenue to unplanned downtime", "struggle to forecast demand", "waste hours on manual paperwork",
         "cannot see where their energy is spent", "have trouble hiring qualified staff",
         "face rising fraud losses", "lack visibility into their supply chain", "miss compliance deadlines",
         "spend too much on cloud infrastructure", "see customers churn without warning"]
fixes = ["a sensor network with predictive alerts", "a forecasting service trained on sales history",
         "document automation that extracts and files forms", "a metering dashboard with anomaly detection",
         "a skills marketplace with verified assessments", "real-time transaction scoring",
         "shipment tracking shared across partners", "a rules engine that tracks every filing date",
         "automatic right-sizing of compute resources", "an early-warning model for account health"]


def company(i):
    return f"{rng.choice(prefixes)}{rng.choice(suffixes)} {rng.choice(kinds)} {i:03d}"


def problem_text():
    return f"{rng.choice(audiences).capitalize()} {rng.choice(pains)}."


def solution_text():
    return f"The company offers {rng.choice(fixes)}, delivered as a subscription service."


def well_formed():
    p, s = problem_text(), solution_text()
    style = rng.randrange(4)
    if style == 0:
        return f"PROBLEM:\n{p}\n\nSOLUTION:\n{s}"
    if style == 1:
        return f"**Problem:** {p}\n**Solution:** {s}"
    if style == 2:
        return f"## Problem\n{p}\n\n## Solution\n{s}\n"
    return f"Problem: {p}\nSolution: {s}"


def malformed(kind):
    if kind == "missing_solution":
        return {"response": f"PROBLEM:\n{problem_text()}\nThe company builds software for this."}
    if kind == "missing_problem":
        return {"response": f"SOLUTION:\n{solution_text()}"}
    if kind == "empty":
        return {"response": rng.choice(["", "   \n", "PROBLEM:\n\nSOLUTION:\n"])}
    return {"error": "upstream timed out"}


def main():
    names = [company(i) for i in range(400)]
    bad_kinds = (["missing_solution"] * 30 + ["missing_problem"] * 25 + ["empty"] * 20 + ["transport"] * 12)
    assert len(bad_kinds) == 87
    bad_slots = set(rng.sample(range(400), 87))
    kinds_iter = iter(rng.sample(bad_kinds, len(bad_kinds)))

    (HERE / "companies.txt").write_text("\n".join(names) + "\n", encoding="utf-8")
    with (HERE / "responses.jsonl").open("w", encoding="utf-8") as out:
        for i, name in enumerate(names):
            entry = {"company": name}
            entry.update(malformed(next(kinds_iter)) if i in bad_slots else {"response": well_formed()})
            out.write(json.dumps(entry) + "\n")


if __name__ == "__main__":
    main()
