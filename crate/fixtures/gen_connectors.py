"""Generates the connector process documents and the QA corpus with gold answers.

Gold answers are computed here directly from the document data, independently of
the Rust synthesizer.
"""
import json

# name, verb, parts, tools, reference part
P = {
 "cut": ("Cut cable to length", "place", ["signal cable"], ["cable cutter"], None),
 "strip": ("Strip cable jacket", "place", [], ["stripping tool"], "signal cable"),
 "crimp": ("Crimp terminals", "press_fit", ["crimp terminal"], ["crimping pliers"], "signal cable"),
 "seal": ("Insert wire seal", "install", ["wire seal"], [], "signal cable"),
 "socket": ("Insert socket parts", "install", ["socket contact", "contact spring"], ["insertion tool"], "insulator body"),
 "insul": ("Seat insulator body", "install", ["insulator body"], [], None),
 "insul2": ("Mount insulator insert", "install", ["insulator insert"], ["insert press"], None),
 "housing": ("Fit metal housing", "install", ["metal housing"], [], "insulator insert"),
 "pins": ("Press-fit contact pins", "press_fit", ["contact pin"], ["pin press"], "insulator body"),
 "shell": ("Assemble outer shell", "install", ["outer shell"], [], "insulator body"),
 "ring": ("Install sealing ring", "install", ["sealing ring"], ["ring expander"], "outer shell"),
 "nut": ("Tighten coupling nut", "tighten", ["coupling nut"], ["torque wrench"], "outer shell"),
 "mark": ("Laser marking", "inspect", [], ["laser marker"], "outer shell"),
 "weld": ("Ultrasonic welding", "press_fit", [], ["ultrasonic welder"], "outer shell"),
 "cap": ("Attach dust cap", "install", ["dust cap"], [], "outer shell"),
 "test": ("Continuity test", "inspect", [], ["continuity tester"], "contact pin"),
}
PRODUCTS = {
 "C901": ["cut", "strip", "crimp", "insul", "socket", "shell", "mark", "test"],
 "C902": ["cut", "strip", "crimp", "seal", "insul", "socket", "shell", "nut", "cap"],
 "C903": ["insul", "pins", "shell", "ring", "mark", "test"],
 "C904": ["cut", "strip", "crimp", "insul", "pins", "weld", "cap"],
 "C905": ["insul2", "socket", "housing", "ring", "nut", "mark"],
 "C906": ["cut", "crimp", "seal", "insul2", "pins", "housing", "weld", "test"],
 "C907": ["insul2", "socket", "housing", "cap"],
 "C908": ["mark"],
}

def pname(pid):
    return f"Connector {pid}"

def doc_steps(pid):
    steps = []
    used_parts = set()
    for i, key in enumerate(PRODUCTS[pid], start=1):
        name, verb, parts, tools, ref = P[key]
        used_parts.update(parts)
        steps.append(dict(order=i, name=name, duration_s=20 + 5 * ((i * 7 + len(name)) % 9),
                          parts=parts, tools=tools, reference_part=None, verb=verb, _ref=ref))
    # reference part only when the part actually occurs in this document
    for s in steps:
        ref = s.pop("_ref")
        s["reference_part"] = ref if ref in used_parts else None
    return steps

def norm_list(xs):
    return ", ".join(sorted(xs)) if xs else "none"

docs = {}
for pid in PRODUCTS:
    steps = doc_steps(pid)
    docs[pid] = steps
    out = {"product_id": pid, "product_name": pname(pid),
           "steps": [{k: v for k, v in s.items()} for s in steps]}
    json.dump(out, open(f"connectors/{pid}.json", "w"), indent=2)

qa = []
def add(t, hops, q, gold):
    qa.append({"id": f"q{len(qa)+1:03d}", "type": t, "hops": hops, "question": q, "gold": gold})

for pid, steps in docs.items():
    names = [s["name"] for s in steps]
    c = f"connector {pid}"
    q = "What is the complete assembly process for connector C901?" if pid == "C901" else \
        f"What is the complete assembly process for {c}?"
    add("overall_process", "single", q, " -> ".join(names))
    add("sequence_comparison", "multi", f"What is the first assembly step for {c}?", names[0])
    add("sequence_linking", "multi", f"What is the next step after the first assembly process of {c}?",
        names[1] if len(names) > 1 else "No successor")
    s0 = steps[0]
    add("requirement_query", "multi",
        f"Which components and tools are required for the first assembly step of {c}?",
        f"Parts: {norm_list(s0['parts'])}; Tools: {norm_list(s0['tools'])}")
    if len(steps) >= 3:
        a, b = steps[2], steps[len(steps) - 1]
        add("sequence_comparison", "multi",
            f"Which comes first in the assembly of {c}, \"{b['name']}\" or \"{a['name']}\"?", a["name"])
        add("sequence_linking", "multi",
            f"What is the next step after \"{a['name']}\" in the assembly of {c}?", steps[3]["name"] if len(steps) > 3 else "No successor")
        s = steps[2]
        add("requirement_query", "multi",
            f"Which components and tools are required for step {s['order']:02d} of {c}?",
            f"Parts: {norm_list(s['parts'])}; Tools: {norm_list(s['tools'])}")
    last = steps[-1]
    add("sequence_linking", "multi",
        f"What is the next step after \"{last['name']}\" in the assembly of {c}?", "No successor")
    for s in steps:
        if s["reference_part"] is not None and s["order"] % 2 == 1 or (pid == "C901" and s["order"] == 5):
            verb = s["name"].split()[0].lower()
            if pid == "C901" and s["order"] == 5:
                q = "In step 05 of inserting socket parts during connector C901 assembly, which part serves as the reference component?"
            else:
                q = f"In step {s['order']:02d} ({s['name'].lower()}) during {c} assembly, which part serves as the reference component?"
            add("relation_comparison", "multi", q, s["reference_part"] or "No reference part")

by_name = {}
for pid, steps in docs.items():
    for s in steps:
        by_name.setdefault(s["name"], set()).add(pname(pid))
for name in sorted(by_name):
    prods = by_name[name]
    if name == "Laser marking":
        q = "Which products require the “laser marking” process for assembly?"
    else:
        q = f"Which products require the \"{name.lower()}\" process for assembly?"
    add("applicability", "single", q, ", ".join(sorted(prods)))

with open("qa/connector_qa.jsonl", "w") as f:
    for item in qa:
        f.write(json.dumps(item, ensure_ascii=False) + "\n")
from collections import Counter
print(len(qa), Counter(i["type"] for i in qa))
print({n: len(p) for n, p in by_name.items()})
