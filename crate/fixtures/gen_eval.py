"""Generates the plan-accuracy fixtures: 19 gold task plans and produced runs
with 5, 12 and 13 tasks fully correct.

Incorrect tasks carry exactly one defect, cycling through a wrong location, a
wrong station and a wrong picked object, so every accuracy level sees errors.
"""
import copy
import json
import random

rng = random.Random(19)
ROOMS = {"room_1": ["shelf_1", "shelf_2"], "room_2": ["shelf_3", "rack_1"]}
OBJECTS = ["bonnet", "diaphragm", "valve body", "valve seat", "valve core", "rubber ring",
           "end cap", "adjusting spring", "lock nut", "return spring", "sealing ring", "outer shell"]
TOOLS = ["torque wrench", "diaphragm press", "seat press", "screwdriver"]
OPS = ["install", "press_fit", "tighten", "place", "inspect"]


def location():
    room = rng.choice(sorted(ROOMS))
    return f"{room}/{rng.choice(ROOMS[room])}"


def gold_task(n):
    subtasks = []
    stations = rng.randint(2, 5)
    for s in range(1, stations + 1):
        for _ in range(rng.randint(1, 2)):
            obj = rng.choice(OBJECTS)
            subtasks.append({"verb": "pick", "object": obj, "station": s,
                             "location": location(), "labels": ["Location", "Object"]})
            if rng.random() < 0.4:
                subtasks.append({"verb": "pick", "object": rng.choice(TOOLS), "station": s,
                                 "location": location(), "labels": ["Location", "Object"]})
            op = rng.choice(OPS)
            if op == "place":
                subtasks.append({"verb": op, "object": obj, "station": s,
                                 "location": f"line/workstation_{s}", "labels": ["Location"]})
            else:
                subtasks.append({"verb": op, "object": obj, "station": s, "location": None, "labels": []})
    return {"task_id": f"T{n:02d}", "subtasks": subtasks}


def corrupt(task, kind):
    task = copy.deepcopy(task)
    picks = [s for s in task["subtasks"] if s["verb"] == "pick"]
    target = picks[rng.randrange(len(picks))]
    if kind == 0:
        target["location"] = "room_9/shelf_9"
    elif kind == 1:
        task["subtasks"][-1]["station"] += 1
    else:
        target["object"] = "wrong part"
    return task


def produced(gold, correct):
    order = list(range(len(gold)))
    random.Random(correct).shuffle(order)
    keep = set(order[:correct])
    out = []
    for i, task in enumerate(gold):
        out.append(copy.deepcopy(task) if i in keep else corrupt(task, i % 3))
    return out


gold = [gold_task(n) for n in range(1, 20)]
json.dump(gold, open("eval/gold_plans.json", "w"), indent=1)
for k in (5, 12, 13):
    json.dump(produced(gold, k), open(f"eval/produced_{k}_of_19.json", "w"), indent=1)
