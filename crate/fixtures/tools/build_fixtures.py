"""Builds the scene and dataset fixtures and their expected outputs.

Geometry is checked here independently of the Rust code: grid footprints,
4-connected BFS reachability, the default start cell and the 30 degree
straight-ahead cone. Run from the repository root:

    python3 fixtures/tools/build_fixtures.py
"""

import json
import math
import os
import shutil
from collections import deque
from fractions import Fraction

ROOT = os.path.join(os.path.dirname(os.path.abspath(__file__)), "..")


def obj(oid, category, lo, hi):
    c = [round((a + b) / 2, 6) for a, b in zip(lo, hi)]
    return {"id": oid, "category": category, "centroid": c, "aabb": {"min": lo, "max": hi}}


KITCHEN_OBJECTS = [
    (obj(0, "kitchen counter", [0.5, 5.0, 0.0], [4.0, 5.6, 0.9]), True),
    (obj(1, "kettle", [0.8, 5.05, 0.9], [1.0, 5.25, 1.15]), False),
    (obj(2, "coffee machine", [1.6, 5.1, 0.9], [2.0, 5.5, 1.3]), False),
    (obj(3, "mug", [2.3, 5.1, 0.9], [2.4, 5.2, 1.0]), False),
    (obj(4, "toaster", [3.0, 5.1, 0.9], [3.3, 5.35, 1.1]), False),
    (obj(5, "microwave", [3.5, 5.1, 0.9], [3.95, 5.5, 1.2]), False),
    (obj(6, "stove", [4.5, 5.0, 0.0], [5.2, 5.6, 0.9]), True),
    (obj(7, "sink", [0.0, 2.0, 0.0], [0.6, 3.0, 0.9]), True),
    (obj(8, "fridge", [5.3, 2.5, 0.0], [6.0, 3.3, 1.8]), True),
    (obj(9, "table", [2.0, 2.0, 0.0], [3.5, 3.0, 0.75]), True),
    (obj(10, "chair", [2.4, 1.3, 0.0], [2.9, 1.8, 0.9]), True),
    (obj(11, "trash can", [5.5, 0.2, 0.0], [5.9, 0.6, 0.6]), True),
    (obj(12, "chair", [2.4, 3.2, 0.0], [2.9, 3.7, 0.9]), True),
]

STORAGE_OBJECTS = [
    (obj(0, "shelf", [0.0, 4.0, 0.0], [1.5, 4.4, 2.0]), True),
    (obj(1, "cardboard box", [0.2, 4.05, 1.0], [0.6, 4.35, 1.3]), False),
    (obj(2, "lamp", [4.2, 0.5, 0.0], [4.5, 0.8, 1.5]), True),
    (obj(3, "workbench", [1.5, 1.0, 0.0], [3.0, 1.6, 0.9]), True),
    (obj(4, "safe", [3.05, 3.05, 0.0], [3.45, 3.45, 0.5]), True),
]


class Grid:
    def __init__(self, cell, rows, cols):
        self.cell = Fraction(cell)
        self.rows = rows
        self.cols = cols
        self.blocked = [[False] * cols for _ in range(rows)]

    def footprint(self, aabb):
        def span(lo, hi, n):
            lo, hi = Fraction(str(lo)), Fraction(str(hi))
            first = math.floor(lo / self.cell)
            last = math.ceil(hi / self.cell) - 1
            return range(max(first, 0), min(last, n - 1) + 1)

        return [(r, c) for r in span(aabb["min"][1], aabb["max"][1], self.rows)
                for c in span(aabb["min"][0], aabb["max"][0], self.cols)]

    def free(self, cell):
        r, c = cell
        return 0 <= r < self.rows and 0 <= c < self.cols and not self.blocked[r][c]

    def adjacent(self, aabb):
        fp = set(self.footprint(aabb))
        out = set()
        for r, c in fp:
            for dr in (-1, 0, 1):
                for dc in (-1, 0, 1):
                    n = (r + dr, c + dc)
                    if n not in fp and self.free(n):
                        out.add(n)
        return out

    def center(self, cell):
        r, c = cell
        return (float((c + Fraction(1, 2)) * self.cell), float((r + Fraction(1, 2)) * self.cell))

    def bfs(self, start):
        dist = {start: 0}
        q = deque([start])
        while q:
            r, c = q.popleft()
            for n in ((r + 1, c), (r - 1, c), (r, c + 1), (r, c - 1)):
                if self.free(n) and n not in dist:
                    dist[n] = dist[(r, c)] + 1
                    q.append(n)
        return dist

    def to_json(self):
        return {
            "cell_size": float(self.cell),
            "origin": [0.0, 0.0],
            "rows": self.rows,
            "cols": self.cols,
            "blocked": [1 if self.blocked[r][c] else 0 for r in range(self.rows) for c in range(self.cols)],
        }


def build_scene(scene_id, objects, rows, cols, walls=()):
    grid = Grid("0.5", rows, cols)
    for o, solid in objects:
        if solid:
            for r, c in grid.footprint(o["aabb"]):
                grid.blocked[r][c] = True
    for r, c in walls:
        grid.blocked[r][c] = True
    scene = {"scene_id": scene_id, "objects": [o for o, _ in objects], "occupancy": grid.to_json()}
    return scene, grid


def start_cell(grid):
    best = None
    for r in range(grid.rows):
        for c in range(grid.cols):
            if grid.free((r, c)):
                x, y = grid.center((r, c))
                d = x * x + y * y
                if best is None or d < best[0]:
                    best = (d, (r, c))
    return best[1]


def ahead(pose, heading_deg, point):
    # heading 0 faces +y, 90 faces -x
    hx = -math.sin(math.radians(heading_deg))
    hy = math.cos(math.radians(heading_deg))
    vx, vy = point[0] - pose[0], point[1] - pose[1]
    n = math.hypot(vx, vy)
    return (vx * hx + vy * hy) / n >= math.cos(math.radians(30)) - 1e-12


def by_category(objects):
    out = {}
    for o, _ in objects:
        out.setdefault(o["category"], []).append(o)
    return out


KITCHEN_PLANS = {
    "coffee": ("prepare a cup of coffee", [
        "I feel sleepy this morning.",
        "I need some energy before work.",
        "I am so tired after that meeting.",
        "I want to feel awake.",
        "Something warm to wake me up would be nice.",
        "I could use a pick-me-up.",
        "My eyes keep closing.",
    ], [
        ("Walk straight ahead to the kitchen counter and pick up the mug.", ["kitchen counter", "mug"]),
        ("Walk to the coffee machine and place the mug under the spout.", ["coffee machine", "mug"]),
        ("Press the start button on the coffee machine.", ["coffee machine"]),
        ("Pick up the mug and walk to the table.", ["mug", "table"]),
        ("Set the mug down on the table.", ["mug", "table"]),
    ]),
    "tea": ("make a cup of tea", [
        "I would like something warm to drink.",
        "My throat feels scratchy.",
        "It is chilly and I want to warm up.",
        "I want a calm evening drink.",
        "Could you help me relax with a hot drink?",
        "I feel a cold coming on.",
    ], [
        ("Walk straight ahead to the kettle and pick up the kettle.", ["kettle"]),
        ("Walk to the sink and fill the kettle with water.", ["sink", "kettle"]),
        ("Walk to the stove and place the kettle on the stove.", ["stove", "kettle"]),
        ("Turn on the stove.", ["stove"]),
        ("Pour the hot water into the mug.", ["mug"]),
    ]),
    "toast": ("make some toast", [
        "I am hungry.",
        "I skipped breakfast.",
        "My stomach is growling.",
        "I want a quick bite.",
        "I need a small snack before I leave.",
        "Something crunchy would be great right now.",
    ], [
        ("Walk to the fridge and take out the bread.", ["fridge"]),
        ("Walk to the toaster and put the bread in the toaster.", ["toaster"]),
        ("Press the lever of the toaster.", ["toaster"]),
        ("Walk to the table and set down the plate.", ["table"]),
    ]),
    "juice": ("pour a cold drink", [
        "I am thirsty.",
        "It is really hot today.",
        "My mouth is dry.",
        "I just came back from a run.",
        "I need to cool down.",
        "Something refreshing and cold, please.",
    ], [
        ("Walk to the fridge and open the fridge.", ["fridge"]),
        ("Take out a bottle of juice and close the fridge.", ["fridge"]),
        ("Walk to the table and pour the juice into a glass.", ["table"]),
    ]),
    "leftovers": ("heat up the leftovers", [
        "I want dinner but I do not want to cook.",
        "Yesterday's meal is still good.",
        "I am starving and lazy tonight.",
        "Dinner needs to be quick.",
        "I do not want food to go to waste.",
        "Something warm to eat, please.",
    ], [
        ("Walk to the fridge and take out the leftovers.", ["fridge"]),
        ("Walk to the microwave and put the food inside.", ["microwave"]),
        ("Press the start button on the microwave.", ["microwave"]),
        ("Walk to the table and serve the food.", ["table"]),
    ]),
    "dishes": ("clean up the dishes", [
        "The kitchen looks messy.",
        "Guests are coming soon.",
        "There are dirty things on the table.",
        "I want a tidy kitchen tonight.",
        "Everything smells of old food.",
        "Please make the place presentable.",
    ], [
        ("Walk to the table and collect the mug.", ["table", "mug"]),
        ("Walk to the sink and rinse the mug.", ["sink", "mug"]),
        ("Turn 90 degrees right and walk to the trash can.", ["trash can"]),
        ("Empty the scraps into the trash can.", ["trash can"]),
        ("Walk to the chair and push the chair under the table.", ["chair", "table"]),
    ]),
}

STORAGE_PLANS = {
    "light": ("switch on the lamp", [
        "It is too dark in here.",
        "I cannot see the labels.",
        "The room is gloomy.",
        "I need more light to work.",
        "I keep bumping into things.",
    ], [
        ("Walk to the lamp and switch on the lamp.", ["lamp"]),
        ("Walk to the workbench and wipe the workbench.", ["workbench"]),
        ("Walk to the shelf and take the cardboard box.", ["shelf", "cardboard box"]),
    ]),
    "pack": ("pack the cardboard box", [
        "I am moving next week.",
        "The tools are all over the place.",
        "I want everything in one container.",
        "Help me get organised for the trip.",
        "I need to ship some things.",
    ], [
        ("Walk to the shelf and take the cardboard box.", ["shelf", "cardboard box"]),
        ("Walk to the workbench and put the cardboard box on the workbench.", ["workbench", "cardboard box"]),
        ("Fill the cardboard box with the tools.", ["cardboard box"]),
        ("Close the cardboard box.", ["cardboard box"]),
    ]),
}


def ids_for(cats, scene_objs):
    out = set()
    for c in cats:
        for o in scene_objs[c]:
            out.add(o["id"])
    return sorted(out)


def make_steps(texts, scene_objs):
    return [{"index": i + 1, "text": t, "object_ids": ids_for(cats, scene_objs), "is_final": i + 1 == len(texts)}
            for i, (t, cats) in enumerate(texts)]


def check_clean(scene_objs, grid, steps, start):
    """Independent checks for a clean plan: every target exists and is
    reachable from the start component; 'straight ahead' only on step 1 and
    only when the target is in the cone from the start pose."""
    reach = grid.bfs(start)
    pose = grid.center(start)
    for i, (text, cats) in enumerate(steps):
        low = text.lower()
        for c in cats:
            assert c in scene_objs, c
        if "straight ahead" in low:
            assert i == 0, text
            target = low.split("straight ahead to the ")[1].split(" and ")[0].rstrip(".")
            o = min(scene_objs[target], key=lambda o: (o["centroid"][0] - pose[0]) ** 2 + (o["centroid"][1] - pose[1]) ** 2)
            assert ahead(pose, 0, o["centroid"]), text
        for frag in low.replace(".", "").split(" and "):
            frag = frag.strip()
            if frag.startswith("walk"):
                target = frag.split(" to the ")[1]
                assert any(reach.keys() & grid.adjacent(o["aabb"]) for o in scene_objs[target]), text


def write_json(path, value):
    os.makedirs(os.path.dirname(path), exist_ok=True)
    with open(path, "w") as f:
        json.dump(value, f, indent=1)
        f.write("\n")


def write_jsonl(path, rows):
    os.makedirs(os.path.dirname(path), exist_ok=True)
    with open(path, "w") as f:
        for r in rows:
            f.write(json.dumps(r) + "\n")


def clean_samples(scene_id, plans, scene_objs, grid, start, count, offset):
    out = []
    keys = sorted(plans)
    i = 0
    while len(out) < count:
        key = keys[i % len(keys)]
        activity, instructions, steps = plans[key]
        variant = i // len(keys)
        instr = instructions[variant % len(instructions)]
        n = max(3, len(steps) - (variant % 3))
        chosen = steps[:n]
        check_clean(scene_objs, grid, chosen, start)
        assert activity.lower() not in instr.lower()
        out.append({
            "scene_id": scene_id,
            "sample_id": f"{scene_id}-{offset + len(out):03d}",
            "instruction": instr,
            "activity": activity,
            "steps": make_steps(chosen, scene_objs),
        })
        i += 1
    return out


def tokenize(text):
    kept = "".join(ch for ch in text.lower() if ch in "abcdefghijklmnopqrstuvwxyz0123456789" or ch.isspace())
    return kept.split()


def main():
    kitchen, kgrid = build_scene("kitchen", KITCHEN_OBJECTS, 12, 12)
    walls = [(r, c) for r in range(5, 9) for c in range(5, 9) if r in (5, 8) or c in (5, 8)]
    storage, sgrid = build_scene("storage", STORAGE_OBJECTS, 10, 10, walls)
    kobjs, sobjs = by_category(KITCHEN_OBJECTS), by_category(STORAGE_OBJECTS)
    assert len(kobjs) == 12

    kstart, sstart = start_cell(kgrid), start_cell(sgrid)
    assert kstart == (0, 0) and sstart == (0, 0)
    # kitchen free space is one component; the safe is sealed off
    assert len(kgrid.bfs(kstart)) == sum(kgrid.free((r, c)) for r in range(12) for c in range(12))
    safe = sobjs["safe"][0]
    assert sgrid.adjacent(safe["aabb"]) and not (sgrid.adjacent(safe["aabb"]) & sgrid.bfs(sstart).keys())

    write_json(os.path.join(ROOT, "scenes", "kitchen.json"), kitchen)
    write_json(os.path.join(ROOT, "scenes", "storage.json"), storage)

    # validation fixture: 45 clean samples and 5 injected faults
    train = clean_samples("kitchen", KITCHEN_PLANS, kobjs, kgrid, kstart, 36, 0)
    val = clean_samples("storage", STORAGE_PLANS, sobjs, sgrid, sstart, 9, 100)

    def fault(scene_id, sid, instr, activity, steps, objs):
        return {"scene_id": scene_id, "sample_id": sid, "instruction": instr, "activity": activity,
                "steps": make_steps(steps, objs)}

    faults = [
        (fault("kitchen", "fault-unknown", "I want to rest my legs.", "sit on the couch", [
            ("Walk to the couch.", []),
            ("Sit down on it.", []),
            ("Turn 90 degrees left and relax.", []),
        ], kobjs), "unknown-object"),
        (fault("kitchen", "fault-direction", "My hands are sticky.", "wash my hands", [
            ("Walk straight ahead to the kitchen counter and pick up the mug.", ["kitchen counter", "mug"]),
            ("Put the mug down.", ["mug"]),
            ("Walk straight ahead to the sink and rinse the mug.", ["sink", "mug"]),
        ], kobjs), "direction-inconsistent"),
        (fault("storage", "fault-unreachable", "I want my passport.", "open the safe", [
            ("Walk to the workbench and take the key.", ["workbench"]),
            ("Walk to the safe and open the safe.", ["safe"]),
            ("Take out the passport.", []),
        ], sobjs), "unreachable-target"),
        (fault("kitchen", "fault-implicit", "Please make some toast for me.", "make some toast", [
            ("Walk to the fridge and take out the bread.", ["fridge"]),
            ("Walk to the toaster and put the bread in the toaster.", ["toaster"]),
            ("Press the lever of the toaster.", ["toaster"]),
        ], kobjs), "implicitness-violation"),
        (fault("kitchen", "fault-unparsed", "I am restless.", "take a short walk", [
            ("Walk to the table.", ["table"]),
            ("Walk in circles.", []),
            ("Sit on the chair.", ["chair"]),
        ], kobjs), "unparsed-route"),
    ]
    # the direction fault: after step 1 the agent faces +y near the counter and the sink lies behind
    sink = kobjs["sink"][0]
    assert not ahead((2.25, 4.75), 0, sink["centroid"])

    train_faults = [f for f, _ in faults if f["scene_id"] == "kitchen"]
    val_faults = [f for f, _ in faults if f["scene_id"] == "storage"]
    # interleave faults among clean samples
    for j, f in enumerate(train_faults):
        train.insert(5 + 8 * j, f)
    for f in val_faults:
        val.insert(4, f)
    assert len(train) + len(val) == 50

    vdir = os.path.join(ROOT, "validate_ds")
    shutil.rmtree(vdir, ignore_errors=True)
    write_json(os.path.join(vdir, "scenes", "kitchen.json"), kitchen)
    write_json(os.path.join(vdir, "scenes", "storage.json"), storage)
    write_jsonl(os.path.join(vdir, "triplets", "train.jsonl"), train)
    write_jsonl(os.path.join(vdir, "triplets", "val.jsonl"), val)
    expected = sorted(
        ({"scene_id": f["scene_id"], "sample_id": f["sample_id"], "kind": kind} for f, kind in faults),
        key=lambda e: (e["scene_id"], e["sample_id"]),
    )
    write_json(os.path.join(vdir, "expected_findings.json"), expected)

    cdir = os.path.join(ROOT, "clean_ds")
    shutil.rmtree(cdir, ignore_errors=True)
    write_json(os.path.join(cdir, "scenes", "kitchen.json"), kitchen)
    clean10 = [s for s in train if not s["sample_id"].startswith("fault")][:10]
    write_jsonl(os.path.join(cdir, "triplets", "train.jsonl"), clean10)

    # stats fixture: step counts 3, 3, 4, 5 and no sample ids
    sdir = os.path.join(ROOT, "stats_ds")
    shutil.rmtree(sdir, ignore_errors=True)
    write_json(os.path.join(sdir, "scenes", "kitchen.json"), kitchen)
    picks = [("juice", 3), ("toast", 3), ("leftovers", 4), ("coffee", 5)]
    rows = []
    for key, n in picks:
        activity, instructions, steps = KITCHEN_PLANS[key]
        rows.append({"scene_id": "kitchen", "instruction": instructions[0], "activity": activity,
                     "steps": make_steps(steps[:n], kobjs)})
    write_jsonl(os.path.join(sdir, "triplets", "train.jsonl"), rows[:3])
    write_jsonl(os.path.join(sdir, "triplets", "val.jsonl"), rows[3:])
    words = [len(tokenize(r["activity"])) + sum(len(tokenize(s["text"])) for s in r["steps"]) for r in rows]
    counts = [len(r["steps"]) for r in rows]
    hist = {}
    for c in counts:
        hist[c] = hist.get(c, 0) + 1
    write_json(os.path.join(sdir, "expected_stats.json"), {
        "sample_count": len(rows),
        "scene_count": 1,
        "mean_steps": {"num": sum(counts), "den": len(rows)},
        "mean_words": {"num": sum(words), "den": len(rows)},
        "step_histogram": {str(k): {"num": v, "den": len(rows)} for k, v in sorted(hist.items())},
    })


if __name__ == "__main__":
    main()
