"""Seeded generator of small, type-correct models in the DSL."""

from __future__ import annotations

import random

from mbtkit.dsl import parse_model

# name, declaration, size, kind, values
VARIABLES = [
    ("x", "int[0..3]", 4, "int", [0, 1, 2, 3]),
    ("y", "int[0..2]", 3, "int", [0, 1, 2]),
    ("f", "bool", 2, "bool", ["false", "true"]),
    ("c", "enum{red, green, blue}", 3, "enum", ["red", "green", "blue"]),
]
STIMULI = {"A": [], "B": [("p", "int")], "C": [("b", "bool")]}
MAX_PRODUCT = 64


def _atom(rng, ints, bools, enums):
    choices = []
    if ints:
        choices += ["cmp_lit", "cmp_lit", "cmp_ref"]
    if bools:
        choices.append("bool")
    if enums:
        choices.append("enum")
    kind = rng.choice(choices or ["true"])
    if kind == "cmp_lit":
        return f"{rng.choice(ints)} {rng.choice(['<', '<=', '=', '!=', '>', '>='])} {rng.randint(0, 3)}"
    if kind == "cmp_ref":
        return f"{rng.choice(ints)} {rng.choice(['<', '=', '>='])} {rng.choice(ints)}"
    if kind == "bool":
        b = rng.choice(bools)
        return b if rng.random() < 0.5 else f"(not {b})"
    if kind == "enum":
        return f"{rng.choice(enums)} = {rng.choice(['red', 'green', 'blue'])}"
    return "true"


def _guard(rng, ints, bools, enums):
    r = rng.random()
    if r < 0.3:
        return None
    a = _atom(rng, ints, bools, enums)
    if r < 0.7:
        return a
    b = _atom(rng, ints, bools, enums)
    return f"({a}) {rng.choice(['and', 'or'])} ({b})"


def random_model_text(seed: int) -> str:
    rng = random.Random(seed)
    n_states = rng.randint(1, 6)
    states = [f"S{i}" for i in range(n_states)]
    pool = VARIABLES[:]
    rng.shuffle(pool)
    chosen, product = [], 1
    for v in pool[: rng.randint(0, 3)]:
        if product * v[2] <= MAX_PRODUCT:
            chosen.append(v)
            product *= v[2]
    lines = [f"model rand{seed}"]
    for i, s in enumerate(states):
        lines.append(f"state {s}" + (" initial" if i == 0 else ""))
    for name, decl, _, _, values in chosen:
        lines.append(f"var {name} : {decl} = {rng.choice(values)}")
    lines += ["stimulus A", "stimulus B(p: int[0..2])", "stimulus C(b: bool)",
              "observation X", "observation Y(v: int[0..3])"]
    lines.append('req RQ-R-1 "first behaviour" clause "R/A/1"')
    lines.append('req RQ-R-2 "second behaviour" clause "R/B/1"')
    var_ints = [v[0] for v in chosen if v[3] == "int"]
    var_bools = [v[0] for v in chosen if v[3] == "bool"]
    enums = [v[0] for v in chosen if v[3] == "enum"]
    for k in range(rng.randint(1, 10)):
        trigger = rng.choice(sorted(STIMULI))
        ints = var_ints + [p for p, ty in STIMULI[trigger] if ty == "int"]
        bools = var_bools + [p for p, ty in STIMULI[trigger] if ty == "bool"]
        head = f"trans t{k}: {rng.choice(states)} -> {rng.choice(states)} on {trigger}"
        if STIMULI[trigger]:
            head += "(" + ", ".join(p for p, _ in STIMULI[trigger]) + ")"
        g = _guard(rng, ints, bools, enums)
        if g:
            head += f" [{g}]"
        acts = []
        for name, _, _, kind, values in chosen:
            if rng.random() < 0.4:
                if kind == "int":
                    acts.append(f"{name} := {rng.choice([f'{name} + 1', f'{name} - 1', '0', rng.choice(ints)])}")
                elif kind == "bool":
                    acts.append(f"{name} := not {name}")
                else:
                    acts.append(f"{name} := {rng.choice(values)}")
        if acts:
            head += " / " + "; ".join(acts)
        outs = []
        for _ in range(rng.choice([0, 0, 1, 1, 2])):
            outs.append("X" if rng.random() < 0.5 or not ints else f"Y({rng.choice(ints)})")
        if outs:
            head += " ! " + ", ".join(outs)
        if rng.random() < 0.3:
            head += f" prio {rng.randint(0, 2)}"
        if rng.random() < 0.7:
            head += f" @RQ-R-{rng.randint(1, 2)}"
        lines.append(head)
    return "\n".join(lines) + "\n"


def random_model(seed: int):
    return parse_model(random_model_text(seed))


def random_scenario_text(seed: int) -> str:
    rng = random.Random(seed)

    def atom():
        return rng.choice(["A", "B(_)", "B(0)", "B(2)", "C(true)", "C(_)", "X", "Y(_)", "_"])

    def expr(d):
        r = rng.random()
        if d == 0 or r < 0.4:
            return atom()
        if r < 0.65:
            return f"{expr(d - 1)} ; {expr(d - 1)}"
        if r < 0.85:
            return f"({expr(d - 1)} | {expr(d - 1)})"
        return f"({expr(d - 1)})*"

    return expr(3)
