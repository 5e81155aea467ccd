"""Deterministic fixtures: parser-evaluation record files and the guesser word list."""
from __future__ import annotations

import random

# Per-sentence averages of the baseline parser and of the adapted parser run on
# term-simplified sentences, with the out-of-lexicon tallies of each.
BASELINE_AVERAGES = {"NbW": 24.05, "NbL": 190306, "PT": 37.83, "CLF": 0.54, "EL": 2.87, "CQ": 0.54}
VARIANT_AVERAGES = {"NbW": 18.9, "NbL": 1431, "PT": 0.53, "CLF": 0.77, "EL": 1.15, "CQ": 0.8}
BASELINE_OOL = {"UW": (244, 100), "GW": (24, 1)}
VARIANT_OOL = {"UW": (26, 5), "GW": (31, 0)}

CORPUS_TOTALS = {"tokens": 277_846_470, "named entities": 4_530_368, "words": 105_821_243,
                 "sentences": 4_726_003, "morpho tags": 104_208_536, "terms": 13_874_089}
CORPUS_DOCS = 55_329
CORPUS_AVERAGES = {"tokens": 5021.9, "named entities": 81.88, "words": 1912.65, "sentences": 85.41,
                    "morpho tags": 1883.5, "terms": 250.76}

STEP_AVERAGES = {"load": 0.38, "tokenize": 0.7, "ne": 6.12, "words": 5.19, "sentences": 0.18, "morpho": 1.84,
                "terms": 20.83, "render": 2.03}
STEP_TOTAL = 37.27
STEP_SHARES = {"load": 1.02, "tokenize": 1.88, "ne": 16.42, "words": 13.92, "sentences": 0.48, "morpho": 4.94,
                    "terms": 55.89, "render": 5.45}


def _integers_with_sum(rng, n, total, low):
    """n integers >= low summing to total, spread around the mean."""
    base, extra = divmod(total - low * n, n)
    values = [low + base + (1 if i < extra else 0) for i in range(n)]
    for _ in range(2 * n):  # sum-preserving random transfers
        i, j = rng.randrange(n), rng.randrange(n)
        delta = rng.randint(0, values[i] - low)
        values[i] -= delta
        values[j] += delta
    return values


def _spread(rng, n, mean, scale, decimals):
    """n values with the exact given mean (to ``decimals``), all >= 0."""
    unit = 10 ** decimals
    total = round(mean * n * unit)
    raw = [max(0.0, rng.gauss(mean, scale)) for _ in range(n)]
    ints = [round(v * unit) for v in raw]
    diff = total - sum(ints)
    i = 0
    while diff:
        step = 1 if diff > 0 else -1
        if ints[i % n] + step >= 0:
            ints[i % n] += step
            diff -= step
        i += 1
    return [v / unit for v in ints]


def eval_records(averages, ool, n=100, seed=0) -> str:
    """A tab-separated record file whose column means are exactly ``averages``."""
    rng = random.Random(seed)
    nbw = _integers_with_sum(rng, n, round(averages["NbW"] * n), 1)
    nbl = _integers_with_sum(rng, n, round(averages["NbL"] * n), 0)
    clf = [1] * round(averages["CLF"] * n) + [0] * (n - round(averages["CLF"] * n))
    rng.shuffle(clf)
    el = _integers_with_sum(rng, n, round(averages["EL"] * n), 0)
    pt = _spread(rng, n, averages["PT"], averages["PT"] / 3, 2)
    cq = _spread(rng, n, averages["CQ"], 0.2, 2)
    cols = {k: [0] * n for k in ("UW", "UW_incorrect", "GW", "GW_incorrect")}
    for kind, (assigned, wrong) in ool.items():
        cols[kind] = _integers_with_sum(rng, n, assigned, 0)
        # incorrect assignments go to sentences that have assignments
        slots = [i for i, a in enumerate(cols[kind]) for _ in range(a)]
        chosen = rng.sample(slots, wrong)
        for i in chosen:
            cols[f"{kind}_incorrect"][i] += 1
    header = ["NbW", "NbL", "PT", "CLF", "EL", "CQ", "UW", "UW_incorrect", "GW", "GW_incorrect"]
    lines = ["\t".join(header)]
    for i in range(n):
        row = [nbw[i], nbl[i], pt[i], clf[i], el[i], cq[i]] + [cols[k][i] for k in header[6:]]
        lines.append("\t".join(str(v) for v in row))
    return "\n".join(lines) + "\n"


# Words whose suffix class is linguistically right, with gold labels.
GUESSER_WORDS = {
    "NOUN": ["kinase", "polymerase", "protease", "helicase", "ligase", "nuclease", "phosphatase", "transferase",
             "reductase", "oxidase", "lipase", "synthase", "isomerase",
             "activity", "stability", "specificity", "toxicity", "affinity", "solubility", "viability",
             "complexity", "identity", "density", "similarity", "plasticity"],
    "ADJ": ["transcriptional", "bacterial", "functional", "structural", "chemical", "mutational", "central",
            "optimal", "lateral", "neural", "viral", "clinical", "natural",
            "homologous", "heterologous", "analogous", "numerous", "various", "ambiguous", "continuous",
            "exogenous", "endogenous", "spontaneous", "vigorous", "previous"],
}
GUESSER_GOLD = {w: pos for pos, words in GUESSER_WORDS.items() for w in words}

# Words a suffix rule would mislabel; the lexicon must win for them.
LEXICON_OVERRIDES = {"signal": ("NOUN", "signal"), "animal": ("NOUN", "animal"), "interval": ("NOUN", "interval"),
                     "release": ("VERB", "release"), "city": ("NOUN", "city"), "base": ("NOUN", "base"),
                     "nous": ("NOUN", "nous"), "kinase": ("NOUN", "kinase")}
