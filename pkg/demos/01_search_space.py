"""Tour of the genome encoding: sampling, text form, validity, variation."""

import numpy as np

from evoarch import (
    EvolutionParams,
    crossover,
    decode_text,
    encode_text,
    mutate,
    random_chromosome,
    validate,
)

rng = np.random.default_rng(0)

print("== a random 4-block chromosome ==")
c = random_chromosome(4, rng, chrom_id="demo_0")
print(encode_text(c))
print("valid:", validate(c, 4) == [])

print("\n== text round trip ==")
back = decode_text(encode_text(c), 4)
print("decode(encode(c)) == c:", back.normal == c.normal and back.reduction == c.reduction)

print("\n== mutation (per-gene probability 0.1) ==")
m = mutate(c, rng, EvolutionParams(), new_id="demo_0m")
print(encode_text(m))
changed = sum(a != b for a, b in zip(c.normal.genes() + c.reduction.genes(),
                                     m.normal.genes() + m.reduction.genes()))
print(f"genes changed: {changed} of 16")

print("\n== one-point crossover at block boundaries ==")
p2 = random_chromosome(4, rng, chrom_id="demo_1")
k1, k2 = crossover(c, p2, rng, EvolutionParams(crossover_prob_range=(1.0, 1.0)))
print("parent 1:", encode_text(c))
print("parent 2:", encode_text(p2))
print("child 1: ", encode_text(k1))
print("child 2: ", encode_text(k2))
print("children valid:", validate(k1, 4) == [] and validate(k2, 4) == [])
