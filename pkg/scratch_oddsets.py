import random, time
from fractions import Fraction
from bmatch.core import Instance
from bmatch.oddsets import find_violated_family
from bmatch.reference import brute_force_violated_oddsets

random.seed(7)
DELTA = Fraction(1, 16)

def rand_instance(rng):
    n = rng.randint(3, 10)
    b = [rng.randint(1, 4) for _ in range(n)]
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    rng.shuffle(pairs)
    m = rng.randint(2, min(len(pairs), 16))
    edges = [(i, j, rng.randint(1, 10)) for (i, j) in pairs[:m]]
    return Instance(n, edges, b)

def rand_y(inst, rng, scale):
    # random y, roughly around feasibility * scale
    y = []
    for (i, j, _) in inst.edges:
        cap = min(inst.b[i], inst.b[j])
        y.append(Fraction(rng.randint(0, 4 * cap), 4) * Fraction(scale))
    return y

trials = 0
hi_lam = 0
t0 = time.time()
rng = random.Random(11)
while hi_lam < 60 and trials < 400:
    inst = rand_instance(rng)
    scale = rng.choice([Fraction(1,2), Fraction(3,4), Fraction(1), Fraction(5,4), Fraction(3,2)])
    y = rand_y(inst, rng, scale)
    lam_bf, fam_bf = brute_force_violated_oddsets(y, inst, DELTA)
    rep = find_violated_family(y, inst, DELTA)
    trials += 1
    if lam_bf > 1 + 8 * DELTA:
        hi_lam += 1
        assert rep.lam_exact == lam_bf, (trials, float(rep.lam_exact), float(lam_bf))
        got = sorted((sorted(u) for u, _ in rep.family))
        want = sorted(sorted(u) for u in fam_bf)
        assert got == want, (trials, got, want)
    else:
        assert Fraction(rep.lam_exact) <= 1 + 8 * DELTA, (trials, rep.lam_exact, lam_bf)

print(f"oddset oracle OK: {trials} trials, {hi_lam} with lambda>1+8delta, "
      f"{time.time()-t0:.1f}s")
