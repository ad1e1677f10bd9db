# Description: Seeded random sweep using only the standard library.
import random


class StdlibSweepBO:
    def __init__(self, budget, dim):
        self.budget = budget
        self.dim = dim

    def __call__(self, func):
        rng = random.Random(7)
        best_y, best_x = float("inf"), None
        for _ in range(self.budget):
            x = [rng.uniform(-5.0, 5.0) for _ in range(self.dim)]
            y = func(x)
            if y < best_y:
                best_y, best_x = y, x
        return best_y, best_x
