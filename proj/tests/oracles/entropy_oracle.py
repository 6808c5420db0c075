# Copyright (c) 2026 The ktu Authors
#
# Licensed under the Apache License, Version 2.0;
# You may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an 'AS IS' BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Writes tests/data/entropy_oracle.txt.

Each line: M, then M four-class distributions as hex doubles, then the
entropy (nats) of their mean evaluated with mpmath at 50 digits and rounded
once to a double.
"""

import random
import sys

from mpmath import mp, mpf, log

mp.dps = 50


def distribution(rng):
    kind = rng.random()
    if kind < 0.1:
        k = rng.randrange(4)
        return [1.0 if i == k else 0.0 for i in range(4)]
    if kind < 0.2:
        w = [rng.random() for _ in range(4)]
        w[rng.randrange(4)] = 0.0
    elif kind < 0.3:
        w = [rng.random() ** 8 for _ in range(4)]
    else:
        w = [rng.expovariate(1.0) for _ in range(4)]
    s = sum(w)
    return [x / s for x in w]


HEADER = """\
# Copyright (c) 2026 The ktu Authors
# Licensed under the Apache License, Version 2.0; see tests/oracles/entropy_oracle.py.
# Generated by tests/oracles/entropy_oracle.py. Lines starting with # are comments.
"""


def main(path):
    rng = random.Random(20261016)
    with open(path, "w") as out:
        out.write(HEADER)
        for _ in range(1000):
            m = rng.randint(1, 3)
            samples = [distribution(rng) for _ in range(m)]
            mean = [sum(mpf(s[k]) for s in samples) / m for k in range(4)]
            h = -sum(p * log(p) for p in mean if p > 0)
            fields = [str(m)] + [x.hex() for s in samples for x in s] + [float(h).hex()]
            out.write(" ".join(fields) + "\n")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "tests/data/entropy_oracle.txt")
