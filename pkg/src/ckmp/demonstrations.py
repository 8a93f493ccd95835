"""Demonstration containers, CSV round-tripping and synthetic generators.

A demonstration is a uniformly typed record of timestamps, positions and
velocities.  Sets of demonstrations share the degrees of freedom and sample
count but may differ in their actual timestamps.  CSV files store one header
line ``t,q1,...,qD[,qd1,...,qdD]`` followed by sample rows; multiple
demonstrations are separated by a line containing only ``#demo``.  When the
velocity columns are absent they are estimated with finite differences.

Synthetic demonstrations are produced by sampling a spline through keyframe
points and adding a smooth random perturbation field (a small sum of Gaussian
bumps with normally distributed coefficients), so that both positions and
velocities vary smoothly across the set.  Generation is deterministic for a
fixed seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

__all__ = [
    "Demonstration",
    "DemonstrationSet",
    "estimate_velocities",
    "load_csv",
    "save_csv",
    "CurveSpec",
    "LETTER_G",
    "REACH_SEVEN_DOF",
    "generate_curve_demos",
    "generate_letter_demos",
    "generate_reach_demos",
]


@dataclass(frozen=True)
class Demonstration:
    """One recorded motion: times (N,), positions (N, dof), velocities (N, dof)."""

    times: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        q = np.asarray(self.positions, dtype=float)
        qd = np.asarray(self.velocities, dtype=float)
        if t.ndim != 1 or q.ndim != 2 or q.shape[0] != t.size or qd.shape != q.shape:
            raise ValueError(
                f"inconsistent demonstration shapes: times {t.shape}, "
                f"positions {q.shape}, velocities {qd.shape}"
            )
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(q)) and np.all(np.isfinite(qd))):
            raise ValueError("demonstration contains non-finite values")
        if np.any(np.diff(t) <= 0):
            raise ValueError("demonstration timestamps must be strictly increasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "positions", q)
        object.__setattr__(self, "velocities", qd)

    @property
    def dof(self):
        return self.positions.shape[1]

    def __len__(self):
        return self.times.size


class DemonstrationSet:
    """A non-empty list of demonstrations sharing dof and sample count."""

    def __init__(self, demos):
        demos = list(demos)
        if not demos:
            raise ValueError("demonstration set must contain at least one demonstration")
        dof, n = demos[0].dof, len(demos[0])
        for i, demo in enumerate(demos):
            if demo.dof != dof:
                raise ValueError(f"demonstration {i} has dof {demo.dof}, expected {dof}")
            if len(demo) != n:
                raise ValueError(f"demonstration {i} has {len(demo)} samples, expected {n}")
        self.demos = demos

    @property
    def dof(self):
        return self.demos[0].dof

    @property
    def n_samples(self):
        return len(self.demos[0])

    def __len__(self):
        return len(self.demos)

    def __iter__(self):
        return iter(self.demos)

    def __getitem__(self, i):
        return self.demos[i]

    def stacked_samples(self):
        """Pool every sample into one array of rows (t, q, qdot).

        The result has shape (len(self) * n_samples, 1 + 2*dof) and is the
        input representation used for mixture fitting.
        """
        rows = [
            np.column_stack([d.times, d.positions, d.velocities])
            for d in self.demos
        ]
        return np.vstack(rows)

    def time_span(self):
        lo = min(d.times[0] for d in self.demos)
        hi = max(d.times[-1] for d in self.demos)
        return lo, hi


def estimate_velocities(times, positions):
    """Estimate velocities by differencing positions.

    Central (three-point) differences at interior samples, one-sided at the
    ends; the interior formula is exact for quadratics.  Needs at least 3
    samples.
    """
    t = np.asarray(times, dtype=float)
    q = np.asarray(positions, dtype=float)
    if t.size < 3:
        raise ValueError(f"velocity estimation needs at least 3 samples, got {t.size}")
    return np.gradient(q, t, axis=0, edge_order=1)


def _parse_header(line):
    names = [c.strip() for c in line.split(",")]
    if not names or names[0] != "t":
        raise ValueError("CSV header must start with column 't'")
    dof = 0
    while 1 + dof < len(names) and names[1 + dof] == f"q{dof + 1}":
        dof += 1
    if dof == 0:
        raise ValueError("CSV header must contain position columns q1..qD")
    rest = names[1 + dof :]
    if not rest:
        return dof, False
    if rest == [f"qd{i + 1}" for i in range(dof)]:
        return dof, True
    raise ValueError(f"CSV header has unexpected columns after q{dof}: {rest}")


def load_csv(path):
    """Read a demonstration set from a CSV file.

    Velocities are estimated when the file carries only position columns.
    Malformed rows raise ValueError naming the line number.
    """
    with open(path) as fh:
        lines = fh.read().splitlines()
    lines = [ln for ln in lines]
    if not lines:
        raise ValueError(f"{path}: empty file")
    dof, has_velocity = _parse_header(lines[0])
    width = 1 + (2 * dof if has_velocity else dof)
    segments, current = [], []
    for lineno, raw in enumerate(lines[1:], start=2):
        line = raw.strip()
        if not line:
            continue
        if line == "#demo":
            if current:
                segments.append(current)
                current = []
            continue
        fields = line.split(",")
        if len(fields) != width:
            raise ValueError(f"{path}:{lineno}: expected {width} fields, got {len(fields)}")
        try:
            row = [float(f) for f in fields]
        except ValueError as exc:
            raise ValueError(f"{path}:{lineno}: non-numeric field ({exc})") from None
        current.append(row)
    if current:
        segments.append(current)
    if not segments:
        raise ValueError(f"{path}: no demonstration rows found")
    demos = []
    for seg in segments:
        arr = np.array(seg)
        t = arr[:, 0]
        q = arr[:, 1 : 1 + dof]
        if has_velocity:
            qd = arr[:, 1 + dof :]
        else:
            qd = estimate_velocities(t, q)
        demos.append(Demonstration(times=t, positions=q, velocities=qd))
    return DemonstrationSet(demos)


def save_csv(demo_set, path):
    """Write a demonstration set in the load_csv format, full precision."""
    dof = demo_set.dof
    header = "t," + ",".join(f"q{i + 1}" for i in range(dof))
    header += "," + ",".join(f"qd{i + 1}" for i in range(dof))
    out = [header]
    for k, demo in enumerate(demo_set):
        if k > 0:
            out.append("#demo")
        for i in range(len(demo)):
            row = [demo.times[i], *demo.positions[i], *demo.velocities[i]]
            out.append(",".join(repr(float(v)) for v in row))
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(out) + "\n")


@dataclass(frozen=True)
class CurveSpec:
    """Keyframes of a nominal curve plus sampling info for the generators."""

    key_times: tuple
    key_points: tuple
    n_samples: int
    name: str = "curve"


# A "G" shaped stroke in centimetres, two seconds long.  The lower-left pass
# deliberately sweeps close to the origin side of the region around
# (-6, -4) so that obstacle scenarios have something to repair.
LETTER_G = CurveSpec(
    key_times=(0.0, 0.2, 0.4, 0.6, 0.8, 1.0, 1.2, 1.4, 1.6, 1.8, 2.0),
    key_points=(
        (10.0, 9.5),
        (7.2, 14.6),
        (1.5, 11.5),
        (-1.3, 7.5),
        (-1.5, 4.2),
        (-1.6, -2.5),
        (3.4, -5.3),
        (6.0, -5.5),
        (10.0, -2.0),
        (10.3, 3.0),
        (5.7, 2.5),
    ),
    n_samples=200,
    name="letter_g",
)

# A seven-joint reaching motion (radians) lasting ten seconds.  The keyframes
# were fitted against the bundled arm description: the hand starts high,
# sweeps low over the table between seconds three and four, passes a reach
# pose on the far side and retreats.
REACH_SEVEN_DOF = CurveSpec(
    key_times=(0.0, 2.8, 4.2, 6.0, 10.0),
    key_points=(
        (0.2183, -0.346, 0.2403, 1.9344, 0.0074, 0.0676, 0.0),
        (0.1035, 0.2403, 0.1138, 2.0854, 0.0004, 0.1109, 0.0),
        (-0.0064, 0.2667, 0.01, 1.9972, -0.0031, 0.0715, 0.0),
        (-0.1428, 0.1936, -0.1127, 1.5988, 0.0014, -0.0878, 0.0),
        (-0.2974, 0.0947, -0.2581, 1.5354, 0.0085, -0.1152, 0.0),
    ),
    n_samples=200,
    name="reach_seven_dof",
)


def generate_curve_demos(spec, count, noise_scale, seed, n_bumps=8, jitter=0.0):
    """Sample noisy realizations of a keyframed curve.

    A natural cubic spline through the keyframes gives the nominal motion;
    each demonstration adds an independent smooth perturbation field.  The
    velocities are the exact derivatives of the perturbed curve.  Zero
    noise_scale reproduces the nominal curve in every demonstration.

    jitter, when positive, adds white measurement noise of that scale to
    every sampled position and velocity, mimicking encoder quantization and
    numeric differentiation error in recorded data.  Smoothly perturbed
    curves alone leave position and velocity almost deterministically
    coupled at a fixed time, which produces badly conditioned conditional
    covariances downstream.
    """
    if count < 1:
        raise ValueError(f"count must be positive, got {count}")
    if noise_scale < 0:
        raise ValueError(f"noise_scale must be non-negative, got {noise_scale}")
    key_t = np.asarray(spec.key_times, dtype=float)
    key_p = np.asarray(spec.key_points, dtype=float)
    spline = CubicSpline(key_t, key_p, bc_type="natural")
    dspline = spline.derivative()
    t = np.linspace(key_t[0], key_t[-1], spec.n_samples)
    rng = np.random.default_rng(seed)
    centers = np.linspace(key_t[0], key_t[-1], n_bumps)
    width = 1.4 * (centers[1] - centers[0])
    # Bump values and their time derivatives at the sample times.
    bumps = np.exp(-((t[:, None] - centers[None, :]) ** 2) / (2.0 * width**2))
    dbumps = bumps * (-(t[:, None] - centers[None, :]) / width**2)
    demos = []
    dof = key_p.shape[1]
    for _ in range(count):
        coeff = rng.normal(0.0, noise_scale, size=(n_bumps, dof))
        q = spline(t) + bumps @ coeff
        qd = dspline(t) + dbumps @ coeff
        if jitter > 0.0:
            q = q + rng.normal(0.0, jitter, size=q.shape)
            qd = qd + rng.normal(0.0, jitter, size=qd.shape)
        demos.append(Demonstration(times=t.copy(), positions=q, velocities=qd))
    return DemonstrationSet(demos)


def generate_letter_demos(count=5, noise_scale=2.0, seed=0, spec=LETTER_G):
    """Noisy handwriting demonstrations of the bundled G stroke (cm, s)."""
    return generate_curve_demos(spec, count, noise_scale, seed)


def generate_reach_demos(count=5, noise_scale=0.2, seed=0, spec=REACH_SEVEN_DOF):
    """Noisy joint-space reaching demonstrations for a 7-dof arm (rad, s).

    Uses a denser perturbation field than the letter generator (16 bumps
    over ten seconds) plus measurement jitter, so the velocity spread stays
    comparable to the position spread and no direction of the pooled sample
    cloud collapses.  Overly confident distribution estimates would
    destabilize the trajectory updates at the usual step sizes.
    """
    return generate_curve_demos(spec, count, noise_scale, seed, n_bumps=16, jitter=0.12)
