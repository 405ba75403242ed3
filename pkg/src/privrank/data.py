"""Pairwise-comparison datasets: synthetic generation, privatization, CSV io.

A dataset holds per-record (user, item_i, item_j, value) with item_i < item_j
and a homogeneous value kind:

* ``raw_binary``        y in {0,1}, straight from the comparison model
* ``rr_binary``         randomized-response output, still in {0,1}
* ``debiased_weighted`` w_l * debias(y~), the adaptive debiased RR surrogate
* ``laplace_real``      y + Laplace noise

Users and items are 0-based in memory; the CSV schema
``user_id,item_i,item_j,value,kind`` is 1-based.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace

import numpy as np

from .mechanisms import PrivacyProfile, debias, laplace_perturb, randomized_response

KIND_RAW = "raw_binary"
KIND_RR = "rr_binary"
KIND_ADRR = "debiased_weighted"
KIND_LAPLACE = "laplace_real"
KINDS = (KIND_RAW, KIND_RR, KIND_ADRR, KIND_LAPLACE)
BINARY_KINDS = (KIND_RAW, KIND_RR)

MECH_CLASSIC_RR = "classic_rr"
MECH_ADRR = "adrr"
MECH_LAPLACE = "laplace"
MECHANISMS = (MECH_CLASSIC_RR, MECH_ADRR, MECH_LAPLACE)


def centered_uniform_preferences(m: int, rng: np.random.Generator) -> np.ndarray:
    """theta_i ~ Uniform(-1,1), recentered so the entries sum to zero."""
    theta = rng.uniform(-1.0, 1.0, size=m)
    return theta - theta.mean()


def equally_spaced_preferences(m: int, delta: float) -> np.ndarray:
    """Evenly spaced preferences with adjacent gap delta, centered at zero."""
    theta = delta * np.arange(m - 1, -1, -1, dtype=float)
    return theta - theta.mean()


@dataclass(frozen=True)
class PairwiseDataset:
    m: int
    L: int
    users: np.ndarray
    item_i: np.ndarray
    item_j: np.ndarray
    values: np.ndarray
    kind: str
    profile: PrivacyProfile | None = field(default=None, compare=False)

    def __post_init__(self):
        users = np.asarray(self.users, dtype=np.int64)
        ii = np.asarray(self.item_i, dtype=np.int64)
        jj = np.asarray(self.item_j, dtype=np.int64)
        values = np.asarray(self.values, dtype=float)
        if not (users.shape == ii.shape == jj.shape == values.shape):
            raise ValueError("record arrays must have identical shape")
        if self.kind not in KINDS:
            raise ValueError(f"unknown dataset kind {self.kind!r}")
        if self.m < 2 or self.L < 1:
            raise ValueError("need m >= 2 items and L >= 1 users")
        if users.size:
            if users.min() < 0 or users.max() >= self.L:
                raise ValueError("user index out of range")
            if ii.min() < 0 or jj.max() >= self.m or np.any(ii >= jj):
                raise ValueError("items must satisfy 0 <= i < j < m")
            key = (users * self.m + ii) * self.m + jj
            if np.unique(key).size != key.size:
                raise ValueError("duplicate (user, item_i, item_j) record")
            if self.kind in BINARY_KINDS and not np.all((values == 0) | (values == 1)):
                raise ValueError(f"{self.kind} values must be 0/1")
        for name, arr in (("users", users), ("item_i", ii), ("item_j", jj), ("values", values)):
            object.__setattr__(self, name, arr)

    def __len__(self) -> int:
        return self.users.size

    @property
    def records(self):
        """Record tuples (user, item_i, item_j, value), all 0-based."""
        return list(zip(self.users.tolist(), self.item_i.tolist(),
                        self.item_j.tolist(), self.values.tolist()))

    def with_values(self, values, kind, profile=None) -> "PairwiseDataset":
        return replace(self, values=np.asarray(values, dtype=float), kind=kind,
                       profile=profile if profile is not None else self.profile)


def generate(theta_star, model, L: int, p: float, rng: np.random.Generator,
             user_effects=None) -> PairwiseDataset:
    """Draw raw comparisons: each of the L*m(m-1)/2 pairs is observed with
    probability p, and observed bits are Bernoulli(F(theta_i - theta_j)),
    independently across (user, pair).

    ``user_effects`` optionally adds a per-user shift gamma_l to every gap
    (the mixed-effects generating process).
    """
    theta = np.asarray(theta_star, dtype=float)
    m = theta.size
    if m < 2:
        raise ValueError("need at least two items")
    if L < 1:
        raise ValueError("need at least one user")
    if not (0.0 < p <= 1.0):
        raise ValueError("observation probability p must be in (0,1]")
    ii, jj = np.triu_indices(m, k=1)
    gaps = theta[ii] - theta[jj]
    if user_effects is not None:
        gamma = np.asarray(user_effects, dtype=float)
        if gamma.shape != (L,):
            raise ValueError("user_effects must have length L")
        probs = model.cdf(gaps[None, :] + gamma[:, None])
    else:
        probs = np.broadcast_to(model.cdf(gaps), (L, gaps.size))
    observed = rng.random((L, gaps.size)) < p
    y = (rng.random((L, gaps.size)) < probs).astype(float)
    users_full = np.broadcast_to(np.arange(L)[:, None], observed.shape)
    sel = observed.ravel()
    return PairwiseDataset(
        m=m, L=L,
        users=users_full.ravel()[sel],
        item_i=np.broadcast_to(ii, observed.shape).ravel()[sel],
        item_j=np.broadcast_to(jj, observed.shape).ravel()[sel],
        values=y.ravel()[sel],
        kind=KIND_RAW,
    )


def privatize(raw: PairwiseDataset, profile: PrivacyProfile, mechanism: str,
              rng: np.random.Generator) -> PairwiseDataset:
    """Apply a privacy mechanism record-by-record with each user's own budget.

    The (user, pair) index set is preserved exactly; only values change.
    """
    if raw.kind != KIND_RAW:
        raise ValueError("privatize expects a raw_binary dataset")
    if len(profile) != raw.L:
        raise ValueError("profile length must equal the dataset user count")
    if mechanism not in MECHANISMS:
        raise ValueError(f"unknown mechanism {mechanism!r}; expected one of {MECHANISMS}")
    eps = profile.epsilons[raw.users]
    if mechanism == MECH_CLASSIC_RR:
        values = randomized_response(raw.values, eps, rng)
        return raw.with_values(values, KIND_RR, profile)
    if mechanism == MECH_ADRR:
        y_tilde = randomized_response(raw.values, eps, rng)
        z_tilde = debias(y_tilde, eps)
        z = profile.weights[raw.users] * z_tilde
        return raw.with_values(z, KIND_ADRR, profile)
    values = laplace_perturb(raw.values, eps, rng)
    return raw.with_values(values, KIND_LAPLACE, profile)


def intransitivity_report(raw: PairwiseDataset) -> tuple[float, float]:
    """(fraction of users whose comparisons conflict with their own win-count
    order, fraction of all comparisons that conflict).

    Each user's listwise order ranks items by descending win count within
    that user's observed comparisons, ties broken by ascending item index.
    """
    if raw.kind not in BINARY_KINDS:
        raise ValueError("intransitivity report expects binary comparisons")
    n_records = len(raw)
    if n_records == 0:
        return 0.0, 0.0
    flagged_users = 0
    active_users = 0
    conflicts = 0
    for l in range(raw.L):
        sel = raw.users == l
        if not sel.any():
            continue
        active_users += 1
        ii, jj, y = raw.item_i[sel], raw.item_j[sel], raw.values[sel]
        wins = np.zeros(raw.m)
        np.add.at(wins, ii, y)
        np.add.at(wins, jj, 1.0 - y)
        # position in descending win-count order; ties go to the lower index
        order = np.lexsort((np.arange(raw.m), -wins))
        position = np.empty(raw.m, dtype=np.int64)
        position[order] = np.arange(raw.m)
        predicted = (position[ii] < position[jj]).astype(float)
        n_conflicts = int(np.sum(predicted != y))
        conflicts += n_conflicts
        if n_conflicts:
            flagged_users += 1
    return flagged_users / active_users, conflicts / n_records


def write_csv(dataset: PairwiseDataset, path) -> None:
    binary = dataset.kind in BINARY_KINDS
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["user_id", "item_i", "item_j", "value", "kind"])
        for l, i, j, v in zip(dataset.users, dataset.item_i, dataset.item_j, dataset.values):
            val = int(v) if binary else format(v, ".17g")
            writer.writerow([l + 1, i + 1, j + 1, val, dataset.kind])


def load_csv(path, profile: PrivacyProfile | None = None,
             m: int | None = None, L: int | None = None) -> PairwiseDataset:
    """Read the documented schema back into a dataset.

    m and L default to the largest indices present; pass them explicitly if
    trailing items/users may be absent from the records.
    """
    users, item_i, item_j, values = [], [], [], []
    kind = None
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        expected = ["user_id", "item_i", "item_j", "value", "kind"]
        if header is None or [h.strip() for h in header] != expected:
            raise ValueError(f"{path}: expected header {','.join(expected)!r}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                l, i, j = int(row[0]), int(row[1]), int(row[2])
                v = float(row[3])
                k = row[4].strip()
            except (IndexError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: malformed record {row!r}") from exc
            if k not in KINDS:
                raise ValueError(f"{path}:{lineno}: unknown kind {k!r}")
            if kind is None:
                kind = k
            elif k != kind:
                raise ValueError(f"{path}:{lineno}: mixed kinds {kind!r} and {k!r}")
            if not (1 <= i < j):
                raise ValueError(f"{path}:{lineno}: need 1 <= item_i < item_j")
            users.append(l - 1)
            item_i.append(i - 1)
            item_j.append(j - 1)
            values.append(v)
    if kind is None:
        kind = KIND_RAW  # header-only file: an empty raw dataset
    inferred_m = max(item_j) + 1 if item_j else 2
    inferred_L = max(users) + 1 if users else 1
    try:
        return PairwiseDataset(
            m=m if m is not None else inferred_m,
            L=L if L is not None else inferred_L,
            users=np.array(users, dtype=np.int64),
            item_i=np.array(item_i, dtype=np.int64),
            item_j=np.array(item_j, dtype=np.int64),
            values=np.array(values, dtype=float),
            kind=kind,
            profile=profile,
        )
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from exc


def load_choice_csv(path) -> PairwiseDataset:
    """Read the normalized real-data schema ``user_id,item_i,item_j,choice``.

    ``choice`` is 1 when item_i was preferred. Produces a raw_binary dataset.
    """
    users, item_i, item_j, values = [], [], [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        expected = ["user_id", "item_i", "item_j", "choice"]
        if header is None or [h.strip() for h in header] != expected:
            raise ValueError(f"{path}: expected header {','.join(expected)!r}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                l, i, j, c = int(row[0]), int(row[1]), int(row[2]), int(row[3])
            except (IndexError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: malformed record {row!r}") from exc
            if c not in (0, 1):
                raise ValueError(f"{path}:{lineno}: choice must be 0 or 1")
            if i == j or i < 1 or j < 1:
                raise ValueError(f"{path}:{lineno}: need two distinct 1-based items")
            if i > j:  # normalize orientation so item_i < item_j
                i, j, c = j, i, 1 - c
            users.append(l - 1)
            item_i.append(i - 1)
            item_j.append(j - 1)
            values.append(float(c))
    if not users:
        raise ValueError(f"{path}: empty choice file")
    return PairwiseDataset(
        m=max(item_j) + 1, L=max(users) + 1,
        users=np.array(users, dtype=np.int64),
        item_i=np.array(item_i, dtype=np.int64),
        item_j=np.array(item_j, dtype=np.int64),
        values=np.array(values, dtype=float),
        kind=KIND_RAW,
    )
