"""Instance generators: structured OS/app/port devices and small binary benchmark games."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from maskgame.errors import ConfigurationError
from maskgame.game import AttributeSchema, CostFn, Exploit, GameSpec, Prior, ValueFn

NUM_OS = 3

# (os, os versions, app, app versions, port); app None means OS-only.
CASE_STUDY_EXPLOITS = (
    (0, (2, 3), 3, (1,), 19),
    (0, (2,), 8, (1, 2, 3), 14),
    (0, (2, 3), None, None, 17),
    (1, (2, 3), 3, (1, 2), 14),
    (1, (1,), 4, (1, 2), 12),
    (1, (1, 2, 3), 4, (3,), 17),
    (1, (1, 2, 3), 5, (1, 2, 3), 14),
    (1, (3,), 5, (3,), 19),
    (1, (2,), 6, (1,), 12),
    (1, (1, 2), 7, (2,), 11),
    (1, (2, 3), 7, (1, 2, 3), 17),
    (1, (3,), None, None, 16),
    (2, (2, 3), 3, (1, 2), 12),
    (2, (2, 3), 5, (1, 2), 11),
    (2, (1, 2), 5, (3,), 12),
    (2, (1, 2), 6, (1, 2, 3), 12),
    (2, (1, 2, 3), 8, (1, 2, 3), 18),
    (2, (1, 2, 3), 9, (1, 2, 3), 13),
    (2, (1, 2, 3), None, None, 10),
)

TABLE1_ROWS = {
    "table1-n2m2": (2, 2, ((-1, 1), (1, -1))),
    "table1-n4": (4, 1, ((-1, 1, -1, -1), (1, -1, 1, 1))),
    "table1-n5": (5, 1, ((-1, 1, 1, -1, -1), (-1, -1, 1, -1, 1))),
    "table1-n6": (6, 1, ((-1, 1, 1, -1, -1, -1), (-1, -1, 1, -1, 1, -1))),
}


@dataclass(frozen=True)
class StructuredLayout:
    """Attribute positions of a structured device.

    ``os_versions[j]`` / ``app_versions[j]`` is the version slot paired with
    ``os_flags[j]`` / ``app_flags[j]``, or None when the flag attribute itself
    carries the version (compact encoding: -1 absent, else the version).
    """

    os_flags: tuple[int, ...]
    os_versions: tuple[int | None, ...]
    app_flags: tuple[int, ...]
    app_versions: tuple[int | None, ...]
    ports: tuple[int, ...]
    compact: bool = False

    @property
    def n(self) -> int:
        return len(self.os_flags) + len(self.app_flags) + len(self.ports) + sum(
            v is not None for v in self.os_versions + self.app_versions
        )

    @classmethod
    def expanded(cls, n: int) -> "StructuredLayout":
        """[OS flags x3 | OS versions x3 | app flag/version pairs | ports (last ceil(n/2))]."""
        num_ports = math.ceil(n / 2)
        body = n - num_ports
        if body < 2 * NUM_OS or num_ports < 1:
            raise ConfigurationError(
                f"n={n} too small: need 6 OS attributes plus a port block of ceil(n/2) (n >= 12)"
            )
        os_flags = tuple(range(NUM_OS))
        os_versions = tuple(range(NUM_OS, 2 * NUM_OS))
        app_flags, app_versions = [], []
        i = 2 * NUM_OS
        while i < body:
            app_flags.append(i)
            app_versions.append(i + 1 if i + 1 < body else None)
            i += 2
        return cls(os_flags, os_versions, tuple(app_flags), tuple(app_versions), tuple(range(body, n)))

    @classmethod
    def compact_layout(cls, num_apps: int, num_ports: int) -> "StructuredLayout":
        """[OS x3 | apps | ports], each OS/app attribute holding its version or -1."""
        apps = tuple(range(NUM_OS, NUM_OS + num_apps))
        ports = tuple(range(NUM_OS + num_apps, NUM_OS + num_apps + num_ports))
        return cls(tuple(range(NUM_OS)), (None,) * NUM_OS, apps, (None,) * num_apps, ports, compact=True)

    @classmethod
    def from_schema(cls, schema: AttributeSchema) -> "StructuredLayout":
        roles = schema.roles
        if roles is None:
            raise ConfigurationError("structured layout needs schema roles")

        def pick(role):
            return tuple(i for i, r in enumerate(roles) if r == role)

        os_flags, os_vers = pick("os-flag"), pick("os-version")
        app_flags, app_vers = pick("app-flag"), pick("app-version")
        ports = pick("port")
        if len(os_flags) != NUM_OS:
            raise ConfigurationError(f"structured layout needs exactly {NUM_OS} os-flag attributes")
        if os_vers:
            if len(os_vers) != NUM_OS:
                raise ConfigurationError("os-version attributes must pair one-to-one with os-flags")
            app_pairs = []
            for a in app_flags:
                app_pairs.append(a + 1 if a + 1 in app_vers else None)
            return cls(os_flags, os_vers, app_flags, tuple(app_pairs), ports)
        return cls(os_flags, (None,) * NUM_OS, app_flags, (None,) * len(app_flags), ports, compact=True)

    def schema(self, V: int) -> AttributeSchema:
        n = self.n
        domains = [None] * n
        roles = [None] * n
        versions = tuple(range(1, V + 1))
        flag_domain = (-1,) + versions if self.compact else (-1, 1)
        for f, v in zip(self.os_flags, self.os_versions):
            domains[f], roles[f] = flag_domain, "os-flag"
            if v is not None:
                domains[v], roles[v] = (-1,) + versions, "os-version"
        for f, v in zip(self.app_flags, self.app_versions):
            domains[f], roles[f] = flag_domain, "app-flag"
            if v is not None:
                domains[v], roles[v] = (-1,) + versions, "app-version"
        for p in self.ports:
            domains[p], roles[p] = (-1, 1), "port"
        return AttributeSchema(tuple(domains), V, tuple(roles))

    def sample(self, rng: np.random.Generator, size: int, V: int) -> np.ndarray:
        """I.i.d. device configurations, int8 (size, n).

        Exactly one OS installed with one version; each app installed with
        probability 1/2 and a uniform version; ports uniform subject to at
        least one open (open = -1, closed = 1).
        """
        X = np.full((size, self.n), -1, dtype=np.int8)
        rows = np.arange(size)
        os_pick = rng.integers(0, NUM_OS, size=size)
        os_ver = rng.integers(1, V + 1, size=size).astype(np.int8)
        os_flags = np.asarray(self.os_flags)
        if self.compact:
            X[rows, os_flags[os_pick]] = os_ver
        else:
            X[rows, os_flags[os_pick]] = 1
            X[rows, np.asarray(self.os_versions)[os_pick]] = os_ver
        for f, v in zip(self.app_flags, self.app_versions):
            installed = rng.random(size) < 0.5
            ver = rng.integers(1, V + 1, size=size).astype(np.int8)
            if self.compact:
                X[:, f] = np.where(installed, ver, -1)
            else:
                X[:, f] = np.where(installed, 1, -1)
                if v is not None:
                    X[:, v] = np.where(installed, ver, -1)
        if self.ports:
            P = len(self.ports)
            ports = np.where(rng.random((size, P)) < 0.5, -1, 1).astype(np.int8)
            bad = (ports == 1).all(axis=1)
            while bad.any():
                ports[bad] = np.where(rng.random((bad.sum(), P)) < 0.5, -1, 1)
                bad = (ports == 1).all(axis=1)
            X[:, list(self.ports)] = ports
        return X

    def exploit(self, os, os_range, app=None, app_range=None, port=None) -> Exploit:
        """Exploit requiring OS ``os`` in ``os_range``, optional app range, and an open port.

        ``os``/``app``/``port`` are positions within their blocks.
        """
        req = {}
        if self.compact:
            req[self.os_flags[os]] = set(os_range)
        else:
            req[self.os_flags[os]] = {1}
            req[self.os_versions[os]] = set(os_range)
        if app is not None:
            if self.compact:
                req[self.app_flags[app]] = set(app_range)
            else:
                req[self.app_flags[app]] = {1}
                if self.app_versions[app] is not None:
                    req[self.app_versions[app]] = set(app_range)
        if port is not None:
            req[self.ports[port]] = {-1}
        return Exploit(req)


def _random_range(rng, V):
    # uniform over the V(V+1)/2 contiguous ranges
    ranges = [(a, b) for a in range(1, V + 1) for b in range(a, V + 1)]
    lo, hi = ranges[rng.integers(len(ranges))]
    return tuple(range(lo, hi + 1))


def generate_structured_instance(
    n: int, m: int, num_exploits: int, V: int, seed: int, c: float = 0.01
) -> GameSpec:
    """Random OS/app/port game with i.i.d. devices.

    Each exploit targets a contiguous version range of one OS, optionally also
    a contiguous version range of one app, and requires one open port; every
    choice is uniform. Value is 1 + number of installed apps.
    """
    layout = StructuredLayout.expanded(n)
    rng = np.random.default_rng(seed)
    exploits = []
    for _ in range(num_exploits):
        os = int(rng.integers(NUM_OS))
        os_range = _random_range(rng, V)
        app = app_range = None
        if layout.app_flags and rng.random() < 0.5:
            app = int(rng.integers(len(layout.app_flags)))
            app_range = _random_range(rng, V)
        port = int(rng.integers(len(layout.ports)))
        exploits.append(layout.exploit(os, os_range, app, app_range, port))
    return GameSpec(
        schema=layout.schema(V),
        m=m,
        prior=Prior("structured", seed=seed),
        exploits=tuple(exploits),
        value=ValueFn("one-plus-apps"),
        cost=CostFn.uniform(n, c),
    )


def case_study_instance(c: float = 0.01, seed: int = 0) -> GameSpec:
    """n=20 single-device game with the 19 pinned case-study exploits.

    Uses the compact encoding so that attribute indices coincide with the
    exploit table: OS 0-2, apps 3-9, ports 10-19.
    """
    layout = StructuredLayout.compact_layout(num_apps=7, num_ports=10)
    V = 3
    exploits = []
    for os, os_range, app, app_range, port in CASE_STUDY_EXPLOITS:
        req = {os: set(os_range), port: {-1}}
        if app is not None:
            req[app] = set(app_range)
        exploits.append(Exploit(req))
    return GameSpec(
        schema=layout.schema(V),
        m=1,
        prior=Prior("structured", seed=seed),
        exploits=tuple(exploits),
        value=ValueFn("one-plus-apps"),
        cost=CostFn.uniform(layout.n, c),
    )


def indicator_game(n: int, m: int, codes, c: float = 0.01) -> GameSpec:
    """Uniform prior over {-1, 1}^n per device, v = number of ones, exploits in indicator encoding."""
    return GameSpec(
        schema=AttributeSchema.binary(n),
        m=m,
        prior=Prior("uniform-binary"),
        exploits=tuple(Exploit.from_indicator(code) for code in codes),
        value=ValueFn("half-sum-plus-one-scale"),
        cost=CostFn.uniform(n, c),
    )


def table1_instance(name: str) -> GameSpec:
    n, m, codes = TABLE1_ROWS[name]
    return indicator_game(n, m, codes)


def random_indicator_game(
    n: int, m: int, num_exploits: int, seed: int, c: float = 0.01
) -> GameSpec:
    """Uniform binary game with random exploits.

    Each exploit requires value 1 on a random nonempty subset of attributes
    (each attribute included with probability 1/2) and ignores the rest.
    """
    if n < 1:
        raise ConfigurationError("n must be >= 1")
    rng = np.random.default_rng(seed)
    codes = []
    for _ in range(num_exploits):
        req = rng.random(n) < 0.5
        if not req.any():
            req[rng.integers(n)] = True
        codes.append(tuple(1 if r else -1 for r in req))
    return indicator_game(n, m, codes, c)
