"""System parameters: HE ring/plaintext moduli, OT group, session seed.

The params file is JSON with every integer written in decimal::

    {"format": "hybridpi-params", "version": 1,
     "n": 4096, "q": ..., "psi": ..., "p": ..., "eta": 2,
     "seed": ..., "ot_group": {"prime": ..., "generator": 4}}
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from functools import cached_property, lru_cache
from pathlib import Path

import gmpy2

from .errors import ConfigError
from .ring import Modulus, Ring, find_prime, find_root, is_prime, make_ring, ntt_prime
from .rng import parse_seed

PARAMS_FORMAT = "hybridpi-params"
PARAMS_VERSION = 1

DEFAULT_N = 4096
DEFAULT_P_BITS = 21
DEFAULT_Q_BITS = 60
DEFAULT_ETA = 2
DEFAULT_OT_BITS = 512


@dataclass(frozen=True)
class HeParams:
    n: int
    q: int
    p: int
    eta: int = DEFAULT_ETA
    psi: int | None = None

    def __post_init__(self):
        if not is_prime(self.p) or self.p % 2 == 0:
            raise ConfigError(f"plaintext modulus {self.p} must be an odd prime")
        if self.p >= self.q:
            raise ConfigError("plaintext modulus must be below q")
        if self.delta < 2:
            raise ConfigError("delta = floor(q/p) must be at least 2")
        if self.eta < 1:
            raise ConfigError("eta must be positive")
        Modulus(self.q)  # validates primality and size
        if (self.q - 1) % (2 * self.n):
            raise ConfigError(f"q is not 1 mod 2n (n={self.n})")
        if self.psi is not None and pow(self.psi, self.n, self.q) != self.q - 1:
            raise ConfigError("psi is not a primitive 2n-th root of unity")

    @property
    def delta(self) -> int:
        return self.q // self.p

    @property
    def rho(self) -> int:
        """q mod p; the carry term that plaintext overflow injects as noise."""
        return self.q % self.p

    @property
    def ring(self) -> Ring:
        return make_ring(self.n, self.q, self.psi)

    @property
    def value_bits(self) -> int:
        return self.p.bit_length()

    def noise_ok(self, bound: int) -> bool:
        """True iff noise of magnitude <= bound is guaranteed to decrypt."""
        return 2 * self.p * (bound + self.rho) < self.q

    def canonical(self) -> dict:
        return {"n": self.n, "q": self.q, "p": self.p, "eta": self.eta, "psi": self.psi}

    @cached_property
    def digest(self) -> bytes:
        text = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(b"hybridpi/he-params\x00" + text.encode()).digest()

    def to_bytes(self) -> bytes:
        psi = self.psi or 0
        return (
            self.n.to_bytes(4, "little")
            + self.q.to_bytes(8, "little")
            + self.p.to_bytes(8, "little")
            + self.eta.to_bytes(2, "little")
            + psi.to_bytes(8, "little")
        )

    @classmethod
    def from_bytes(cls, data: bytes) -> HeParams:
        if len(data) != 30:
            raise ConfigError("bad HE params encoding")
        n = int.from_bytes(data[0:4], "little")
        q = int.from_bytes(data[4:12], "little")
        p = int.from_bytes(data[12:20], "little")
        eta = int.from_bytes(data[20:22], "little")
        psi = int.from_bytes(data[22:30], "little") or None
        return cls(n, q, p, eta, psi)


@dataclass(frozen=True)
class OtGroup:
    """Quadratic-residue subgroup of Z_P^* for a safe prime P = 2Q + 1."""

    prime: int
    generator: int = 4

    def __post_init__(self):
        if not is_prime(self.prime) or not is_prime((self.prime - 1) // 2):
            raise ConfigError("OT group modulus must be a safe prime")
        if not self.contains(self.generator) or self.generator == 1:
            raise ConfigError("OT generator must be a nontrivial quadratic residue")

    @property
    def order(self) -> int:
        return (self.prime - 1) // 2

    @property
    def element_bytes(self) -> int:
        return (self.prime.bit_length() + 7) // 8

    def contains(self, y: int) -> bool:
        return 1 < y < self.prime and gmpy2.legendre(y, self.prime) == 1


@lru_cache(maxsize=8)
def safe_prime(bits: int = DEFAULT_OT_BITS) -> int:
    """Largest safe prime below 2^bits (deterministic search)."""
    q = gmpy2.mpz(2) ** (bits - 1) - 1
    q -= (q - 5) % 6  # q = 5 mod 6 keeps 2q+1 off multiples of 3
    while q > 5:
        if gmpy2.is_prime(q, 2) and gmpy2.is_prime(2 * q + 1, 2):
            if is_prime(int(q)) and is_prime(int(2 * q + 1)):
                return int(2 * q + 1)
        q -= 6
    raise ConfigError(f"no safe prime below 2^{bits}")


@lru_cache(maxsize=32)
def setup_he(n: int = DEFAULT_N, p_bits: int = DEFAULT_P_BITS, q_bits: int = DEFAULT_Q_BITS,
             eta: int = DEFAULT_ETA) -> HeParams:
    """Search p (prime, < 2^p_bits) then q (prime, < 2^q_bits, q = 1 mod 2np).

    q = 1 mod p makes the plaintext carry term q mod p equal to one.
    """
    p = find_prime(p_bits)
    q = ntt_prime(n, q_bits, cofactor=p)
    return HeParams(n=n, q=q, p=p, eta=eta, psi=find_root(n, Modulus(q)))


@dataclass(frozen=True)
class SystemParams:
    he: HeParams
    ot_group: OtGroup
    seed: bytes

    @classmethod
    def generate(cls, n: int = DEFAULT_N, p_bits: int = DEFAULT_P_BITS,
                 q_bits: int = DEFAULT_Q_BITS, eta: int = DEFAULT_ETA,
                 ot_bits: int = DEFAULT_OT_BITS, seed=0) -> SystemParams:
        return cls(setup_he(n, p_bits, q_bits, eta), OtGroup(safe_prime(ot_bits)), parse_seed(seed))

    def to_json(self) -> dict:
        he = self.he
        return {
            "format": PARAMS_FORMAT,
            "version": PARAMS_VERSION,
            "n": he.n,
            "q": he.q,
            "psi": he.psi,
            "p": he.p,
            "eta": he.eta,
            "seed": int.from_bytes(self.seed, "big"),
            "ot_group": {"prime": self.ot_group.prime, "generator": self.ot_group.generator},
        }

    @classmethod
    def from_json(cls, data: dict) -> SystemParams:
        if data.get("format") != PARAMS_FORMAT:
            raise ConfigError("not a hybridpi params file")
        if data.get("version") != PARAMS_VERSION:
            raise ConfigError(f"unsupported params version {data.get('version')}")
        try:
            he = HeParams(n=int(data["n"]), q=int(data["q"]), p=int(data["p"]),
                          eta=int(data["eta"]), psi=int(data["psi"]))
            grp = data["ot_group"]
            group = OtGroup(int(grp["prime"]), int(grp["generator"]))
            seed = parse_seed(int(data["seed"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"malformed params file: {exc}") from exc
        return cls(he, group, seed)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> SystemParams:
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read params file {path}: {exc}") from exc
        return cls.from_json(data)
