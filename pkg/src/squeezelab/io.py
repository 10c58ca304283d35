"""Plain-text file formats.

Moment files and run configs share one grammar: one ``key = value`` per
line, ``#`` starts a comment, blank lines are ignored, keys are case
sensitive and may appear once.

Moment file keys: N, j, Jx, Jy, Jz, Cxx ... Czz, Qxx ... Qzz and
optionally localx, localy, localz. Off-diagonal C and Q entries may be
given once (Cxy) or both ways (Cxy and Cyx); both must then agree.
"""

import hashlib
import io as _io
from dataclasses import dataclass, fields

import numpy as np

from .states import MomentData

AX = "xyz"


class InputError(ValueError):
    """Malformed input file; the message carries the line number."""


def parse_kv(text, source="<input>"):
    """Parse key = value lines into {key: (value string, line number)}."""
    out = {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InputError(f"{source}:{n}: expected 'key = value', got {raw.strip()!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        if not key or not val:
            raise InputError(f"{source}:{n}: empty key or value")
        if key in out:
            raise InputError(f"{source}:{n}: duplicate key {key!r} (first on line {out[key][1]})")
        out[key] = (val, n)
    return out


def _float(kv, key, source):
    val, n = kv[key]
    try:
        return float(val)
    except ValueError:
        raise InputError(f"{source}:{n}: {key} is not a number: {val!r}") from None


def _matrix(kv, name, source, required=True):
    M = np.full((3, 3), np.nan)
    for a in range(3):
        for b in range(3):
            key = f"{name}{AX[a]}{AX[b]}"
            if key in kv:
                M[a, b] = _float(kv, key, source)
    for a in range(3):
        for b in range(3):
            if np.isnan(M[a, b]):
                M[a, b] = M[b, a]
    if np.isnan(M).any():
        if not required:
            return None
        missing = sorted(f"{name}{AX[a]}{AX[b]}" for a in range(3) for b in range(a, 3)
                         if np.isnan(M[a, b]))
        raise InputError(f"{source}: missing keys {', '.join(missing)}")
    for a in range(3):
        for b in range(a + 1, 3):
            if abs(M[a, b] - M[b, a]) > 1e-9 * max(1.0, abs(M[a, b])):
                key = f"{name}{AX[b]}{AX[a]}"
                raise InputError(f"{source}:{kv[key][1]}: {key} differs from {name}{AX[a]}{AX[b]}")
    return M


_MOMENT_KEYS = ({"N", "j", "Jx", "Jy", "Jz"} | {f"{c}{a}{b}" for c in "CQ" for a in AX for b in AX}
                | {f"local{a}" for a in AX})


def read_moments(text, source="<moments>"):
    """Parse a moment file into MomentData."""
    kv = parse_kv(text, source)
    for key in kv:
        if key not in _MOMENT_KEYS:
            raise InputError(f"{source}:{kv[key][1]}: unknown key {key!r}")
    for key in ("N", "j", "Jx", "Jy", "Jz"):
        if key not in kv:
            raise InputError(f"{source}: missing key {key}")
    N = _float(kv, "N", source)
    j = _float(kv, "j", source)
    if N < 1:
        raise InputError(f"{source}:{kv['N'][1]}: N must be >= 1")
    if j <= 0 or abs(2 * j - round(2 * j)) > 1e-12:
        raise InputError(f"{source}:{kv['j'][1]}: j must be a positive half-integer")
    mean = [_float(kv, f"J{a}", source) for a in AX]
    C = _matrix(kv, "C", source)
    Q = _matrix(kv, "Q", source)
    local = None
    if any(f"local{a}" in kv for a in AX):
        missing = [f"local{a}" for a in AX if f"local{a}" not in kv]
        if missing:
            raise InputError(f"{source}: missing keys {', '.join(missing)}")
        local = [_float(kv, f"local{a}", source) for a in AX]
    if float(N).is_integer():
        N = int(N)
    return MomentData(N, j, mean, C, Q, local)


def load_moments(path):
    with open(path) as fh:
        return read_moments(fh.read(), str(path))


def write_moments(md):
    lines = [f"N = {md.N!r}", f"j = {md.j!r}"]
    lines += [f"J{a} = {float(v)!r}" for a, v in zip(AX, md.mean)]
    for name, M in (("C", md.C), ("Q", md.Q)):
        lines += [f"{name}{AX[a]}{AX[b]} = {float(M[a, b])!r}" for a in range(3) for b in range(a, 3)]
    lines += [f"local{a} = {float(v)!r}" for a, v in zip(AX, md.local)]
    return "\n".join(lines) + "\n"


def write_fcurve(curve):
    """Hull table 'X F' preceded by commented metadata."""
    out = [f"# J = {curve.J!r}",
           f"# samples = {len(curve.samples)}",
           f"# mu_min = {float(np.min(curve.mu_grid))!r}",
           f"# mu_max = {float(np.max(curve.mu_grid))!r}",
           "X F"]
    out += [f"{x!r} {f!r}" for x, f in zip(map(float, curve.X), map(float, curve.F))]
    return "\n".join(out) + "\n"


def read_fcurve(text, source="<fcurve>"):
    """Return (J, X array, F array) from an F-curve table."""
    J = None
    xs, fs = [], []
    header = False
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if body.startswith("J") and "=" in body:
                try:
                    J = float(body.split("=", 1)[1])
                except ValueError:
                    raise InputError(f"{source}:{n}: bad J value") from None
            continue
        if line.split() == ["X", "F"]:
            header = True
            continue
        try:
            x, f = (float(t) for t in line.split())
        except ValueError:
            raise InputError(f"{source}:{n}: expected two numbers, got {line!r}") from None
        xs.append(x)
        fs.append(f)
    if J is None or not header:
        raise InputError(f"{source}: missing '# J = ...' metadata or 'X F' header")
    X = np.array(xs)
    if X.size < 2 or np.any(np.diff(X) < 0):
        raise InputError(f"{source}: X column must be non-decreasing with at least two rows")
    return J, X, np.array(fs)


def _floats(s):
    return tuple(float(t) for t in s.replace(",", " ").split())


def _grid(s):
    """'a:b:n' gives n linearly spaced points, 'a*b*n' n log-spaced, otherwise a list."""
    if ":" in s:
        a, b, n = s.split(":")
        return tuple(np.linspace(float(a), float(b), int(n)).tolist())
    if "*" in s:
        a, b, n = s.split("*")
        return tuple(np.geomspace(float(a), float(b), int(n)).tolist())
    return _floats(s)


def _bool(s):
    t = s.lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(s)


@dataclass(frozen=True)
class RunConfig:
    """Parameters of a CLI run; every key can come from a file or a flag."""

    n_atoms: float = 2e6
    n_photons: float = 5e8
    coupling_g: float = 1e-7
    scattering_eta: float = 0.5e-9
    atom_spin: float = 1.0
    back_action: bool = True
    scatter_order: str = "after"
    initial_variance: str = "css"
    theta: tuple = tuple(np.linspace(0, np.pi, 361)[1:].tolist())
    n_light: tuple = tuple(np.geomspace(1e7, 5e9, 25).tolist())
    n_atoms_grid: tuple = (0.5e5, 2e5, 5e5)
    mu: tuple = ()
    k: tuple = ()
    n_list: tuple = (3, 5, 7, 9)
    theta_protocol: float = float(np.pi / 2)
    seed: int = 0
    samples: int = 10000
    output: str = ""

    def __post_init__(self):
        for name in ("n_atoms", "n_photons", "atom_spin"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.coupling_g < 0 or self.scattering_eta < 0:
            raise ValueError("coupling_g and scattering_eta must be non-negative")
        for name in ("theta", "n_light", "n_atoms_grid", "n_list"):
            if len(getattr(self, name)) == 0:
                raise ValueError(f"grid {name} is empty")
        if any(v <= 0 for v in self.n_light) or any(v <= 0 for v in self.n_atoms_grid):
            raise ValueError("particle-number grids must be positive")
        if any(int(n) != n or n < 2 for n in self.n_list):
            raise ValueError("n_list entries must be integers >= 2")

    def gauss_params(self, **over):
        from .gaussian import GaussParams
        kw = dict(n_atoms=self.n_atoms, n_photons=self.n_photons, coupling_g=self.coupling_g,
                  scattering_eta=self.scattering_eta, atom_spin=self.atom_spin,
                  back_action=self.back_action, scatter_order=self.scatter_order,
                  initial_variance=self.initial_variance)
        kw.update(over)
        return GaussParams(**kw)

    def canonical(self):
        """Stable text form used for hashing."""
        parts = []
        for f in fields(self):
            if f.name == "output":
                continue
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = ",".join(repr(float(x)) for x in v)
            parts.append(f"{f.name}={v!r}" if not isinstance(v, str) else f"{f.name}={v}")
        return "\n".join(parts)

    def digest(self):
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]


_CONVERT = {
    "n_atoms": float, "n_photons": float, "coupling_g": float, "scattering_eta": float,
    "atom_spin": float, "back_action": _bool, "scatter_order": str, "initial_variance": str,
    "theta": _grid, "n_light": _grid, "n_atoms_grid": _grid, "mu": _grid,
    "k": lambda s: tuple(int(x) for x in _floats(s)),
    "n_list": lambda s: tuple(int(x) for x in _floats(s)),
    "theta_protocol": float, "seed": int, "samples": int, "output": str,
}


def config_from_kv(values, base=None, source="<config>", lines=None):
    """Build a RunConfig from string values, on top of base."""
    kw = {}
    for key, raw in values.items():
        where = f"{source}:{lines[key]}" if lines and key in lines else source
        if key not in _CONVERT:
            raise InputError(f"{where}: unknown key {key!r}")
        try:
            kw[key] = _CONVERT[key](raw)
        except (ValueError, TypeError):
            raise InputError(f"{where}: bad value for {key}: {raw!r}") from None
    base = base or RunConfig()
    try:
        return RunConfig(**{**{f.name: getattr(base, f.name) for f in fields(base)}, **kw})
    except ValueError as e:
        raise InputError(f"{source}: {e}") from None


def read_config(text, source="<config>", base=None):
    kv = parse_kv(text, source)
    return config_from_kv({k: v for k, (v, _) in kv.items()}, base, source,
                          {k: n for k, (_, n) in kv.items()})


def write_csv(columns, rows, config=None, extra=None):
    """CSV text with a config-hash comment line and a header row.

    Floats are written with repr, so identical inputs give identical bytes.
    """
    buf = _io.StringIO()
    digest = config.digest() if config is not None else "none"
    buf.write(f"# config-hash: {digest}\n")
    for line in extra or ():
        buf.write(f"# {line}\n")
    buf.write(",".join(columns) + "\n")
    for row in rows:
        buf.write(",".join(_cell(v) for v in row) + "\n")
    return buf.getvalue()


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)
