"""Batch front end: configuration files, five commands, artifact emission.

Commands
--------
``check``      sufficient-condition verdicts for a configuration
``reference``  semi-analytic reference roots (exterior disk, Neumann)
``solve``      mesh -> assembly -> eigensolver pipeline, spurious filter,
               CSV + JSON + SVG artifacts
``compare``    nearest-neighbor match of a computed spectrum against a
               reference table
``damping``    measured far-field decay rates along rays vs the
               guaranteed bound

Exit codes: 0 success; 2 condition or hypothesis violation; 3 incomplete
root search; 4 unmatched comparison; 64 configuration error (also used
for command-line usage errors).

Configuration files are flat INI text with decimal numbers only.  The
scaling strength is a single complex literal such as ``1+0.5i`` (``8i``
is accepted for ``0+8i``), or a pair ``c`` / ``omega_dependent = true``
for the frequency-dependent family, which is evaluated at the solver
shift's real part (at ``--omega`` for the damping command).  Every
command is deterministic given a configuration; JSON artifacts embed the
SHA-256 hash of the exact configuration bytes.
"""

from __future__ import annotations

import argparse
import configparser
import gc
import hashlib
import json
import sys
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .analytic import (
    damping_rate,
    find_disk_neumann_references,
    read_reference_csv,
    write_reference_csv,
)
from .eig import (
    Spectrum,
    read_spectrum_csv,
    shift_invert_arnoldi,
    spurious_filter,
    write_spectrum_csv,
    write_spectrum_json,
)
from .errors import (
    AssemblyError,
    ConfigError,
    DefinitenessError,
    DomainError,
    GenerationError,
    GeometryError,
    IncompleteSearchError,
    PreconditionError,
    SingularMatrixError,
    ValidationError,
)
from .fem import CondensedShiftSolver, FunctionSpace, assemble
from .media import Medium, RangeBox
from .mesh import DiskObstacle, EllipseObstacle, Geometry, generate, refine
from .scaling import PROFILE_KINDS, admissible, gamma_of_omega, limits, min_stabilizing_c

EXIT_OK = 0
EXIT_CONDITION = 2
EXIT_INCOMPLETE = 3
EXIT_UNMATCHED = 4
EXIT_FAILURE = 1
EXIT_CONFIG = 64

FORMATS = ("csv", "json", "svg")

_PIPELINE_ERRORS = (ValidationError, DomainError, PreconditionError,
                    GeometryError, GenerationError, AssemblyError,
                    SingularMatrixError)


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

def parse_complex_literal(text: str) -> complex:
    """Complex literal ``a``, ``bi``, or ``a+bi`` (``j`` also accepted)."""
    s = str(text).strip().replace(" ", "")
    if not s:
        raise ConfigError("empty complex literal")
    try:
        if s[-1] in "ij":
            body = s[:-1]
            re_part, im_part = "", body
            for pos in range(len(body) - 1, 0, -1):
                if body[pos] in "+-" and body[pos - 1] not in "eE":
                    re_part, im_part = body[:pos], body[pos:]
                    break
            if im_part in ("", "+"):
                imag = 1.0
            elif im_part == "-":
                imag = -1.0
            else:
                imag = float(im_part)
            return complex(float(re_part) if re_part else 0.0, imag)
        return complex(float(s), 0.0)
    except ValueError:
        raise ConfigError(
            f"invalid complex literal {text!r} (expected forms: 1.5, 8i, 1+0.5i)"
        ) from None


def _parse_bool(text: str) -> bool:
    low = str(text).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"invalid boolean {text!r}")


_REQUIRED = object()


class _Reader:
    """configparser wrapper that turns every failure into ConfigError
    with section/key diagnostics."""

    def __init__(self, path):
        self.path = str(path)
        parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
        try:
            with open(path, "r", encoding="utf-8") as fh:
                parser.read_file(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read configuration {path!r}: {exc}") from None
        except configparser.Error as exc:
            raise ConfigError(f"malformed configuration: {exc}") from None
        self.parser = parser

    def get(self, section, key, cast, default=_REQUIRED):
        raw = self.parser.get(section, key, fallback=None) \
            if self.parser.has_section(section) else None
        if raw is None:
            if default is _REQUIRED:
                if not self.parser.has_section(section):
                    raise ConfigError(
                        f"{self.path}: missing section [{section}]")
                raise ConfigError(
                    f"{self.path}: [{section}] is missing required key {key!r}")
            return default
        try:
            return cast(raw)
        except ConfigError as exc:
            raise ConfigError(f"[{section}] {key}: {exc}") from None
        except (TypeError, ValueError):
            raise ConfigError(
                f"[{section}] {key} = {raw!r}: not a valid "
                f"{getattr(cast, '__name__', 'value')}") from None

    def has(self, section, key):
        return self.parser.has_section(section) and self.parser.has_option(section, key)


@dataclass(frozen=True)
class RunConfig:
    """Validated run description; every physical constraint is checked
    at parse time, before any computation starts."""

    path: str
    sha256: str
    geometry: Geometry
    medium: Medium
    profile_kind: str
    gamma: complex | None
    c: float | None
    omega_dependent: bool
    profile_options: tuple
    hmax: float
    p: int
    q: int
    refinements: int
    shift: complex
    k: int
    krylov_dim: int | None
    stretch: float
    seed: int
    out_dir: str
    formats: tuple
    reference_csv: str | None
    ref_box: RangeBox
    ref_max_order: int

    def build_profile(self, omega_hint=None):
        """Scaling profile for this run; frequency-dependent strengths
        are evaluated at ``omega_hint`` (default: the shift's real part)."""
        gamma = self.gamma
        if self.omega_dependent:
            omega = self.shift.real if omega_hint is None else float(omega_hint)
            gamma = gamma_of_omega(self.c, omega)
        cls = PROFILE_KINDS[self.profile_kind]
        return cls(r1=self.geometry.r1, gamma=gamma,
                   **dict(self.profile_options))

    def stretched_geometry(self, scale: float) -> Geometry:
        return Geometry(self.geometry.obstacle, self.geometry.r1,
                        self.geometry.layer_width * float(scale))


def parse_config(path) -> RunConfig:
    """Read and fully validate a configuration file."""
    reader = _Reader(path)
    digest = hashlib.sha256(Path(path).read_bytes()).hexdigest()

    kind = reader.get("geometry", "obstacle", str).strip().lower()
    if kind == "disk":
        obstacle = DiskObstacle(reader.get("geometry", "radius", float))
    elif kind == "ellipse":
        obstacle = EllipseObstacle(reader.get("geometry", "semi_axis_x", float),
                                   reader.get("geometry", "semi_axis_y", float))
    else:
        raise ConfigError(
            f"[geometry] obstacle must be 'disk' or 'ellipse', got {kind!r}")
    try:
        geometry = Geometry(obstacle,
                            reader.get("geometry", "r1", float),
                            reader.get("geometry", "layer_width", float))
    except GeometryError as exc:
        raise ConfigError(f"[geometry] {exc}") from None

    sigma = np.array(
        [[reader.get("medium", "sigma_xx", float),
          reader.get("medium", "sigma_xy", float, default=0.0)],
         [reader.get("medium", "sigma_xy", float, default=0.0),
          reader.get("medium", "sigma_yy", float)]])
    try:
        medium = Medium(sigma)
    except (ValidationError, DefinitenessError) as exc:
        raise ConfigError(f"[medium] {exc}") from None

    profile_kind = reader.get("scaling", "profile", str).strip().lower()
    if profile_kind not in PROFILE_KINDS:
        raise ConfigError(
            f"[scaling] profile must be one of {sorted(PROFILE_KINDS)}, "
            f"got {profile_kind!r}")
    has_gamma = reader.has("scaling", "gamma")
    has_c = reader.has("scaling", "c")
    omega_dependent = reader.get("scaling", "omega_dependent", _parse_bool,
                                 default=False)
    if has_gamma == has_c:
        raise ConfigError(
            "[scaling] exactly one of 'gamma' and 'c' must be given")
    if omega_dependent and not has_c:
        raise ConfigError("[scaling] omega_dependent requires the 'c' key")
    if has_c and not omega_dependent:
        raise ConfigError(
            "[scaling] the 'c' key requires omega_dependent = true")
    gamma = reader.get("scaling", "gamma", parse_complex_literal) \
        if has_gamma else None
    c = reader.get("scaling", "c", float) if has_c else None

    options = []
    if profile_kind == "constant-after-ramp":
        options = [("width", reader.get("scaling", "width", float, default=1.0)),
                   ("amax", reader.get("scaling", "amax", float, default=1.0))]
    elif profile_kind == "smoothed-polynomial":
        options = [("exponent", reader.get("scaling", "exponent", float, default=2.0)),
                   ("amax", reader.get("scaling", "amax", float, default=1.0))]

    hmax = reader.get("discretization", "hmax", float)
    if not hmax > 0.0:
        raise ConfigError(f"[discretization] hmax must be positive, got {hmax:g}")
    p = reader.get("discretization", "p", int)
    if not 1 <= p <= 6:
        raise ConfigError(f"[discretization] p must lie in [1, 6], got {p}")
    q = reader.get("discretization", "q", int, default=p)
    if not 1 <= q <= 6:
        raise ConfigError(f"[discretization] q must lie in [1, 6], got {q}")
    refinements = reader.get("discretization", "refinements", int, default=0)
    if not 0 <= refinements <= 6:
        raise ConfigError(
            f"[discretization] refinements must lie in [0, 6], got {refinements}")

    shift = complex(reader.get("solver", "shift_re", float),
                    reader.get("solver", "shift_im", float))
    k = reader.get("solver", "k", int)
    if k < 1:
        raise ConfigError(f"[solver] k must be at least 1, got {k}")
    krylov_dim = reader.get("solver", "krylov_dim", int, default=None)
    if krylov_dim is not None and krylov_dim < 2 * k + 10:
        raise ConfigError(
            f"[solver] krylov_dim must be at least 2k+10 = {2 * k + 10}, "
            f"got {krylov_dim}")
    stretch = reader.get("solver", "stretch", float, default=1.5)
    if not stretch >= 1.0:
        raise ConfigError(f"[solver] stretch must be >= 1, got {stretch:g}")
    seed = reader.get("solver", "seed", int, default=0)

    out_dir = reader.get("output", "directory", str, default="out").strip()
    raw_formats = reader.get("output", "formats", str, default=",".join(FORMATS))
    formats = tuple(f.strip().lower() for f in raw_formats.split(",") if f.strip())
    unknown = [f for f in formats if f not in FORMATS]
    if unknown:
        raise ConfigError(
            f"[output] unknown formats {unknown}; supported: {list(FORMATS)}")
    reference_csv = reader.get("output", "reference", str, default=None)

    try:
        ref_box = RangeBox(reader.get("reference", "re_lo", float, default=0.1),
                           reader.get("reference", "re_hi", float, default=8.0),
                           reader.get("reference", "im_lo", float, default=-3.0),
                           reader.get("reference", "im_hi", float, default=0.0))
    except ValidationError as exc:
        raise ConfigError(f"[reference] {exc}") from None
    ref_max_order = reader.get("reference", "max_order", int, default=6)
    if ref_max_order < 0:
        raise ConfigError(
            f"[reference] max_order must be >= 0, got {ref_max_order}")

    config = RunConfig(
        path=str(path), sha256=digest, geometry=geometry, medium=medium,
        profile_kind=profile_kind, gamma=gamma, c=c,
        omega_dependent=omega_dependent, profile_options=tuple(options),
        hmax=hmax, p=p, q=q, refinements=refinements, shift=shift, k=k,
        krylov_dim=krylov_dim, stretch=stretch, seed=seed, out_dir=out_dir,
        formats=formats, reference_csv=reference_csv, ref_box=ref_box,
        ref_max_order=ref_max_order)
    try:
        config.build_profile()
    except (ValidationError, DomainError) as exc:
        raise ConfigError(f"[scaling] {exc}") from None
    return config


# ---------------------------------------------------------------------------
# SVG scatter
# ---------------------------------------------------------------------------

def render_spectrum_svg(spectrum: Spectrum, references=(),
                        title="computed spectrum") -> str:
    """Standalone SVG scatter of eigenvalues in the complex plane.

    Non-spurious eigenvalues are filled disks, spurious ones crosses,
    ambiguous matches open circles; reference roots overlay as plus
    markers.  No plotting library is involved, so the byte stream is a
    pure function of the inputs.
    """
    width, height = 720.0, 540.0
    left, right, top, bottom = 70.0, 18.0, 40.0, 52.0

    points = [complex(w) for w in spectrum.omegas]
    points.extend(complex(z) for z in references)
    if points:
        re_lo = min(z.real for z in points)
        re_hi = max(z.real for z in points)
        im_lo = min(z.imag for z in points)
        im_hi = max(z.imag for z in points)
    else:
        re_lo, re_hi, im_lo, im_hi = -1.0, 1.0, -1.0, 1.0
    pad_re = 0.08 * ((re_hi - re_lo) or 1.0)
    pad_im = 0.08 * ((im_hi - im_lo) or 1.0)
    re_lo, re_hi = re_lo - pad_re, re_hi + pad_re
    im_lo, im_hi = im_lo - pad_im, im_hi + pad_im

    def sx(value):
        return left + (value - re_lo) / (re_hi - re_lo) * (width - left - right)

    def sy(value):
        return height - bottom - (value - im_lo) / (im_hi - im_lo) \
            * (height - top - bottom)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:g}" '
        f'height="{height:g}" viewBox="0 0 {width:g} {height:g}">',
        f'<rect width="{width:g}" height="{height:g}" fill="#ffffff"/>',
        f'<text x="{left:.2f}" y="24" font-family="monospace" '
        f'font-size="14" fill="#222222">{title}</text>',
    ]
    for value in np.linspace(re_lo, re_hi, 6):
        x = sx(value)
        out.append(f'<line x1="{x:.2f}" y1="{top:.2f}" x2="{x:.2f}" '
                   f'y2="{height - bottom:.2f}" stroke="#e0e0e0" stroke-width="1"/>')
        out.append(f'<text x="{x:.2f}" y="{height - bottom + 18:.2f}" '
                   f'font-family="monospace" font-size="11" fill="#444444" '
                   f'text-anchor="middle">{value:.3g}</text>')
    for value in np.linspace(im_lo, im_hi, 6):
        y = sy(value)
        out.append(f'<line x1="{left:.2f}" y1="{y:.2f}" '
                   f'x2="{width - right:.2f}" y2="{y:.2f}" '
                   f'stroke="#e0e0e0" stroke-width="1"/>')
        out.append(f'<text x="{left - 8:.2f}" y="{y + 4:.2f}" '
                   f'font-family="monospace" font-size="11" fill="#444444" '
                   f'text-anchor="end">{value:.3g}</text>')
    out.append(f'<rect x="{left:.2f}" y="{top:.2f}" '
               f'width="{width - left - right:.2f}" '
               f'height="{height - top - bottom:.2f}" fill="none" '
               f'stroke="#333333" stroke-width="1"/>')
    out.append(f'<text x="{(left + width - right) / 2:.2f}" '
               f'y="{height - 10:.2f}" font-family="monospace" font-size="13" '
               f'fill="#222222" text-anchor="middle">Re(omega)</text>')
    out.append(f'<text x="16" y="{(top + height - bottom) / 2:.2f}" '
               f'font-family="monospace" font-size="13" fill="#222222" '
               f'text-anchor="middle" transform="rotate(-90 16 '
               f'{(top + height - bottom) / 2:.2f})">Im(omega)</text>')

    for z in references:
        x, y = sx(z.real), sy(z.imag)
        out.append(f'<line x1="{x - 5:.2f}" y1="{y:.2f}" x2="{x + 5:.2f}" '
                   f'y2="{y:.2f}" stroke="#2c8a4b" stroke-width="1.6"/>')
        out.append(f'<line x1="{x:.2f}" y1="{y - 5:.2f}" x2="{x:.2f}" '
                   f'y2="{y + 5:.2f}" stroke="#2c8a4b" stroke-width="1.6"/>')
    for i, w in enumerate(spectrum.omegas):
        x, y = sx(w.real), sy(w.imag)
        if spectrum.spurious[i]:
            out.append(f'<line x1="{x - 4:.2f}" y1="{y - 4:.2f}" '
                       f'x2="{x + 4:.2f}" y2="{y + 4:.2f}" '
                       f'stroke="#c0392b" stroke-width="1.8"/>')
            out.append(f'<line x1="{x - 4:.2f}" y1="{y + 4:.2f}" '
                       f'x2="{x + 4:.2f}" y2="{y - 4:.2f}" '
                       f'stroke="#c0392b" stroke-width="1.8"/>')
        elif spectrum.ambiguous[i]:
            out.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="4.5" '
                       f'fill="none" stroke="#8e6bbf" stroke-width="1.6"/>')
        else:
            out.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="4" '
                       f'fill="#1f6fb2"/>')

    legend = [("resonance", "disk"), ("spurious", "cross"),
              ("ambiguous", "open")]
    if len(references):
        legend.append(("reference", "plus"))
    ly = top + 14.0
    lx = width - right - 128.0
    for label, shape in legend:
        cx, cy = lx + 8.0, ly - 4.0
        if shape == "disk":
            out.append(f'<circle cx="{cx:.2f}" cy="{cy:.2f}" r="4" fill="#1f6fb2"/>')
        elif shape == "cross":
            out.append(f'<line x1="{cx - 4:.2f}" y1="{cy - 4:.2f}" '
                       f'x2="{cx + 4:.2f}" y2="{cy + 4:.2f}" '
                       f'stroke="#c0392b" stroke-width="1.8"/>')
            out.append(f'<line x1="{cx - 4:.2f}" y1="{cy + 4:.2f}" '
                       f'x2="{cx + 4:.2f}" y2="{cy - 4:.2f}" '
                       f'stroke="#c0392b" stroke-width="1.8"/>')
        elif shape == "open":
            out.append(f'<circle cx="{cx:.2f}" cy="{cy:.2f}" r="4.5" '
                       f'fill="none" stroke="#8e6bbf" stroke-width="1.6"/>')
        else:
            out.append(f'<line x1="{cx - 5:.2f}" y1="{cy:.2f}" '
                       f'x2="{cx + 5:.2f}" y2="{cy:.2f}" '
                       f'stroke="#2c8a4b" stroke-width="1.6"/>')
            out.append(f'<line x1="{cx:.2f}" y1="{cy - 5:.2f}" '
                       f'x2="{cx:.2f}" y2="{cy + 5:.2f}" '
                       f'stroke="#2c8a4b" stroke-width="1.6"/>')
        out.append(f'<text x="{lx + 20:.2f}" y="{ly:.2f}" '
                   f'font-family="monospace" font-size="12" '
                   f'fill="#222222">{label}</text>')
        ly += 18.0
    out.append("</svg>")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _out_dir(config: RunConfig | None, args) -> Path:
    directory = getattr(args, "out", None) or (config.out_dir if config else "out")
    path = Path(directory)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_json(path: Path, document: dict):
    path.write_text(json.dumps(document, indent=2, sort_keys=True) + "\n",
                    encoding="ascii")


def cmd_check(args) -> int:
    config = parse_config(args.config)
    profile = config.build_profile()
    report = admissible(profile, config.medium, config.geometry.obstacle.extent)
    min_c = min_stabilizing_c(config.medium)
    flags = [
        ("profile-assumptions", report.profile_ok, ""),
        ("separation", report.separation_ok,
         f"(r1 = {config.geometry.r1:g}, required > "
         f"{config.medium.sigma_max / config.medium.sigma_min * config.geometry.obstacle.extent:g})"),
        ("coercivity", report.coercivity_ok,
         f"(cos(tau*) = {report.cos_tau_star:.6g}, threshold = {report.threshold:.6g})"),
        ("far-field-decay", report.far_field_ok, ""),
    ]
    for name, ok, detail in flags:
        verdict = "PASS" if ok else "FAIL"
        print(f"check: {name}: {verdict} {detail}".rstrip())
    print(f"check: tau* = {report.tau_star:.9g}, psi* = {report.psi_star:.9g}, "
          f"min stabilizing c = {min_c:.9g}")
    for message in report.messages:
        print(f"check: note: {message}")
    _write_json(_out_dir(config, args) / "check.json", {
        "command": "check",
        "config_sha256": config.sha256,
        "flags": {name: bool(ok) for name, ok, _ in flags},
        "tau_star": report.tau_star,
        "psi_star": report.psi_star,
        "cos_tau_star": report.cos_tau_star,
        "threshold": report.threshold,
        "min_stabilizing_c": min_c,
        "all_ok": report.all_ok,
    })
    if report.all_ok:
        print("check: PASS")
        return EXIT_OK
    print("check: FAIL (sufficient conditions are not all met; "
          "the problem may still be solvable)")
    return EXIT_CONDITION


def cmd_reference(args) -> int:
    config = parse_config(args.config)
    out = _out_dir(config, args)
    try:
        refs = find_disk_neumann_references(config.ref_max_order, config.ref_box)
    except IncompleteSearchError as exc:
        print(f"reference: incomplete search: {exc}", file=sys.stderr)
        return EXIT_INCOMPLETE
    except DomainError as exc:
        print(f"config error: [reference] {exc}", file=sys.stderr)
        return EXIT_CONFIG
    path = out / "reference.csv"
    write_reference_csv(refs, path)
    _write_json(out / "reference.json", {
        "command": "reference",
        "config_sha256": config.sha256,
        "count": len(refs),
        "max_order": config.ref_max_order,
        "box": {"re_lo": config.ref_box.re_lo, "re_hi": config.ref_box.re_hi,
                "im_lo": config.ref_box.im_lo, "im_hi": config.ref_box.im_hi},
    })
    print(f"reference: wrote {len(refs)} roots to {path}")
    return EXIT_OK


def _solve_once(config: RunConfig, seed: int, layer_scale: float = 1.0,
                slim: bool = False):
    geometry = config.geometry if layer_scale == 1.0 \
        else config.stretched_geometry(layer_scale)
    mesh = generate(geometry, config.hmax, config.q)
    for _ in range(config.refinements):
        mesh = refine(mesh)
    space = FunctionSpace(mesh, config.p)
    profile = config.build_profile()
    # The condensed factorization runs before assembly so its peak
    # footprint does not stack on top of the stored pencil.
    inner = CondensedShiftSolver(space, profile, config.medium,
                                 config.shift ** 2)
    pencil = assemble(space, profile, config.medium)
    spectrum = shift_invert_arnoldi(
        pencil, config.shift ** 2, config.k, krylov_dim=config.krylov_dim,
        d0=limits(profile, config.medium).d0, seed=seed, inner=inner)
    if slim:
        # Eigenvalues only; the comparison run's vectors, mesh, and
        # pencil are dead weight once the movement test has partners.
        slim_spectrum = replace(
            spectrum, vectors=np.zeros((0, len(spectrum)), dtype=complex))
        return slim_spectrum, None, None
    return spectrum, mesh, pencil


def cmd_solve(args) -> int:
    config = parse_config(args.config)
    seed = config.seed if args.seed is None else args.seed
    out = _out_dir(config, args)
    stage = "mesh"
    try:
        stage = "solve"
        # The stretched comparison runs first: it is the larger of the
        # two problems, and solving it before the base pencil exists
        # keeps the peak footprint to one factorization at a time.
        stretched = _solve_once(config, seed, layer_scale=config.stretch,
                                slim=True)[0]
        gc.collect()
        spectrum, mesh, pencil = _solve_once(config, seed)
        print(f"solve: {mesh.num_triangles} triangles (q={config.q}), "
              f"{pencil.size} dofs, {len(spectrum)} eigenvalues near "
              f"shift {config.shift:g}")
        stage = "spurious-filter"
        spectrum = spurious_filter(
            lambda s: stretched, spectrum, config.stretch)
    except _PIPELINE_ERRORS as exc:
        print(f"solve: error at stage {stage}: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    n_spurious = int(np.count_nonzero(spectrum.spurious))
    n_ambiguous = int(np.count_nonzero(spectrum.ambiguous))
    print(f"solve: spurious filter at stretch {config.stretch:g}: "
          f"{n_spurious} spurious, {n_ambiguous} ambiguous")

    references = []
    if config.reference_csv:
        references = [ref.root for ref in read_reference_csv(config.reference_csv)]
    written = []
    if "csv" in config.formats:
        write_spectrum_csv(spectrum, out / "spectrum.csv")
        written.append(str(out / "spectrum.csv"))
    if "json" in config.formats:
        write_spectrum_json(spectrum, out / "spectrum.json", extra={
            "command": "solve",
            "config_sha256": config.sha256,
            "triangles": int(mesh.num_triangles),
            "dofs": int(pencil.size),
            "layer_stretch": config.stretch,
        })
        written.append(str(out / "spectrum.json"))
    if "svg" in config.formats:
        title = (f"spectrum near shift {config.shift:g} "
                 f"({config.profile_kind} scaling)")
        (out / "spectrum.svg").write_text(
            render_spectrum_svg(spectrum, references, title=title),
            encoding="ascii")
        written.append(str(out / "spectrum.svg"))
    print(f"solve: wrote {' '.join(written)}")
    return EXIT_OK


def _read_points_any(path):
    """Complex values from either CSV dialect (spectrum or reference);
    spurious-flagged spectrum rows are excluded."""
    try:
        with open(path, "r", encoding="ascii") as fh:
            header = fh.readline().strip()
    except OSError as exc:
        raise ConfigError(f"cannot read {path!r}: {exc}") from None
    if header.startswith("re_omega"):
        omegas, _, _, spurious = read_spectrum_csv(path)
        return [complex(w) for w in omegas[~spurious]]
    try:
        return [ref.root for ref in read_reference_csv(path)]
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def cmd_compare(args) -> int:
    computed = _read_points_any(args.computed)
    references = sorted(_read_points_any(args.reference), key=abs)
    count = len(references) if args.count is None else max(args.count, 0)
    count = min(count, len(references))
    tolerance = args.tolerance
    all_ok = True
    matched = 0
    for z in references[:count]:
        if computed:
            nearest = min(computed, key=lambda w: abs(w - z))
            rel = abs(nearest - z) / max(abs(z), 1e-300)
            ok = rel <= tolerance
            status = "OK" if ok else "FAR"
            print(f"compare: ref {z.real:+.9g}{z.imag:+.9g}i  nearest "
                  f"{nearest.real:+.9g}{nearest.imag:+.9g}i  rel_err {rel:.3e}  {status}")
        else:
            ok = False
            print(f"compare: ref {z.real:+.9g}{z.imag:+.9g}i  UNMATCHED "
                  "(no non-spurious computed values)")
        matched += ok
        all_ok &= ok
    print(f"compare: {matched}/{count} references matched within "
          f"{tolerance:g} relative")
    return EXIT_OK if all_ok else EXIT_UNMATCHED


def cmd_damping(args) -> int:
    config = parse_config(args.config)
    omega = args.omega
    rays = args.rays
    if rays < 0:
        raise ConfigError(f"--rays must be >= 0, got {rays}")
    profile = config.build_profile(omega_hint=omega)
    rows = []
    try:
        for i in range(rays):
            angle = 2.0 * np.pi * i / rays
            direction = (float(np.cos(angle)), float(np.sin(angle)))
            measured, bound = damping_rate(omega, profile, config.medium,
                                           direction)
            rows.append({"angle": angle, "measured": measured, "bound": bound})
            print(f"damping: angle {np.degrees(angle):7.2f} deg  "
                  f"measured {measured:.6f}  bound {bound:.6f}")
    except PreconditionError as exc:
        print(f"damping: hypothesis violation: {exc}", file=sys.stderr)
        return EXIT_CONDITION
    _write_json(_out_dir(config, args) / "damping.json", {
        "command": "damping",
        "config_sha256": config.sha256,
        "omega": omega,
        "rays": rows,
    })
    print(f"damping: {len(rows)} rays evaluated at omega = {omega:g}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    """argparse with usage errors mapped onto the config-error exit code."""

    def error(self, message):
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="radpml",
                     description="resonances of scaled exterior problems")
    sub = parser.add_subparsers(dest="command", required=True)

    p_check = sub.add_parser("check", help="sufficient-condition report")
    p_check.add_argument("config")
    p_check.add_argument("--out", help="output directory override")
    p_check.set_defaults(func=cmd_check)

    p_ref = sub.add_parser("reference", help="semi-analytic reference roots")
    p_ref.add_argument("config")
    p_ref.add_argument("--out", help="output directory override")
    p_ref.set_defaults(func=cmd_reference)

    p_solve = sub.add_parser("solve", help="run the full pipeline")
    p_solve.add_argument("config")
    p_solve.add_argument("--out", help="output directory override")
    p_solve.add_argument("--seed", type=int, default=None,
                         help="override the configured solver seed")
    p_solve.set_defaults(func=cmd_solve)

    p_cmp = sub.add_parser("compare", help="match computed vs reference CSV")
    p_cmp.add_argument("computed")
    p_cmp.add_argument("reference")
    p_cmp.add_argument("--tolerance", type=float, default=1e-2)
    p_cmp.add_argument("--count", type=int, default=None,
                       help="number of leading references that must match "
                            "(default: all)")
    p_cmp.set_defaults(func=cmd_compare)

    p_damp = sub.add_parser("damping", help="ray-wise decay rates vs bound")
    p_damp.add_argument("config")
    p_damp.add_argument("--omega", type=float, default=1.0)
    p_damp.add_argument("--rays", type=int, default=8)
    p_damp.add_argument("--out", help="output directory override")
    p_damp.set_defaults(func=cmd_damping)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def console_main():
    sys.exit(main())


if __name__ == "__main__":
    console_main()
