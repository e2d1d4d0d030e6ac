"""Square-lattice geometry: vertices, links, Gauss-law stars and oriented paths.

Coordinates are ``(col, row)`` with the origin at the lower-left corner.
Direction 1 points along +x (to the right), direction 2 along +y (up).
Vertices are indexed row-major: ``index = row * width + col``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, NamedTuple, Sequence


class Boundary(str, Enum):
    OPEN = "open"
    PERIODIC_X = "periodic-x"
    PERIODIC_Y = "periodic-y"
    TORUS = "torus"

    @property
    def periodic_x(self) -> bool:
        return self in (Boundary.PERIODIC_X, Boundary.TORUS)

    @property
    def periodic_y(self) -> bool:
        return self in (Boundary.PERIODIC_Y, Boundary.TORUS)


class LatticeError(ValueError):
    """Raised for coordinates, links or paths that do not fit the lattice."""


Vertex = tuple  # (col, row)


class LinkId(NamedTuple):
    origin: tuple
    direction: int


class Step(NamedTuple):
    link: LinkId
    orientation: int  # +1 forward, -1 backward


@dataclass(frozen=True)
class LatticeGeometry:
    width: int
    height: int
    boundary: Boundary = Boundary.OPEN
    _links: tuple = field(init=False, repr=False, compare=False)
    _link_index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if int(self.width) != self.width or self.width < 1:
            raise LatticeError(f"width must be a positive integer, got {self.width!r}")
        if int(self.height) != self.height or self.height < 1:
            raise LatticeError(f"height must be a positive integer, got {self.height!r}")
        object.__setattr__(self, "boundary", Boundary(self.boundary))
        if self.boundary.periodic_x and self.width < 2:
            raise LatticeError("periodic x boundary needs width >= 2")
        if self.boundary.periodic_y and self.height < 2:
            raise LatticeError("periodic y boundary needs height >= 2")
        links = []
        for v in self.vertices():
            for d in (1, 2):
                if self._link_valid(v, d):
                    links.append(LinkId(v, d))
        object.__setattr__(self, "_links", tuple(links))
        object.__setattr__(self, "_link_index", {l: i for i, l in enumerate(links)})

    # -- vertices -------------------------------------------------------
    @property
    def n_vertices(self) -> int:
        return self.width * self.height

    def vertices(self) -> Iterator[tuple]:
        for row in range(self.height):
            for col in range(self.width):
                yield (col, row)

    def contains(self, x) -> bool:
        return 0 <= x[0] < self.width and 0 <= x[1] < self.height

    def check_vertex(self, x) -> tuple:
        x = (int(x[0]), int(x[1]))
        if not self.contains(x):
            raise LatticeError(f"vertex {x} outside {self.width}x{self.height} lattice")
        return x

    def vertex_index(self, x) -> int:
        x = self.check_vertex(x)
        return x[1] * self.width + x[0]

    def vertex_at(self, index: int) -> tuple:
        if not 0 <= index < self.n_vertices:
            raise LatticeError(f"vertex index {index} out of range")
        return (index % self.width, index // self.width)

    def shift(self, x, direction: int, amount: int = 1):
        """Neighbour of ``x`` along ``direction``; None when it leaves an open edge."""
        col, row = x
        if direction == 1:
            col += amount
            if self.boundary.periodic_x:
                col %= self.width
        elif direction == 2:
            row += amount
            if self.boundary.periodic_y:
                row %= self.height
        else:
            raise LatticeError(f"direction must be 1 or 2, got {direction!r}")
        y = (col, row)
        return y if self.contains(y) else None

    # -- links ----------------------------------------------------------
    def _link_valid(self, x, direction) -> bool:
        return self.contains(x) and self.shift(x, direction) is not None

    @property
    def links(self) -> tuple:
        return self._links

    @property
    def n_links(self) -> int:
        return len(self._links)

    def link(self, x, direction: int) -> LinkId:
        lid = LinkId((int(x[0]), int(x[1])), int(direction))
        if lid not in self._link_index:
            raise LatticeError(f"link {lid} is not part of the lattice")
        return lid

    def has_link(self, x, direction: int) -> bool:
        return LinkId(tuple(x), direction) in self._link_index

    def link_index(self, link) -> int:
        try:
            return self._link_index[LinkId(tuple(link[0]), int(link[1]))]
        except KeyError:
            raise LatticeError(f"link {link} is not part of the lattice") from None

    def link_end(self, link) -> tuple:
        return self.shift(link[0], link[1])

    # -- staggering and Gauss stars ---------------------------------------
    def parity(self, x) -> int:
        x = self.check_vertex(x)
        return 1 if (x[0] + x[1]) % 2 == 0 else -1

    def star_links(self, x) -> list:
        """Links entering the Gauss law at ``x`` as ``(LinkId, sign)`` pairs.

        Outgoing links carry sign +1, ingoing ones -1; absent links are skipped.
        """
        x = self.check_vertex(x)
        out = []
        for d in (1, 2):
            if self._link_valid(x, d):
                out.append((LinkId(x, d), +1))
        for d in (1, 2):
            y = self.shift(x, d, -1)
            if y is not None and self._link_valid(y, d):
                out.append((LinkId(y, d), -1))
        return out

    def plaquettes(self) -> list:
        """Lower-left corners of all unit plaquettes whose four links exist."""
        out = []
        for x in self.vertices():
            right = self.shift(x, 1)
            up = self.shift(x, 2)
            if right is None or up is None:
                continue
            if (self._link_valid(x, 1) and self._link_valid(right, 2)
                    and self._link_valid(up, 1) and self._link_valid(x, 2)):
                out.append(x)
        return out

    def plaquette_links(self, x) -> list:
        """``(LinkId, sign)`` around the plaquette with corner ``x``, counterclockwise."""
        return list(self.rectangle_loop(x, 1, 1).steps)

    # -- paths ----------------------------------------------------------
    def rectangle_loop(self, corner, w: int, h: int) -> "OrientedPath":
        """Counterclockwise closed loop around a ``w x h`` rectangle."""
        corner = self.check_vertex(corner)
        if w < 1 or h < 1:
            raise LatticeError("rectangle sides must be >= 1")
        if self.boundary.periodic_x:
            fits_x = w < self.width
        else:
            fits_x = corner[0] + w <= self.width - 1
        if self.boundary.periodic_y:
            fits_y = h < self.height
        else:
            fits_y = corner[1] + h <= self.height - 1
        if not (fits_x and fits_y):
            raise LatticeError(
                f"{w}x{h} rectangle at {corner} does not fit the "
                f"{self.width}x{self.height} {self.boundary.value} lattice")
        moves = [(1, +1)] * w + [(2, +1)] * h + [(1, -1)] * w + [(2, -1)] * h
        return self.walk(corner, moves, closed=True)

    def walk(self, start, moves: Sequence, closed: bool = False) -> "OrientedPath":
        """Build a path from ``start`` following ``(direction, +1|-1)`` moves."""
        x = self.check_vertex(start)
        steps = []
        for direction, orientation in moves:
            if orientation == +1:
                lid = self.link(x, direction)
                x = self.link_end(lid)
            elif orientation == -1:
                y = self.shift(x, direction, -1)
                if y is None:
                    raise LatticeError(f"cannot step backwards along {direction} from {x}")
                lid = self.link(y, direction)
                x = y
            else:
                raise LatticeError("orientation must be +1 or -1")
            steps.append(Step(lid, orientation))
        return OrientedPath(self, tuple(steps), closed)


@dataclass(frozen=True)
class OrientedPath:
    geometry: LatticeGeometry
    steps: tuple
    closed: bool = False

    def __post_init__(self):
        geom = self.geometry
        prev_end = None
        for step in self.steps:
            link, orient = step
            geom.link_index(link)
            a, b = link[0], geom.link_end(link)
            start, end = (a, b) if orient == +1 else (b, a)
            if prev_end is not None and start != prev_end:
                raise LatticeError(f"path is not connected at {prev_end} -> {start}")
            prev_end = end
        if self.closed and self.steps and prev_end != self.start:
            raise LatticeError("closed path does not return to its start")

    def __len__(self):
        return len(self.steps)

    @property
    def start(self):
        if not self.steps:
            return None
        link, orient = self.steps[0]
        return link[0] if orient == +1 else self.geometry.link_end(link)

    @property
    def end(self):
        if not self.steps:
            return None
        link, orient = self.steps[-1]
        return self.geometry.link_end(link) if orient == +1 else link[0]

    def signed_link_indices(self) -> list:
        """``(link_index, orientation)`` pairs in path order."""
        return [(self.geometry.link_index(l), o) for l, o in self.steps]

    def phase(self, angles) -> float:
        """Total oriented angle sum of the path for per-link ``angles``."""
        return float(sum(o * angles[i] for i, o in self.signed_link_indices()))
