"""Planted patch layouts for synthetic scenes.

A layout is a set of half-open rectangles in patch units, each tagged with a role and
a slot. Cells covered by no rectangle are background. Text form, one rectangle per line:

    # role[:slot] row0 col0 row1 col1
    object_part:1 6 6 8 9
    human 2 9 12 13
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from locate.core.enums import PatchRoleEnum
from locate.shared.exceptions import ConfigException


@dataclass(frozen=True, slots=True)
class PlantedRegion:
    """Rectangle [row0, row1) x [col0, col1) with one role."""

    role: PatchRoleEnum
    row0: int
    col0: int
    row1: int
    col1: int
    slot: int = 0

    def mask(self, grid: tuple[int, int]) -> np.ndarray:
        cells = np.zeros(grid, dtype=bool)
        cells[self.row0 : self.row1, self.col0 : self.col1] = True
        return cells


@dataclass(frozen=True, slots=True)
class PlantedLayout:
    """Non-overlapping planted regions on an H x W patch grid."""

    grid: tuple[int, int]
    regions: tuple[PlantedRegion, ...]

    def __post_init__(self) -> None:
        rows, cols = self.grid
        if rows < 1 or cols < 1:
            raise ConfigException(f"Layout grid must be positive, got {self.grid}")

        covered = np.zeros(self.grid, dtype=bool)
        for index, region in enumerate(self.regions):
            if region.role is PatchRoleEnum.BACKGROUND:
                raise ConfigException("Background is implicit and cannot be planted")
            inside_rows = 0 <= region.row0 < region.row1 <= rows
            inside_cols = 0 <= region.col0 < region.col1 <= cols
            if not (inside_rows and inside_cols):
                raise ConfigException(
                    f"Region {index} ({region.role}) is empty or outside grid {self.grid}",
                    details={"region": index},
                )
            if region.slot < 0:
                raise ConfigException(f"Region {index} has negative slot {region.slot}")
            cells = region.mask(self.grid)
            if np.any(covered & cells):
                raise ConfigException(
                    f"Region {index} ({region.role}) overlaps an earlier region",
                    details={"region": index},
                )
            covered |= cells

    def role_mask(self, role: PatchRoleEnum) -> np.ndarray:
        """Boolean [H, W] mask of cells carrying the given role."""
        if role is PatchRoleEnum.BACKGROUND:
            covered = np.zeros(self.grid, dtype=bool)
            for region in self.regions:
                covered |= region.mask(self.grid)
            return ~covered
        cells = np.zeros(self.grid, dtype=bool)
        for region in self.regions:
            if region.role is role:
                cells |= region.mask(self.grid)
        return cells

    def cell_roles(self) -> list[list[tuple[PatchRoleEnum, int]]]:
        """Row-major (role, slot) per cell."""
        rows, cols = self.grid
        roles = [[(PatchRoleEnum.BACKGROUND, 0) for _ in range(cols)] for _ in range(rows)]
        for region in self.regions:
            for row in range(region.row0, region.row1):
                for col in range(region.col0, region.col1):
                    roles[row][col] = (region.role, region.slot)
        return roles

    @classmethod
    def parse(cls, text: str, grid: tuple[int, int]) -> PlantedLayout:
        """Parse the rectangle text format."""
        regions: list[PlantedRegion] = []
        for line_number, raw_line in enumerate(text.splitlines(), start=1):
            line = raw_line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 5:
                raise ConfigException(
                    f"Layout line {line_number}: expected 'role row0 col0 row1 col1'",
                    details={"line": raw_line},
                )
            role_token, _, slot_token = parts[0].partition(":")
            try:
                role = PatchRoleEnum(role_token.strip().lower())
                slot = int(slot_token) if slot_token else 0
                row0, col0, row1, col1 = (int(item) for item in parts[1:])
            except ValueError as exc:
                raise ConfigException(
                    f"Layout line {line_number}: {exc}",
                    details={"line": raw_line},
                ) from exc
            regions.append(
                PlantedRegion(role=role, row0=row0, col0=col0, row1=row1, col1=col1, slot=slot),
            )
        return cls(grid=grid, regions=tuple(regions))

    @classmethod
    def from_file(cls, path: Path, grid: tuple[int, int]) -> PlantedLayout:
        if not path.is_file():
            raise ConfigException(f"Layout file not found: {path}")
        return cls.parse(path.read_text(encoding="utf-8"), grid)
