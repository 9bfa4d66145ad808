"""Per-generation record shared by both simulators."""

from dataclasses import dataclass, field
from typing import List, Optional


class ExplosionCapError(RuntimeError):
    """Population cap exceeded; carries the trajectory simulated so far."""

    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


@dataclass
class Trajectory:
    """Z_n (untraced, when known), Z^CT_n, seeds born R_n(0), and extinction status."""

    z: List[Optional[int]] = field(default_factory=list)
    zct: List[int] = field(default_factory=list)
    r0: List[int] = field(default_factory=list)
    capped: bool = False

    def record(self, z: Optional[int], zct: int, r0: int):
        self.z.append(z)
        self.zct.append(int(zct))
        self.r0.append(int(r0))

    @property
    def generations(self) -> int:
        return len(self.zct)

    @property
    def extinction_time(self) -> Optional[int]:
        for n, value in enumerate(self.zct):
            if value == 0:
                return n
        return None

    @property
    def extinct(self) -> bool:
        return self.extinction_time is not None

    def rows(self):
        """CSV rows `n,Z,ZCT,R0`; Z is blank where the untraced size was not tracked."""
        for n, (z, zct, r0) in enumerate(zip(self.z, self.zct, self.r0)):
            yield {"n": n, "Z": "" if z is None else z, "ZCT": zct, "R0": r0}
