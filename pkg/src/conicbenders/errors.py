"""Exception types shared across the package."""


class InputError(ValueError):
    """Malformed or inconsistent input (dimensions, points outside the box, ...)."""


class PreconditionError(InputError):
    """A call was made with arguments that break a documented precondition."""


class GridDimensionError(InputError):
    """Grid oracles refuse problems whose x-dimension makes enumeration blow up."""


class SubproblemBreakdown(RuntimeError):
    """The continuous subsolver could not produce a trustworthy answer."""


class MultiplierRadiusExceeded(SubproblemBreakdown):
    """Dual iterates ran into the multiplier radius; usually a Slater failure."""

    def __init__(self, y, norm, radius):
        self.y = y
        self.norm = norm
        self.radius = radius
        super().__init__(
            f"MultiplierRadiusExceeded at y={[float(v) for v in y]}: |u|={norm:.6g} >= R={radius:.6g}"
        )


class MasterInfeasible(RuntimeError):
    """Every discrete point is cut off by some accumulated feasibility cut."""
