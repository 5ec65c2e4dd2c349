class StepFailure(RuntimeError):
    """A time step could not be completed; the caller may retry with a smaller dt."""


class DensityPositivityError(StepFailure):
    def __init__(self, min_density: float):
        super().__init__(f"updated density is not positive (min = {min_density:.6g})")
        self.min_density = min_density


class PicardDivergenceError(StepFailure):
    def __init__(self, defect: float, iterations: int):
        super().__init__(f"Picard iteration did not converge in {iterations} iterations "
                         f"(defect = {defect:.6g})")
        self.defect = defect
        self.iterations = iterations
