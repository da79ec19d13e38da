from dataclasses import asdict, dataclass

RECORD_COLUMNS = ("iteration", "reward", "best_reward", "observed_y", "wall_ms")


@dataclass(frozen=True)
class RunRecord:
    iteration: int
    reward: float
    best_reward: float
    observed_y: float
    wall_ms: float

    def as_row(self):
        return asdict(self)


class BestTracker:
    """Accumulates RunRecords, keeping the running maximum of the system reward."""

    def __init__(self):
        self.records = []
        self.best = float("-inf")
        self.best_payload = None

    def add(self, reward, observed_y, wall_ms, payload=None):
        if reward > self.best:
            self.best = reward
            self.best_payload = payload
        rec = RunRecord(len(self.records) + 1, float(reward), self.best, float(observed_y), float(wall_ms))
        self.records.append(rec)
        return rec

