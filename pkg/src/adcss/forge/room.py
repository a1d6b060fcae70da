"""Room sampling and a surrogate room impulse response.

The RIR is a direct-path impulse (delay r / c, amplitude 1 / r) followed by
exponentially decaying Gaussian noise that falls 60 dB over ``rt60`` seconds.
The tail energy follows the diffuse-field critical distance
``r_c = 0.057 * sqrt(V / RT60)``: at r = r_c the direct and reverberant
energies are equal.
"""

from dataclasses import dataclass, field

import numpy as np

from ..audio import SAMPLE_RATE
from ..errors import SamplingError

SPEED_OF_SOUND = 343.0
LENGTH_RANGE = (4.0, 8.0)
WIDTH_RANGE = (4.0, 8.0)
HEIGHT_RANGE = (3.0, 4.0)
RT60_RANGE = (0.2, 0.6)
MIC_HEIGHT_RANGE = (1.0, 1.5)
SPEAKER_HEIGHT_RANGE = (1.5, 2.0)
MIN_DISTANCE = 0.5


@dataclass
class RoomSpec:
    length_m: float
    width_m: float
    height_m: float
    rt60_s: float
    mic_pos_m: tuple[float, float, float]
    speaker_pos_m: list[tuple[float, float, float]] = field(default_factory=list)

    @property
    def dims(self) -> tuple[float, float, float]:
        return (self.length_m, self.width_m, self.height_m)

    @property
    def volume(self) -> float:
        return self.length_m * self.width_m * self.height_m

    def distance(self, src_index: int) -> float:
        return float(np.linalg.norm(np.subtract(self.speaker_pos_m[src_index], self.mic_pos_m)))

    def check(self) -> list[str]:
        """Return the list of violated constraints (empty when valid)."""
        problems = []
        for name, value, (lo, hi) in (("length", self.length_m, LENGTH_RANGE),
                                      ("width", self.width_m, WIDTH_RANGE),
                                      ("height", self.height_m, HEIGHT_RANGE),
                                      ("rt60", self.rt60_s, RT60_RANGE),
                                      ("mic height", self.mic_pos_m[2], MIC_HEIGHT_RANGE)):
            if not lo <= value <= hi:
                problems.append(f"{name} {value:.3f} outside [{lo}, {hi}]")
        points = [self.mic_pos_m, *self.speaker_pos_m]
        for i, p in enumerate(self.speaker_pos_m):
            if not SPEAKER_HEIGHT_RANGE[0] <= p[2] <= SPEAKER_HEIGHT_RANGE[1]:
                problems.append(f"speaker {i} height {p[2]:.3f} outside {SPEAKER_HEIGHT_RANGE}")
        for i, p in enumerate(points):
            for axis, size in enumerate(self.dims):
                if p[axis] < MIN_DISTANCE or p[axis] > size - MIN_DISTANCE:
                    problems.append(f"point {i} closer than {MIN_DISTANCE} m to a wall")
            for q in points[i + 1:]:
                if np.linalg.norm(np.subtract(p, q)) < MIN_DISTANCE:
                    problems.append(f"point {i} closer than {MIN_DISTANCE} m to another point")
        return problems


def _place(rng, dims, height_range):
    x = rng.uniform(MIN_DISTANCE, dims[0] - MIN_DISTANCE)
    y = rng.uniform(MIN_DISTANCE, dims[1] - MIN_DISTANCE)
    z = rng.uniform(*height_range)
    return (float(x), float(y), float(z))


def sample_room(rng: np.random.Generator, n_speakers: int = 3, max_tries: int = 1000,
                dims: tuple[float, float, float] | None = None) -> RoomSpec:
    """Uniformly sample a room, RT60, microphone and speaker positions.

    Positions are rejection-sampled until every point is at least 0.5 m from
    all others. ``dims`` pins the room size (used for feasibility checks).
    """
    if dims is None:
        dims = (rng.uniform(*LENGTH_RANGE), rng.uniform(*WIDTH_RANGE), rng.uniform(*HEIGHT_RANGE))
    dims = tuple(float(v) for v in dims)
    rt60 = float(rng.uniform(*RT60_RANGE))
    for _ in range(max_tries):
        mic = _place(rng, dims, MIC_HEIGHT_RANGE)
        speakers = []
        for _ in range(n_speakers):
            for _ in range(max_tries):
                p = _place(rng, dims, SPEAKER_HEIGHT_RANGE)
                if all(np.linalg.norm(np.subtract(p, q)) >= MIN_DISTANCE for q in [mic, *speakers]):
                    speakers.append(p)
                    break
            else:
                break
        if len(speakers) == n_speakers:
            return RoomSpec(*dims, rt60, mic, speakers)
    raise SamplingError(f"could not place {n_speakers} speakers in room {dims} after {max_tries} tries")


def critical_distance(room: RoomSpec) -> float:
    return 0.057 * np.sqrt(room.volume / room.rt60_s)


def synth_rir(room: RoomSpec, src_index: int, rng: np.random.Generator | None = None,
              sample_rate: int = SAMPLE_RATE, tail: bool = True) -> np.ndarray:
    """Impulse response from speaker ``src_index`` to the microphone.

    With ``tail=False`` (or rt60 == 0) only the delayed, attenuated direct
    path is returned.
    """
    r = room.distance(src_index)
    delay = int(round(r / SPEED_OF_SOUND * sample_rate))
    direct = 1.0 / r
    if not tail or room.rt60_s <= 0:
        h = np.zeros(delay + 1)
        h[delay] = direct
        return h
    rng = np.random.default_rng(0) if rng is None else rng
    n_tail = int(np.ceil(1.2 * room.rt60_s * sample_rate))
    t = np.arange(1, n_tail + 1) / sample_rate
    # amplitude envelope reaches -60 dB (1e-3) at t = rt60
    envelope = np.exp(-3.0 * np.log(10.0) * t / room.rt60_s)
    noise = rng.standard_normal(n_tail) * envelope
    noise *= (1.0 / critical_distance(room)) / np.sqrt(np.sum(noise ** 2))
    h = np.zeros(delay + 1 + n_tail)
    h[delay] = direct
    h[delay + 1:] = noise
    return h
