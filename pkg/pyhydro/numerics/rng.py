import zlib

import numpy as np


class Rng:
    """
    One seed for a whole run, split into independent per-purpose streams.

    Streams are derived with numpy's SeedSequence (a hash-based seeding scheme in
    the splitmix family) feeding a PCG64 generator, so the same seed and purpose
    always give the same stream regardless of the order streams are requested in.
    """

    def __init__(self, seed=0):
        self.seed = int(seed)
        self._sequence = np.random.SeedSequence(self.seed)
        self.generator = np.random.Generator(np.random.PCG64(self._sequence))

    def stream(self, purpose):
        """
        Returns an independent generator for ``purpose``.

        Args:
            purpose (str): A stable label such as "init" or "repeat-3/sample".

        Returns:
            np.random.Generator: A fresh generator; repeated calls restart the stream.
        """
        key = zlib.crc32(str(purpose).encode("utf-8"))
        sequence = np.random.SeedSequence(self.seed, spawn_key=(key,))
        return np.random.Generator(np.random.PCG64(sequence))

    def child(self, purpose):
        """Returns an Rng whose seed is drawn from the ``purpose`` stream."""
        return Rng(int(self.stream(purpose).integers(0, 2**63 - 1)))

    def __repr__(self):
        return f"Rng(seed={self.seed})"
