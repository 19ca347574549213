"""Per-image grids of spatial token embeddings."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ArgumentError, ValidationError


@dataclass(frozen=True)
class TokenEmbeddingSet:
    """N images, each carrying L token vectors of dimension d.

    ``data`` has shape (N, L, d) and dtype float32. Instances are immutable
    and safe to share across threads. Construction checks the structural
    invariants; finiteness is checked on load (see formats.read_embeddings),
    so in-memory sets may carry NaN for negative-path tests.
    """

    data: np.ndarray
    image_ids: tuple[str, ...] = field(default=())

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float32)
        if arr.ndim != 3:
            raise ArgumentError(f"token data must be (N, L, d), got shape {arr.shape}")
        n, l, d = arr.shape
        if n < 1 or l < 1 or d < 1:
            raise ArgumentError(f"N, L, d must all be >= 1, got ({n}, {l}, {d})")
        ids = tuple(self.image_ids) if self.image_ids else tuple(f"img{i:06d}" for i in range(n))
        if len(ids) != n:
            raise ArgumentError(f"got {len(ids)} image ids for {n} images")
        if len(set(ids)) != len(ids):
            raise ValidationError("image ids are not unique")
        arr = np.ascontiguousarray(arr)
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)
        object.__setattr__(self, "image_ids", ids)

    @property
    def n_images(self) -> int:
        return self.data.shape[0]

    @property
    def tokens_per_image(self) -> int:
        return self.data.shape[1]

    @property
    def dim(self) -> int:
        return self.data.shape[2]

    def check_finite(self):
        """Reject NaN/Inf, naming the first offending image."""
        finite = np.isfinite(self.data)
        if finite.all():
            return
        flat_idx = int(np.argmin(finite.reshape(-1)))
        img = flat_idx // (self.tokens_per_image * self.dim)
        raise ValidationError(
            f"non-finite token value in image {img} (id {self.image_ids[img]!r})"
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, TokenEmbeddingSet):
            return NotImplemented
        return (
            self.image_ids == other.image_ids
            and self.data.shape == other.data.shape
            and self.data.tobytes() == other.data.tobytes()
        )
