"""Exception types raised across the package.

Every error names the offending node, edge, or record so callers can report
actionable messages without string-parsing tracebacks.
"""

from __future__ import annotations


class CeeError(Exception):
    """Base class for all package errors."""


class TaxonomyError(CeeError):
    """Base class for hierarchy construction and lookup failures."""


class CycleDetected(TaxonomyError):
    def __init__(self, node: str):
        self.node = node
        super().__init__(f"cycle detected through concept {node!r}")


class MultipleRoots(TaxonomyError):
    def __init__(self, roots: list[str]):
        self.roots = sorted(roots)
        super().__init__(f"expected exactly one root, found {self.roots}")


class DanglingEdge(TaxonomyError):
    def __init__(self, node: str, detail: str = "does not reach the root"):
        self.node = node
        super().__init__(f"concept {node!r} {detail}")


class EmptySource(TaxonomyError):
    def __init__(self, detail: str = "no concepts declared"):
        super().__init__(detail)


class UnknownConcept(TaxonomyError):
    def __init__(self, concept: str):
        self.concept = concept
        super().__init__(f"concept {concept!r} is not in the taxonomy")


class UncategorizedConcept(TaxonomyError):
    def __init__(self, concept: str):
        self.concept = concept
        super().__init__(f"concept {concept!r} has no category ancestor")


class IncompatibleTaxonomy(CeeError):
    def __init__(self, detail: str = "concept sets come from different taxonomies"):
        super().__init__(detail)


class InstanceTooLarge(CeeError):
    def __init__(self, size: int, limit: int):
        self.size = size
        self.limit = limit
        super().__init__(f"instance has {size} items, brute force allows at most {limit}")


class MalformedObject(CeeError):
    def __init__(self, detail: str):
        super().__init__(detail)


class LengthMismatch(CeeError):
    def __init__(self, n_generated: int, n_truth: int):
        self.n_generated = n_generated
        self.n_truth = n_truth
        super().__init__(
            f"generated story has {n_generated} frames, ground truth has {n_truth}"
        )


class EmptyStory(CeeError):
    def __init__(self, story_id: str = ""):
        detail = f"story {story_id!r} has no frames" if story_id else "story has no frames"
        super().__init__(detail)


class EmptyCorpus(CeeError):
    def __init__(self, detail: str = "corpus holds no samples"):
        super().__init__(detail)


class SpecOutOfRange(CeeError):
    def __init__(self, detail: str):
        super().__init__(detail)
