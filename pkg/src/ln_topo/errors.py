"""Exception types shared across the toolkit."""


class LnTopoError(Exception):
    """Base class for all toolkit errors."""


# -- gossip ingestion --------------------------------------------------------

class UnknownType(LnTopoError):
    """Message type is not one of the three gossip kinds."""


class Truncated(LnTopoError):
    """Payload is shorter than its fixed wire layout."""


class MalformedField(LnTopoError):
    """A decoded field violates an invariant (or reserved bits in strict mode)."""


class MalformedLine(LnTopoError):
    """A line-format record failed to parse (strict mode)."""

    def __init__(self, line_no: int, reason: str = ""):
        self.line_no = line_no
        super().__init__(f"malformed record at line {line_no}" + (f": {reason}" if reason else ""))


# -- snapshot reconstruction -------------------------------------------------

class UnsortedInput(LnTopoError):
    """Record stream is not sorted by timestamp."""


class UnsortedSchedule(LnTopoError):
    """Snapshot schedule is not strictly increasing."""


class SchemaMismatch(LnTopoError):
    """Snapshot files violate the documented CSV schema or invariants."""


# -- graph core --------------------------------------------------------------

class NodeNotFound(LnTopoError):
    """Referenced node id or index is not in the graph."""


class ComponentTooSmall(LnTopoError):
    """No connected component is large enough for the requested sample size."""


# -- metrics -----------------------------------------------------------------

class EmptyGraph(LnTopoError):
    """Metric requested on a graph with no nodes."""


class MetricUnsupportedInMode(LnTopoError):
    """Metric cannot be computed for this graph/mode combination."""


class DegenerateDistribution(LnTopoError):
    """Too few distinct values to fit a distribution."""


class NoPairs(LnTopoError):
    """Pair universe for a link-prediction average is empty."""


# -- stability ---------------------------------------------------------------

class EmptyBase(LnTopoError):
    """Intersection-rate denominator set is empty."""


class EmptySample(LnTopoError):
    """A two-sample statistic received an empty sample."""


class TooFewSnapshots(LnTopoError):
    """Stability series needs at least two snapshots."""


# -- routing simulation ------------------------------------------------------

class PolicyUnusable(LnTopoError):
    """Channel policy is disabled or the amount is out of its HTLC bounds."""


class GraphTooSmall(LnTopoError):
    """Snapshot has fewer than two nodes; no payments can be generated."""


class EmptyTally(LnTopoError):
    """Hop tally carries no positive counts."""


# -- pipeline ----------------------------------------------------------------

class ConfigInvalid(LnTopoError):
    """Pipeline configuration failed validation."""


class MissingColumns(LnTopoError):
    """Requested plot data needs metric columns that were not computed."""
