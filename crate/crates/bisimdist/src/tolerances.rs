//! Every numeric tolerance used by the crate, in one place.
//!
//! All comparisons against these constants are absolute unless a constant's
//! name says otherwise.

/// Relative gap under which two exit rates count as equal (their
/// residence-time distributions are then identical).
pub const RATE_EQ_REL: f64 = 1e-12;

/// Absolute slack allowed on a probability distribution summing to 1.
pub const DIST_SUM: f64 = 1e-12;

/// Absolute slack on coupling marginals and on matching the two marginal
/// totals of a transportation problem.
pub const MARGINAL: f64 = 1e-9;

/// Reduced-cost threshold of the transportation simplex: a coupling is
/// optimal when no cell prices below minus this.
pub const TP_REDUCED_COST: f64 = 1e-9;

/// Primal feasibility required of an optimal LP solution.
pub const LP_FEASIBILITY: f64 = 1e-7;

/// Reduced-cost threshold of the LP simplex.
pub const LP_REDUCED_COST: f64 = 1e-9;

/// Smallest pivot element the LP simplex accepts.
pub const LP_PIVOT: f64 = 1e-10;

/// A computed distance within this of 0, 1, or the pair's label distance is
/// certified exact and frozen.
pub const EXACT: f64 = 1e-9;

/// A coupling is replaced when its cost exceeds the transport optimum by
/// more than this.
pub const IMPROVE: f64 = 1e-9;

/// Bound on a probability that may exceed 1 by rounding.
pub const PROB_OVERSHOOT: f64 = 1e-12;

/// Grouping tolerance for blockwise transition probabilities during
/// partition refinement.
pub const BLOCK_PROB: f64 = 1e-9;
