//! Exact calculus for one-dimensional continuous piecewise quadratics.
//!
//! Everything here is generic over [`ExactScalar`](crate::scalar::ExactScalar); with
//! `BigRational` all answers are exact.

mod calculus;
mod cone;
mod graph;
mod pwq;
mod sets;

pub use calculus::{
    convexity_decide_exact, d2_exact, d2_form, graph_point, second_order_maps_exact, segment_s_exact,
    segment_witness, subdifferential, verify_theorem_equivalences, Branch, ConditionFlags, D2Form,
    EquivalenceReport, ExactTriple, ExactVerdict,
};
pub use cone::{Cone2D, ConeKind, ConvexCone2, Vec2};
pub use graph::{ComponentKind, ConcavePair, GraphComponent, PointCones, SecondOrderSets, SubdiffGraph1D};
pub use pwq::{Domain, Kink, Location, PiecewiseQuad1D, QuadPiece};
pub use sets::IntervalSet;
