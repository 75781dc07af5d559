use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};
use serde::Serialize;

/// Real scalar the metrics engine computes in: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + NumAssign + Debug + Display + Default + Serialize + Send + Sync + 'static
{
    /// Default L1 stopping tolerance for PageRank.
    fn default_tolerance() -> Self;

    /// Default relative stopping tolerance for the Katz and HITS solvers.
    fn solver_tolerance() -> Self;

    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 converts to every supported scalar")
    }

    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).expect("usize converts to every supported scalar")
    }
}

impl Scalar for f64 {
    fn default_tolerance() -> Self {
        1e-9
    }

    fn solver_tolerance() -> Self {
        1e-13
    }
}

impl Scalar for f32 {
    fn default_tolerance() -> Self {
        1e-5
    }

    fn solver_tolerance() -> Self {
        1e-6
    }
}
