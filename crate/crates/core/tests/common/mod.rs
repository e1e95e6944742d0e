//! Random continuous piecewise quadratics with dyadic coefficients, so that the exact
//! instance and its `f64` copy describe the same function.

#![allow(dead_code)]

use num_rational::BigRational;
use rand::Rng;
use varkit::exact::{Domain, PiecewiseQuad1D, QuadPiece};

pub fn q(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

/// `k/den` with `k` uniform in `[-span*den, span*den]`.
pub fn dyadic<R: Rng>(rng: &mut R, span: i64, den: i64) -> BigRational {
    q(rng.random_range(-span * den..=span * den), den)
}

/// Up to three breakpoints in `[-2, 2]`, curvatures in halves (so graph slopes `2a` are integers),
/// continuous at every breakpoint, on the line or a closed/half-closed interval.
pub fn random_pwq<R: Rng>(rng: &mut R) -> PiecewiseQuad1D<BigRational> {
    let nb = rng.random_range(0..=3usize);
    let mut bps: Vec<BigRational> = Vec::new();
    while bps.len() < nb {
        let b = dyadic(rng, 2, 4);
        if !bps.contains(&b) {
            bps.push(b);
        }
    }
    bps.sort();
    let mut pieces = Vec::new();
    let first = QuadPiece::new(dyadic(rng, 2, 2), dyadic(rng, 2, 4), dyadic(rng, 2, 4));
    pieces.push(first);
    for b in &bps {
        let prev = pieces.last().unwrap();
        let val = prev.value(b);
        let a = dyadic(rng, 2, 2);
        let c = dyadic(rng, 2, 4);
        let d = val - a.clone() * b * b - c.clone() * b;
        pieces.push(QuadPiece::new(a, c, d));
    }
    let lo_edge = bps.first().cloned().unwrap_or_else(|| q(0, 1));
    let hi_edge = bps.last().cloned().unwrap_or_else(|| q(0, 1));
    let domain = match rng.random_range(0..4) {
        0 => Domain { lo: Some(lo_edge - q(rng.random_range(1..=4), 4)), hi: Some(hi_edge + q(rng.random_range(1..=4), 4)) },
        1 => Domain { lo: Some(lo_edge - q(rng.random_range(1..=4), 4)), hi: None },
        _ => Domain::real_line(),
    };
    PiecewiseQuad1D::new(bps, pieces, domain).expect("valid random instance")
}

/// Independent convexity facts computed from the raw coefficients.
pub struct Facts {
    pub concave_kink: bool,
    pub convex: bool,
}

pub fn facts(f: &PiecewiseQuad1D<BigRational>) -> Facts {
    let ps = f.pieces();
    let mut concave_kink = false;
    for (i, b) in f.breakpoints().iter().enumerate() {
        let left = q(2, 1) * ps[i].a.clone() * b + ps[i].c.clone();
        let right = q(2, 1) * ps[i + 1].a.clone() * b + ps[i + 1].c.clone();
        if left > right {
            concave_kink = true;
        }
    }
    let neg_curv = ps.iter().any(|p| p.a < q(0, 1));
    Facts { concave_kink, convex: !concave_kink && !neg_curv }
}
