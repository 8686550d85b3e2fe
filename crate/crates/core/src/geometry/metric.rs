use super::point::HtPoint;
use super::Params;
use crate::error::{Error, Result};
use crate::scalar::{from_i64, lit, Real};

/// Hyperbolic distance in the upper half plane between (x1, y1) and (x2, y2).
///
/// Uses 2·asinh(√(((x1−x2)² + (y1−y2)²) / (4 y1 y2))), which equals
/// arccosh(1 + ((x1−x2)² + (y1−y2)²)/(2 y1 y2)) without the cancellation near 0.
pub fn hyperbolic_distance<T: Real>(x1: T, y1: T, x2: T, y2: T) -> Result<T> {
    if !(y1 > T::zero()) || !(y2 > T::zero()) {
        return Err(Error::Domain(format!("heights must be positive, got {y1} and {y2}")));
    }
    let dx = x1 - x2;
    let dy = y1 - y2;
    let s = ((dx * dx + dy * dy) / (lit::<T>(4.0) * y1 * y2)).sqrt();
    Ok(lit::<T>(2.0) * s.asinh())
}

/// Im(z ∧ z′): the largest height reached by the hyperbolic geodesic between two points.
pub fn geodesic_apex<T: Real>(x1: T, y1: T, x2: T, y2: T) -> T {
    if x1 == x2 {
        return y1.max(y2);
    }
    let two = lit::<T>(2.0);
    let center = ((x2 * x2 + y2 * y2) - (x1 * x1 + y1 * y1)) / (two * (x2 - x1));
    let (lo, hi) = if x1 < x2 { (x1, x2) } else { (x2, x1) };
    if center > lo && center < hi {
        ((x1 - center) * (x1 - center) + y1 * y1).sqrt()
    } else {
        y1.max(y2)
    }
}

const SCAN_POINTS: usize = 64;

/// Distance 𝖽_HT between two treebolic points.
///
/// When the tree confluent of the two points is one of them, both lie in a
/// common copy of the hyperbolic plane and the plane distance applies.
/// Otherwise every connecting path crosses the bifurcation line of the
/// confluent vertex, and the distance is the minimum of
/// 𝖽_H(z1, s) + 𝖽_H(s, z2) over s on that line.
pub fn ht_distance<T: Real>(z1: &HtPoint<T>, z2: &HtPoint<T>, params: &Params<T>) -> T {
    let (x1, y1, x2, y2) = (z1.x(), z1.y(), z2.x(), z2.y());
    let c = z1.w().confluent(z2.w());
    if c == *z1.w() || c == *z2.w() {
        return hyperbolic_distance(x1, y1, x2, y2).expect("positive heights");
    }
    let yc = (from_i64::<T>(c.edge().height()) * params.ln_q()).exp();
    let cost = |s: T| {
        hyperbolic_distance(x1, y1, s, yc).expect("positive heights")
            + hyperbolic_distance(s, yc, x2, y2).expect("positive heights")
    };
    minimize_on_line(cost, x1.min(x2) - T::one(), x1.max(x2) + T::one(), lit(1e-10))
}

/// Coarse scan followed by golden-section refinement around the best sample.
fn minimize_on_line<T: Real>(f: impl Fn(T) -> T, lo: T, hi: T, tol: T) -> T {
    let n = from_i64::<T>(SCAN_POINTS as i64);
    let step = (hi - lo) / n;
    let mut best = (0usize, f(lo));
    for k in 1..=SCAN_POINTS {
        let v = f(lo + step * from_i64(k as i64));
        if v < best.1 {
            best = (k, v);
        }
    }
    let k = from_i64::<T>(best.0 as i64);
    let mut a = (lo + step * (k - T::one())).max(lo);
    let mut b = (lo + step * (k + T::one())).min(hi);
    let inv_phi = (lit::<T>(5.0).sqrt() - T::one()) / lit(2.0);
    let mut c = b - (b - a) * inv_phi;
    let mut d = a + (b - a) * inv_phi;
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - (b - a) * inv_phi;
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + (b - a) * inv_phi;
            fd = f(d);
        }
    }
    f((a + b) / lit(2.0)).min(best.1)
}

/// Density φ_{α,β}(𝔷) = β^𝔥(v) y^α of the reference measure, with v the upper
/// endpoint of the strip containing 𝔷. A point on L_v belongs to the strip below.
pub fn phi_density<T: Real>(z: &HtPoint<T>, params: &Params<T>) -> T {
    let h = from_i64::<T>(z.edge().height());
    (h * params.beta().ln() + params.alpha() * z.u()).exp()
}
