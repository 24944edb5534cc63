//! Symmetric quadrature rules on the reference triangle and on edges.
//!
//! Triangle points are barycentric coordinates and weights sum to one, so an
//! integral over `K` is `|K| * sum(w * f(x))`.

pub type TriangleRule = &'static [([f64; 3], f64)];

const DEGREE1: [([f64; 3], f64); 1] = [([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], 1.0)];

const DEGREE2: [([f64; 3], f64); 3] = [
    ([2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0], 1.0 / 3.0),
    ([1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0], 1.0 / 3.0),
    ([1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0], 1.0 / 3.0),
];

const A4: f64 = 0.445_948_490_915_965;
const W4A: f64 = 0.223_381_589_678_011;
const B4: f64 = 0.091_576_213_509_771;
const W4B: f64 = 0.109_951_743_655_322;

const DEGREE4: [([f64; 3], f64); 6] = [
    ([1.0 - 2.0 * A4, A4, A4], W4A),
    ([A4, 1.0 - 2.0 * A4, A4], W4A),
    ([A4, A4, 1.0 - 2.0 * A4], W4A),
    ([1.0 - 2.0 * B4, B4, B4], W4B),
    ([B4, 1.0 - 2.0 * B4, B4], W4B),
    ([B4, B4, 1.0 - 2.0 * B4], W4B),
];

const A5: f64 = 0.059_715_871_789_770;
const B5: f64 = 0.470_142_064_105_115;
const W5A: f64 = 0.132_394_152_788_506;
const C5: f64 = 0.797_426_985_353_087;
const D5: f64 = 0.101_286_507_323_456;
const W5C: f64 = 0.125_939_180_544_827;

const DEGREE5: [([f64; 3], f64); 7] = [
    ([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], 0.225),
    ([A5, B5, B5], W5A),
    ([B5, A5, B5], W5A),
    ([B5, B5, A5], W5A),
    ([C5, D5, D5], W5C),
    ([D5, C5, D5], W5C),
    ([D5, D5, C5], W5C),
];

/// Lowest-cost rule in the table that integrates polynomials of `degree` exactly.
pub fn triangle_rule(degree: u32) -> TriangleRule {
    match degree {
        0 | 1 => &DEGREE1,
        2 => &DEGREE2,
        3 | 4 => &DEGREE4,
        _ => &DEGREE5,
    }
}

/// Three-point Gauss rule on `[0, 1]`, exact up to degree 5.
pub fn edge_rule() -> [(f64, f64); 3] {
    let d = 0.5 * (3.0f64 / 5.0).sqrt();
    [(0.5 - d, 5.0 / 18.0), (0.5, 8.0 / 18.0), (0.5 + d, 5.0 / 18.0)]
}

#[cfg(test)]
mod tests {
    use super::*;

    // Exact integral of l0^a l1^b l2^c over the reference triangle (area 1/2),
    // divided by the area: 2 a! b! c! / (a+b+c+2)!.
    fn monomial_mean(a: u32, b: u32, c: u32) -> f64 {
        let fact = |n: u32| (1..=n).map(f64::from).product::<f64>();
        2.0 * fact(a) * fact(b) * fact(c) / fact(a + b + c + 2)
    }

    #[test]
    fn rules_integrate_monomials_exactly() {
        for degree in [1, 2, 4, 5] {
            let rule = triangle_rule(degree);
            let wsum: f64 = rule.iter().map(|(_, w)| w).sum();
            assert!((wsum - 1.0).abs() < 1e-14);
            for a in 0..=degree {
                for b in 0..=degree - a {
                    let c = degree - a - b;
                    let q: f64 = rule
                        .iter()
                        .map(|(l, w)| w * l[0].powi(a as i32) * l[1].powi(b as i32) * l[2].powi(c as i32))
                        .sum();
                    let exact = monomial_mean(a, b, c);
                    assert!((q - exact).abs() < 1e-13, "degree {degree}: {a}{b}{c} {q} vs {exact}");
                }
            }
        }
    }

    #[test]
    fn edge_rule_exact_to_quintic() {
        for p in 0..=5 {
            let q: f64 = edge_rule().iter().map(|(t, w)| w * t.powi(p)).sum();
            assert!((q - 1.0 / (p as f64 + 1.0)).abs() < 1e-15);
        }
    }
}
