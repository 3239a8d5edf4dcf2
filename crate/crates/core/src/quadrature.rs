//! Gauss-Legendre rules on intervals and symmetric rules on triangles.

use crate::error::{Error, Result};

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0, "Gauss-Legendre rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_n
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// `(P_n(x), P_n'(x))` via the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Gauss-Legendre rule mapped onto `[a, b]`.
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    (
        x.iter().map(|&t| mid + half * t).collect(),
        w.iter().map(|&v| v * half).collect(),
    )
}

/// Quadrature rule on the reference triangle in barycentric coordinates.
/// Weights sum to one; multiply by the element area.
#[derive(Debug, Clone)]
pub struct TriangleRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub order: usize,
}

impl TriangleRule {
    /// Rule exact for polynomials up to `order` (1, 2, 4 or 5).
    pub fn new(order: usize) -> Result<Self> {
        let third = 1.0 / 3.0;
        let (points, weights) = match order {
            1 => (vec![[third; 3]], vec![1.0]),
            2 => {
                let a = 1.0 / 6.0;
                let b = 2.0 / 3.0;
                (vec![[b, a, a], [a, b, a], [a, a, b]], vec![third; 3])
            }
            4 => {
                let (a, wa) = (0.445_948_490_915_965, 0.223_381_589_678_011);
                let (b, wb) = (0.091_576_213_509_771, 0.109_951_743_655_322);
                let mut pts = Vec::new();
                let mut wts = Vec::new();
                for (c, w) in [(a, wa), (b, wb)] {
                    let o = 1.0 - 2.0 * c;
                    pts.extend([[o, c, c], [c, o, c], [c, c, o]]);
                    wts.extend([w; 3]);
                }
                (pts, wts)
            }
            5 => {
                let (a1, b1, w1) = (
                    0.059_715_871_789_770,
                    0.470_142_064_105_115,
                    0.132_394_152_788_506,
                );
                let (a2, b2, w2) = (
                    0.797_426_985_353_087,
                    0.101_286_507_323_456,
                    0.125_939_180_544_827,
                );
                let mut pts = vec![[third; 3]];
                let mut wts = vec![0.225];
                pts.extend([[a1, b1, b1], [b1, a1, b1], [b1, b1, a1]]);
                wts.extend([w1; 3]);
                pts.extend([[a2, b2, b2], [b2, a2, b2], [b2, b2, a2]]);
                wts.extend([w2; 3]);
                (pts, wts)
            }
            other => {
                return Err(Error::Config(format!(
                    "unsupported triangle quadrature order {other} (use 1, 2, 4 or 5)"
                )))
            }
        };
        Ok(TriangleRule {
            points,
            weights,
            order,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        for n in [1, 2, 5, 16, 64] {
            let (x, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13);
            for deg in 0..(2 * n).min(40) {
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
                assert!((q - exact).abs() < 1e-13, "n={n} deg={deg}: {q}");
            }
        }
    }

    #[test]
    fn mapped_rule_integrates_gaussian() {
        let (x, w) = gauss_legendre_on(64, -6.0, 6.0);
        let q: f64 = x.iter().zip(&w).map(|(x, w)| w * (-0.5 * x * x).exp()).sum();
        let exact = (2.0 * std::f64::consts::PI).sqrt() * 0.999_999_998_026_824_7;
        assert!((q - exact).abs() < 1e-12, "{q} vs {exact}");
    }

    #[test]
    fn triangle_rules_reach_their_order() {
        // ∫ over the unit right triangle of x^a y^b = a! b! / (a+b+2)!
        let fact = |n: u32| (1..=n).map(f64::from).product::<f64>();
        for order in [1usize, 2, 4, 5] {
            let rule = TriangleRule::new(order).unwrap();
            assert!((rule.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for a in 0..=order as u32 {
                for b in 0..=(order as u32 - a) {
                    let exact = fact(a) * fact(b) / fact(a + b + 2);
                    let q: f64 = rule
                        .points
                        .iter()
                        .zip(&rule.weights)
                        .map(|(p, w)| 0.5 * w * p[1].powi(a as i32) * p[2].powi(b as i32))
                        .sum();
                    assert!((q - exact).abs() < 1e-12, "order {order} x^{a} y^{b}");
                }
            }
        }
        assert!(TriangleRule::new(3).is_err());
    }
}
