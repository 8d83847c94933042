//! Symmetric triangle rules and Gauss–Legendre edge rules.

/// Quadrature on a triangle in barycentric coordinates; weights sum to 1 and
/// are scaled by the element area by the caller.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleRule {
    pub degree: u32,
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

/// Gauss–Legendre rule on `[0, 1]`; weights sum to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

fn orbit3(a: f64, w: f64, points: &mut Vec<[f64; 3]>, weights: &mut Vec<f64>) {
    let b = 1.0 - 2.0 * a;
    for p in [[b, a, a], [a, b, a], [a, a, b]] {
        points.push(p);
        weights.push(w);
    }
}

impl TriangleRule {
    /// The cheapest available rule exact for polynomials of total degree
    /// `degree` (1, 2, 4 and 5 are native; larger requests get degree 5).
    pub fn with_degree(degree: u32) -> Self {
        let mut points = Vec::new();
        let mut weights = Vec::new();
        let native = match degree {
            0 | 1 => {
                points.push([1.0 / 3.0; 3]);
                weights.push(1.0);
                1
            }
            2 => {
                orbit3(1.0 / 6.0, 1.0 / 3.0, &mut points, &mut weights);
                2
            }
            3 | 4 => {
                orbit3(0.445_948_490_915_965, 0.223_381_589_678_011, &mut points, &mut weights);
                orbit3(0.091_576_213_509_771, 0.109_951_743_655_322, &mut points, &mut weights);
                4
            }
            _ => {
                points.push([1.0 / 3.0; 3]);
                weights.push(0.225);
                let s = 15f64.sqrt();
                orbit3((6.0 - s) / 21.0, (155.0 - s) / 1200.0, &mut points, &mut weights);
                orbit3((6.0 + s) / 21.0, (155.0 + s) / 1200.0, &mut points, &mut weights);
                5
            }
        };
        Self {
            degree: native,
            points,
            weights,
        }
    }
}

impl EdgeRule {
    /// Gauss rule exact up to `degree`; at least two points.
    pub fn with_degree(degree: u32) -> Self {
        let n = (degree as usize + 2) / 2;
        let (points, weights) = match n.max(2) {
            2 => {
                let a = 0.5 / 3f64.sqrt();
                (vec![0.5 - a, 0.5 + a], vec![0.5, 0.5])
            }
            3 => {
                let a = 0.5 * (0.6f64).sqrt();
                (vec![0.5 - a, 0.5, 0.5 + a], vec![5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0])
            }
            _ => {
                let a = 0.5 * 0.861_136_311_594_052_6;
                let b = 0.5 * 0.339_981_043_584_856_3;
                let wa = 0.5 * 0.347_854_845_137_453_9;
                let wb = 0.5 * 0.652_145_154_862_546_1;
                (vec![0.5 - a, 0.5 - b, 0.5 + b, 0.5 + a], vec![wa, wb, wb, wa])
            }
        };
        Self { points, weights }
    }
}
