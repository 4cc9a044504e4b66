//! Quadrature rules: Gauss-Legendre on intervals, symmetric rules on
//! triangles, and a globally adaptive Gauss-Kronrod integrator.

use std::collections::BinaryHeap;

/// Neumaier's compensated sum; long mode sums lose ~√n ulps without it.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        self.carry += if self.sum.abs() >= x.abs() { (self.sum - t) + x } else { (x - t) + self.sum };
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

impl std::iter::Sum<f64> for CompensatedSum {
    fn sum<I: Iterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::default();
        iter.for_each(|x| s.add(x));
        s
    }
}

/// Compensated sum of an iterator.
pub fn accurate_sum(iter: impl IntoIterator<Item = f64>) -> f64 {
    iter.into_iter().sum::<CompensatedSum>().value()
}

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            if n == 1 {
                p1 = z;
                p0 = 1.0;
            } else {
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// Quadrature rule on the reference triangle (0,0), (1,0), (0,1), given as
/// barycentric-free reference coordinates and weights summing to 1 (i.e. the
/// weights are relative to the triangle area).
#[derive(Debug, Clone)]
pub struct TriangleRule {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl TriangleRule {
    /// Six-point rule exact for polynomials of degree 4.
    pub fn degree4() -> Self {
        let a1 = 0.445_948_490_915_965;
        let a2 = 0.091_576_213_509_771;
        let w1 = 0.223_381_589_678_011;
        let w2 = 0.109_951_743_655_322;
        let b1 = 1.0 - 2.0 * a1;
        let b2 = 1.0 - 2.0 * a2;
        TriangleRule {
            points: vec![[a1, a1], [b1, a1], [a1, b1], [a2, a2], [b2, a2], [a2, b2]],
            weights: vec![w1, w1, w1, w2, w2, w2],
            degree: 4,
        }
    }

    /// Seven-point Radon rule exact for polynomials of degree 5.
    pub fn degree5() -> Self {
        let s15 = 15f64.sqrt();
        let a1 = (6.0 - s15) / 21.0;
        let a2 = (6.0 + s15) / 21.0;
        let w1 = (155.0 - s15) / 1200.0;
        let w2 = (155.0 + s15) / 1200.0;
        let b1 = 1.0 - 2.0 * a1;
        let b2 = 1.0 - 2.0 * a2;
        TriangleRule {
            points: vec![
                [1.0 / 3.0, 1.0 / 3.0],
                [a1, a1],
                [b1, a1],
                [a1, b1],
                [a2, a2],
                [b2, a2],
                [a2, b2],
            ],
            weights: vec![9.0 / 40.0, w1, w1, w1, w2, w2, w2],
            degree: 5,
        }
    }
}

// Gauss-Kronrod 7-15 abscissae and weights on [-1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.err.total_cmp(&other.err)
    }
}

/// Outcome of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub converged: bool,
}

/// Globally adaptive G7-K15 integration of `f` over the consecutive
/// intervals given by `breaks` (at least two points).
pub fn adaptive_gk<F: Fn(f64) -> f64>(
    f: F,
    breaks: &[f64],
    rel_tol: f64,
    abs_tol: f64,
    max_segments: usize,
) -> Integral {
    let mut heap = BinaryHeap::new();
    let (mut total, mut total_err) = (0.0, 0.0);
    for w in breaks.windows(2) {
        if w[1] <= w[0] {
            continue;
        }
        let (v, e) = gk15(&f, w[0], w[1]);
        total += v;
        total_err += e;
        heap.push(Segment {
            a: w[0],
            b: w[1],
            value: v,
            err: e,
        });
    }
    while total_err > abs_tol.max(rel_tol * total.abs()) && heap.len() < max_segments {
        let Some(seg) = heap.pop() else { break };
        let mid = 0.5 * (seg.a + seg.b);
        if mid <= seg.a || mid >= seg.b {
            heap.push(seg);
            break;
        }
        let (v1, e1) = gk15(&f, seg.a, mid);
        let (v2, e2) = gk15(&f, mid, seg.b);
        total += v1 + v2 - seg.value;
        total_err += e1 + e2 - seg.err;
        heap.push(Segment {
            a: seg.a,
            b: mid,
            value: v1,
            err: e1,
        });
        heap.push(Segment {
            a: mid,
            b: seg.b,
            value: v2,
            err: e2,
        });
    }
    // re-sum to shed the drift of the running updates
    let mut segs: Vec<Segment> = heap.into_vec();
    segs.sort_by(|x, y| x.a.total_cmp(&y.a));
    let value: f64 = segs.iter().map(|s| s.value).sum();
    let error: f64 = segs.iter().map(|s| s.err).sum();
    Integral {
        value,
        error,
        converged: error <= abs_tol.max(rel_tol * value.abs()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_exact_for_polynomials() {
        for n in 1..12 {
            let (x, w) = gauss_legendre(n);
            for p in 0..(2 * n) {
                let q: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(p as i32)).sum();
                let exact = if p % 2 == 1 { 0.0 } else { 2.0 / (p as f64 + 1.0) };
                assert!((q - exact).abs() < 1e-13, "n={n} p={p}");
            }
        }
    }

    fn monomial_integral(i: i32, j: i32) -> f64 {
        // int over reference triangle of x^i y^j = i! j! / (i + j + 2)!
        let f = |k: i32| (1..=k).map(|v| v as f64).product::<f64>();
        f(i) * f(j) / f(i + j + 2)
    }

    #[test]
    fn triangle_rules_reach_stated_degree() {
        for rule in [TriangleRule::degree4(), TriangleRule::degree5()] {
            let s: f64 = rule.weights.iter().sum();
            assert!((s - 1.0).abs() < 1e-14);
            for i in 0..=rule.degree as i32 {
                for j in 0..=(rule.degree as i32 - i) {
                    let q: f64 = rule
                        .points
                        .iter()
                        .zip(&rule.weights)
                        .map(|(p, w)| w * p[0].powi(i) * p[1].powi(j))
                        .sum::<f64>()
                        * 0.5;
                    assert!(
                        (q - monomial_integral(i, j)).abs() < 1e-14,
                        "deg {} monomial {i},{j}",
                        rule.degree
                    );
                }
            }
        }
    }

    #[test]
    fn adaptive_handles_peaks() {
        let eps = 1e-3;
        let r = adaptive_gk(|x| eps / (x * x + eps * eps), &[-1.0, 0.0, 1.0], 1e-13, 0.0, 500);
        let exact = 2.0 * (1.0 / eps).atan();
        assert!(r.converged);
        assert!((r.value - exact).abs() < 1e-12 * exact);
    }
}
