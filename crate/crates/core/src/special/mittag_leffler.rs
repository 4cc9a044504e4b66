//! Two-parameter Mittag-Leffler function E_{α,β}(z) on the real axis.
//!
//! Three regimes:
//! * power series, for |z| ≤ 1 and wherever the terms do not cancel badly;
//! * the algebraic asymptotic expansion −Σ z^{−k}/Γ(β−αk), for large negative z;
//! * a real integral representation over (0, ∞) for everything in between.
//!
//! The integral representation (valid for 0 < α < 1, z < 0, β < 1 + α) is
//!
//! ```text
//! E(−x) = 1/(απ) ∫₀^∞ χ^{(1−β)/α} e^{−χ^{1/α}}
//!         · [χ sin(π(1−β)) + x sin(π(1−β+α))] / (χ² + 2χx cos(απ) + x²) dχ
//! ```
//!
//! and larger β are brought into range with E_{α,β} = (E_{α,β−α} − 1/Γ(β−α))/z.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Mutex, OnceLock};

use super::gamma::{ln_gamma, rgamma, sin_pi};
use crate::error::{Error, MlRegime, Result};
use crate::quadrature::adaptive_gk;

/// Default relative accuracy of [`ml`].
pub const DEFAULT_REL_TOL: f64 = 1e-12;
/// Tightest accuracy a caller may request.
pub const MIN_REL_TOL: f64 = 1e-14;

const SERIES_MAX_TERMS: usize = 5000;
const ASYMPTOTIC_MAX_TERMS: usize = 400;
// e^{-50} is far below double precision relative to any value we integrate
const INTEGRAL_EXP_CUTOFF: f64 = 50.0;

/// A request for E_{α,β}(z).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlQuery {
    pub alpha: f64,
    pub beta: f64,
    pub z: f64,
    pub rel_tol: f64,
}

impl MlQuery {
    pub fn new(alpha: f64, beta: f64, z: f64) -> Self {
        MlQuery {
            alpha,
            beta,
            z,
            rel_tol: DEFAULT_REL_TOL,
        }
    }

    pub fn with_tol(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::Domain(format!("alpha = {} must lie in (0, 1]", self.alpha)));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::Domain(format!("beta = {} must be positive", self.beta)));
        }
        if !self.z.is_finite() {
            return Err(Error::Domain("z must be finite".into()));
        }
        if !(self.rel_tol >= MIN_REL_TOL) {
            return Err(Error::Domain(format!(
                "rel_tol = {:e} is below the attainable {MIN_REL_TOL:e}",
                self.rel_tol
            )));
        }
        Ok(())
    }
}

/// Evaluates E_{α,β}(z) to the query's relative tolerance.
pub fn ml(q: &MlQuery) -> Result<f64> {
    q.validate()?;
    MittagLeffler::new(q.alpha, q.beta)?.eval_tol(q.z, q.rel_tol)
}

/// Evaluator for a fixed (α, β); cheap to construct, cheap to clone, and
/// safe to share across threads.
#[derive(Debug, Clone)]
pub struct MittagLeffler {
    alpha: f64,
    beta: f64,
    // 1/Γ(β − αk), k = 0, 1, ... for the asymptotic expansion
    asym_rg: Vec<f64>,
    // ln of a smooth envelope of |1/Γ(β − αk)|; steers truncation so that
    // terms sitting near a pole of Γ do not end the sum early
    asym_ln_env: Vec<f64>,
}

impl MittagLeffler {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        MlQuery::new(alpha, beta, 0.0).validate()?;
        let asym_rg = (0..=ASYMPTOTIC_MAX_TERMS)
            .map(|k| rgamma(beta - alpha * k as f64))
            .collect();
        let asym_ln_env = (0..=ASYMPTOTIC_MAX_TERMS)
            .map(|k| {
                let w = beta - alpha * k as f64;
                if w > 0.0 {
                    -ln_gamma(w)
                } else {
                    // 1/Γ(w) = Γ(1−w) sin(πw)/π
                    ln_gamma(1.0 - w) - PI.ln()
                }
            })
            .collect();
        Ok(MittagLeffler {
            alpha,
            beta,
            asym_rg,
            asym_ln_env,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// E_{α,β}(z) at the default tolerance.
    pub fn eval(&self, z: f64) -> Result<f64> {
        self.eval_tol(z, DEFAULT_REL_TOL)
    }

    /// E_{α,β}(z) at relative tolerance `tol`.
    pub fn eval_tol(&self, z: f64, tol: f64) -> Result<f64> {
        self.eval_regime(z, tol).map(|(v, _)| v)
    }

    /// Value together with the regime that produced it.
    pub fn eval_regime(&self, z: f64, tol: f64) -> Result<(f64, MlRegime)> {
        if !z.is_finite() {
            return Err(Error::Domain("z must be finite".into()));
        }
        let tol = tol.max(MIN_REL_TOL);
        let (a, b) = (self.alpha, self.beta);
        if z == 0.0 {
            return Ok((rgamma(b), MlRegime::Series));
        }
        if z.abs() <= 1.0 {
            return self.series(z, tol).map(|v| (v, MlRegime::Series));
        }
        if z > 0.0 {
            return self.positive(z, tol);
        }
        let x = -z;
        if let Some(v) = self.asymptotic(z, tol) {
            return Ok((v, MlRegime::Asymptotic));
        }
        // the alternating series loses about x^{1/α}/ln 10 digits
        if x.powf(1.0 / a) <= 4.0 {
            if let Ok(v) = self.series(z, tol) {
                return Ok((v, MlRegime::Series));
            }
        }
        let v = if a == 1.0 {
            unit_alpha_negative(b, x, tol)?
        } else {
            integral_negative(a, b, x, tol)?
        };
        Ok((v, MlRegime::Integral))
    }

    fn series(&self, z: f64, tol: f64) -> Result<f64> {
        let (a, b) = (self.alpha, self.beta);
        let mut sum = 0.0;
        let mut abs_sum = 0.0;
        let mut zk = 1.0;
        let mut small = 0;
        for k in 0..SERIES_MAX_TERMS {
            let t = zk * rgamma(a * k as f64 + b);
            sum += t;
            abs_sum += t.abs();
            // terms decrease once Γ outgrows |z|^k; require a couple of small ones
            if a * k as f64 + b > 1.0 && t.abs() <= 0.1 * tol * sum.abs() {
                small += 1;
                if small >= 2 {
                    let rounding = 4.0 * f64::EPSILON * abs_sum;
                    if rounding > tol * sum.abs() {
                        return Err(Error::MlNonConvergence {
                            regime: MlRegime::Series,
                            tol,
                            achieved: rounding / sum.abs(),
                        });
                    }
                    return Ok(sum);
                }
            } else {
                small = 0;
            }
            zk *= z;
            if !zk.is_finite() {
                break;
            }
        }
        Err(Error::MlNonConvergence {
            regime: MlRegime::Series,
            tol,
            achieved: f64::NAN,
        })
    }

    /// Algebraic expansion for z → −∞; `None` if it cannot reach `tol`.
    fn asymptotic(&self, z: f64, tol: f64) -> Option<f64> {
        let mut sum: f64 = 0.0;
        let lnx = z.abs().ln();
        let zi = 1.0 / z;
        let mut zk = 1.0;
        let mut last = f64::INFINITY;
        for k in 1..=ASYMPTOTIC_MAX_TERMS {
            zk *= zi;
            let env = (self.asym_ln_env[k] - k as f64 * lnx).exp();
            if sum != 0.0 && env <= 0.1 * tol * sum.abs() {
                return Some(sum);
            }
            if env > last {
                // divergence set in before reaching the tolerance
                return None;
            }
            last = env;
            sum -= zk * self.asym_rg[k];
        }
        None
    }

    fn positive(&self, z: f64, tol: f64) -> Result<(f64, MlRegime)> {
        let (a, b) = (self.alpha, self.beta);
        let zr = z.powf(1.0 / a);
        if zr < 600.0 {
            return self.series(z, tol).map(|v| (v, MlRegime::Series));
        }
        // dominant exponential plus the algebraic tail
        let mut v = zr.powf(1.0 - b) * zr.exp() / a;
        let zi = 1.0 / z;
        let mut zk = 1.0;
        for k in 1..=20 {
            zk *= zi;
            v -= zk * self.asym_rg[k];
        }
        Ok((v, MlRegime::Asymptotic))
    }
}

fn integral_negative(a: f64, b: f64, x: f64, tol: f64) -> Result<f64> {
    if b >= 1.0 + a {
        // E_{α,β}(z) = (E_{α,β−α}(z) − 1/Γ(β−α)) / z with z = −x
        let inner = integral_negative(a, b - a, x, tol * 0.1)?;
        return Ok((rgamma(b - a) - inner) / x);
    }
    let p = (1.0 - b) / a;
    let s1 = sin_pi(1.0 - b);
    let s2 = sin_pi(1.0 - b + a);
    let ca = (a * PI).cos();
    let chi_max = INTEGRAL_EXP_CUTOFF.powf(a);
    let kernel = |chi: f64| {
        if chi <= 0.0 {
            return 0.0;
        }
        let num = chi * s1 + x * s2;
        let den = chi * chi + 2.0 * chi * x * ca + x * x;
        chi.powf(p) * (-chi.powf(1.0 / a)).exp() * num / den
    };
    let mut pts = vec![0.0, chi_max];
    for c in [x * ca.abs(), x, 0.5 * chi_max.min(x), 1.0] {
        if c > 0.0 && c < chi_max {
            pts.push(c);
        }
    }
    // near α = 1 the denominator is a narrow Lorentzian centred at −x cos(απ)
    if ca < 0.0 {
        let (c0, w) = (-x * ca, x * sin_pi(a));
        for k in [1.0, 4.0, 16.0, 64.0] {
            for c in [c0 - k * w, c0 + k * w] {
                if c > 0.0 && c < chi_max {
                    pts.push(c);
                }
            }
        }
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup();

    let rtol = (0.1 * tol).max(1e-15);
    let r = if p < 0.0 {
        // χ = s^q removes the integrable singularity χ^p at the origin
        let q = 1.0 / (1.0 + p);
        let spts: Vec<f64> = pts.iter().map(|c| c.powf(1.0 / q)).collect();
        adaptive_gk(
            |s: f64| {
                if s <= 0.0 {
                    0.0
                } else {
                    kernel(s.powf(q)) * q * s.powf(q - 1.0)
                }
            },
            &spts,
            rtol,
            0.0,
            2000,
        )
    } else if ca < 0.0 && -x * ca < chi_max {
        // subtract the Lorentzian peak analytically: the remainder
        // (F(χ) − F(c₀))/D is bounded and odd about c₀
        let (c0, w) = (-x * ca, x * sin_pi(a));
        let f = |chi: f64| chi.powf(p) * (-chi.powf(1.0 / a)).exp() * (chi * s1 + x * s2);
        let f0 = f(c0);
        let peak = f0 * (((chi_max - c0) / w).atan() + (c0 / w).atan()) / w;
        let rest = adaptive_gk(
            |chi: f64| {
                let d = chi - c0;
                (f(chi) - f0) / (d * d + w * w)
            },
            &pts,
            rtol,
            rtol * peak.abs(),
            2000,
        );
        crate::quadrature::Integral {
            value: peak + rest.value,
            ..rest
        }
    } else {
        adaptive_gk(kernel, &pts, rtol, 0.0, 2000)
    };
    let value = r.value / (a * PI);
    // the 0.1 safety factor is a refinement target; the estimate only has to
    // meet the requested tolerance
    if !(r.converged || r.error <= tol * r.value.abs()) || !value.is_finite() {
        return Err(Error::MlNonConvergence {
            regime: MlRegime::Integral,
            tol,
            achieved: (r.error / r.value).abs(),
        });
    }
    Ok(value)
}

/// E_{1,β}(−x) for x > 1.
fn unit_alpha_negative(b: f64, x: f64, tol: f64) -> Result<f64> {
    if b == 1.0 {
        return Ok((-x).exp());
    }
    if b < 1.0 {
        let next = unit_alpha_negative(b + 1.0, x, tol * 0.1)?;
        return Ok(rgamma(b) - x * next);
    }
    // E_{1,β}(z) = 1/Γ(β−1) ∫₀¹ e^{zs} (1−s)^{β−2} ds for β > 1
    let mut pts = vec![0.0, 1.0];
    for c in [1.0 / x, 10.0 / x, 40.0 / x] {
        if c < 1.0 {
            pts.push(c);
        }
    }
    pts.sort_by(f64::total_cmp);
    let rtol = (0.1 * tol).max(1e-15);
    let r = if b >= 2.0 {
        adaptive_gk(|s| (-x * s).exp() * (1.0 - s).powf(b - 2.0), &pts, rtol, 0.0, 2000)
    } else {
        // 1 − s = u^{1/(β−1)} flattens the endpoint singularity
        let e = 1.0 / (b - 1.0);
        let upts: Vec<f64> = pts.iter().rev().map(|s| (1.0 - s).powf(b - 1.0)).collect();
        adaptive_gk(|u| (-x * (1.0 - u.powf(e))).exp() * e, &upts, rtol, 0.0, 2000)
    };
    if !(r.converged || r.error <= tol * r.value.abs()) {
        return Err(Error::MlNonConvergence {
            regime: MlRegime::Integral,
            tol,
            achieved: (r.error / r.value).abs(),
        });
    }
    Ok(r.value * rgamma(b - 1.0))
}

/// Calibrated constant C_α with 0 < E_{α,1}(−x) ≤ C_α/(1+x) for all x ≥ 0.
#[derive(Debug, Clone, Copy)]
pub struct DecayBound {
    pub alpha: f64,
    pub c: f64,
}

impl DecayBound {
    /// 1.05 × max of (1+x)E_{α,1}(−x) over a dense logarithmic grid.
    pub fn calibrate(alpha: f64) -> Result<Self> {
        let e = MittagLeffler::new(alpha, 1.0)?;
        let mut best: f64 = 1.0;
        let n = 600;
        for i in 0..=n {
            let x = 10f64.powf(-6.0 + 16.0 * i as f64 / n as f64);
            best = best.max((1.0 + x) * e.eval(-x)?);
        }
        Ok(DecayBound {
            alpha,
            c: 1.05 * best,
        })
    }

    pub fn holds(&self, x: f64) -> bool {
        match MittagLeffler::new(self.alpha, 1.0).and_then(|e| e.eval(-x)) {
            Ok(v) => v > 0.0 && v <= self.c / (1.0 + x),
            Err(_) => false,
        }
    }
}

/// True iff 0 < E_{α,1}(−x) ≤ C_α/(1+x) with the calibrated C_α.
/// Calibrations are memoised per α.
pub fn ml_e1_decay_bound(alpha: f64, x: f64) -> bool {
    if !(alpha > 0.0 && alpha < 1.0) || !(x >= 0.0) {
        return false;
    }
    static CACHE: OnceLock<Mutex<HashMap<u64, f64>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    let cached = cache.lock().ok().and_then(|m| m.get(&alpha.to_bits()).copied());
    let c = match cached {
        Some(c) => c,
        None => match DecayBound::calibrate(alpha) {
            Ok(b) => {
                if let Ok(mut m) = cache.lock() {
                    m.insert(alpha.to_bits(), b.c);
                }
                b.c
            }
            Err(_) => return false,
        },
    };
    DecayBound { alpha, c }.holds(x)
}
