//! Global minimization of a univariate quartic through the real roots of its
//! derivative.

use std::f64::consts::PI;

use crate::error::{Error, Result};

const NEWTON_STEPS: usize = 5;

/// `r(q) = a q⁴ + b q³ + c q² + d q + e`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuarticPoly {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub e: f64,
}

impl QuarticPoly {
    pub const fn new(a: f64, b: f64, c: f64, d: f64, e: f64) -> Self {
        Self { a, b, c, d, e }
    }

    pub fn eval(&self, q: f64) -> f64 {
        (((self.a * q + self.b) * q + self.c) * q + self.d) * q + self.e
    }

    pub fn derivative(&self, q: f64) -> f64 {
        ((4.0 * self.a * q + 3.0 * self.b) * q + 2.0 * self.c) * q + self.d
    }

    fn second_derivative(&self, q: f64) -> f64 {
        (12.0 * self.a * q + 6.0 * self.b) * q + 2.0 * self.c
    }

    fn is_finite(&self) -> bool {
        [self.a, self.b, self.c, self.d, self.e]
            .iter()
            .all(|v| v.is_finite())
    }
}

/// Minimizer and minimum of a [`QuarticPoly`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuarticMin {
    pub q: f64,
    pub value: f64,
}

/// Global minimizer of `p`. Equal minima resolve to the smallest `q`.
pub fn minimize_quartic(p: &QuarticPoly) -> Result<QuarticMin> {
    if !p.is_finite() {
        return Err(Error::NonFinite);
    }
    let mut p = *p;
    let scale = p.b.abs().max(p.c.abs()).max(p.d.abs()).max(1.0);
    if p.a.abs() <= 1e-12 * scale {
        p.a = 0.0;
    }
    let unbounded = Err(Error::UnboundedBelow {
        a: p.a,
        b: p.b,
        c: p.c,
        d: p.d,
    });

    if p.a < 0.0 {
        return unbounded;
    }
    if p.a == 0.0 {
        if p.b != 0.0 || p.c < 0.0 || (p.c == 0.0 && p.d != 0.0) {
            return unbounded;
        }
        let q = if p.c > 0.0 { -p.d / (2.0 * p.c) } else { 0.0 };
        return Ok(QuarticMin {
            q,
            value: p.eval(q),
        });
    }

    // Monic derivative: q³ + B q² + C q + D.
    let bb = 3.0 * p.b / (4.0 * p.a);
    let cc = p.c / (2.0 * p.a);
    let dd = p.d / (4.0 * p.a);
    let mut candidates = cubic_real_roots(bb, cc, dd);
    for q in candidates.iter_mut() {
        *q = polish(&p, *q);
    }
    candidates.sort_by(|x, y| x.total_cmp(y));

    let mut best = QuarticMin {
        q: candidates[0],
        value: p.eval(candidates[0]),
    };
    for &q in &candidates[1..] {
        let value = p.eval(q);
        let tie = 1e-14 * best.value.abs().max(1.0);
        if value < best.value - tie {
            best = QuarticMin { q, value };
        }
    }
    Ok(best)
}

fn polish(p: &QuarticPoly, mut q: f64) -> f64 {
    let mut g = p.derivative(q);
    for _ in 0..NEWTON_STEPS {
        let h = p.second_derivative(q);
        if g == 0.0 || h == 0.0 {
            break;
        }
        let next = q - g / h;
        let g_next = p.derivative(next);
        if !(g_next.abs() < g.abs()) {
            break;
        }
        q = next;
        g = g_next;
    }
    q
}

/// Real roots of `x³ + b x² + c x + d`, possibly with near-duplicate extras.
fn cubic_real_roots(b: f64, c: f64, d: f64) -> Vec<f64> {
    let shift = b / 3.0;
    // Depressed cubic t³ + p t + r with x = t − b/3.
    let p = c - b * shift;
    let r = 2.0 * shift * shift * shift - c * shift + d;

    if p == 0.0 {
        return vec![(-r).cbrt() - shift];
    }
    let half_r = 0.5 * r;
    let third_p = p / 3.0;
    let disc = half_r * half_r + third_p * third_p * third_p;

    let mut roots = Vec::with_capacity(3);
    if disc > 0.0 {
        // One real root. Pick the cube-root branch that avoids cancellation.
        let u = (-half_r - half_r.signum() * disc.sqrt()).cbrt();
        let t = if u != 0.0 { u - third_p / u } else { 0.0 };
        roots.push(t - shift);
        if p < 0.0 {
            // The would-be double root; a pair near it may have been lost to rounding.
            roots.push(-1.5 * r / p - shift);
        }
    } else {
        let m = 2.0 * (-third_p).sqrt();
        let arg = (3.0 * r / (2.0 * p) * (-3.0 / p).sqrt()).clamp(-1.0, 1.0);
        let theta = arg.acos() / 3.0;
        for k in 0..3 {
            roots.push(m * (theta - 2.0 * PI * k as f64 / 3.0).cos() - shift);
        }
    }
    roots
}
