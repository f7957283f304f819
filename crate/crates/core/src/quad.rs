//! Summation and one-dimensional quadrature helpers.

use std::num::NonZeroUsize;
use std::sync::OnceLock;

use gauss_quad::GaussLegendre;

/// Compensated (Neumaier) accumulator.
#[derive(Clone, Copy, Debug, Default)]
pub struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

pub fn neumaier_sum<I: IntoIterator<Item = f64>>(items: I) -> f64 {
    let mut acc = Neumaier::new();
    for x in items {
        acc.add(x);
    }
    acc.value()
}

/// Weighted sum `Σ wᵢ·f(uᵢ)` with compensation.
pub fn weighted_sum(weights: &[f64], values: &[f64], f: impl Fn(f64) -> f64) -> f64 {
    neumaier_sum(weights.iter().zip(values).map(|(w, &u)| w * f(u)))
}

fn gl8() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(NonZeroUsize::new(8).expect("8 is non-zero")))
}

/// Eight-point Gauss–Legendre rule on `[a, b]`.
pub fn gauss_legendre_8(a: f64, b: f64, f: impl FnMut(f64) -> f64) -> f64 {
    gl8().integrate(a, b, f)
}

/// Composite eight-point Gauss–Legendre rule with `panels` equal panels.
pub fn composite_gl8(a: f64, b: f64, panels: usize, mut f: impl FnMut(f64) -> f64) -> f64 {
    let panels = panels.max(1);
    let h = (b - a) / panels as f64;
    let mut acc = Neumaier::new();
    for k in 0..panels {
        let lo = a + k as f64 * h;
        let hi = if k + 1 == panels { b } else { lo + h };
        acc.add(gauss_legendre_8(lo, hi, &mut f));
    }
    acc.value()
}

/// Tanh-sinh quadrature; tolerates integrable endpoint singularities.
pub fn adaptive(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    quadrature::double_exponential::integrate(f, a, b, tol).integral
}
