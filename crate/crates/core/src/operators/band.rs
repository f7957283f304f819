//! Square band matrices and an unpivoted band LU.
//!
//! Every matrix factored here is symmetric positive definite, so Doolittle
//! elimination without pivoting is stable and keeps the band intact.

use crate::error::{Error, Result};
use crate::quad::Neumaier;

#[derive(Clone, Debug)]
pub struct BandMatrix {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, bw: usize) -> Self {
        BandMatrix {
            n,
            bw,
            data: vec![0.0; n * (2 * bw + 1)],
        }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(
            i.abs_diff(j) <= self.bw,
            "({i}, {j}) outside band {}",
            self.bw
        );
        i * (2 * self.bw + 1) + (j + self.bw - i)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i.abs_diff(j) > self.bw {
            0.0
        } else {
            self.data[self.slot(i, j)]
        }
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self.slot(i, j);
        self.data[k] += v;
    }

    fn cols(&self, i: usize) -> std::ops::Range<usize> {
        i.saturating_sub(self.bw)..(i + self.bw + 1).min(self.n)
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        (0..self.n)
            .map(|i| {
                let mut acc = Neumaier::new();
                for j in self.cols(i) {
                    acc.add(self.data[self.slot(i, j)] * x[j]);
                }
                acc.value()
            })
            .collect()
    }

    pub fn factor(&self) -> Result<BandLu> {
        let mut lu = self.clone();
        let n = self.n;
        let bw = self.bw;
        for k in 0..n {
            let pivot = lu.get(k, k);
            if !(pivot.is_finite() && pivot.abs() > f64::MIN_POSITIVE) {
                return Err(Error::Numerical(format!(
                    "singular band factorization: pivot {pivot:e} at row {k}"
                )));
            }
            let last = (k + bw + 1).min(n);
            for i in k + 1..last {
                let s = lu.slot(i, k);
                let factor = lu.data[s] / pivot;
                lu.data[s] = factor;
                if factor == 0.0 {
                    continue;
                }
                for j in k + 1..last {
                    let a = lu.data[lu.slot(k, j)];
                    let t = lu.slot(i, j);
                    lu.data[t] -= factor * a;
                }
            }
        }
        Ok(BandLu { lu })
    }
}

#[derive(Clone, Debug)]
pub struct BandLu {
    lu: BandMatrix,
}

impl BandLu {
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.lu.n;
        assert_eq!(rhs.len(), n);
        let mut y = rhs.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for j in i.saturating_sub(self.lu.bw)..i {
                s -= self.lu.get(i, j) * y[j];
            }
            y[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for j in i + 1..(i + self.lu.bw + 1).min(n) {
                s -= self.lu.get(i, j) * y[j];
            }
            y[i] = s / self.lu.get(i, i);
        }
        y
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_mul(a: &BandMatrix, x: &[f64]) -> Vec<f64> {
        (0..a.size())
            .map(|i| (0..a.size()).map(|j| a.get(i, j) * x[j]).sum())
            .collect()
    }

    #[test]
    fn solves_pentadiagonal_spd_system() {
        let n = 12;
        let mut a = BandMatrix::zeros(n, 2);
        for i in 0..n {
            a.add(i, i, 6.0);
            if i + 1 < n {
                a.add(i, i + 1, -4.0);
                a.add(i + 1, i, -4.0);
            }
            if i + 2 < n {
                a.add(i, i + 2, 1.0);
                a.add(i + 2, i, 1.0);
            }
        }
        let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).sin() + 0.1).collect();
        let b = dense_mul(&a, &x);
        assert_eq!(a.matvec(&x).len(), n);
        let got = a.factor().unwrap().solve(&b);
        for (g, e) in got.iter().zip(&x) {
            assert!((g - e).abs() < 1e-9, "{g} vs {e}");
        }
    }

    #[test]
    fn zero_pivot_is_reported() {
        let a = BandMatrix::zeros(3, 1);
        assert!(a.factor().is_err());
    }
}
