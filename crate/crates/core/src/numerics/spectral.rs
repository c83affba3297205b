//! FFT helpers using the torus convention `g_k = ∫ g e^{-iks} ds` on [0, 2π).

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

type Plans = HashMap<(usize, bool), Arc<dyn Fft<f64>>>;

thread_local! {
    static PLANS: RefCell<(FftPlanner<f64>, Plans)> = RefCell::new((FftPlanner::new(), HashMap::new()));
}

fn plan(n: usize, forward: bool) -> Arc<dyn Fft<f64>> {
    PLANS.with(|p| {
        let mut p = p.borrow_mut();
        let (planner, cache) = &mut *p;
        cache
            .entry((n, forward))
            .or_insert_with(|| {
                if forward {
                    planner.plan_fft_forward(n)
                } else {
                    planner.plan_fft_inverse(n)
                }
            })
            .clone()
    })
}

/// Position of wavenumber `k` in an FFT-ordered buffer of length `n`.
#[inline]
pub fn index_of(k: i64, n: usize) -> usize {
    k.rem_euclid(n as i64) as usize
}

/// Signed wavenumber stored at FFT index `i`.
#[inline]
pub fn wavenumber(i: usize, n: usize) -> i64 {
    if i <= n / 2 { i as i64 } else { i as i64 - n as i64 }
}

/// Coefficients `g_k` (FFT ordering) of real samples at `s_j = 2πj/n`.
pub fn coefficients(samples: &[f64]) -> Vec<Complex64> {
    let n = samples.len();
    let mut buf: Vec<Complex64> = samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    plan(n, true).process(&mut buf);
    let scale = 2.0 * std::f64::consts::PI / n as f64;
    buf.iter_mut().for_each(|c| *c *= scale);
    buf
}

/// Real samples at `s_j = 2πj/n` of `(1/2π) Σ g_k e^{iks}`; input is FFT-ordered.
pub fn synthesize(mut spectrum: Vec<Complex64>) -> Vec<f64> {
    let n = spectrum.len();
    plan(n, false).process(&mut spectrum);
    let scale = 1.0 / (2.0 * std::f64::consts::PI);
    spectrum.iter().map(|c| c.re * scale).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_coefficients_follow_convention() {
        let n = 16;
        let s: Vec<f64> = (0..n).map(|j| (3.0 * 2.0 * std::f64::consts::PI * j as f64 / n as f64).cos()).collect();
        let c = coefficients(&s);
        assert!((c[3].re - std::f64::consts::PI).abs() < 1e-13);
        assert!((c[index_of(-3, n)].re - std::f64::consts::PI).abs() < 1e-13);
        let back = synthesize(c);
        for (a, b) in back.iter().zip(&s) {
            assert!((a - b).abs() < 1e-14);
        }
        assert_eq!(wavenumber(index_of(-5, 11), 11), -5);
    }
}
