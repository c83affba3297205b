//! Clamped cubic spline on a uniform grid.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CubicSpline {
    x0: f64,
    h: f64,
    y: Vec<f64>,
    m: Vec<f64>,
}

impl CubicSpline {
    /// Builds the spline through `y` sampled at `x0 + i h` with end slopes
    /// `s0` and `s1`.
    pub fn clamped(x0: f64, h: f64, y: Vec<f64>, s0: f64, s1: f64) -> Self {
        let n = y.len();
        assert!(n >= 2 && h > 0.0, "spline needs two nodes and positive spacing");
        let mut diag = vec![0.0; n];
        let mut rhs = vec![0.0; n];
        let off = h / 6.0;
        diag[0] = h / 3.0;
        rhs[0] = (y[1] - y[0]) / h - s0;
        for i in 1..n - 1 {
            diag[i] = 2.0 * h / 3.0;
            rhs[i] = (y[i + 1] - 2.0 * y[i] + y[i - 1]) / h;
        }
        diag[n - 1] = h / 3.0;
        rhs[n - 1] = s1 - (y[n - 1] - y[n - 2]) / h;
        // Thomas algorithm with constant off-diagonal.
        for i in 1..n {
            let w = off / diag[i - 1];
            diag[i] -= w * off;
            rhs[i] -= w * rhs[i - 1];
        }
        let mut m = vec![0.0; n];
        m[n - 1] = rhs[n - 1] / diag[n - 1];
        for i in (0..n - 1).rev() {
            m[i] = (rhs[i] - off * m[i + 1]) / diag[i];
        }
        Self { x0, h, y, m }
    }

    pub fn x_min(&self) -> f64 {
        self.x0
    }

    pub fn x_max(&self) -> f64 {
        self.x0 + self.h * (self.y.len() - 1) as f64
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn nodes(&self) -> &[f64] {
        &self.y
    }

    #[inline]
    fn locate(&self, x: f64) -> (usize, f64, f64) {
        let n = self.y.len();
        let u = ((x - self.x0) / self.h).max(0.0);
        let i = (u as usize).min(n - 2);
        let b = u - i as f64;
        (i, 1.0 - b, b)
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        let (i, a, b) = self.locate(x);
        let h2 = self.h * self.h / 6.0;
        a * self.y[i]
            + b * self.y[i + 1]
            + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[i + 1]) * h2
    }

    pub fn derivative(&self, x: f64) -> f64 {
        let (i, a, b) = self.locate(x);
        (self.y[i + 1] - self.y[i]) / self.h
            + ((1.0 - 3.0 * a * a) * self.m[i] + (3.0 * b * b - 1.0) * self.m[i + 1]) * self.h
                / 6.0
    }

    /// Exact integral of the spline over its whole grid.
    pub fn integral(&self) -> f64 {
        let h = self.h;
        self.y
            .windows(2)
            .zip(self.m.windows(2))
            .map(|(y, m)| 0.5 * h * (y[0] + y[1]) - h * h * h / 24.0 * (m[0] + m[1]))
            .sum()
    }

    pub fn second_derivative(&self, x: f64) -> f64 {
        let (i, a, b) = self.locate(x);
        a * self.m[i] + b * self.m[i + 1]
    }
}
