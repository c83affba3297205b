//! Closed planar contours stored by truncated Fourier coefficients.

use crate::error::{Error, Result};
use crate::numerics::spectral::{coefficients, index_of, synthesize, wavenumber};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;
use std::io::{Read, Write};
use std::sync::Arc;

pub type Vec2 = [f64; 2];

/// Exponent margin added to the spectral decay of generated test contours.
pub const DECAY_MARGIN: f64 = 0.05;

/// A closed curve `X(s) = (1/2π) Σ_{|k|<=K} X̂_k e^{iks}`, `s ∈ [0, 2π)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Contour {
    k_max: usize,
    /// `coeffs[k + K]` holds `X̂_k` for both components.
    coeffs: Vec<[Complex64; 2]>,
    collocation: usize,
}

impl Contour {
    /// Builds a contour from `X̂_k`, `k = -K..=K`. The reality condition
    /// `X̂_{-k} = conj(X̂_k)` must hold to `1e-12` relative.
    pub fn from_coefficients(k_max: usize, coeffs: Vec<[Complex64; 2]>) -> Result<Self> {
        if coeffs.len() != 2 * k_max + 1 {
            return Err(Error::InvalidData(format!(
                "expected {} coefficients, got {}",
                2 * k_max + 1,
                coeffs.len()
            )));
        }
        let scale = coeffs.iter().flat_map(|c| c.iter().map(|z| z.norm())).fold(0.0, f64::max).max(1.0);
        for k in 0..=k_max {
            for c in 0..2 {
                let a = coeffs[k_max + k][c];
                let b = coeffs[k_max - k][c].conj();
                if !(a.re.is_finite() && a.im.is_finite()) || (a - b).norm() > 1e-12 * scale {
                    return Err(Error::InvalidData(format!("reality condition violated at k = {k}")));
                }
            }
        }
        let mut out = Self { k_max, coeffs, collocation: 4 * k_max + 1 };
        out.symmetrize();
        Ok(out)
    }

    fn symmetrize(&mut self) {
        let k_max = self.k_max;
        for c in 0..2 {
            self.coeffs[k_max][c].im = 0.0;
            for k in 1..=k_max {
                let avg = 0.5 * (self.coeffs[k_max + k][c] + self.coeffs[k_max - k][c].conj());
                self.coeffs[k_max + k][c] = avg;
                self.coeffs[k_max - k][c] = avg.conj();
            }
        }
    }

    /// Fourier interpolant of samples at `s_j = 2πj/m`, truncated to `|k| <= k_max`.
    pub fn from_samples(samples: &[Vec2], k_max: usize) -> Result<Self> {
        let m = samples.len();
        if m < 2 * k_max + 1 {
            return Err(Error::InvalidParameter(format!("{m} samples cannot resolve K = {k_max}")));
        }
        let comp = |c: usize| coefficients(&samples.iter().map(|p| p[c]).collect::<Vec<_>>());
        let (a, b) = (comp(0), comp(1));
        let coeffs = (-(k_max as i64)..=k_max as i64)
            .map(|k| [a[index_of(k, m)], b[index_of(k, m)]])
            .collect();
        let mut out = Self { k_max, coeffs, collocation: 4 * k_max + 1 };
        out.symmetrize();
        Ok(out)
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    /// Number of collocation points `M` used for velocity evaluation.
    pub fn collocation_count(&self) -> usize {
        self.collocation
    }

    pub fn with_collocation_count(mut self, m: usize) -> Result<Self> {
        if m < 2 * self.k_max + 1 {
            return Err(Error::InvalidParameter(format!("M = {m} is below 2K+1 = {}", 2 * self.k_max + 1)));
        }
        self.collocation = m;
        Ok(self)
    }

    /// `X̂_k`, zero outside the stored band.
    pub fn coefficient(&self, k: i64) -> [Complex64; 2] {
        if k.unsigned_abs() as usize > self.k_max {
            [Complex64::new(0.0, 0.0); 2]
        } else {
            self.coeffs[(k + self.k_max as i64) as usize]
        }
    }

    pub fn coefficients(&self) -> &[[Complex64; 2]] {
        &self.coeffs
    }

    pub fn coefficients_mut(&mut self) -> impl Iterator<Item = (i64, &mut [Complex64; 2])> {
        let k_max = self.k_max as i64;
        self.coeffs.iter_mut().enumerate().map(move |(i, c)| (i as i64 - k_max, c))
    }

    /// Samples of `d^order X / ds^order` at `s_j = 2πj/m`.
    pub fn derivative_samples(&self, m: usize, order: u32) -> Vec<Vec2> {
        assert!(m > 2 * self.k_max, "grid of {m} points cannot resolve K = {}", self.k_max);
        let comp = |c: usize| {
            let mut spec = vec![Complex64::new(0.0, 0.0); m];
            for k in -(self.k_max as i64)..=self.k_max as i64 {
                let factor = Complex64::new(0.0, k as f64).powu(order);
                spec[index_of(k, m)] = self.coefficient(k)[c] * factor;
            }
            synthesize(spec)
        };
        let (a, b) = (comp(0), comp(1));
        a.into_iter().zip(b).map(|(x, y)| [x, y]).collect()
    }

    pub fn sample(&self, m: usize) -> Vec<Vec2> {
        self.derivative_samples(m, 0)
    }

    /// `d^order X / ds^order` at an arbitrary parameter value.
    pub fn eval_derivative(&self, s: f64, order: u32) -> Vec2 {
        let mut out = [0.0; 2];
        for k in 1..=self.k_max as i64 {
            let e = Complex64::new(0.0, k as f64 * s).exp() * Complex64::new(0.0, k as f64).powu(order);
            for (c, o) in out.iter_mut().enumerate() {
                *o += 2.0 * (self.coefficient(k)[c] * e).re;
            }
        }
        if order == 0 {
            out[0] += self.coeffs[self.k_max][0].re;
            out[1] += self.coeffs[self.k_max][1].re;
        }
        [out[0] / (2.0 * PI), out[1] / (2.0 * PI)]
    }

    pub fn eval(&self, s: f64) -> Vec2 {
        self.eval_derivative(s, 0)
    }

    /// Projection onto `|k| <= n`.
    pub fn truncated(&self, n: usize) -> Contour {
        let mut out = self.clone();
        for (k, c) in out.coefficients_mut() {
            if k.unsigned_abs() as usize > n {
                *c = [Complex64::new(0.0, 0.0); 2];
            }
        }
        out
    }

    /// Copy with band limit `k_max`, padding with zeros or truncating.
    pub fn resized(&self, k_max: usize) -> Contour {
        let coeffs = (-(k_max as i64)..=k_max as i64).map(|k| self.coefficient(k)).collect();
        Contour { k_max, coeffs, collocation: 4 * k_max + 1 }
    }

    /// Enclosed signed area `½ ∫ X × X' ds`.
    pub fn area(&self) -> f64 {
        let mut sum = 0.0;
        for k in 1..=self.k_max as i64 {
            let c = self.coefficient(k);
            sum += 2.0 * k as f64 * (c[0] * c[1].conj()).im;
        }
        sum / (2.0 * PI)
    }

    /// Arc-length of the curve, by trapezoid on the collocation grid.
    pub fn length(&self) -> f64 {
        let d = self.derivative_samples(self.collocation, 1);
        d.iter().map(|p| p[0].hypot(p[1])).sum::<f64>() * 2.0 * PI / d.len() as f64
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["k", "re_x1", "im_x1", "re_x2", "im_x2"])?;
        for k in -(self.k_max as i64)..=self.k_max as i64 {
            let c = self.coefficient(k);
            out.write_record([
                k.to_string(),
                format!("{:.17e}", c[0].re),
                format!("{:.17e}", c[0].im),
                format!("{:.17e}", c[1].re),
                format!("{:.17e}", c[1].im),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    /// Reads rows `(k, Re X̂¹, Im X̂¹, Re X̂², Im X̂²)`. Rows for negative `k`
    /// may be omitted, in which case they are filled in by conjugation.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let mut rows = std::collections::BTreeMap::new();
        for rec in rdr.records() {
            let rec = rec?;
            if rec.len() != 5 {
                return Err(Error::InvalidData(format!("expected 5 columns, got {}", rec.len())));
            }
            let k: i64 = rec[0].trim().parse().map_err(|_| Error::InvalidData(format!("bad k '{}'", &rec[0])))?;
            let v: Vec<f64> = (1..5)
                .map(|i| rec[i].trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::InvalidData(format!("row k={k}: {e}")))?;
            let c = [Complex64::new(v[0], v[1]), Complex64::new(v[2], v[3])];
            if rows.insert(k, c).is_some() {
                return Err(Error::InvalidData(format!("duplicate row for k = {k}")));
            }
        }
        let k_max = rows.keys().map(|k| k.unsigned_abs() as usize).max().unwrap_or(0);
        let mut coeffs = Vec::with_capacity(2 * k_max + 1);
        for k in -(k_max as i64)..=k_max as i64 {
            let c = match (rows.get(&k), rows.get(&-k)) {
                (Some(c), _) => *c,
                (None, Some(c)) => [c[0].conj(), c[1].conj()],
                (None, None) => [Complex64::new(0.0, 0.0); 2],
            };
            coeffs.push(c);
        }
        Self::from_coefficients(k_max, coeffs)
    }
}

/// `‖X‖_{Ḣ^γ}` (homogeneous) or `‖X‖_{H^γ}` with weight `(1+k²)^γ`.
pub fn sobolev_norm(contour: &Contour, gamma: f64, homogeneous: bool) -> f64 {
    let mut sum = 0.0;
    for k in -(contour.k_max() as i64)..=contour.k_max() as i64 {
        if homogeneous && k == 0 {
            continue;
        }
        let w = if homogeneous { (k.abs() as f64).powf(2.0 * gamma) } else { (1.0 + (k * k) as f64).powf(gamma) };
        let c = contour.coefficient(k);
        sum += w * (c[0].norm_sqr() + c[1].norm_sqr());
    }
    (sum / (2.0 * PI)).sqrt()
}

/// Same norm for a vector field sampled at `s_j = 2πj/m`.
pub fn field_norm(samples: &[Vec2], gamma: f64, homogeneous: bool) -> f64 {
    let m = samples.len();
    let a = coefficients(&samples.iter().map(|p| p[0]).collect::<Vec<_>>());
    let b = coefficients(&samples.iter().map(|p| p[1]).collect::<Vec<_>>());
    let mut sum = 0.0;
    for i in 0..m {
        let k = wavenumber(i, m);
        if homogeneous && k == 0 {
            continue;
        }
        let w = if homogeneous { (k.abs() as f64).powf(2.0 * gamma) } else { (1.0 + (k * k) as f64).powf(gamma) };
        sum += w * (a[i].norm_sqr() + b[i].norm_sqr());
    }
    (sum / (2.0 * PI)).sqrt()
}

/// Tension law `S(p, s)` with `p = |X'(s)|`.
#[derive(Clone)]
pub enum ElasticityLaw {
    /// `S = k`.
    Hookean { k: f64 },
    /// `S = k / p`, so that the force is `k` times the curvature vector.
    Curvature { k: f64 },
    /// `S = k (1 - p0 / p)`.
    Linear { k: f64, p0: f64 },
    Custom(Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for ElasticityLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Hookean { k } => write!(f, "Hookean {{ k: {k} }}"),
            Self::Curvature { k } => write!(f, "Curvature {{ k: {k} }}"),
            Self::Linear { k, p0 } => write!(f, "Linear {{ k: {k}, p0: {p0} }}"),
            Self::Custom(_) => write!(f, "Custom"),
        }
    }
}

impl Default for ElasticityLaw {
    fn default() -> Self {
        Self::Hookean { k: 1.0 }
    }
}

impl ElasticityLaw {
    #[inline]
    pub fn tension(&self, p: f64, s: f64) -> f64 {
        match self {
            Self::Hookean { k } => *k,
            Self::Curvature { k } => k / p,
            Self::Linear { k, p0 } => k * (1.0 - p0 / p),
            Self::Custom(f) => f(p, s),
        }
    }

    pub fn is_hookean(&self) -> bool {
        matches!(self, Self::Hookean { .. })
    }
}

/// Serializable description of the built-in tension laws.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum LawConfig {
    Hookean { k: f64 },
    Curvature { k: f64 },
    Linear { k: f64, p0: f64 },
}

impl Default for LawConfig {
    fn default() -> Self {
        LawConfig::Hookean { k: 1.0 }
    }
}

impl From<LawConfig> for ElasticityLaw {
    fn from(c: LawConfig) -> Self {
        match c {
            LawConfig::Hookean { k } => Self::Hookean { k },
            LawConfig::Curvature { k } => Self::Curvature { k },
            LawConfig::Linear { k, p0 } => Self::Linear { k, p0 },
        }
    }
}

/// Secant quantities used by the velocity kernels, with `d = X(s') - X(s)`:
/// `A = X'(s')·d`, `B = X'(s')·d^⊥`, `D = |d|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecantSample {
    pub a: f64,
    pub b: f64,
    pub d: f64,
}

pub fn secants(contour: &Contour, s: f64, s_prime: f64) -> SecantSample {
    let x = contour.eval(s);
    let y = contour.eval(s_prime);
    let t = contour.eval_derivative(s_prime, 1);
    let d = [y[0] - x[0], y[1] - x[1]];
    SecantSample { a: t[0] * d[0] + t[1] * d[1], b: -t[0] * d[1] + t[1] * d[0], d: d[0].hypot(d[1]) }
}

/// Elastic force `F = ∂_s (S(|X'|, s) X')` sampled at `s_j = 2πj/m`.
pub fn elastic_force(contour: &Contour, law: &ElasticityLaw, m: usize) -> Vec<Vec2> {
    if let ElasticityLaw::Hookean { k } = law {
        return contour.derivative_samples(m, 2).into_iter().map(|p| [k * p[0], k * p[1]]).collect();
    }
    // Resolve the nonlinear tension on a finer grid before differentiating.
    let fine = (4 * m).max(8 * contour.k_max() + 1);
    let d = contour.derivative_samples(fine, 1);
    let t: Vec<Vec2> = d
        .iter()
        .enumerate()
        .map(|(j, p)| {
            let s = 2.0 * PI * j as f64 / fine as f64;
            let tau = law.tension(p[0].hypot(p[1]), s);
            [tau * p[0], tau * p[1]]
        })
        .collect();
    let comp = |c: usize| {
        let spec = coefficients(&t.iter().map(|p| p[c]).collect::<Vec<_>>());
        let mut out = vec![Complex64::new(0.0, 0.0); m];
        let band = ((m - 1) / 2) as i64;
        for k in -band..=band {
            out[index_of(k, m)] = spec[index_of(k, fine)] * Complex64::new(0.0, k as f64);
        }
        synthesize(out)
    };
    let (a, b) = (comp(0), comp(1));
    a.into_iter().zip(b).map(|(x, y)| [x, y]).collect()
}

/// `|X(s1) - X(s2)| / |s1 - s2|_𝕋` at offset `tau ∈ (0, π]`, with the
/// `tau → 0` limit `|X'(s1)|`.
fn stretch_ratio(contour: &Contour, s: f64, tau: f64) -> f64 {
    if tau < 1e-9 {
        let d = contour.eval_derivative(s, 1);
        return d[0].hypot(d[1]);
    }
    let a = contour.eval(s);
    let b = contour.eval(s + tau);
    (a[0] - b[0]).hypot(a[1] - b[1]) / tau
}

fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, iters: usize) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..iters {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    if fc < fd { (c, fc) } else { (d, fd) }
}

/// Well-stretched constant `λ = inf |X(s1)-X(s2)| / |s1-s2|_𝕋`.
///
/// A grid search over `grid` points is refined by alternating golden-section
/// searches around the best pair.
pub fn well_stretched_lambda(contour: &Contour, grid: usize) -> f64 {
    let grid = grid.max(16);
    let pts = contour.sample(grid.max(2 * contour.k_max() + 1));
    let m = pts.len();
    let d = contour.derivative_samples(m, 1);
    let h = 2.0 * PI / m as f64;
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for i in 0..m {
        let p = d[i][0].hypot(d[i][1]);
        if p < best.0 {
            best = (p, i as f64 * h, 0.0);
        }
        for off in 1..=m / 2 {
            let j = (i + off) % m;
            let r = (pts[i][0] - pts[j][0]).hypot(pts[i][1] - pts[j][1]) / (off as f64 * h);
            if r < best.0 {
                best = (r, i as f64 * h, off as f64 * h);
            }
        }
    }
    let (mut val, mut s, mut tau) = best;
    for _ in 0..6 {
        let (ns, nv) = golden_min(|x| stretch_ratio(contour, x, tau), s - h, s + h, 40);
        if nv < val {
            val = nv;
            s = ns;
        }
        let lo = (tau - h).max(0.0);
        let hi = (tau + h).min(PI);
        let (nt, nv) = golden_min(|t| stretch_ratio(contour, s, t), lo, hi, 40);
        if nv < val {
            val = nv;
            tau = nt;
        }
        let edge = stretch_ratio(contour, s, hi);
        if edge < val {
            val = edge;
            tau = hi;
        }
    }
    val
}

/// Rejects contours whose parameterization degenerates or self-intersects.
pub fn validate(contour: &Contour, lambda_floor: f64) -> Result<f64> {
    let m = contour.collocation_count();
    for (j, p) in contour.derivative_samples(m, 1).iter().enumerate() {
        if p[0].hypot(p[1]) < 1e-10 {
            return Err(Error::DegenerateParameterization { s: 2.0 * PI * j as f64 / m as f64 });
        }
    }
    let lambda = well_stretched_lambda(contour, 256);
    if lambda < lambda_floor {
        return Err(Error::IllPosed { lambda });
    }
    Ok(lambda)
}

/// Generated test contours.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum TestContour {
    Circle { radius: f64, k_max: usize },
    Ellipse { a: f64, b: f64, k_max: usize },
    /// Unit circle plus random-phase modes `2 <= |k| <= K` of amplitude
    /// `amplitude · |k|^-(5/2 + θ + 0.05)`, so the curve lies in `H^{2+θ}`.
    PerturbedCircle { theta: f64, amplitude: f64, seed: u64, k_max: usize },
}

pub fn make_test_contour(kind: TestContour) -> Result<Contour> {
    let zero = Complex64::new(0.0, 0.0);
    let (k_max, mut coeffs) = match kind {
        TestContour::Circle { k_max, .. } | TestContour::Ellipse { k_max, .. } | TestContour::PerturbedCircle { k_max, .. } => {
            if k_max < 1 {
                return Err(Error::InvalidParameter("k_max must be at least 1".into()));
            }
            (k_max, vec![[zero; 2]; 2 * k_max + 1])
        }
    };
    let (a, b) = match kind {
        TestContour::Circle { radius, .. } => (radius, radius),
        TestContour::Ellipse { a, b, .. } => (a, b),
        TestContour::PerturbedCircle { .. } => (1.0, 1.0),
    };
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::InvalidParameter("radii must be positive".into()));
    }
    coeffs[k_max + 1] = [Complex64::new(PI * a, 0.0), Complex64::new(0.0, -PI * b)];
    coeffs[k_max - 1] = [Complex64::new(PI * a, 0.0), Complex64::new(0.0, PI * b)];
    if let TestContour::PerturbedCircle { theta, amplitude, seed, .. } = kind {
        if !(0.0..=1.0).contains(&theta) || !(amplitude >= 0.0) {
            return Err(Error::InvalidParameter("need θ ∈ [0, 1] and amplitude >= 0".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let power = 2.5 + theta + DECAY_MARGIN;
        for k in 2..=k_max {
            let size = PI * amplitude * (k as f64).powf(-power);
            for c in 0..2 {
                let phase: f64 = rng.random_range(0.0..2.0 * PI);
                let z = Complex64::from_polar(size, phase);
                coeffs[k_max + k][c] = z;
                coeffs[k_max - k][c] = z.conj();
            }
        }
    }
    Contour::from_coefficients(k_max, coeffs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn perturbed(k_max: usize) -> Contour {
        make_test_contour(TestContour::PerturbedCircle { theta: 0.5, amplitude: 0.1, seed: 7, k_max }).unwrap()
    }

    #[test]
    fn circle_geometry() {
        let c = make_test_contour(TestContour::Circle { radius: 2.0, k_max: 8 }).unwrap();
        assert!((c.area() - 4.0 * PI).abs() < 1e-12);
        assert!((c.length() - 4.0 * PI).abs() < 1e-12);
        let p = c.eval(0.3);
        assert!((p[0] - 2.0 * 0.3f64.cos()).abs() < 1e-14 && (p[1] - 2.0 * 0.3f64.sin()).abs() < 1e-14);
        // ‖X‖_{Ḣ¹}² = (1/2π) Σ k² |X̂_k|² = 2π R² for a circle of radius R.
        assert!((sobolev_norm(&c, 1.0, true) - (2.0 * PI * 4.0f64).sqrt()).abs() < 1e-12);
        assert!((well_stretched_lambda(&c, 128) - 4.0 / PI).abs() < 1e-9);
    }

    #[test]
    fn ellipse_lambda_matches_dense_search() {
        let c = make_test_contour(TestContour::Ellipse { a: 1.5, b: 0.6, k_max: 4 }).unwrap();
        let n = 100;
        let mut dense = f64::INFINITY;
        for i in 0..n {
            for j in 1..=n / 2 {
                let s = 2.0 * PI * i as f64 / n as f64;
                let t = 2.0 * PI * j as f64 / n as f64;
                dense = dense.min(stretch_ratio(&c, s, t));
            }
        }
        let lam = well_stretched_lambda(&c, 64);
        assert!(lam <= dense + 1e-12 && lam > 0.999 * dense, "{lam} vs {dense}");
    }

    #[test]
    fn perturbed_circle_is_well_stretched() {
        let c = perturbed(128);
        let lam = well_stretched_lambda(&c, 512);
        assert!(lam >= 0.5, "λ = {lam}");
        let lam2 = well_stretched_lambda(&c, 2048);
        assert!((lam - lam2).abs() < 0.01 * lam);
    }

    #[test]
    fn self_intersecting_curve_has_tiny_lambda() {
        // Figure-eight: X = (sin s, sin 2s) crosses itself at the origin.
        let z = Complex64::new(0.0, 0.0);
        let mut coeffs = vec![[z; 2]; 5];
        coeffs[3][0] = Complex64::new(0.0, -PI);
        coeffs[1][0] = Complex64::new(0.0, PI);
        coeffs[4][1] = Complex64::new(0.0, -PI);
        coeffs[0][1] = Complex64::new(0.0, PI);
        let c = Contour::from_coefficients(2, coeffs).unwrap();
        assert!(well_stretched_lambda(&c, 128) < 1e-6);
        assert!(matches!(validate(&c, 1e-3), Err(Error::IllPosed { .. })));
    }

    #[test]
    fn reality_condition_is_enforced() {
        let c = perturbed(6);
        let mut coeffs = c.coefficients().to_vec();
        coeffs[2][1] += Complex64::new(0.0, 0.5);
        assert!(Contour::from_coefficients(6, coeffs).is_err());
    }

    #[test]
    fn csv_round_trip_and_half_spectrum() {
        let c = perturbed(10);
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        assert_eq!(Contour::read_csv(buf.as_slice()).unwrap(), c);
        let text = String::from_utf8(buf).unwrap();
        let half: Vec<&str> = text.lines().filter(|l| !l.starts_with('-')).collect();
        assert_eq!(Contour::read_csv(half.join("\n").as_bytes()).unwrap(), c);
    }

    #[test]
    fn curvature_force_is_normal() {
        let c = perturbed(16);
        let m = c.collocation_count();
        let f = elastic_force(&c, &ElasticityLaw::Curvature { k: 1.0 }, m);
        let t = c.derivative_samples(m, 1);
        let tangential = f.iter().zip(&t).map(|(f, t)| (f[0] * t[0] + f[1] * t[1]).abs()).fold(0.0, f64::max);
        assert!(tangential < 1e-5, "{tangential}");
    }

    #[test]
    fn nonlinear_law_matches_hookean_when_constant() {
        let c = perturbed(16);
        let m = c.collocation_count();
        let a = elastic_force(&c, &ElasticityLaw::Hookean { k: 2.0 }, m);
        let b = elastic_force(&c, &ElasticityLaw::Custom(Arc::new(|_, _| 2.0)), m);
        for (x, y) in a.iter().zip(&b) {
            assert!((x[0] - y[0]).abs() < 1e-10 && (x[1] - y[1]).abs() < 1e-10);
        }
    }

    #[test]
    fn secants_on_circle() {
        let c = make_test_contour(TestContour::Circle { radius: 1.0, k_max: 4 }).unwrap();
        let s = secants(&c, 0.0, 1.0);
        assert!((s.d - 2.0 * 0.5f64.sin()).abs() < 1e-14);
        // On a circle X'(s')·(X(s')-X(s)) = sin(s'-s).
        assert!((s.a - 1.0f64.sin()).abs() < 1e-14);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn sampling_round_trips(seed in 0u64..1000, k in 2usize..24) {
            let c = make_test_contour(TestContour::PerturbedCircle { theta: 0.5, amplitude: 0.3, seed, k_max: k }).unwrap();
            let back = Contour::from_samples(&c.sample(4 * k + 1), k).unwrap();
            for (a, b) in c.coefficients().iter().zip(back.coefficients()) {
                prop_assert!((a[0] - b[0]).norm() < 1e-12 && (a[1] - b[1]).norm() < 1e-12);
            }
        }

        #[test]
        fn norms_are_monotone_in_order(seed in 0u64..1000, g in 0.0f64..2.0) {
            let c = make_test_contour(TestContour::PerturbedCircle { theta: 0.5, amplitude: 0.3, seed, k_max: 12 }).unwrap();
            prop_assert!(sobolev_norm(&c, g, true) <= sobolev_norm(&c, g + 0.5, true) + 1e-12);
            let samples = c.sample(c.collocation_count());
            prop_assert!((field_norm(&samples, g, false) - sobolev_norm(&c, g, false)).abs() < 1e-10);
        }

        #[test]
        fn area_is_translation_invariant(dx in -3.0f64..3.0, dy in -3.0f64..3.0, seed in 0u64..50) {
            let c = make_test_contour(TestContour::PerturbedCircle { theta: 0.5, amplitude: 0.3, seed, k_max: 8 }).unwrap();
            let mut moved = c.clone();
            for (k, co) in moved.coefficients_mut() {
                if k == 0 {
                    co[0] += 2.0 * PI * dx;
                    co[1] += 2.0 * PI * dy;
                }
            }
            prop_assert!((moved.area() - c.area()).abs() < 1e-12);
            prop_assert!((moved.eval(0.4)[0] - c.eval(0.4)[0] - dx).abs() < 1e-12);
        }
    }
}
