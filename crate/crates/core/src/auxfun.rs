//! Auxiliary radial functions `f_1 … f_5` of a pair kernel.
//!
//! For the pair kernel `ϕ = φ∗φ` with `ε = 1`,
//!
//! ```text
//! f_1(x) = 2π ∫_0^x ρ ϕ(ρ) (1 - ρ²/x²) dρ
//! f_2(x) = (4π / x²) ∫_0^x ρ³ ϕ(ρ) dρ
//! f_3 = f_1 - 1,  f_4 = f_2 - f_3,  f_5 = f_2 - 2 f_3
//! ```
//!
//! These agree with the Fourier-side definitions through `J_2` and
//! `J_1 - J_3` Hankel integrals of `|φ̂|²`, which [`AuxMethod::Hankel`]
//! evaluates directly. Beyond the support of `ϕ` the functions are exactly
//! `f_3 = -m_2/x²` and `f_2 = 2 m_2/x²`.

use crate::error::{Error, Result};
use crate::kernels::{Kernel, RadialPrefix, RadialProfile, DEFAULT_CONVOLUTION_NODES};
use crate::numerics::{bessel_j, CubicSpline, Integrator};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::{Read, Write};

pub const DEFAULT_X_MAX: f64 = 40.0;
pub const DEFAULT_TABLE_NODES: usize = 4096;

/// `φ̂(ρ) = 2π ∫ r φ(r) J_0(rρ) dr`.
pub fn fourier_hat_radial(profile: &RadialProfile, rho: f64) -> f64 {
    let q = Integrator::new(1e-16, 1e-12);
    2.0 * PI * q.integrate_pieces(|r| r * profile.eval(r) * bessel_j(0, r * rho), &profile.breakpoints())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AuxMethod {
    /// Running radial moments of `ϕ` (default).
    Moments,
    /// Hankel integrals of `|φ̂|²` truncated at `rho_max`, tabulated on `rho_nodes` points.
    Hankel { rho_max: f64, rho_nodes: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuxOptions {
    pub x_max: f64,
    pub nodes: usize,
    pub convolution_nodes: usize,
    pub method: AuxMethod,
}

impl Default for AuxOptions {
    fn default() -> Self {
        Self {
            x_max: DEFAULT_X_MAX,
            nodes: DEFAULT_TABLE_NODES,
            convolution_nodes: DEFAULT_CONVOLUTION_NODES,
            method: AuxMethod::Moments,
        }
    }
}

/// Header written in front of a serialized table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuxHeader {
    pub kernel_id: String,
    pub x_max: f64,
    pub n: usize,
    pub m1: f64,
    pub m2: f64,
}

/// Tabulated `f_1, f_2, f_3` on `[0, x_max]` with closed-form tails.
#[derive(Debug, Clone)]
pub struct AuxTable {
    header: AuxHeader,
    f1: CubicSpline,
    f2: CubicSpline,
    f3: CubicSpline,
}

/// Which auxiliary function to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AuxFn {
    F1,
    F2,
    F3,
    F4,
    F5,
}

impl AuxFn {
    pub const ALL: [AuxFn; 5] = [AuxFn::F1, AuxFn::F2, AuxFn::F3, AuxFn::F4, AuxFn::F5];

    pub fn index(self) -> usize {
        self as usize + 1
    }

    /// Coefficient `c` of the exact tail `c m_2 / x²`.
    fn tail_coefficient(self) -> f64 {
        match self {
            AuxFn::F1 | AuxFn::F3 => -1.0,
            AuxFn::F2 => 2.0,
            AuxFn::F4 => 3.0,
            AuxFn::F5 => 4.0,
        }
    }
}

/// Builds the table for a radial delta kernel. Non-radial kernels are rejected.
pub fn build_aux_table(kernel: &Kernel, opts: AuxOptions) -> Result<AuxTable> {
    let phi = kernel.as_radial()?;
    match opts.method {
        AuxMethod::Moments => {
            let pair = crate::kernels::self_convolve(phi, opts.convolution_nodes)?;
            AuxTable::from_pair(&pair, phi.name(), opts)
        }
        AuxMethod::Hankel { .. } => AuxTable::from_delta_hankel(phi, opts),
    }
}

fn check_grid(opts: &AuxOptions) -> Result<()> {
    if !(opts.x_max > 0.0) || opts.nodes < 8 {
        return Err(Error::InvalidParameter(format!(
            "aux table needs x_max > 0 and at least 8 nodes, got {} and {}",
            opts.x_max, opts.nodes
        )));
    }
    Ok(())
}

impl AuxTable {
    /// Builds the table from an already tabulated pair kernel `ϕ`.
    pub fn from_pair(pair: &RadialProfile, kernel_id: &str, opts: AuxOptions) -> Result<Self> {
        check_grid(&opts)?;
        let c1 = RadialPrefix::new(pair, |r| r);
        let c3 = RadialPrefix::new(pair, |r| r * r * r);
        let total1 = c1.total();
        let m2 = 2.0 * PI * c3.total();
        let m1 = pair.integral_weighted(2);
        let h = opts.x_max / (opts.nodes - 1) as f64;
        let mut v1 = Vec::with_capacity(opts.nodes);
        let mut v2 = Vec::with_capacity(opts.nodes);
        let mut v3 = Vec::with_capacity(opts.nodes);
        for i in 0..opts.nodes {
            let x = i as f64 * h;
            let (inner3, f2) = if x == 0.0 {
                (0.0, 0.0)
            } else {
                let q = c3.at(x) / (x * x);
                (q, 4.0 * PI * q)
            };
            let f3 = -2.0 * PI * (inner3 + (total1 - c1.at(x)));
            v1.push(1.0 + f3);
            v2.push(f2);
            v3.push(f3);
        }
        let header = AuxHeader { kernel_id: kernel_id.into(), x_max: opts.x_max, n: opts.nodes, m1, m2 };
        Ok(Self::from_nodes(header, v1, v2, v3))
    }

    fn from_delta_hankel(phi: &RadialProfile, opts: AuxOptions) -> Result<Self> {
        check_grid(&opts)?;
        let AuxMethod::Hankel { rho_max, rho_nodes } = opts.method else {
            unreachable!("called with the moment method")
        };
        let dr = rho_max / (rho_nodes - 1) as f64;
        let hat: Vec<f64> = {
            use rayon::prelude::*;
            (0..rho_nodes).into_par_iter().map(|i| fourier_hat_radial(phi, i as f64 * dr).powi(2)).collect()
        };
        let end_slope = (hat[rho_nodes - 1] - hat[rho_nodes - 2]) / dr;
        let big_phi = CubicSpline::clamped(0.0, dr, hat, 0.0, end_slope);
        // Φ(ρ) = Φ(0) - (m2/4) ρ² + O(ρ⁴); Richardson on two small radii.
        let curvature = |d: f64| 4.0 * (fourier_hat_radial(phi, 0.0).powi(2) - fourier_hat_radial(phi, d).powi(2)) / (d * d);
        let m2 = (4.0 * curvature(0.01) - curvature(0.02)) / 3.0;
        let m1 = crate::kernels::cross_moment_m1(phi, phi);
        let h = opts.x_max / (opts.nodes - 1) as f64;
        let rows: Vec<(f64, f64)> = {
            use rayon::prelude::*;
            (0..opts.nodes)
                .into_par_iter()
                .map(|i| {
                    let x = i as f64 * h;
                    if x == 0.0 {
                        return (0.0, 0.0);
                    }
                    let q = Integrator::new(1e-13, 1e-10);
                    let panels: Vec<f64> = {
                        let count = ((x * rho_max / PI).ceil() as usize).clamp(8, 4000);
                        (0..=count).map(|j| j as f64 * rho_max / count as f64).collect()
                    };
                    let f1 = 2.0 * q.integrate_pieces(
                        |r| if r == 0.0 { 0.0 } else { big_phi.eval(r) * bessel_j(2, x * r) / r },
                        &panels,
                    );
                    let f2 = x * q.integrate_pieces(
                        |r| big_phi.eval(r) * (bessel_j(1, x * r) - bessel_j(3, x * r)),
                        &panels,
                    );
                    (f1, f2)
                })
                .collect()
        };
        let v1: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let v2: Vec<f64> = rows.iter().map(|r| r.1).collect();
        let v3: Vec<f64> = v1.iter().map(|f| f - 1.0).collect();
        let header = AuxHeader { kernel_id: phi.name().into(), x_max: opts.x_max, n: opts.nodes, m1, m2 };
        Ok(Self::from_nodes(header, v1, v2, v3))
    }

    fn from_nodes(header: AuxHeader, v1: Vec<f64>, v2: Vec<f64>, v3: Vec<f64>) -> Self {
        let h = header.x_max / (header.n - 1) as f64;
        let x3 = header.x_max.powi(3);
        let m2 = header.m2;
        Self {
            f1: CubicSpline::clamped(0.0, h, v1, 0.0, 2.0 * m2 / x3),
            f2: CubicSpline::clamped(0.0, h, v2, 0.0, -4.0 * m2 / x3),
            f3: CubicSpline::clamped(0.0, h, v3, 0.0, 2.0 * m2 / x3),
            header,
        }
    }

    pub fn header(&self) -> &AuxHeader {
        &self.header
    }

    pub fn m1(&self) -> f64 {
        self.header.m1
    }

    pub fn m2(&self) -> f64 {
        self.header.m2
    }

    pub fn x_max(&self) -> f64 {
        self.header.x_max
    }

    /// Evaluates `f_k(x)`; the functions are even in `x`.
    pub fn eval(&self, which: AuxFn, x: f64) -> f64 {
        let x = x.abs();
        if x > self.header.x_max {
            return match which {
                AuxFn::F1 => 1.0 - self.header.m2 / (x * x),
                _ => which.tail_coefficient() * self.header.m2 / (x * x),
            };
        }
        match which {
            AuxFn::F1 => self.f1.eval(x),
            AuxFn::F2 => self.f2.eval(x),
            AuxFn::F3 => self.f3.eval(x),
            AuxFn::F4 => self.f2.eval(x) - self.f3.eval(x),
            AuxFn::F5 => self.f2.eval(x) - 2.0 * self.f3.eval(x),
        }
    }

    /// `(f_1(x), f_2(x))` for `x >= 0`.
    #[inline]
    pub fn f1_f2(&self, x: f64) -> (f64, f64) {
        if x > self.header.x_max {
            let t = self.header.m2 / (x * x);
            (1.0 - t, 2.0 * t)
        } else {
            (self.f1.eval(x), self.f2.eval(x))
        }
    }

    /// `(f_3(x), f_2(x))` for `x >= 0`.
    #[inline]
    pub fn f3_f2(&self, x: f64) -> (f64, f64) {
        if x > self.header.x_max {
            let t = self.header.m2 / (x * x);
            (-t, 2.0 * t)
        } else {
            (self.f3.eval(x), self.f2.eval(x))
        }
    }

    /// `d^k f / dx^k` for `k <= 2`.
    pub fn derivative(&self, which: AuxFn, order: u32, x: f64) -> f64 {
        let x = x.abs();
        if x > self.header.x_max {
            let c = match which {
                AuxFn::F1 => -1.0,
                other => other.tail_coefficient(),
            } * self.header.m2;
            return match order {
                0 => self.eval(which, x),
                1 => -2.0 * c / x.powi(3),
                _ => 6.0 * c / x.powi(4),
            };
        }
        let d = |s: &CubicSpline| match order {
            0 => s.eval(x),
            1 => s.derivative(x),
            _ => s.second_derivative(x),
        };
        match which {
            AuxFn::F1 => d(&self.f1),
            AuxFn::F2 => d(&self.f2),
            AuxFn::F3 => d(&self.f3),
            AuxFn::F4 => d(&self.f2) - d(&self.f3),
            AuxFn::F5 => d(&self.f2) - 2.0 * d(&self.f3),
        }
    }

    /// `∫_ℝ f_k(x) dx` for `k >= 2`, including the analytic tail.
    pub fn line_integral(&self, which: AuxFn) -> Result<f64> {
        let half = match which {
            AuxFn::F1 => return Err(Error::InvalidParameter("f1 is not integrable".into())),
            AuxFn::F2 => self.f2.integral(),
            AuxFn::F3 => self.f3.integral(),
            AuxFn::F4 => self.f2.integral() - self.f3.integral(),
            AuxFn::F5 => self.f2.integral() - 2.0 * self.f3.integral(),
        };
        let tail = which.tail_coefficient() * self.header.m2 / self.header.x_max;
        Ok(2.0 * (half + tail))
    }

    /// Nodal values `(x, f_1 … f_5)`.
    pub fn rows(&self) -> impl Iterator<Item = [f64; 6]> + '_ {
        let h = self.f1.spacing();
        (0..self.header.n).map(move |i| {
            let (a, b, c) = (self.f1.nodes()[i], self.f2.nodes()[i], self.f3.nodes()[i]);
            [i as f64 * h, a, b, c, b - c, b - 2.0 * c]
        })
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::WriterBuilder::new().flexible(true).from_writer(w);
        out.write_record(["kernel_id", "x_max", "n", "m1", "m2"])?;
        let hd = &self.header;
        out.write_record([hd.kernel_id.clone(), fmt(hd.x_max), hd.n.to_string(), fmt(hd.m1), fmt(hd.m2)])?;
        out.write_record(["x", "f1", "f2", "f3", "f4", "f5"])?;
        for row in self.rows() {
            out.write_record(row.iter().map(|v| fmt(*v)))?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(r);
        let mut records = rdr.records();
        let mut next = || -> Result<csv::StringRecord> {
            records.next().ok_or_else(|| Error::InvalidData("truncated aux table".into()))?.map_err(Error::from)
        };
        let names = next()?;
        if names.iter().collect::<Vec<_>>() != ["kernel_id", "x_max", "n", "m1", "m2"] {
            return Err(Error::InvalidData("aux table header row is malformed".into()));
        }
        let vals = next()?;
        let num = |i: usize| -> Result<f64> {
            vals.get(i)
                .and_then(|v| v.trim().parse().ok())
                .ok_or_else(|| Error::InvalidData(format!("bad header field {i}")))
        };
        let header = AuxHeader {
            kernel_id: vals.get(0).unwrap_or_default().to_string(),
            x_max: num(1)?,
            n: num(2)? as usize,
            m1: num(3)?,
            m2: num(4)?,
        };
        next()?;
        let (mut v1, mut v2, mut v3) = (Vec::new(), Vec::new(), Vec::new());
        let h = header.x_max / (header.n.max(2) - 1) as f64;
        for (i, rec) in records.enumerate() {
            let rec = rec?;
            let row: Vec<f64> = rec
                .iter()
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::InvalidData(format!("row {i}: {e}")))?;
            if row.len() != 6 {
                return Err(Error::InvalidData(format!("row {i} has {} columns", row.len())));
            }
            let consistent = (row[0] - i as f64 * h).abs() <= 1e-9 * header.x_max
                && (row[4] - (row[2] - row[3])).abs() <= 1e-12
                && (row[5] - (row[2] - 2.0 * row[3])).abs() <= 1e-12
                && (row[1] - 1.0 - row[3]).abs() <= 1e-12;
            if !consistent {
                return Err(Error::InvalidData(format!("row {i} is inconsistent")));
            }
            v1.push(row[1]);
            v2.push(row[2]);
            v3.push(row[3]);
        }
        if v1.len() != header.n || header.n < 8 {
            return Err(Error::InvalidData(format!("expected {} rows, found {}", header.n, v1.len())));
        }
        Ok(Self::from_nodes(header, v1, v2, v3))
    }
}

fn fmt(v: f64) -> String {
    format!("{v:.17e}")
}

/// Observed decay constants `sup (1 + x^{k+2}) |f^{(k)}(x)|` and tail exponents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    /// `constants[j][k]` for `f_{j+2}` and derivative order `k`.
    pub constants: [[f64; 3]; 4],
    /// Fitted power-law exponent of `|f_{j+2}|` over the outer half of the table.
    pub tail_exponents: [f64; 4],
    /// `sup x² |f_{j+2}(x)|` over the outer half of the table.
    pub tail_constants: [f64; 4],
}

/// Checks the decay of `f_2 … f_5` and their first two derivatives.
pub fn check_decay(table: &AuxTable) -> DecayReport {
    let mut constants = [[0.0; 3]; 4];
    let mut tail_exponents = [0.0; 4];
    let mut tail_constants = [0.0; 4];
    let fns = [AuxFn::F2, AuxFn::F3, AuxFn::F4, AuxFn::F5];
    let n = table.header.n;
    let h = table.x_max() / (n - 1) as f64;
    for (j, &f) in fns.iter().enumerate() {
        for (k, c) in constants[j].iter_mut().enumerate() {
            // Sample between nodes as well, and past the end of the table.
            let sup = (0..4 * n)
                .map(|i| i as f64 * 0.25 * h + 0.1 * h)
                .chain((1..=50).map(|i| table.x_max() * (1.0 + i as f64)))
                .map(|x| (1.0 + x.powi(k as i32 + 2)) * table.derivative(f, k as u32, x).abs())
                .fold(0.0, f64::max);
            *c = sup;
        }
        let a = 0.5 * table.x_max();
        let b = table.x_max();
        let fa = table.eval(f, a).abs().max(1e-300);
        let fb = table.eval(f, b).abs().max(1e-300);
        tail_exponents[j] = -(fb / fa).ln() / (b / a).ln();
        tail_constants[j] = (0..=100)
            .map(|i| a + (b - a) * i as f64 / 100.0)
            .map(|x| x * x * table.eval(f, x).abs())
            .fold(0.0, f64::max);
    }
    DecayReport { constants, tail_exponents, tail_constants }
}
