//! Exponential time differencing for `∂_t X = L X + (U - L X)`.
//!
//! `L = -¼(-Δ)^{1/2}` is applied exactly through its semigroup; the remainder
//! is treated explicitly.

use crate::auxfun::AuxTable;
use crate::contour::{
    elastic_force, sobolev_norm, well_stretched_lambda, Contour, ElasticityLaw, LawConfig,
};
use crate::dynamics::{
    velocity_eps_n, velocity_regularized, velocity_unregularized, QuadratureOptions, VelocityField,
};
use crate::error::{Error, Result};
use crate::numerics::spectral::{index_of, wavenumber};
use crate::numerics::{phi1, phi2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::Write;
use std::path::{Path, PathBuf};

/// `e^{-|k| t / 4}`.
pub fn semigroup_multiplier(k: i64, t: f64) -> f64 {
    (-(k.unsigned_abs() as f64) * t / 4.0).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Etd1,
    Etd2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemVariant {
    Exact,
    Regularized { eps: f64 },
    Projected { eps: f64, n: usize },
}

impl ProblemVariant {
    pub fn eps(&self) -> Option<f64> {
        match *self {
            ProblemVariant::Exact => None,
            ProblemVariant::Regularized { eps } | ProblemVariant::Projected { eps, .. } => Some(eps),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveConfig {
    pub dt: f64,
    #[serde(rename = "T")]
    pub t_final: f64,
    pub variant: ProblemVariant,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
    #[serde(default = "default_stride")]
    pub diagnostics_stride: usize,
    #[serde(default)]
    pub law: LawConfig,
    /// Exponent `θ` of the monitored `Ḣ^{2+θ}` norm.
    #[serde(default = "default_theta")]
    pub theta: f64,
    /// Stop when `λ` falls below this fraction of its initial value.
    #[serde(default = "default_lambda_fraction")]
    pub lambda_floor_fraction: f64,
    /// Stop when `‖X‖_{Ḣ^{2+θ}}` exceeds this multiple of its initial value.
    #[serde(default = "default_norm_growth")]
    pub norm_growth_limit: f64,
    /// Source points per target; chosen from `ε` when absent.
    #[serde(default)]
    pub refinement: Option<usize>,
    #[serde(default = "default_resolution")]
    pub resolution: f64,
    /// Kernel feature scale in units of `ε`.
    #[serde(default = "default_feature")]
    pub feature_scale: f64,
}

fn default_scheme() -> Scheme {
    Scheme::Etd2
}
fn default_stride() -> usize {
    1
}
fn default_theta() -> f64 {
    0.5
}
fn default_lambda_fraction() -> f64 {
    0.5
}
fn default_norm_growth() -> f64 {
    10.0
}
fn default_resolution() -> f64 {
    0.1
}
fn default_feature() -> f64 {
    1.0
}

impl EvolveConfig {
    pub fn new(dt: f64, t_final: f64, variant: ProblemVariant) -> Self {
        Self {
            dt,
            t_final,
            variant,
            scheme: Scheme::Etd2,
            diagnostics_stride: 1,
            law: LawConfig::default(),
            theta: 0.5,
            lambda_floor_fraction: 0.5,
            norm_growth_limit: 10.0,
            refinement: None,
            resolution: 0.1,
            feature_scale: 1.0,
        }
    }

    pub fn quadrature(&self) -> QuadratureOptions {
        QuadratureOptions { refinement: self.refinement, resolution: self.resolution, feature_scale: self.feature_scale }
    }

    pub fn validate(&self, contour: &Contour) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.dt > 0.0) || !(self.t_final >= self.dt) {
            return bad(format!("need dt > 0 and T >= dt, got dt = {}, T = {}", self.dt, self.t_final));
        }
        if self.diagnostics_stride == 0 {
            return bad("diagnostics_stride must be positive".into());
        }
        if let Some(eps) = self.variant.eps() {
            if !(eps > 0.0) {
                return bad(format!("ε must be positive, got {eps}"));
            }
        }
        if let ProblemVariant::Projected { n, .. } = self.variant {
            if n == 0 || n > contour.k_max() {
                return bad(format!("N = {n} must lie in 1..={}", contour.k_max()));
            }
            if !ElasticityLaw::from(self.law).is_hookean() {
                return bad("the projected variant needs the Hookean law".into());
            }
        }
        Ok(())
    }
}

/// How a run ended.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Termination {
    Completed,
    BlowUp { time: f64 },
    LambdaFloor { time: f64, lambda: f64 },
    Monitor { time: f64, reason: String },
}

impl Termination {
    pub fn into_result(self) -> Result<()> {
        match self {
            Termination::Completed => Ok(()),
            Termination::BlowUp { time } => Err(Error::BlowUp { time }),
            Termination::LambdaFloor { lambda, .. } => Err(Error::IllPosed { lambda }),
            Termination::Monitor { time, reason } => Err(Error::MonitorTripped { time, reason }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// `‖X_s‖_{L²}`.
    pub stretch_norm: f64,
    pub area: f64,
    pub lambda: f64,
    /// `‖X‖_{Ḣ^{2+θ}}`.
    pub regularity_norm: f64,
    /// Energy rate `-∫ F·U ds` of `E = ½‖X_s‖²`.
    pub dissipation: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub snapshots: Vec<Contour>,
    pub diagnostics: Vec<Diagnostics>,
    pub termination: Termination,
    /// Largest single-step increase of `‖X_s‖_{L²}`.
    pub max_stretch_increase: f64,
    pub steps: usize,
}

impl Trajectory {
    pub fn final_contour(&self) -> &Contour {
        self.snapshots.last().expect("trajectory holds the initial contour")
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["time", "stretch_norm", "energy", "area", "lambda", "regularity_norm", "dissipation"])?;
        for (t, d) in self.times.iter().zip(&self.diagnostics) {
            out.write_record(
                [*t, d.stretch_norm, 0.5 * d.stretch_norm * d.stretch_norm, d.area, d.lambda, d.regularity_norm, d.dissipation]
                    .iter()
                    .map(|v| format!("{v:.17e}")),
            )?;
        }
        out.flush()?;
        Ok(())
    }

    /// Writes `snapshot_NNNN.csv` files and returns their paths.
    pub fn write_snapshots(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut paths = Vec::new();
        for (i, c) in self.snapshots.iter().enumerate() {
            let p = dir.join(format!("snapshot_{i:04}.csv"));
            c.write_csv(std::fs::File::create(&p)?)?;
            paths.push(p);
        }
        Ok(paths)
    }
}

fn forcing(contour: &Contour, u: &VelocityField) -> Result<Vec<[Complex64; 2]>> {
    let m = u.len();
    let k_max = contour.k_max() as i64;
    let [a, b] = u.coefficients();
    let mut out = Vec::with_capacity(2 * k_max as usize + 1);
    for k in -k_max..=k_max {
        let i = index_of(k, m);
        let x = contour.coefficient(k);
        let w = k.abs() as f64 / 4.0;
        let f = [a[i] + x[0] * w, b[i] + x[1] * w];
        if !(f[0].re.is_finite() && f[0].im.is_finite() && f[1].re.is_finite() && f[1].im.is_finite()) {
            return Err(Error::BlowUp { time: f64::NAN });
        }
        out.push(f);
    }
    debug_assert!(m > 2 * k_max as usize && wavenumber(0, m) == 0);
    Ok(out)
}

fn rebuild(contour: &Contour, coeffs: Vec<[Complex64; 2]>) -> Result<Contour> {
    Contour::from_coefficients(contour.k_max(), coeffs)?.with_collocation_count(contour.collocation_count())
}

/// One ETD step. Returns the new contour and the velocity at the old one.
pub fn step_with_velocity<F>(contour: &Contour, velocity: &F, dt: f64, scheme: Scheme) -> Result<(Contour, VelocityField)>
where
    F: Fn(&Contour) -> Result<VelocityField>,
{
    let u0 = velocity(contour)?;
    let n0 = forcing(contour, &u0)?;
    let k_max = contour.k_max() as i64;
    let mut a = Vec::with_capacity(n0.len());
    for (k, n) in (-k_max..=k_max).zip(&n0) {
        let z = -(k.abs() as f64) * dt / 4.0;
        let (e, p1) = (z.exp(), phi1(z) * dt);
        let x = contour.coefficient(k);
        a.push([x[0] * e + n[0] * p1, x[1] * e + n[1] * p1]);
    }
    let a = rebuild(contour, a)?;
    if scheme == Scheme::Etd1 {
        return Ok((a, u0));
    }
    let n1 = forcing(&a, &velocity(&a)?)?;
    let mut out = Vec::with_capacity(n0.len());
    for ((k, n0), n1) in (-k_max..=k_max).zip(&n0).zip(&n1) {
        let z = -(k.abs() as f64) * dt / 4.0;
        let p2 = phi2(z) * dt;
        let x = a.coefficient(k);
        out.push([x[0] + (n1[0] - n0[0]) * p2, x[1] + (n1[1] - n0[1]) * p2]);
    }
    Ok((rebuild(contour, out)?, u0))
}

pub fn step<F>(contour: &Contour, velocity: &F, dt: f64, scheme: Scheme) -> Result<Contour>
where
    F: Fn(&Contour) -> Result<VelocityField>,
{
    step_with_velocity(contour, velocity, dt, scheme).map(|r| r.0)
}

/// Velocity of the requested problem variant.
pub fn velocity_for(
    contour: &Contour,
    variant: ProblemVariant,
    law: &ElasticityLaw,
    table: Option<&AuxTable>,
    opts: &QuadratureOptions,
) -> Result<VelocityField> {
    let need = || table.ok_or_else(|| Error::InvalidParameter("regularized variants need an auxiliary table".into()));
    match variant {
        ProblemVariant::Exact => velocity_unregularized(contour, law, opts),
        ProblemVariant::Regularized { eps } => velocity_regularized(contour, law, eps, need()?, opts),
        ProblemVariant::Projected { eps, n } => velocity_eps_n(contour, eps, n, need()?, opts),
    }
}

fn dissipation(contour: &Contour, law: &ElasticityLaw, u: &VelocityField) -> f64 {
    let f = elastic_force(contour, law, u.len());
    let s: f64 = f.iter().zip(&u.samples).map(|(f, u)| f[0] * u[0] + f[1] * u[1]).sum();
    -s * 2.0 * PI / u.len() as f64
}

fn diagnostics(contour: &Contour, law: &ElasticityLaw, u: &VelocityField, theta: f64) -> Diagnostics {
    Diagnostics {
        stretch_norm: sobolev_norm(contour, 1.0, true),
        area: contour.area(),
        lambda: well_stretched_lambda(contour, 256),
        regularity_norm: sobolev_norm(contour, 2.0 + theta, true),
        dissipation: dissipation(contour, law, u),
    }
}

/// Integrates the chosen variant from `contour0` to time `T`.
///
/// The projected variant starts from `P_N X_0` and is carried with band
/// limit `N`. Runs that blow up, lose stretching, or exceed the regularity
/// bound stop early; the trajectory records why.
pub fn evolve(contour0: &Contour, config: &EvolveConfig, table: Option<&AuxTable>) -> Result<Trajectory> {
    config.validate(contour0)?;
    let law = ElasticityLaw::from(config.law);
    let opts = config.quadrature();
    let mut x = match config.variant {
        ProblemVariant::Projected { n, .. } => contour0.truncated(n).resized(n),
        _ => contour0.clone(),
    };
    let velocity = |c: &Contour| velocity_for(c, config.variant, &law, table, &opts);
    let steps = ((config.t_final / config.dt) - 1e-9).ceil().max(1.0) as usize;
    let dt = config.t_final / steps as f64;

    let mut traj = Trajectory {
        times: Vec::new(),
        snapshots: Vec::new(),
        diagnostics: Vec::new(),
        termination: Termination::Completed,
        max_stretch_increase: f64::NEG_INFINITY,
        steps: 0,
    };
    let lambda0 = well_stretched_lambda(&x, 256);
    if !(lambda0 > 0.0) {
        return Err(Error::IllPosed { lambda: lambda0 });
    }
    let norm0 = sobolev_norm(&x, 2.0 + config.theta, true);
    let mut stretch = sobolev_norm(&x, 1.0, true);
    let mut pending: Option<f64> = Some(0.0);

    for i in 0..steps {
        let t = i as f64 * dt;
        let result = step_with_velocity(&x, &velocity, dt, config.scheme);
        let (next, u) = match result {
            Ok(r) => r,
            Err(Error::BlowUp { .. }) => {
                traj.termination = Termination::BlowUp { time: t };
                break;
            }
            Err(e) => return Err(e),
        };
        if let Some(time) = pending.take() {
            let d = diagnostics(&x, &law, &u, config.theta);
            traj.times.push(time);
            traj.snapshots.push(x.clone());
            traj.diagnostics.push(d);
            if d.lambda < config.lambda_floor_fraction * lambda0 {
                traj.termination = Termination::LambdaFloor { time, lambda: d.lambda };
                break;
            }
            if d.regularity_norm > config.norm_growth_limit * norm0 {
                traj.termination = Termination::Monitor {
                    time,
                    reason: format!("Ḣ^(2+θ) norm grew from {norm0:.3e} to {:.3e}", d.regularity_norm),
                };
                break;
            }
        }
        let s = sobolev_norm(&next, 1.0, true);
        if !s.is_finite() {
            traj.termination = Termination::BlowUp { time: t + dt };
            break;
        }
        traj.max_stretch_increase = traj.max_stretch_increase.max(s - stretch);
        stretch = s;
        x = next;
        traj.steps = i + 1;
        if (i + 1) % config.diagnostics_stride == 0 {
            pending = Some((i + 1) as f64 * dt);
        }
    }
    if let (Some(time), Termination::Completed) = (pending, &traj.termination) {
        match velocity(&x) {
            Ok(u) => {
                let d = diagnostics(&x, &law, &u, config.theta);
                traj.times.push(time);
                traj.snapshots.push(x.clone());
                traj.diagnostics.push(d);
                if d.lambda < config.lambda_floor_fraction * lambda0 {
                    traj.termination = Termination::LambdaFloor { time, lambda: d.lambda };
                }
            }
            Err(Error::BlowUp { .. }) => traj.termination = Termination::BlowUp { time },
            Err(e) => return Err(e),
        }
    }
    Ok(traj)
}

/// Evenly parameterized circle with the `k = ±1` phase and center of
/// `contour` and the same enclosed area.
pub fn best_fit_circle(contour: &Contour) -> Result<Contour> {
    let c1 = contour.coefficient(1);
    let a = (c1[0] + Complex64::i() * c1[1]) * 0.5;
    let phase = if a.norm() > 0.0 { a / a.norm() } else { Complex64::new(1.0, 0.0) };
    let radius = (contour.area().abs() / PI).sqrt();
    let k_max = contour.k_max();
    let zero = Complex64::new(0.0, 0.0);
    let mut coeffs = vec![[zero; 2]; 2 * k_max + 1];
    coeffs[k_max] = contour.coefficient(0);
    let w = phase * (PI * radius);
    coeffs[k_max + 1] = [w, -Complex64::i() * w];
    coeffs[k_max - 1] = [w.conj(), (-Complex64::i() * w).conj()];
    Contour::from_coefficients(k_max, coeffs)?.with_collocation_count(contour.collocation_count())
}

/// `‖X - Y‖` in `Ḣ^γ` or `H^γ` for contours of any band limits.
pub fn distance(a: &Contour, b: &Contour, gamma: f64, homogeneous: bool) -> f64 {
    let k = a.k_max().max(b.k_max());
    let (a, b) = (a.resized(k), b.resized(k));
    let coeffs: Vec<[Complex64; 2]> = (-(k as i64)..=k as i64)
        .map(|j| {
            let (x, y) = (a.coefficient(j), b.coefficient(j));
            [x[0] - y[0], x[1] - y[1]]
        })
        .collect();
    // The difference need not be a valid curve, only a real field.
    match Contour::from_coefficients(k, coeffs) {
        Ok(d) => sobolev_norm(&d, gamma, homogeneous),
        Err(_) => f64::NAN,
    }
}
