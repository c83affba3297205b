//! Smooth delta kernels, their self-convolutions and moments.
//!
//! A delta kernel is a normalized radial profile `φ` with compact support.
//! The regularized model interacts through the pair kernel `ϕ = φ∗φ`, so
//! the moments reported here are moments of `ϕ`.

use crate::error::{Error, Result};
use crate::numerics::{elliptic_e, gauss_legendre, CubicSpline, Integrator};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Default number of radial nodes used to tabulate a self-convolution.
pub const DEFAULT_CONVOLUTION_NODES: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Smoothness {
    Infinite,
    Finite(u32),
}

#[derive(Debug, Clone)]
enum Shape {
    /// `exp(-1/(1-r^2))` on the unit disk.
    Bump,
    /// `r^-2 inner(x / r)`.
    Scaled(Box<Shape>, f64),
    Sum(Vec<(f64, Shape)>),
    /// Samples on `[0, support]`, zero beyond.
    Table(CubicSpline),
}

impl Shape {
    fn eval(&self, rho: f64) -> f64 {
        match self {
            Shape::Bump => {
                if rho >= 1.0 {
                    0.0
                } else {
                    (-1.0 / (1.0 - rho * rho)).exp()
                }
            }
            Shape::Scaled(inner, r) => inner.eval(rho / r) / (r * r),
            Shape::Sum(terms) => terms.iter().map(|(a, s)| a * s.eval(rho)).sum(),
            Shape::Table(spline) => {
                if rho >= spline.x_max() {
                    0.0
                } else {
                    spline.eval(rho)
                }
            }
        }
    }

    fn support(&self) -> f64 {
        match self {
            Shape::Bump => 1.0,
            Shape::Scaled(inner, r) => inner.support() * r,
            Shape::Sum(terms) => terms.iter().map(|(_, s)| s.support()).fold(0.0, f64::max),
            Shape::Table(spline) => spline.x_max(),
        }
    }

    fn breakpoints(&self, out: &mut Vec<f64>) {
        match self {
            Shape::Scaled(inner, r) => {
                let mut tmp = Vec::new();
                inner.breakpoints(&mut tmp);
                out.extend(tmp.into_iter().map(|b| b * r));
            }
            Shape::Sum(terms) => terms.iter().for_each(|(_, s)| s.breakpoints(out)),
            _ => out.push(self.support()),
        }
    }
}

/// A radially symmetric profile with compact support.
#[derive(Debug, Clone)]
pub struct RadialProfile {
    shape: Shape,
    name: String,
    support: f64,
    normalization: f64,
    smoothness: Smoothness,
    feature_scale: f64,
}

impl RadialProfile {
    fn from_shape(shape: Shape, name: String, smoothness: Smoothness, feature_scale: f64) -> Self {
        let support = shape.support();
        let mut p = Self { shape, name, support, normalization: 1.0, smoothness, feature_scale };
        p.normalization = p.integral_weighted(1);
        p
    }

    /// The standard bump `Z exp(-1/(1-|x|^2))` normalized to unit mass.
    pub fn bump() -> Self {
        let raw = Self::from_shape(Shape::Bump, "bump".into(), Smoothness::Infinite, 1.0);
        let z = 1.0 / raw.normalization;
        Self::from_shape(
            Shape::Sum(vec![(z, Shape::Bump)]),
            "bump".into(),
            Smoothness::Infinite,
            1.0,
        )
    }

    /// `r^-2 φ(x / r)`, which keeps the mass and shrinks the support by `r`.
    pub fn scaled(&self, r: f64) -> Result<Self> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::InvalidParameter(format!("scale must be positive, got {r}")));
        }
        Ok(Self::from_shape(
            Shape::Scaled(Box::new(self.shape.clone()), r),
            format!("{}@{r}", self.name),
            self.smoothness,
            self.feature_scale * r,
        ))
    }

    /// A linear combination `Σ a_i φ_i` of radial profiles.
    pub fn combine(name: &str, terms: &[(f64, &RadialProfile)]) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::InvalidParameter("empty combination".into()));
        }
        let smoothness = terms
            .iter()
            .map(|(_, p)| p.smoothness)
            .min_by_key(|s| match s {
                Smoothness::Infinite => u32::MAX,
                Smoothness::Finite(k) => *k,
            })
            .unwrap_or(Smoothness::Infinite);
        let scale = terms.iter().map(|(_, p)| p.feature_scale).fold(f64::INFINITY, f64::min);
        let shape = Shape::Sum(terms.iter().map(|(a, p)| (*a, p.shape.clone())).collect());
        Ok(Self::from_shape(shape, name.into(), smoothness, scale))
    }

    /// A profile given by samples on a uniform grid over `[0, support]`.
    /// The profile must be flat at both ends.
    pub fn tabulated(name: &str, support: f64, values: Vec<f64>, feature_scale: f64) -> Result<Self> {
        if values.len() < 4 || !(support > 0.0) {
            return Err(Error::InvalidParameter("table needs four nodes and positive support".into()));
        }
        let h = support / (values.len() - 1) as f64;
        let spline = CubicSpline::clamped(0.0, h, values, 0.0, 0.0);
        Ok(Self::from_shape(Shape::Table(spline), name.into(), Smoothness::Infinite, feature_scale))
    }

    #[inline]
    pub fn eval(&self, rho: f64) -> f64 {
        self.shape.eval(rho.abs())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn support_radius(&self) -> f64 {
        self.support
    }

    /// `∫ φ dx` over the plane.
    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    pub fn smoothness(&self) -> Smoothness {
        self.smoothness
    }

    /// Smallest length scale on which the profile varies.
    pub fn feature_scale(&self) -> f64 {
        self.feature_scale
    }

    /// Sorted radii where adaptive quadrature should split panels.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b = vec![0.0];
        self.shape.breakpoints(&mut b);
        b.retain(|&x| x <= self.support);
        b.sort_by(f64::total_cmp);
        b.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
        b
    }

    /// `2π ∫ ρ^k φ(ρ) dρ`, the plane integral of `|x|^(k-1) φ`.
    pub fn integral_weighted(&self, k: i32) -> f64 {
        match &self.shape {
            Shape::Table(spline) => 2.0 * PI * spline_moment(spline, k),
            _ => {
                let q = Integrator::new(1e-16, 1e-13);
                2.0 * PI * q.integrate_pieces(|r| r.powi(k) * self.eval(r), &self.breakpoints())
            }
        }
    }

    /// The profile sampled on `nodes` uniform radii over its support.
    pub fn samples(&self, nodes: usize) -> Vec<(f64, f64)> {
        let h = self.support / (nodes - 1) as f64;
        (0..nodes).map(|i| (i as f64 * h, self.eval(i as f64 * h))).collect()
    }
}

/// Running integrals `x ↦ ∫_0^x w(ρ) φ(ρ) dρ` of a radial profile.
///
/// Panels follow the knots of tabulated profiles, so polynomial weights are
/// integrated exactly.
pub struct RadialPrefix<'a, W: Fn(f64) -> f64> {
    profile: &'a RadialProfile,
    weight: W,
    h: f64,
    prefix: Vec<f64>,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl<'a, W: Fn(f64) -> f64> RadialPrefix<'a, W> {
    pub fn new(profile: &'a RadialProfile, weight: W) -> Self {
        let panels = match &profile.shape {
            Shape::Table(s) => s.nodes().len() - 1,
            _ => 4096,
        };
        let h = profile.support / panels as f64;
        let (nodes, weights) = gauss_legendre(6);
        let mut p = Self { profile, weight, h, prefix: Vec::with_capacity(panels + 1), nodes, weights };
        let mut acc = 0.0;
        p.prefix.push(0.0);
        for i in 0..panels {
            acc += p.panel(i as f64 * h, (i + 1) as f64 * h);
            p.prefix.push(acc);
        }
        p
    }

    fn panel(&self, a: f64, b: f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| {
                let t = mid + half * x;
                w * (self.weight)(t) * self.profile.eval(t)
            })
            .sum::<f64>()
            * half
    }

    /// `∫_0^x w φ dρ`; saturates beyond the support.
    pub fn at(&self, x: f64) -> f64 {
        let x = x.max(0.0);
        if x >= self.profile.support {
            return *self.prefix.last().unwrap_or(&0.0);
        }
        let i = ((x / self.h) as usize).min(self.prefix.len() - 2);
        let a = i as f64 * self.h;
        self.prefix[i] + self.panel(a, x)
    }

    pub fn total(&self) -> f64 {
        *self.prefix.last().unwrap_or(&0.0)
    }
}

/// `∫_0^R ρ^k s(ρ) dρ` of a cubic spline, exact panel by panel.
fn spline_moment(spline: &CubicSpline, k: i32) -> f64 {
    let (gx, gw) = gauss_legendre(5);
    let h = spline.spacing();
    let n = spline.nodes().len() - 1;
    let mut total = 0.0;
    for i in 0..n {
        let a = i as f64 * h;
        for (x, w) in gx.iter().zip(&gw) {
            let t = a + 0.5 * h * (x + 1.0);
            total += 0.5 * h * w * t.powi(k) * spline.eval(t);
        }
    }
    total
}

/// `δ_ε(x) = ε^-2 φ(x / ε)`.
pub fn delta_eps(profile: &RadialProfile, eps: f64, x: [f64; 2]) -> f64 {
    profile.eval(x[0].hypot(x[1]) / eps) / (eps * eps)
}

/// `(f∗g)(R)` for radial profiles, by nested adaptive quadrature.
pub fn convolve_at(f: &RadialProfile, g: &RadialProfile, big_r: f64) -> f64 {
    let outer = Integrator::new(1e-15, 1e-12);
    let inner = Integrator::new(1e-16, 1e-13);
    let cg = g.support_radius();
    let lo = (big_r - cg).max(0.0);
    let hi = f.support_radius().min(big_r + cg);
    if hi <= lo {
        return 0.0;
    }
    let ring = |r: f64| -> f64 {
        if big_r == 0.0 || r == 0.0 {
            return 2.0 * PI * g.eval(big_r.max(r));
        }
        let c = (big_r * big_r + r * r - cg * cg) / (2.0 * big_r * r);
        let tmax = if c <= -1.0 { PI } else if c >= 1.0 { 0.0 } else { c.acos() };
        let rr = big_r * big_r + r * r;
        let two = 2.0 * big_r * r;
        2.0 * inner.integrate(|t| g.eval((rr - two * t.cos()).max(0.0).sqrt()), 0.0, tmax)
    };
    let mut breaks = vec![lo];
    breaks.extend(f.breakpoints().into_iter().filter(|&b| b > lo && b < hi));
    breaks.push(hi);
    outer.integrate_pieces(|r| r * f.eval(r) * ring(r), &breaks)
}

/// Tabulates `ϕ = φ∗φ` on `nodes` radii and returns it as a profile.
pub fn self_convolve(phi: &RadialProfile, nodes: usize) -> Result<RadialProfile> {
    cross_convolve(phi, phi, nodes)
}

/// Tabulates `f∗g` as a radial profile.
pub fn cross_convolve(f: &RadialProfile, g: &RadialProfile, nodes: usize) -> Result<RadialProfile> {
    if nodes < 16 {
        return Err(Error::InvalidParameter(format!("need at least 16 nodes, got {nodes}")));
    }
    let support = f.support_radius() + g.support_radius();
    let h = support / (nodes - 1) as f64;
    let values: Vec<f64> = {
        use rayon::prelude::*;
        (0..nodes).into_par_iter().map(|i| convolve_at(f, g, i as f64 * h)).collect()
    };
    let scale = f.feature_scale().min(g.feature_scale());
    RadialProfile::tabulated(&format!("{}*{}", f.name(), g.name()), support, values, scale)
}

/// `∫ |x| (f∗g)(x) dx` computed without tabulating the convolution.
///
/// Uses `∫∫ f(y) g(z) |y+z| dy dz` with the angular integrals reduced to a
/// complete elliptic integral.
pub fn cross_moment_m1(f: &RadialProfile, g: &RadialProfile) -> f64 {
    let outer = Integrator::new(1e-16, 1e-12);
    let inner = Integrator::new(1e-17, 1e-13);
    let gb = g.breakpoints();
    let w = |r: f64, s: f64| {
        let t = r + s;
        if t == 0.0 { 0.0 } else { 4.0 * t * elliptic_e(2.0 * (r * s).sqrt() / t) }
    };
    let row = |r: f64| {
        let mut breaks: Vec<f64> = gb.iter().copied().filter(|&b| b != r).collect();
        if r < g.support_radius() {
            breaks.push(r);
        }
        breaks.sort_by(f64::total_cmp);
        inner.integrate_pieces(|s| s * g.eval(s) * w(r, s), &breaks)
    };
    2.0 * PI * outer.integrate_pieces(|r| r * f.eval(r) * row(r), &f.breakpoints())
}

/// Moments of a pair kernel `ϕ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    /// `∫ |x| ϕ`.
    pub m1: f64,
    /// `∫ |x|^2 ϕ`.
    pub m2: f64,
    /// `∫ |e1 × x| ϕ`.
    pub m1_directional: f64,
}

/// Moments of an already tabulated pair kernel.
pub fn pair_moments(pair: &RadialProfile) -> Moments {
    Moments {
        m1: pair.integral_weighted(2),
        m2: pair.integral_weighted(3),
        m1_directional: directional_moment(pair, [1.0, 0.0]),
    }
}

/// `∫ |v × x| ϕ(x) dx` by polar quadrature.
fn directional_moment(pair: &RadialProfile, v: [f64; 2]) -> f64 {
    let radial = pair.integral_weighted(2) / (2.0 * PI);
    let angle = v[1].atan2(v[0]);
    let q = Integrator::new(1e-16, 1e-14);
    let norm = v[0].hypot(v[1]);
    let angular = q.integrate_pieces(
        |a| norm * (a - angle).sin().abs(),
        &[angle, angle + PI, angle + 2.0 * PI],
    );
    radial * angular
}

/// A delta kernel accepted by the moment routines.
#[derive(Debug, Clone)]
pub enum Kernel {
    Radial(RadialProfile),
    /// Tensor-product Peskin 4-point kernel with grid spacing 1. Not radial.
    Peskin4,
}

impl Kernel {
    pub fn as_radial(&self) -> Result<&RadialProfile> {
        match self {
            Kernel::Radial(p) => Ok(p),
            Kernel::Peskin4 => Err(Error::NonRadial),
        }
    }
}

/// One-dimensional Peskin 4-point function.
pub fn peskin4(r: f64) -> f64 {
    let r = r.abs();
    if r < 1.0 {
        (3.0 - 2.0 * r + (1.0 + 4.0 * r - 4.0 * r * r).sqrt()) / 8.0
    } else if r < 2.0 {
        (5.0 - 2.0 * r - (-7.0 + 12.0 * r - 4.0 * r * r).max(0.0).sqrt()) / 8.0
    } else {
        0.0
    }
}

fn peskin_pair_1d() -> CubicSpline {
    let q = Integrator::new(1e-16, 1e-13);
    let n = 1601;
    let h = 4.0 / (n - 1) as f64;
    let values = (0..n)
        .map(|i| {
            let t = i as f64 * h;
            let mut breaks: Vec<f64> = (-2..=2).map(|k| k as f64).chain((-2..=2).map(|k| t + k as f64)).collect();
            breaks.retain(|b| (-2.0..=2.0).contains(b));
            breaks.sort_by(f64::total_cmp);
            breaks.dedup();
            q.integrate_pieces(|u| peskin4(u) * peskin4(t - u), &breaks)
        })
        .collect();
    CubicSpline::clamped(0.0, h, values, 0.0, 0.0)
}

fn peskin_moments(v: [f64; 2]) -> Moments {
    let pair = peskin_pair_1d();
    let p = |x: f64| if x.abs() >= 4.0 { 0.0 } else { pair.eval(x.abs()) };
    let outer = Integrator::new(1e-14, 1e-11);
    let inner = Integrator::new(1e-15, 1e-12);
    let breaks: Vec<f64> = (-4..=4).map(|k| k as f64).collect();
    let plane = |g: &dyn Fn(f64, f64) -> f64| {
        outer.integrate_pieces(
            |x| {
                let mut b = breaks.clone();
                b.push(0.0);
                b.sort_by(f64::total_cmp);
                b.dedup();
                p(x) * inner.integrate_pieces(|y| p(y) * g(x, y), &b)
            },
            &breaks,
        )
    };
    Moments {
        m1: plane(&|x, y| x.hypot(y)),
        m2: plane(&|x, y| x * x + y * y),
        m1_directional: plane(&|x, y| (v[0] * y - v[1] * x).abs()),
    }
}

/// All moments of the pair kernel built from `kernel`.
pub fn moments(kernel: &Kernel, nodes: usize) -> Result<Moments> {
    match kernel {
        Kernel::Radial(p) => Ok(pair_moments(&self_convolve(p, nodes)?)),
        Kernel::Peskin4 => Ok(peskin_moments([1.0, 0.0])),
    }
}

pub fn moment_m1(kernel: &Kernel) -> Result<f64> {
    Ok(moments(kernel, DEFAULT_CONVOLUTION_NODES)?.m1)
}

pub fn moment_m2(kernel: &Kernel) -> Result<f64> {
    Ok(moments(kernel, DEFAULT_CONVOLUTION_NODES)?.m2)
}

pub fn moment_m1_directional(kernel: &Kernel, v: [f64; 2]) -> Result<f64> {
    match kernel {
        Kernel::Radial(p) => Ok(directional_moment(&self_convolve(p, DEFAULT_CONVOLUTION_NODES)?, v)),
        Kernel::Peskin4 => Ok(peskin_moments(v).m1_directional),
    }
}

/// Summary of a built kernel, written alongside study outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelCertificate {
    pub m1: f64,
    pub m2: f64,
    pub m1_directional: f64,
    pub c: Option<f64>,
    pub r: Option<f64>,
}

/// A delta kernel together with its tabulated pair kernel.
#[derive(Debug, Clone)]
pub struct BuiltKernel {
    pub delta: RadialProfile,
    pub pair: RadialProfile,
    pub certificate: KernelCertificate,
}

impl BuiltKernel {
    pub fn from_profile(delta: RadialProfile, nodes: usize) -> Result<Self> {
        let pair = self_convolve(&delta, nodes)?;
        let m = pair_moments(&pair);
        let certificate = KernelCertificate { m1: m.m1, m2: m.m2, m1_directional: m.m1_directional, c: None, r: None };
        Ok(Self { delta, pair, certificate })
    }

    pub fn moments(&self) -> Moments {
        Moments { m1: self.certificate.m1, m2: self.certificate.m2, m1_directional: self.certificate.m1_directional }
    }
}

/// Builds `φ = (ρ_r - c ρ) / (1 - c)` with `∫|x| φ∗φ = 0`.
///
/// `c` is the smaller root of `c^2 I_0 - 2c I_r + r I_0 = 0`, where
/// `I_0 = ∫|x| ρ∗ρ` and `I_r = ∫|x| ρ_r∗ρ`.
pub fn build_m1_zero_kernel(base: &RadialProfile, r: f64, tolerance: f64, nodes: usize) -> Result<BuiltKernel> {
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::InvalidParameter(format!("r must lie in (0, 1), got {r}")));
    }
    let rho_r = base.scaled(r)?;
    let i0 = cross_moment_m1(base, base);
    let ir = cross_moment_m1(&rho_r, base);
    let disc = ir * ir - r * i0 * i0;
    if disc < 0.0 {
        return Err(Error::NoAdmissibleRoot { discriminant: disc });
    }
    let c = (ir - disc.sqrt()) / i0;
    if !(c > 0.0 && c < 1.0) {
        return Err(Error::InvalidParameter(format!("root c = {c} outside (0, 1)")));
    }
    let delta = RadialProfile::combine(
        &format!("two_scale(r={r})"),
        &[(1.0 / (1.0 - c), &rho_r), (-c / (1.0 - c), base)],
    )?;
    let mut built = BuiltKernel::from_profile(delta, nodes)?;
    built.certificate.c = Some(c);
    built.certificate.r = Some(r);
    if built.certificate.m1.abs() >= tolerance {
        return Err(Error::ToleranceNotMet {
            what: "first moment of the two-scale kernel".into(),
            residual: built.certificate.m1.abs(),
            tolerance,
        });
    }
    Ok(built)
}

/// Builds `φ = (ρ_r - r^2 ρ) / (1 - r^2)`, whose pair kernel has zero second moment.
pub fn build_m2_zero_kernel(base: &RadialProfile, r: f64, nodes: usize) -> Result<BuiltKernel> {
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::InvalidParameter(format!("r must lie in (0, 1), got {r}")));
    }
    let c = r * r;
    let delta = RadialProfile::combine(
        &format!("m2_zero(r={r})"),
        &[(1.0 / (1.0 - c), &base.scaled(r)?), (-c / (1.0 - c), base)],
    )?;
    let mut built = BuiltKernel::from_profile(delta, nodes)?;
    built.certificate.c = Some(c);
    built.certificate.r = Some(r);
    Ok(built)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelType {
    Bump,
    TwoScale,
}

/// Kernel selection as read from a JSON config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    #[serde(rename = "type")]
    pub kind: KernelType,
    #[serde(default)]
    pub r: Option<f64>,
    #[serde(default)]
    pub tolerance: Option<f64>,
    #[serde(default)]
    pub nodes: Option<usize>,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self { kind: KernelType::Bump, r: None, tolerance: None, nodes: None }
    }
}

impl KernelConfig {
    pub fn two_scale(r: f64) -> Self {
        Self { kind: KernelType::TwoScale, r: Some(r), ..Self::default() }
    }

    pub fn build(&self) -> Result<BuiltKernel> {
        let nodes = self.nodes.unwrap_or(DEFAULT_CONVOLUTION_NODES);
        match self.kind {
            KernelType::Bump => BuiltKernel::from_profile(RadialProfile::bump(), nodes),
            KernelType::TwoScale => build_m1_zero_kernel(
                &RadialProfile::bump(),
                self.r.unwrap_or(0.35),
                self.tolerance.unwrap_or(1e-8),
                nodes,
            ),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn bump_is_normalized() {
        let b = RadialProfile::bump();
        assert!((b.normalization() - 1.0).abs() < 1e-13);
        assert_eq!(b.support_radius(), 1.0);
        assert_eq!(b.eval(1.0), 0.0);
        // Z = 1 / (π (e^-1 - E1(1))).
        let z = 1.0 / (PI * (0.367_879_441_171_442_3 - 0.219_383_934_395_520_3));
        assert!((b.eval(0.0) - z * (-1.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn convolution_of_bumps_at_origin() {
        let b = RadialProfile::bump();
        let direct = convolve_at(&b, &b, 0.0);
        let q = Integrator::new(1e-16, 1e-13);
        let expected = 2.0 * PI * q.integrate(|r| r * b.eval(r).powi(2), 0.0, 1.0);
        assert!((direct - expected).abs() < 1e-12 * expected);
        assert_eq!(convolve_at(&b, &b, 2.0), 0.0);
    }

    // Reference values from an independent 30-digit quadrature.
    const BUMP_M1: f64 = 0.651_588_835_966_670_6;
    const BUMP_M2: f64 = 0.522_622_406_841_117_3;
    const TWO_SCALE_C: f64 = 0.281_821_421_090_691_5;

    #[test]
    fn bump_moments_match_reference() {
        let b = RadialProfile::bump();
        assert!((cross_moment_m1(&b, &b) - BUMP_M1).abs() < 1e-12);
        let pair = self_convolve(&b, 512).unwrap();
        let m = pair_moments(&pair);
        assert!((pair.normalization() - 1.0).abs() < 1e-10);
        assert!((m.m1 - BUMP_M1).abs() < 1e-9);
        assert!((m.m2 - BUMP_M2).abs() < 1e-9);
        // For a radial kernel the directional moment is 2 m1 / π.
        assert!((m.m1_directional - 2.0 * BUMP_M1 / PI).abs() < 1e-9);
        // m2 of a pair kernel is twice the second moment of the delta kernel.
        assert!((2.0 * b.integral_weighted(3) - BUMP_M2).abs() < 1e-12);
    }

    #[test]
    fn two_scale_kernel_cancels_first_moment() {
        let k = build_m1_zero_kernel(&RadialProfile::bump(), 0.35, 1e-8, 512).unwrap();
        let c = k.certificate.c.unwrap();
        assert!((c - TWO_SCALE_C).abs() < 1e-12);
        assert!(k.certificate.m1.abs() < 1e-9);
        assert!((k.delta.normalization() - 1.0).abs() < 1e-12);
        let m2_delta = (0.35f64.powi(2) - c) / (1.0 - c) * BUMP_M2;
        assert!((k.certificate.m2 - m2_delta).abs() < 1e-9);
    }

    #[test]
    fn m2_zero_kernel_cancels_second_moment() {
        let k = build_m2_zero_kernel(&RadialProfile::bump(), 0.5, 256).unwrap();
        assert!(k.certificate.m2.abs() < 1e-9);
        assert!(k.certificate.m1 > 0.0);
    }

    #[test]
    fn peskin_kernel_is_rejected_as_radial() {
        assert!(matches!(Kernel::Peskin4.as_radial(), Err(Error::NonRadial)));
        let s: f64 = (-3..=3).map(|j| peskin4(0.3 + j as f64)).sum();
        assert!((s - 1.0).abs() < 1e-14);
    }

    #[test]
    fn peskin_moments_are_finite() {
        let m = moments(&Kernel::Peskin4, 0).unwrap();
        assert!(m.m1 > 0.0 && m.m2 > 0.0 && m.m1_directional > 0.0);
        assert!(m.m1_directional < m.m1);
    }

    #[test]
    fn invalid_scale_is_rejected() {
        let b = RadialProfile::bump();
        assert!(b.scaled(0.0).is_err());
        assert!(build_m1_zero_kernel(&b, 1.5, 1e-8, 64).is_err());
    }

    #[test]
    fn config_rejects_unknown_keys() {
        let ok: KernelConfig = serde_json::from_str(r#"{"type":"two_scale","r":0.4}"#).unwrap();
        assert_eq!(ok.kind, KernelType::TwoScale);
        assert!(serde_json::from_str::<KernelConfig>(r#"{"type":"bump","radius":1}"#).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn scaling_preserves_mass_and_scales_moments(r in 0.2f64..0.9) {
            let b = RadialProfile::bump();
            let s = b.scaled(r).unwrap();
            prop_assert!((s.normalization() - 1.0).abs() < 1e-11);
            prop_assert!((s.integral_weighted(3) - r * r * b.integral_weighted(3)).abs() < 1e-11);
        }

        #[test]
        fn cross_moment_is_symmetric(r in 0.2f64..0.9) {
            let b = RadialProfile::bump();
            let s = b.scaled(r).unwrap();
            let a = cross_moment_m1(&s, &b);
            let c = cross_moment_m1(&b, &s);
            prop_assert!((a - c).abs() < 1e-10);
        }
    }
}
