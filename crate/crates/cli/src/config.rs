use ibreg::contour::{LawConfig, TestContour};
use ibreg::experiments::DynamicSettings;
use ibreg::kernels::{KernelConfig, KernelType};
use ibreg::stepper::Scheme;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

/// Everything a run needs. Loaded from JSON, then overridden by flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub kernel: KernelConfig,
    pub contour: TestContour,
    pub law: LawConfig,
    /// Explicit ε grid; otherwise `eps_points` values from `λ/10`.
    pub eps: Option<Vec<f64>>,
    pub eps_points: usize,
    /// `ε̃ = ε/λ` for the `(ε,N)` study when `eps` is absent.
    pub eps_normalized: f64,
    pub n_values: Option<Vec<usize>>,
    pub theta: f64,
    #[serde(rename = "T")]
    pub t_final: f64,
    pub dt: f64,
    pub stride: usize,
    pub scheme: Scheme,
    pub resolution: f64,
    pub force: [f64; 2],
    pub variant: String,
    pub n: Option<usize>,
    pub check_resolution: bool,
    pub snapshots: bool,
    pub output: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            kernel: KernelConfig::default(),
            contour: TestContour::PerturbedCircle { theta: 0.5, amplitude: 0.3, seed: 1, k_max: 256 },
            law: LawConfig::default(),
            eps: None,
            eps_points: 6,
            eps_normalized: 0.02,
            n_values: None,
            theta: 0.5,
            t_final: 0.5,
            dt: 0.01,
            stride: 5,
            scheme: Scheme::Etd2,
            resolution: 0.1,
            force: [1.0, 1.0],
            variant: "exact".into(),
            n: None,
            check_resolution: false,
            snapshots: false,
            output: PathBuf::from("out"),
        }
    }
}

/// Flag values that replace file values when present.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct Overrides {
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Kernel: bump or two_scale.
    #[arg(long = "type", alias = "kernel", global = true)]
    pub kernel: Option<String>,
    #[arg(long, global = true)]
    pub r: Option<f64>,
    /// Contour: circle, ellipse or perturbed_circle.
    #[arg(long, global = true)]
    pub contour: Option<String>,
    #[arg(long, global = true)]
    pub k_max: Option<usize>,
    #[arg(long, global = true)]
    pub amplitude: Option<f64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Tension law: hookean or curvature.
    #[arg(long, global = true)]
    pub law: Option<String>,
    #[arg(long, global = true)]
    pub theta: Option<f64>,
    /// One or more comma-separated values.
    #[arg(long, global = true, value_delimiter = ',')]
    pub eps: Option<Vec<f64>>,
    #[arg(long, global = true, value_delimiter = ',')]
    pub n_values: Option<Vec<usize>>,
    #[arg(long, global = true)]
    pub n: Option<usize>,
    #[arg(long = "T", global = true)]
    pub t_final: Option<f64>,
    #[arg(long, global = true)]
    pub dt: Option<f64>,
    #[arg(long, global = true)]
    pub stride: Option<usize>,
    #[arg(long, global = true)]
    pub resolution: Option<f64>,
    /// Evolution variant: exact, eps or eps_n.
    #[arg(long, global = true)]
    pub variant: Option<String>,
    #[arg(long, global = true)]
    pub check_resolution: bool,
    #[arg(long, global = true)]
    pub snapshots: bool,
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

impl RunConfig {
    pub fn load(o: &Overrides) -> Result<Self, String> {
        let mut c = match &o.config {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?;
                serde_json::from_str(&text).map_err(|e| format!("{}: {e}", p.display()))?
            }
            None => RunConfig::default(),
        };
        c.apply(o)?;
        c.validate()?;
        Ok(c)
    }

    fn apply(&mut self, o: &Overrides) -> Result<(), String> {
        set(&mut self.output, o.out.clone());
        if let Some(k) = &o.kernel {
            self.kernel.kind = match k.as_str() {
                "bump" => KernelType::Bump,
                "two_scale" => KernelType::TwoScale,
                other => return Err(format!("unknown kernel '{other}'")),
            };
        }
        if o.r.is_some() {
            self.kernel.r = o.r;
        }
        let (mut k_max, mut amplitude, mut seed, mut theta) = match self.contour {
            TestContour::PerturbedCircle { k_max, amplitude, seed, theta } => (k_max, amplitude, seed, theta),
            TestContour::Circle { k_max, .. } | TestContour::Ellipse { k_max, .. } => (k_max, 0.3, 1, self.theta),
        };
        set(&mut k_max, o.k_max);
        set(&mut amplitude, o.amplitude);
        set(&mut seed, o.seed);
        set(&mut theta, o.theta);
        set(&mut self.theta, o.theta);
        let kind = o.contour.clone().unwrap_or_else(|| {
            match self.contour {
                TestContour::Circle { .. } => "circle",
                TestContour::Ellipse { .. } => "ellipse",
                TestContour::PerturbedCircle { .. } => "perturbed_circle",
            }
            .into()
        });
        self.contour = match (kind.as_str(), self.contour) {
            ("circle", TestContour::Circle { radius, .. }) => TestContour::Circle { radius, k_max },
            ("circle", _) => TestContour::Circle { radius: 1.0, k_max },
            ("ellipse", TestContour::Ellipse { a, b, .. }) => TestContour::Ellipse { a, b, k_max },
            ("ellipse", _) => TestContour::Ellipse { a: 1.2, b: 0.8, k_max },
            ("perturbed_circle", _) => TestContour::PerturbedCircle { theta, amplitude, seed, k_max },
            (other, _) => return Err(format!("unknown contour '{other}'")),
        };
        if let Some(l) = &o.law {
            self.law = match l.as_str() {
                "hookean" => LawConfig::Hookean { k: 1.0 },
                "curvature" => LawConfig::Curvature { k: 1.0 },
                other => return Err(format!("unknown law '{other}'")),
            };
        }
        if o.eps.is_some() {
            self.eps = o.eps.clone();
        }
        if o.n_values.is_some() {
            self.n_values = o.n_values.clone();
        }
        if o.n.is_some() {
            self.n = o.n;
        }
        set(&mut self.t_final, o.t_final);
        set(&mut self.dt, o.dt);
        set(&mut self.stride, o.stride);
        set(&mut self.resolution, o.resolution);
        set(&mut self.variant, o.variant.clone());
        self.check_resolution |= o.check_resolution;
        self.snapshots |= o.snapshots;
        Ok(())
    }

    pub fn validate(&self) -> Result<(), String> {
        let k_max = match self.contour {
            TestContour::Circle { k_max, .. } | TestContour::Ellipse { k_max, .. } | TestContour::PerturbedCircle { k_max, .. } => k_max,
        };
        if k_max < 2 {
            return Err("k_max must be at least 2".into());
        }
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(format!("theta must lie in (0, 1), got {}", self.theta));
        }
        if !(self.dt > 0.0 && self.t_final >= self.dt) {
            return Err(format!("need dt > 0 and T >= dt, got dt = {}, T = {}", self.dt, self.t_final));
        }
        if self.stride == 0 || self.eps_points < 3 {
            return Err("stride must be positive and eps_points at least 3".into());
        }
        if !(self.resolution > 0.0 && self.resolution <= 1.0) {
            return Err(format!("resolution must lie in (0, 1], got {}", self.resolution));
        }
        if !(self.eps_normalized > 0.0 && self.eps_normalized < 1.0) {
            return Err(format!("eps_normalized must lie in (0, 1), got {}", self.eps_normalized));
        }
        if let Some(eps) = &self.eps {
            if eps.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
                return Err("every ε must be positive".into());
            }
        }
        if let Some(ns) = &self.n_values {
            if ns.iter().any(|&n| n == 0 || n > k_max) {
                return Err(format!("N values must lie in 1..={k_max}"));
            }
        }
        if !["exact", "eps", "eps_n"].contains(&self.variant.as_str()) {
            return Err(format!("unknown variant '{}'", self.variant));
        }
        Ok(())
    }

    pub fn k_max(&self) -> usize {
        match self.contour {
            TestContour::Circle { k_max, .. } | TestContour::Ellipse { k_max, .. } | TestContour::PerturbedCircle { k_max, .. } => k_max,
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self.contour {
            TestContour::PerturbedCircle { seed, .. } => Some(seed),
            _ => None,
        }
    }

    pub fn dynamic(&self) -> DynamicSettings {
        DynamicSettings {
            t_final: self.t_final,
            dt: self.dt,
            stride: self.stride,
            scheme: self.scheme,
            theta: self.theta,
            resolution: self.resolution,
        }
    }
}
