//! Command-line surface.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use fracblow_core::nonlinearity::NamedCustom;
use fracblow_core::BoundaryMeasure;

use crate::config::{ConfigError, ExperimentConfig, NonlinearitySpec};

#[derive(Debug, Parser)]
#[command(name = "fracblow", version, about = "Boundary blow-up solutions of fractional semilinear equations on the unit ball")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MeasureKind {
    Hausdorff,
    Dirac,
    Sum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CustomKind {
    SquareOverLog,
    PowerPlusLinear,
}

impl From<CustomKind> for NamedCustom {
    fn from(c: CustomKind) -> Self {
        match c {
            CustomKind::SquareOverLog => NamedCustom::SquareOverLog,
            CustomKind::PowerPlusLinear => NamedCustom::PowerPlusLinear,
        }
    }
}

/// Flags shared by every subcommand. Each one overrides the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// TOML experiment config
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Order α of the operator, in (0, 1)
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    /// Dimension of the ball
    #[arg(long, global = true)]
    pub dim: Option<usize>,
    /// Power nonlinearity s^p; 0 selects g = 0
    #[arg(long, global = true, conflicts_with = "custom")]
    pub p: Option<f64>,
    /// Built-in custom nonlinearity
    #[arg(long, global = true, value_enum)]
    pub custom: Option<CustomKind>,
    /// Boundary data amplitude
    #[arg(long, global = true)]
    pub k: Option<f64>,
    /// Boundary measure
    #[arg(long, global = true, value_enum)]
    pub measure: Option<MeasureKind>,
    /// Angle of the point mass for dirac and sum measures
    #[arg(long, global = true, default_value_t = 0.0)]
    pub anchor_theta: f64,
    /// Smallest boundary distance of the grid
    #[arg(long, global = true)]
    pub grid_rho_min: Option<f64>,
    /// Ratio between successive grid levels
    #[arg(long, global = true)]
    pub grid_ratio: Option<f64>,
    /// Angular nodes per level
    #[arg(long, global = true)]
    pub n_theta: Option<usize>,
    /// Solver tolerance
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Seed for sampled points
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

impl CommonArgs {
    /// Loads the config file (or defaults) and applies the flags.
    pub fn resolve(&self) -> Result<ExperimentConfig, ConfigError> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(a) = self.alpha {
            cfg.alpha = a;
        }
        if let Some(d) = self.dim {
            cfg.dim = d;
        }
        if let Some(p) = self.p {
            cfg.nonlinearity = if p == 0.0 { NonlinearitySpec::Zero } else { NonlinearitySpec::Power { p } };
        }
        if let Some(c) = self.custom {
            cfg.nonlinearity = NonlinearitySpec::Custom { name: c.into() };
        }
        if let Some(k) = self.k {
            cfg.k = k;
        }
        if let Some(m) = self.measure {
            let mut anchor = vec![0.0; cfg.dim.max(2)];
            anchor[0] = self.anchor_theta.cos();
            anchor[1] = self.anchor_theta.sin();
            cfg.measure = match m {
                MeasureKind::Hausdorff => BoundaryMeasure::Hausdorff,
                MeasureKind::Dirac => BoundaryMeasure::dirac(&anchor),
                MeasureKind::Sum => BoundaryMeasure::hausdorff_plus_dirac(&anchor),
            };
        }
        if let Some(r) = self.grid_rho_min {
            cfg.grid.rho_min = r;
        }
        if let Some(q) = self.grid_ratio {
            cfg.grid.ratio = q;
        }
        if let Some(n) = self.n_theta {
            cfg.grid.n_theta = n;
        }
        if let Some(t) = self.tol {
            cfg.tolerance.solve = t;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.output.dir = o.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Overrides for the `k` schedule of family runs.
#[derive(Debug, Clone, Default, Args)]
pub struct ScheduleArgs {
    /// First k of the family
    #[arg(long)]
    pub k_start: Option<f64>,
    /// Ratio between successive k
    #[arg(long)]
    pub k_factor: Option<f64>,
    /// Number of family members
    #[arg(long)]
    pub k_count: Option<usize>,
}

impl ScheduleArgs {
    pub fn apply(&self, cfg: &mut ExperimentConfig) -> Result<(), ConfigError> {
        if let Some(s) = self.k_start {
            cfg.schedule.start = s;
        }
        if let Some(f) = self.k_factor {
            cfg.schedule.factor = f;
        }
        if let Some(c) = self.k_count {
            cfg.schedule.count = c;
        }
        cfg.validate()
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Table of C(tau) and its root
    Ctau {
        /// Number of scan points in (-0.99, -0.01)
        #[arg(long, default_value_t = 50)]
        scan: usize,
    },
    /// Green kernel G(x, .) over the grid nodes
    Green {
        /// Boundary distance of x
        #[arg(long, default_value_t = 0.5)]
        x_rho: f64,
        /// Angle of x
        #[arg(long, default_value_t = 0.0)]
        x_theta: f64,
    },
    /// Potential of the boundary measure over the grid
    Potential,
    /// Solve for one k
    Solve,
    /// Solve along the k schedule
    Family {
        #[command(flatten)]
        schedule: ScheduleArgs,
    },
    /// Boundary rates of the potential and of the solution
    Rates {
        /// Lower end of the fit window
        #[arg(long, default_value_t = 1e-4)]
        window_lo: f64,
        /// Upper end of the fit window
        #[arg(long, default_value_t = 1e-2)]
        window_hi: f64,
    },
    /// Weak-norm decay of the potential
    Weaknorm {
        /// Exponent of the weak norm; defaults to the critical exponent of the measure
        #[arg(long)]
        kappa: Option<f64>,
    },
    /// Classify the k-family as converging or blowing up
    Classify {
        #[command(flatten)]
        schedule: ScheduleArgs,
    },
    /// Pointwise residual of the differential equation at sampled levels
    Residual {
        /// Number of sampled grid levels
        #[arg(long, default_value_t = 10)]
        points: usize,
    },
    /// Print the resolved config and its hash
    ShowConfig,
    /// Run the acceptance suite
    VerifyAll {
        /// Coarser grids and fewer samples
        #[arg(long)]
        quick: bool,
        /// Run only these criteria
        #[arg(long, value_delimiter = ',')]
        only: Vec<u8>,
        /// Artifacts to collect into the report; their config hashes must match
        #[arg(long, num_args = 1..)]
        aggregate: Vec<PathBuf>,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Ctau { .. } => "ctau",
            Self::Green { .. } => "green",
            Self::Potential => "potential",
            Self::Solve => "solve",
            Self::Family { .. } => "family",
            Self::Rates { .. } => "rates",
            Self::Weaknorm { .. } => "weaknorm",
            Self::Classify { .. } => "classify",
            Self::Residual { .. } => "residual",
            Self::ShowConfig => "show-config",
            Self::VerifyAll { .. } => "verify-all",
        }
    }
}
