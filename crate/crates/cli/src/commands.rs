//! One function per subcommand. Each writes its artifacts and returns the
//! verdict line printed by `main`.

use std::path::PathBuf;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use fracblow_core::analysis::{
    classical_residual, classify_regime, fit_boundary_rate, regime_statistics, weak_norm_decay, Regime,
    RegimeStatistics, ResidualPoint, RATE_WINDOW,
};
use fracblow_core::ctau::{scan, sign_changes, tau0, CTauValue};
use fracblow_core::green::GreenKernel;
use fracblow_core::measures::potential_field;
use fracblow_core::verify::{run_criterion, CriterionReport, VerifyOptions, CRITERIA};
use fracblow_core::{solve_family, BallPoint, RateFit, SolveOptions, SolveResult, Solver, WeakNormEstimate};

use crate::args::{Command, CommonArgs};
use crate::config::{ConfigError, ExperimentConfig};
use crate::output::{artifact_hash, field_rows, write_csv, write_json, FieldRow, Metadata, Report};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("config hash mismatch: {0}")]
    HashMismatch(String),
    #[error(transparent)]
    Module(#[from] fracblow_core::Error),
    #[error(transparent)]
    Io(#[from] anyhow::Error),
}

impl RunError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) | Self::HashMismatch(_) => 2,
            Self::Module(_) | Self::Io(_) => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::Config(_) => "config",
            Self::HashMismatch(_) => "hash_mismatch",
            Self::Module(e) => e.kind(),
            Self::Io(_) => "io",
        }
    }
}

/// What `main` prints and returns.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub verdict: String,
    pub exit_code: u8,
    pub artifacts: Vec<PathBuf>,
}

impl Outcome {
    fn ok(verdict: String, artifacts: Vec<PathBuf>) -> Self {
        Self { verdict, exit_code: 0, artifacts }
    }
}

/// Exit status of `verify-all` when the suite ran but some criterion failed.
pub const CRITERIA_FAILED: u8 = 3;

struct Ctx {
    cfg: ExperimentConfig,
    meta: Metadata,
    start: Instant,
}

impl Ctx {
    fn report<T: Serialize>(&self, result: T) -> Report<T> {
        Report { metadata: self.meta.clone(), wall_seconds: self.start.elapsed().as_secs_f64(), result }
    }

    fn opts(&self) -> SolveOptions {
        SolveOptions { tol: self.cfg.tolerance.solve, max_iterations: self.cfg.tolerance.max_iterations, ..Default::default() }
    }

    fn solver(&self) -> Result<Solver, RunError> {
        let cfg = &self.cfg;
        let g = cfg.nonlinearity.build()?;
        Ok(Solver::new(&cfg.domain()?, cfg.order()?, g, &cfg.measure, &cfg.build_grid()?)?)
    }

    fn out(&self) -> &std::path::Path {
        &self.cfg.output.dir
    }
}

pub fn run(common: &CommonArgs, command: &Command) -> Result<Outcome, RunError> {
    let mut cfg = common.resolve()?;
    match command {
        Command::Family { schedule } | Command::Classify { schedule } => schedule.apply(&mut cfg)?,
        _ => {}
    }
    let meta = Metadata::new(command.name(), &cfg.hash());
    let ctx = Ctx { cfg, meta, start: Instant::now() };
    match command {
        Command::Ctau { scan } => ctau(&ctx, *scan),
        Command::Green { x_rho, x_theta } => green(&ctx, *x_rho, *x_theta),
        Command::Potential => potential(&ctx),
        Command::Solve => solve(&ctx),
        Command::Family { .. } => family(&ctx),
        Command::Rates { window_lo, window_hi } => rates(&ctx, (*window_lo, *window_hi)),
        Command::Weaknorm { kappa } => weaknorm(&ctx, *kappa),
        Command::Classify { .. } => classify(&ctx),
        Command::Residual { points } => residual(&ctx, *points),
        Command::ShowConfig => Ok(Outcome::ok(format!("{}# config_hash: {}", ctx.cfg.to_toml(), ctx.meta.config_hash), vec![])),
        Command::VerifyAll { quick, only, aggregate } => verify_all(&ctx, *quick, only, aggregate),
    }
}

#[derive(Serialize)]
struct CtauResult {
    alpha: f64,
    tau0: f64,
    expected: f64,
    sign_changes: usize,
}

fn ctau(ctx: &Ctx, n: usize) -> Result<Outcome, RunError> {
    let order = ctx.cfg.order()?;
    let values: Vec<CTauValue> = scan(order, n)?;
    let changes = sign_changes(&values);
    let root = tau0(order, 1e-10)?;
    let csv = write_csv(ctx.out(), "ctau", &ctx.meta, &values)?;
    let result = CtauResult { alpha: order.alpha(), tau0: root, expected: order.alpha() - 1.0, sign_changes: changes };
    let json = write_json(ctx.out(), "ctau", &ctx.report(result))?;
    Ok(Outcome::ok(
        format!("tau0 = {root:.10} (alpha - 1 = {:.10}), {changes} sign change(s) over {n} points", order.alpha() - 1.0),
        vec![csv, json],
    ))
}

#[derive(Serialize)]
struct GreenResult {
    x: Vec<f64>,
    nodes: usize,
    min: f64,
    max: f64,
}

fn embed(p: &BallPoint, dim: usize) -> Result<BallPoint, RunError> {
    let mut c = p.cartesian();
    c.resize(dim, 0.0);
    Ok(BallPoint::from_cartesian(&c)?)
}

fn green(ctx: &Ctx, x_rho: f64, x_theta: f64) -> Result<Outcome, RunError> {
    let cfg = &ctx.cfg;
    let order = cfg.order()?;
    if !(x_rho > 0.0 && x_rho <= 1.0) {
        return Err(ConfigError::Invalid(format!("x_rho = {x_rho} must be in (0, 1]")).into());
    }
    let grid = cfg.build_grid()?;
    let kernel = GreenKernel::new(cfg.dim, order);
    let x = embed(&BallPoint::polar(x_rho, x_theta), cfg.dim)?;
    let mut rows = Vec::new();
    for y2 in grid.nodes() {
        let y = embed(&y2, cfg.dim)?;
        if x.dist2(&y) == 0.0 {
            continue;
        }
        let value = kernel.eval(&x, &y);
        rows.push(FieldRow {
            rho: y2.rho(),
            theta: if y2.radius() == 0.0 { 0.0 } else { y2.theta() },
            value,
            normalized_value: value * y2.rho().powf(-order.alpha()),
        });
    }
    let min = rows.iter().map(|r| r.value).fold(f64::INFINITY, f64::min);
    let max = rows.iter().map(|r| r.value).fold(0.0, f64::max);
    let csv = write_csv(ctx.out(), "green", &ctx.meta, &rows)?;
    let result = GreenResult { x: x.cartesian(), nodes: rows.len(), min, max };
    let json = write_json(ctx.out(), "green", &ctx.report(result))?;
    Ok(Outcome::ok(format!("G(x, .) at {} nodes, range [{min:.4e}, {max:.4e}]", rows.len()), vec![csv, json]))
}

#[derive(Serialize)]
struct PotentialResult {
    rate: Option<RateFit>,
    band: f64,
}

fn potential(ctx: &Ctx) -> Result<Outcome, RunError> {
    let cfg = &ctx.cfg;
    let field = potential_field(&cfg.domain()?, cfg.order()?, &cfg.measure, &cfg.build_grid()?)?;
    let rows = field_rows(&field.samples);
    let rate = fit_boundary_rate(&field.samples, RATE_WINDOW).ok();
    let grid = field.samples.grid();
    let means: Vec<f64> = grid.levels_in(1e-4, 0.5).into_iter().map(|j| field.samples.angular_mean(j)).collect();
    let band = means.iter().cloned().fold(0.0, f64::max) / means.iter().cloned().fold(f64::INFINITY, f64::min);
    let csv = write_csv(ctx.out(), "potential", &ctx.meta, &rows)?;
    let verdict = match &rate {
        Some(r) => format!("potential rate {:.4} (alpha - 1 = {:.4}), normalized band {band:.3}", r.exponent, cfg.alpha - 1.0),
        None => format!("potential on {} nodes, normalized band {band:.3}", rows.len()),
    };
    let json = write_json(ctx.out(), "potential", &ctx.report(PotentialResult { rate, band }))?;
    Ok(Outcome::ok(verdict, vec![csv, json]))
}

#[derive(Serialize)]
struct SolveSummary {
    k: f64,
    iterations: usize,
    residual: f64,
    sandwich_ok: bool,
    scheme: fracblow_core::solver::Scheme,
    center: f64,
    rate: Option<RateFit>,
}

impl From<&SolveResult> for SolveSummary {
    fn from(r: &SolveResult) -> Self {
        Self {
            k: r.k,
            iterations: r.iterations,
            residual: r.residual,
            sandwich_ok: r.sandwich_ok,
            scheme: r.scheme,
            center: r.solution.center_value(),
            rate: fit_boundary_rate(&r.solution, RATE_WINDOW).ok(),
        }
    }
}

fn solve(ctx: &Ctx) -> Result<Outcome, RunError> {
    let solver = ctx.solver()?;
    let r = solver.solve(ctx.cfg.k, &ctx.opts(), None)?;
    let csv = write_csv(ctx.out(), "solve", &ctx.meta, &field_rows(&r.solution))?;
    let summary = SolveSummary::from(&r);
    let verdict = format!(
        "k {}: {} iteration(s), residual {:.2e}, sandwich {}{}",
        r.k,
        r.iterations,
        r.residual,
        r.sandwich_ok,
        summary.rate.map(|f| format!(", rate {:.4}", f.exponent)).unwrap_or_default()
    );
    let json = write_json(ctx.out(), "solve", &ctx.report(summary))?;
    Ok(Outcome::ok(verdict, vec![csv, json]))
}

#[derive(Serialize)]
struct FamilyRow {
    k: f64,
    rho: f64,
    theta: f64,
    value: f64,
    normalized_value: f64,
}

#[derive(Serialize)]
struct FamilyResult {
    members: Vec<SolveSummary>,
    statistics: Option<RegimeStatistics>,
}

fn solve_schedule(ctx: &Ctx) -> Result<(Solver, Vec<SolveResult>), RunError> {
    let solver = ctx.solver()?;
    let family = solve_family(&solver, &ctx.cfg.schedule.values(), &ctx.opts())?;
    Ok((solver, family))
}

fn family(ctx: &Ctx) -> Result<Outcome, RunError> {
    let (solver, family) = solve_schedule(ctx)?;
    let rows: Vec<FamilyRow> = family
        .iter()
        .flat_map(|r| {
            field_rows(&r.solution).into_iter().map(move |f| FamilyRow {
                k: r.k,
                rho: f.rho,
                theta: f.theta,
                value: f.value,
                normalized_value: f.normalized_value,
            })
        })
        .collect();
    let csv = write_csv(ctx.out(), "family", &ctx.meta, &rows)?;
    let statistics = regime_statistics(&family, solver.order(), ctx.cfg.nonlinearity.exponent()).ok();
    let first = family[0].solution.center_value();
    let last = family[family.len() - 1].solution.center_value();
    let result = FamilyResult { members: family.iter().map(SolveSummary::from).collect(), statistics };
    let json = write_json(ctx.out(), "family", &ctx.report(result))?;
    Ok(Outcome::ok(
        format!("{} members, center value {first:.6e} -> {last:.6e}, monotone in k", family.len()),
        vec![csv, json],
    ))
}

#[derive(Serialize)]
struct RatesResult {
    window: (f64, f64),
    potential: RateFit,
    solution: RateFit,
    expected_potential: f64,
}

fn rates(ctx: &Ctx, window: (f64, f64)) -> Result<Outcome, RunError> {
    let solver = ctx.solver()?;
    let r = solver.solve(ctx.cfg.k, &ctx.opts(), None)?;
    let pot = fracblow_core::FieldOnGrid::from_raw(solver.grid().clone(), 1.0 - ctx.cfg.alpha, solver.potential())?;
    let potential = fit_boundary_rate(&pot, window)?;
    let solution = fit_boundary_rate(&r.solution, window)?;
    let verdict = format!(
        "rates on [{:e}, {:e}]: potential {:.4}, solution {:.4} (alpha - 1 = {:.4})",
        window.0,
        window.1,
        potential.exponent,
        solution.exponent,
        ctx.cfg.alpha - 1.0
    );
    let result = RatesResult { window, potential, solution, expected_potential: ctx.cfg.alpha - 1.0 };
    let json = write_json(ctx.out(), "rates", &ctx.report(result))?;
    Ok(Outcome::ok(verdict, vec![json]))
}

fn weaknorm(ctx: &Ctx, kappa: Option<f64>) -> Result<Outcome, RunError> {
    let cfg = &ctx.cfg;
    let order = cfg.order()?;
    let kappa = kappa.unwrap_or(if cfg.measure.has_point_mass() { order.p_star_n(cfg.dim) } else { order.p_star() });
    let field = potential_field(&cfg.domain()?, order, &cfg.measure, &cfg.build_grid()?)?;
    let est: WeakNormEstimate = weak_norm_decay(&field.samples, order, kappa)?;
    let verdict = format!(
        "kappa {kappa:.4}: fitted decay {:.4}, band constant {:.4e}",
        est.fitted_decay, est.band_constant
    );
    let json = write_json(ctx.out(), "weaknorm", &ctx.report(est))?;
    Ok(Outcome::ok(verdict, vec![json]))
}

#[derive(Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
enum Classification {
    StrongLimit { rate: RateFit, statistics: RegimeStatistics },
    FamilyBlowUp { statistics: RegimeStatistics },
    Inconclusive { reason: String, statistics: RegimeStatistics },
}

fn classify(ctx: &Ctx) -> Result<Outcome, RunError> {
    let (solver, family) = solve_schedule(ctx)?;
    let p = ctx.cfg.nonlinearity.exponent();
    let statistics = regime_statistics(&family, solver.order(), p)?;
    let growth = statistics.decade_growth;
    let (verdict, result) = match classify_regime(&family, solver.order(), p) {
        Ok(Regime::StrongLimit { rate }) => (
            format!("strong limit: decade growth {growth:.4}, boundary rate {:.4}", rate.exponent),
            Classification::StrongLimit { rate, statistics },
        ),
        Ok(Regime::FamilyBlowUp) => {
            (format!("blow-up: decade growth {growth:.4}"), Classification::FamilyBlowUp { statistics })
        }
        Err(fracblow_core::Error::Inconclusive(reason)) => (
            format!("inconclusive: decade growth {growth:.4}"),
            Classification::Inconclusive { reason, statistics },
        ),
        Err(e) => return Err(e.into()),
    };
    let json = write_json(ctx.out(), "classify", &ctx.report(result))?;
    Ok(Outcome::ok(verdict, vec![json]))
}

#[derive(Serialize)]
struct ResidualResult {
    k: f64,
    max_scaled_residual: f64,
    points: Vec<ResidualPoint>,
}

fn residual(ctx: &Ctx, n: usize) -> Result<Outcome, RunError> {
    let solver = ctx.solver()?;
    let r = solver.solve(ctx.cfg.k, &ctx.opts(), None)?;
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.cfg.seed);
    let n_levels = solver.grid().n_levels();
    let mut levels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n_levels)).collect();
    levels.sort_unstable();
    let points = classical_residual(solver.order(), solver.reaction(), &r, &levels)?;
    let max = points.iter().map(|p| p.scaled_residual).fold(0.0, f64::max);
    let csv = write_csv(ctx.out(), "residual", &ctx.meta, &points)?;
    let verdict = format!("max scaled residual {max:.3e} over {} level(s)", points.len());
    let json = write_json(ctx.out(), "residual", &ctx.report(ResidualResult { k: r.k, max_scaled_residual: max, points }))?;
    Ok(Outcome::ok(verdict, vec![csv, json]))
}

#[derive(Serialize)]
struct VerifyResult {
    quick: bool,
    passed: usize,
    total: usize,
    criteria: Vec<CriterionReport>,
    artifacts: Vec<PathBuf>,
}

fn verify_all(ctx: &Ctx, quick: bool, only: &[u8], aggregate: &[PathBuf]) -> Result<Outcome, RunError> {
    for path in aggregate {
        let h = artifact_hash(path)?;
        if h != ctx.meta.config_hash {
            return Err(RunError::HashMismatch(format!(
                "{} was produced with config {h}, current config is {}",
                path.display(),
                ctx.meta.config_hash
            )));
        }
    }
    let ids: Vec<u8> = if only.is_empty() { CRITERIA.iter().map(|c| c.0).collect() } else { only.to_vec() };
    if let Some(id) = ids.iter().find(|id| !CRITERIA.iter().any(|c| c.0 == **id)) {
        return Err(ConfigError::Invalid(format!("no acceptance criterion numbered {id}")).into());
    }
    let opts = VerifyOptions { quick, seed: ctx.cfg.seed };
    let mut criteria = Vec::with_capacity(ids.len());
    for id in ids {
        let report = run_criterion(id, &opts).expect("criterion ids were checked above");
        println!("{}", report.line());
        criteria.push(report);
    }
    let passed = criteria.iter().filter(|c| c.passed).count();
    let total = criteria.len();
    let result = VerifyResult { quick, passed, total, criteria, artifacts: aggregate.to_vec() };
    let json = write_json(ctx.out(), "verify", &ctx.report(result))?;
    let exit_code = if passed == total { 0 } else { CRITERIA_FAILED };
    Ok(Outcome { verdict: format!("{passed} of {total} criteria passed"), exit_code, artifacts: vec![json] })
}
