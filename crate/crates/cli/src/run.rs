use std::cmp::Ordering;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde_json::{json, Value};

use qbound::bounds::{
    check_window, direct_imaging_fisher, prefactor_bound, prefactors, qsnr, BoundPipeline, ConstellationBounds, Verdict,
};
use qbound::cholesky_deriv::{
    derivative_finite_difference, derivative_recursive, derivative_sarkka, object_cholesky, row_relative_difference,
};
use qbound::fit::{loglog_slope, pairwise_loglog_slopes};
use qbound::moments::{object_hankel, ObjectKind, ObjectModel};
use qbound::otf::{default_w, pi_matrix, pi_trace_check, OtfModel};
use qbound::thermal::{property_suite, ModelGenerator};
use qbound::{Precision, Real};

use crate::config::{check_precision, Format, ObjectSpec, OtfSpec, RunConfig};
use crate::error::{CliError, CliResult};
use crate::output::{cell, float, number, write_csv, write_json};
use crate::SCHEMA_VERSION;

pub const PRECISION_ENV: &str = "QBOUND_PRECISION_BITS";
pub const SLOPE_TOLERANCE: f64 = 0.15;
pub const IDENTITY_TOLERANCE: f64 = 1e-10;
pub const FD_TOLERANCE: f64 = 1e-12;

pub const CSV_HEADER: [&str; 12] = [
    "delta",
    "mu",
    "k_tilde",
    "leading_order",
    "tail_estimate",
    "norm_residual",
    "b_mu_residual",
    "verdict",
    "qsnr",
    "direct_fisher",
    "convexity_bound",
    "classical_sim_bound",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Bound,
    Scaling,
    Snr,
    Thermal,
    Validate,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Bound => "bound",
            Command::Scaling => "scaling",
            Command::Snr => "snr",
            Command::Thermal => "thermal",
            Command::Validate => "validate",
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct Options {
    pub out: Option<PathBuf>,
    pub precision: Option<u32>,
}

#[derive(Clone, Debug)]
pub struct Outcome {
    pub exit_code: i32,
    pub files: Vec<PathBuf>,
}

/// Flag, then environment, then config.
pub fn resolve_precision(config: &RunConfig, opts: &Options) -> CliResult<Precision> {
    let bits = match opts.precision {
        Some(b) => b,
        None => match std::env::var(PRECISION_ENV) {
            Ok(v) if !v.trim().is_empty() => v
                .trim()
                .parse()
                .map_err(|_| CliError::InvalidConfig(format!("{PRECISION_ENV}: cannot parse {v}")))?,
            _ => config.compute.precision_bits,
        },
    };
    check_precision(bits)?;
    Ok(Precision::new(bits)?)
}

/// Parsed models at the run precision.
pub struct Context {
    pub config: RunConfig,
    pub prec: Precision,
    pub object: ObjectModel,
    pub otf: OtfModel,
    /// Ascending.
    pub deltas: Vec<Real>,
    pub photons: Real,
    pub w: Option<Real>,
    pub out_dir: PathBuf,
}

fn real(s: &str, prec: Precision) -> CliResult<Real> {
    Ok(Real::parse(s, prec)?)
}

impl Context {
    pub fn new(config: RunConfig, opts: &Options) -> CliResult<Self> {
        let prec = resolve_precision(&config, opts)?;
        let mut deltas = config
            .deltas
            .iter()
            .map(|d| real(d, prec))
            .collect::<CliResult<Vec<_>>>()?;
        deltas.sort_by(|a, b| a.total_cmp(b));
        deltas.dedup();
        let first = deltas[0].clone();
        let object = match &config.object {
            ObjectSpec::Gaussian => ObjectModel::gaussian(first)?,
            ObjectSpec::Uniform => ObjectModel::uniform(first)?,
            ObjectSpec::Points { positions, weights } => ObjectModel::points(
                positions.iter().map(|s| real(s, prec)).collect::<CliResult<_>>()?,
                weights.iter().map(|s| real(s, prec)).collect::<CliResult<_>>()?,
                first,
            )?,
            ObjectSpec::Table { path, resolution } => {
                // Tables are read at the run precision.
                let samples = qbound::table::read_two_column(path, ["x", "f"], prec)?;
                ObjectModel::table(&samples, *resolution, first)?
            }
        }
        .with_center(real(&config.center, prec)?);
        let otf = match &config.otf {
            OtfSpec::Gaussian { beta } => OtfModel::gaussian(real(beta, prec)?)?,
            OtfSpec::Flat { beta } => OtfModel::flat(real(beta, prec)?)?,
            OtfSpec::Custom { path } => OtfModel::custom_from_csv(path, prec)?,
        };
        let photons = real(&config.compute.photons, prec)?;
        let w = config.compute.w.as_deref().map(|s| real(s, prec)).transpose()?;
        let out_dir = opts.out.clone().unwrap_or_else(|| config.output_dir.clone());
        Ok(Context {
            config,
            prec,
            object,
            otf,
            deltas,
            photons,
            w,
            out_dir,
        })
    }

    pub fn object_at(&self, delta: &Real) -> CliResult<ObjectModel> {
        Ok(self.object.with_delta(delta.clone())?)
    }

    fn is_points(&self) -> bool {
        matches!(self.object.kind(), ObjectKind::Points { .. })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    fn header(&self, command: Command) -> serde_json::Map<String, Value> {
        let mut m = serde_json::Map::new();
        m.insert("schema_version".into(), json!(SCHEMA_VERSION));
        m.insert("command".into(), json!(command.name()));
        m.insert("precision_bits".into(), json!(self.prec.bits()));
        m.insert("object".into(), json!(self.object.kind_name()));
        m.insert("otf".into(), json!(self.otf.kind_name()));
        m.insert("beta".into(), number(Some(self.otf.beta())));
        m.insert("q_max".into(), json!(self.config.compute.q_max));
        m
    }
}

#[derive(Clone, Debug)]
pub struct ResultRow {
    pub delta: Real,
    pub mu: usize,
    pub k_tilde: Option<Real>,
    pub leading_order: Option<Real>,
    pub tail_estimate: Option<Real>,
    pub norm_residual: Option<Real>,
    pub b_mu_residual: Option<Real>,
    pub verdict: Option<Verdict>,
    pub qsnr: Option<Real>,
    pub direct_fisher: Option<Real>,
    pub convexity_bound: Option<Real>,
    pub classical_sim_bound: Option<Real>,
    /// `χ_q`, `χ'_q` for even μ (snr runs only).
    pub chi: Option<Real>,
    pub chi_bound: Option<Real>,
}

impl ResultRow {
    fn empty(delta: &Real, mu: usize) -> Self {
        ResultRow {
            delta: delta.clone(),
            mu,
            k_tilde: None,
            leading_order: None,
            tail_estimate: None,
            norm_residual: None,
            b_mu_residual: None,
            verdict: None,
            qsnr: None,
            direct_fisher: None,
            convexity_bound: None,
            classical_sim_bound: None,
            chi: None,
            chi_bound: None,
        }
    }

    pub fn csv_record(&self) -> Vec<String> {
        vec![
            self.delta.to_decimal(),
            self.mu.to_string(),
            cell(self.k_tilde.as_ref()),
            cell(self.leading_order.as_ref()),
            cell(self.tail_estimate.as_ref()),
            cell(self.norm_residual.as_ref()),
            cell(self.b_mu_residual.as_ref()),
            self.verdict.map(|v| v.as_str().to_string()).unwrap_or_default(),
            cell(self.qsnr.as_ref()),
            cell(self.direct_fisher.as_ref()),
            cell(self.convexity_bound.as_ref()),
            cell(self.classical_sim_bound.as_ref()),
        ]
    }

    pub fn json(&self) -> Value {
        let mut v = json!({
            "delta": number(Some(&self.delta)),
            "mu": self.mu,
            "k_tilde": number(self.k_tilde.as_ref()),
            "leading_order": number(self.leading_order.as_ref()),
            "tail_estimate": number(self.tail_estimate.as_ref()),
            "norm_residual": number(self.norm_residual.as_ref()),
            "b_mu_residual": number(self.b_mu_residual.as_ref()),
            "verdict": self.verdict.map(|v| v.as_str()),
            "qsnr": number(self.qsnr.as_ref()),
            "direct_fisher": number(self.direct_fisher.as_ref()),
            "convexity_bound": number(self.convexity_bound.as_ref()),
            "classical_sim_bound": number(self.classical_sim_bound.as_ref()),
        });
        if self.chi.is_some() {
            v["chi"] = number(self.chi.as_ref());
            v["chi_bound"] = number(self.chi_bound.as_ref());
        }
        v
    }
}

#[derive(Clone, Copy, Debug)]
pub struct RowOptions {
    pub direct: bool,
    pub prefactors: bool,
}

fn pipeline(ctx: &Context, obj: &ObjectModel) -> CliResult<BoundPipeline> {
    Ok(BoundPipeline::new(
        obj,
        &ctx.otf,
        ctx.config.compute.q_max,
        ctx.w.clone(),
        ctx.config.compute.rtol,
    )?)
}

fn rows_for_delta(ctx: &Context, delta: &Real, opts: RowOptions) -> CliResult<Vec<ResultRow>> {
    let obj = ctx.object_at(delta)?;
    let mus = &ctx.config.compute.mu;
    let q_max = ctx.config.compute.q_max;
    let direct = |mu: usize| -> CliResult<Option<Real>> {
        if !(opts.direct && ctx.config.compute.direct && ctx.otf.is_gaussian()) {
            return Ok(None);
        }
        let trunc = (2 * q_max).max(mu);
        Ok(Some(direct_imaging_fisher(&obj, &ctx.otf, mu, &ctx.photons, trunc)?.value))
    };
    if ctx.is_points() {
        let mu_max = *mus.iter().max().expect("non-empty");
        let cb = ConstellationBounds::new(&obj, &ctx.otf, mu_max)?;
        return mus
            .par_iter()
            .map(|&mu| {
                let mut row = ResultRow::empty(delta, mu);
                row.convexity_bound = Some(cb.convexity_bound(mu, &ctx.photons));
                row.classical_sim_bound = Some(cb.classical_sim_bound(mu, &ctx.photons));
                row.direct_fisher = direct(mu)?;
                Ok(row)
            })
            .collect();
    }
    let p = pipeline(ctx, &obj)?;
    mus.par_iter()
        .map(|&mu| {
            if mu > 2 * q_max {
                return Err(CliError::InvalidConfig(format!("mu = {mu} exceeds 2 q_max = {}", 2 * q_max)));
            }
            let k = p.k_tilde(mu, mu)?;
            let mut row = ResultRow::empty(delta, mu);
            row.leading_order = Some(p.leading_order(mu)?);
            row.qsnr = Some(qsnr(&k, &p.pair.theta[mu], &ctx.photons, delta).value);
            if opts.prefactors && mu % 2 == 0 {
                row.chi = Some(prefactors(&p.pair, &ctx.otf, &obj, mu / 2)?);
                row.chi_bound = Some(prefactor_bound(&ctx.otf, &obj, mu / 2)?);
            }
            row.direct_fisher = direct(mu)?;
            row.tail_estimate = Some(k.tail_estimate);
            row.norm_residual = Some(k.norm_residual);
            row.b_mu_residual = Some(k.b_residual);
            row.verdict = Some(k.verdict);
            row.k_tilde = Some(k.value);
            Ok(row)
        })
        .collect()
}

/// One row per (Δ, μ) in ascending lexicographic order.
pub fn compute_rows(ctx: &Context, opts: RowOptions) -> CliResult<Vec<ResultRow>> {
    let nested: Vec<Vec<ResultRow>> = ctx
        .deltas
        .par_iter()
        .map(|d| rows_for_delta(ctx, d, opts))
        .collect::<CliResult<_>>()?;
    let mut rows: Vec<ResultRow> = nested.into_iter().flatten().collect();
    rows.sort_by(|a, b| match a.delta.total_cmp(&b.delta) {
        Ordering::Equal => a.mu.cmp(&b.mu),
        o => o,
    });
    Ok(rows)
}

fn any_inconclusive(rows: &[ResultRow]) -> bool {
    rows.iter().any(|r| r.verdict == Some(Verdict::Inconclusive))
}

fn write_rows(ctx: &Context, stem: &str, command: Command, rows: &[ResultRow]) -> CliResult<Vec<PathBuf>> {
    let mut files = Vec::new();
    if ctx.config.wants(Format::Csv) {
        let records: Vec<Vec<String>> = rows.iter().map(ResultRow::csv_record).collect();
        files.push(write_csv(&ctx.path(&format!("{stem}.csv")), &CSV_HEADER, &records)?);
    }
    if ctx.config.wants(Format::Json) {
        let mut m = ctx.header(command);
        m.insert("rows".into(), Value::Array(rows.iter().map(ResultRow::json).collect()));
        files.push(write_json(&ctx.path(&format!("{stem}.json")), &Value::Object(m))?);
    }
    Ok(files)
}

pub fn run_bound(ctx: &Context) -> CliResult<Outcome> {
    let rows = compute_rows(
        ctx,
        RowOptions {
            direct: true,
            prefactors: false,
        },
    )?;
    let files = write_rows(ctx, "bound", Command::Bound, &rows)?;
    Ok(Outcome {
        exit_code: if any_inconclusive(&rows) { 2 } else { 0 },
        files,
    })
}

#[derive(Clone, Debug)]
pub struct SlopeReport {
    pub mu: usize,
    pub fitted_slope: f64,
    pub target_slope: f64,
    /// Largest deviation of the pairwise (local) slopes from the target.
    pub max_abs_deviation: f64,
}

impl SlopeReport {
    pub fn passed(&self) -> bool {
        (self.fitted_slope - self.target_slope).abs() <= SLOPE_TOLERANCE
    }
}

/// `-2 ⌊μ/2⌋`
pub fn target_slope(mu: usize) -> f64 {
    (-2 * (mu / 2) as i64) as f64
}

fn check_geometric(deltas: &[Real]) -> CliResult<()> {
    if deltas.len() < 3 {
        return Err(CliError::Precondition("scaling needs at least 3 distinct delta values".into()));
    }
    let ratios: Vec<f64> = deltas.windows(2).map(|w| (&w[1] / &w[0]).to_f64()).collect();
    if ratios.iter().any(|r| ((r / ratios[0]) - 1.0).abs() > 1e-6) {
        return Err(CliError::Precondition("delta values must be geometrically spaced".into()));
    }
    Ok(())
}

pub fn slope_reports(ctx: &Context, rows: &[ResultRow]) -> Vec<SlopeReport> {
    let xs: Vec<f64> = ctx.deltas.iter().map(Real::to_f64).collect();
    ctx.config
        .compute
        .mu
        .iter()
        .map(|&mu| {
            let ys: Vec<f64> = rows
                .iter()
                .filter(|r| r.mu == mu)
                .map(|r| r.k_tilde.as_ref().map(Real::to_f64).unwrap_or(f64::NAN))
                .collect();
            let target = target_slope(mu);
            let fitted = loglog_slope(&xs, &ys);
            let max_abs_deviation = pairwise_loglog_slopes(&xs, &ys)
                .iter()
                .map(|s| (s - target).abs())
                .fold(0.0, f64::max);
            SlopeReport {
                mu,
                fitted_slope: fitted,
                target_slope: target,
                max_abs_deviation,
            }
        })
        .collect()
}

pub fn run_scaling(ctx: &Context) -> CliResult<Outcome> {
    check_geometric(&ctx.deltas)?;
    if ctx.is_points() {
        return Err(CliError::Precondition("scaling needs a continuous object".into()));
    }
    let rows = compute_rows(
        ctx,
        RowOptions {
            direct: false,
            prefactors: false,
        },
    )?;
    let reports = slope_reports(ctx, &rows);
    let passed = reports.iter().all(SlopeReport::passed);
    let mut files = Vec::new();
    if ctx.config.wants(Format::Csv) {
        let records: Vec<Vec<String>> = rows.iter().map(ResultRow::csv_record).collect();
        files.push(write_csv(&ctx.path("scaling_rows.csv"), &CSV_HEADER, &records)?);
    }
    let mut m = ctx.header(Command::Scaling);
    m.insert("deltas".into(), Value::Array(ctx.deltas.iter().map(|d| number(Some(d))).collect()));
    m.insert("tolerance".into(), float(SLOPE_TOLERANCE));
    m.insert(
        "reports".into(),
        Value::Array(
            reports
                .iter()
                .map(|r| {
                    json!({
                        "mu": r.mu,
                        "fitted_slope": float(r.fitted_slope),
                        "target_slope": float(r.target_slope),
                        "max_abs_deviation": float(r.max_abs_deviation),
                        "passed": r.passed(),
                    })
                })
                .collect(),
        ),
    );
    m.insert("passed".into(), json!(passed));
    files.push(write_json(&ctx.path("scaling.json"), &Value::Object(m))?);
    Ok(Outcome {
        exit_code: if passed && !any_inconclusive(&rows) { 0 } else { 2 },
        files,
    })
}

/// Whether QSNR over the configured even μ decreases with μ at each Δ.
pub fn even_qsnr_decreasing(rows: &[ResultRow], delta: &Real) -> bool {
    let vals: Vec<&Real> = rows
        .iter()
        .filter(|r| &r.delta == delta && r.mu % 2 == 0)
        .filter_map(|r| r.qsnr.as_ref())
        .collect();
    vals.windows(2).all(|w| w[1] < w[0])
}

pub fn run_snr(ctx: &Context) -> CliResult<Outcome> {
    if ctx.is_points() {
        return Err(CliError::Precondition("snr needs a continuous object".into()));
    }
    let rows = compute_rows(
        ctx,
        RowOptions {
            direct: false,
            prefactors: true,
        },
    )?;
    let prefactor_ok = rows
        .iter()
        .all(|r| match (&r.chi, &r.chi_bound) {
            (Some(c), Some(b)) => c <= b,
            _ => true,
        });
    let mut files = Vec::new();
    if ctx.config.wants(Format::Csv) {
        let header = ["delta", "mu", "k_tilde", "verdict", "qsnr", "chi", "chi_bound"];
        let records: Vec<Vec<String>> = rows
            .iter()
            .map(|r| {
                vec![
                    r.delta.to_decimal(),
                    r.mu.to_string(),
                    cell(r.k_tilde.as_ref()),
                    r.verdict.map(|v| v.as_str().to_string()).unwrap_or_default(),
                    cell(r.qsnr.as_ref()),
                    cell(r.chi.as_ref()),
                    cell(r.chi_bound.as_ref()),
                ]
            })
            .collect();
        files.push(write_csv(&ctx.path("snr.csv"), &header, &records)?);
    }
    let mut m = ctx.header(Command::Snr);
    m.insert("photons".into(), number(Some(&ctx.photons)));
    m.insert(
        "even_qsnr_decreasing".into(),
        Value::Array(
            ctx.deltas
                .iter()
                .map(|d| json!({"delta": number(Some(d)), "decreasing": even_qsnr_decreasing(&rows, d)}))
                .collect(),
        ),
    );
    m.insert("prefactor_bound_holds".into(), json!(prefactor_ok));
    m.insert("rows".into(), Value::Array(rows.iter().map(ResultRow::json).collect()));
    files.push(write_json(&ctx.path("snr.json"), &Value::Object(m))?);
    Ok(Outcome {
        exit_code: if prefactor_ok && !any_inconclusive(&rows) { 0 } else { 2 },
        files,
    })
}

pub fn thermal_generator(ctx: &Context) -> ModelGenerator {
    let t = &ctx.config.thermal;
    let mut g = ModelGenerator::new(t.seed, t.max_dim, ctx.prec);
    g.spread = t.spread;
    g.ridge = t.ridge;
    g
}

pub fn run_thermal(ctx: &Context) -> CliResult<Outcome> {
    let t = &ctx.config.thermal;
    let report = property_suite(&mut thermal_generator(ctx), t.seed, t.models)?;
    let mut m = serde_json::Map::new();
    m.insert("schema_version".into(), json!(SCHEMA_VERSION));
    m.insert("command".into(), json!("thermal"));
    m.insert("precision_bits".into(), json!(ctx.prec.bits()));
    m.insert("seed".into(), json!(t.seed));
    m.insert("models".into(), json!(t.models));
    m.insert("max_dim".into(), json!(t.max_dim));
    m.insert("spread".into(), float(t.spread));
    m.insert("ridge".into(), float(t.ridge));
    m.insert(
        "properties".into(),
        Value::Array(
            report
                .properties
                .iter()
                .map(|p| {
                    json!({
                        "name": p.name,
                        "passed": p.passed,
                        "worst_margin": float(p.worst),
                        "threshold": float(p.threshold),
                    })
                })
                .collect(),
        ),
    );
    m.insert("all_passed".into(), json!(report.all_passed()));
    let file = write_json(&ctx.path("thermal.json"), &Value::Object(m))?;
    Ok(Outcome {
        exit_code: if report.all_passed() { 0 } else { 2 },
        files: vec![file],
    })
}

#[derive(Clone, Debug)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: Option<f64>,
    pub threshold: Option<f64>,
}

impl Check {
    fn new(name: impl Into<String>, passed: bool, value: Option<f64>, threshold: Option<f64>) -> Self {
        Check {
            name: name.into(),
            passed,
            value,
            threshold,
        }
    }

    fn below(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Check::new(name, value.abs() < threshold, Some(value), Some(threshold))
    }
}

/// Largest q_max used for the two-formula derivative comparison.
pub const VALIDATE_Q_MAX: usize = 6;

/// Self-consistency checks at the smallest configured Δ.
pub fn validation_checks(ctx: &Context) -> CliResult<Vec<Check>> {
    let delta = &ctx.deltas[0];
    let obj = ctx.object_at(delta)?;
    let mut checks = vec![Check::new("config", true, None, None)];
    if ctx.is_points() {
        let mu_max = *ctx.config.compute.mu.iter().max().expect("non-empty");
        let cb = ConstellationBounds::new(&obj, &ctx.otf, mu_max)?;
        for &mu in &ctx.config.compute.mu {
            let a = cb.convexity_bound(mu, &ctx.photons);
            let b = cb.convexity_closed_form(mu, &ctx.photons)?;
            let rel = ((&a - &b).abs() / b.abs()).to_f64();
            checks.push(Check::below(format!("convexity_closed_form_mu{mu}"), rel, IDENTITY_TOLERANCE));
            let a = cb.classical_sim_bound(mu, &ctx.photons);
            let b = cb.classical_sim_closed_form(mu, &ctx.photons)?;
            let rel = ((&a - &b).abs() / b.abs()).to_f64();
            checks.push(Check::below(format!("classical_closed_form_mu{mu}"), rel, IDENTITY_TOLERANCE));
        }
        return Ok(checks);
    }
    let q_max = ctx.config.compute.q_max;
    let h = object_hankel(&obj, q_max)?;
    checks.push(Check::new("hankel_positive_definite", h.positive_definite, None, None));
    let is_gaussian = matches!(obj.kind(), ObjectKind::Gaussian);
    let w = ctx.w.clone().unwrap_or_else(|| default_w(is_gaussian, &ctx.otf, delta));
    let pi = pi_matrix(&ctx.otf, q_max, &w)?;
    let tc = pi_trace_check(&pi, &ctx.otf, Some(delta));
    checks.push(Check::new("pi_trace_converges", tc.converged, Some(tc.value.to_f64()), None));
    if let Some(f) = tc.feasible {
        checks.push(Check::new("w_window_nonempty", f, Some((ctx.otf.beta() * delta).to_f64()), Some(0.5)));
    }
    checks.push(Check::new("w_in_window", check_window(&obj, &ctx.otf, &w).is_ok(), Some(w.to_f64()), None));
    let p = pipeline(ctx, &obj)?;
    for &mu in &ctx.config.compute.mu {
        let k = p.k_tilde(mu, mu)?;
        checks.push(Check::below(format!("norm_residual_mu{mu}"), k.norm_residual.to_f64(), IDENTITY_TOLERANCE));
        checks.push(Check::below(format!("b_residual_mu{mu}"), k.b_residual.to_f64(), IDENTITY_TOLERANCE));
        checks.push(Check::new(
            format!("verdict_mu{mu}"),
            k.verdict == Verdict::Converged,
            None,
            None,
        ));
    }
    let small = object_cholesky(&obj, q_max.min(VALIDATE_Q_MAX))?;
    let forms_tol = ctx.prec.tolerance(16).to_f64();
    for &mu in ctx.config.compute.mu.iter().filter(|&&m| m <= 2 * small.q_max) {
        let r = derivative_recursive(&small, mu)?;
        let s = derivative_sarkka(&small, mu)?;
        let fd = derivative_finite_difference(&small, mu)?;
        checks.push(Check::new(
            format!("derivative_forms_mu{mu}"),
            row_relative_difference(&r, &s) <= ctx.prec.tolerance(16),
            Some(row_relative_difference(&r, &s).to_f64()),
            Some(forms_tol),
        ));
        checks.push(Check::below(
            format!("derivative_fd_mu{mu}"),
            row_relative_difference(&r, &fd).to_f64(),
            FD_TOLERANCE,
        ));
        checks.push(Check::new(
            format!("zero_block_mu{mu}"),
            r.zero_block_exact() && s.zero_block_exact(),
            None,
            None,
        ));
    }
    Ok(checks)
}

pub fn run_validate(ctx: &Context) -> CliResult<Outcome> {
    let checks = validation_checks(ctx)?;
    let passed = checks.iter().all(|c| c.passed);
    let mut m = ctx.header(Command::Validate);
    m.insert(
        "checks".into(),
        Value::Array(
            checks
                .iter()
                .map(|c| {
                    json!({
                        "name": c.name,
                        "passed": c.passed,
                        "value": c.value.map(float),
                        "threshold": c.threshold.map(float),
                    })
                })
                .collect(),
        ),
    );
    m.insert("passed".into(), json!(passed));
    let file = write_json(&ctx.path("validate.json"), &Value::Object(m))?;
    Ok(Outcome {
        exit_code: if passed { 0 } else { 2 },
        files: vec![file],
    })
}

pub fn execute(command: Command, config_path: &Path, opts: &Options) -> CliResult<Outcome> {
    let config = RunConfig::from_file(config_path)?;
    execute_config(command, config, opts)
}

pub fn execute_config(command: Command, config: RunConfig, opts: &Options) -> CliResult<Outcome> {
    let ctx = Context::new(config, opts)?;
    std::fs::create_dir_all(&ctx.out_dir)
        .map_err(|e| CliError::Io(format!("{}: {e}", ctx.out_dir.display())))?;
    match command {
        Command::Bound => run_bound(&ctx),
        Command::Scaling => run_scaling(&ctx),
        Command::Snr => run_snr(&ctx),
        Command::Thermal => run_thermal(&ctx),
        Command::Validate => run_validate(&ctx),
    }
}
