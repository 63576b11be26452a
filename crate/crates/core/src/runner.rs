//! Batch runner: configuration, the suite registry, shared artifacts and
//! report output.
//!
//! Every suite reduces to a list of [`Check`]s. A check compares a measured
//! value with a bound; its violation is `value / bound` for upper bounds and
//! `bound / value` for lower bounds, so a suite passes iff its largest
//! violation is below 1.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{self, Write};
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::kernel::{kernel_divided_difference, lnorm_identity_check, slice_gram_check, CdKernelSet};
use crate::measure::{check_stability, inner_product, BernsteinSzego, MomentTable, MOMENT_TOL, STABILITY_GRID};
use crate::opuc::{
    build_opuc, gram_schmidt_monic, moment_vanishing_check, opuc_orthogonality_check, trig_structure_residual,
};
use crate::poly::{DegreePair, LaurentPoly, PolyJson, C64};
use crate::sample::{disk_point, seeded};
use rand_chacha::ChaCha8Rng as SampleRng;
use crate::schur_cohn::{build_tm, inverse_moment_residual, LaurentMatrixPoly};
use crate::subspace::{
    align_phase, big_space_monomials, l_orthogonality, orthogonality_suite_ak, outside_monomials,
    reconstruct_ak, reflected_multiples, required_window, shift_decomposition_check, span_rank_check,
    verify_big_kernel, CdVerifier, DEFAULT_MARGIN,
};

/// Suites in dependency order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Suite {
    Stability,
    Moments,
    SchurCohn,
    CdKernel,
    VerifyOrthogonality,
    VerifyCd,
    VerifyKernel,
    Parametric,
}

impl Suite {
    pub const ALL: [Suite; 8] = [
        Suite::Stability,
        Suite::Moments,
        Suite::SchurCohn,
        Suite::CdKernel,
        Suite::VerifyOrthogonality,
        Suite::VerifyCd,
        Suite::VerifyKernel,
        Suite::Parametric,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Stability => "stability",
            Suite::Moments => "moments",
            Suite::SchurCohn => "schur-cohn",
            Suite::CdKernel => "cd-kernel",
            Suite::VerifyOrthogonality => "verify-orthogonality",
            Suite::VerifyCd => "verify-cd",
            Suite::VerifyKernel => "verify-kernel",
            Suite::Parametric => "parametric",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::ConfigInvalid(format!("unknown suite `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MomentMethod {
    Grid,
    #[default]
    Series,
}

impl FromStr for MomentMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "grid" => Ok(Self::Grid),
            "series" => Ok(Self::Series),
            _ => Err(Error::ConfigInvalid(format!("unknown moment method `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Self::Json),
            "csv" => Ok(Self::Csv),
            _ => Err(Error::ConfigInvalid(format!("unknown format `{s}`"))),
        }
    }
}

/// Named tolerance classes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub orthogonality: f64,
    pub identity: f64,
    pub cross_path: f64,
    pub moments: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { orthogonality: 1e-8, identity: 1e-9, cross_path: 1e-10, moments: MOMENT_TOL }
    }
}

impl Tolerances {
    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        if !(value > 0.0 && value.is_finite()) {
            return Err(Error::ConfigInvalid(format!("tolerance `{name}` must be positive, got {value}")));
        }
        let slot = match name {
            "orthogonality" => &mut self.orthogonality,
            "identity" => &mut self.identity,
            "cross_path" | "cross-path" => &mut self.cross_path,
            "moments" => &mut self.moments,
            _ => return Err(Error::ConfigInvalid(format!("unknown tolerance `{name}`"))),
        };
        *slot = value;
        Ok(())
    }
}

fn default_margin() -> i32 {
    DEFAULT_MARGIN
}
fn default_shift_max() -> i32 {
    2
}
fn default_theta_grid() -> usize {
    32
}
fn default_stability_grid() -> usize {
    STABILITY_GRID
}
fn default_k_max() -> usize {
    3
}
fn default_points() -> usize {
    100
}
fn default_etas() -> usize {
    10
}

/// Run configuration, read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub polynomial: PolyJson,
    /// Suites to run; `None` means all of them.
    #[serde(default)]
    pub suites: Option<Vec<String>>,
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
    /// Moment window; widened to what the selected suites need.
    #[serde(default)]
    pub window: Option<[usize; 2]>,
    #[serde(default = "default_margin")]
    pub margin: i32,
    #[serde(default = "default_shift_max")]
    pub shift_max: i32,
    #[serde(default = "default_theta_grid")]
    pub theta_grid: usize,
    #[serde(default = "default_stability_grid")]
    pub stability_grid: usize,
    #[serde(default)]
    pub moment_method: MomentMethod,
    /// Convergence target for the moment table itself.
    #[serde(default)]
    pub moment_tol: Option<f64>,
    /// Restricts the vanishing check to one index.
    #[serde(default)]
    pub j: Option<usize>,
    #[serde(default = "default_k_max")]
    pub k_max: usize,
    /// Number of random 4-tuples for the Christoffel-Darboux check.
    #[serde(default = "default_points")]
    pub points: usize,
    /// Number of random `eta` for kernel checks.
    #[serde(default = "default_etas")]
    pub etas: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_path: Option<String>,
    #[serde(default)]
    pub format: Format,
}

impl RunConfig {
    pub fn new(polynomial: PolyJson) -> Self {
        Self {
            polynomial,
            suites: None,
            tolerances: BTreeMap::new(),
            window: None,
            margin: default_margin(),
            shift_max: default_shift_max(),
            theta_grid: default_theta_grid(),
            stability_grid: default_stability_grid(),
            moment_method: MomentMethod::default(),
            moment_tol: None,
            j: None,
            k_max: default_k_max(),
            points: default_points(),
            etas: default_etas(),
            seed: 0,
            output_path: None,
            format: Format::default(),
        }
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::ConfigInvalid(e.to_string()))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::ConfigInvalid(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    /// Selected suites, deduplicated, in registry order.
    pub fn selected_suites(&self) -> Result<Vec<Suite>> {
        let Some(names) = &self.suites else {
            return Ok(Suite::ALL.to_vec());
        };
        let mut out = Vec::new();
        for name in names {
            if name == "all" {
                out.extend(Suite::ALL);
            } else {
                out.push(name.parse()?);
            }
        }
        out.sort();
        out.dedup();
        Ok(out)
    }

    pub fn resolved_tolerances(&self) -> Result<Tolerances> {
        let mut t = Tolerances::default();
        for (k, &v) in &self.tolerances {
            t.set(k, v)?;
        }
        Ok(t)
    }

    pub fn validate(&self) -> Result<(LaurentPoly, DegreePair, Vec<Suite>, Tolerances)> {
        let (p, deg) = self.polynomial.into_poly()?;
        let suites = self.selected_suites()?;
        let tol = self.resolved_tolerances()?;
        if self.margin < 0 || self.shift_max < 0 {
            return Err(Error::ConfigInvalid("margin and shift_max must be nonnegative".into()));
        }
        if self.theta_grid == 0 || self.stability_grid == 0 {
            return Err(Error::ConfigInvalid("grids must be nonempty".into()));
        }
        if let Some(t) = self.moment_tol {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::ConfigInvalid("moment_tol must be positive".into()));
            }
        }
        if let Some(j) = self.j {
            if j >= deg.m.max(1) {
                return Err(Error::ConfigInvalid(format!("j = {j} must be below m = {}", deg.m)));
            }
        }
        Ok((p, deg, suites, tol))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Inconclusive,
    Fail,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bound {
    /// `value < bound` passes.
    Max,
    /// `value > bound` passes.
    Min,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub kind: Bound,
    pub passed: bool,
}

impl Check {
    pub fn max(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self { name: name.into(), value, bound, kind: Bound::Max, passed: value < bound }
    }

    pub fn min(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self { name: name.into(), value, bound, kind: Bound::Min, passed: value > bound }
    }

    pub fn violation(&self) -> f64 {
        let v = match self.kind {
            Bound::Max => self.value / self.bound,
            Bound::Min if self.value > 0.0 => self.bound / self.value,
            Bound::Min => f64::MAX,
        };
        if v.is_nan() {
            f64::MAX
        } else {
            v
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: String,
    pub status: Status,
    /// Largest check violation; below 1 iff every check passed.
    pub max_violation: f64,
    pub checks: Vec<Check>,
    pub data: Value,
    pub message: Option<String>,
    pub wall_time: f64,
}

impl SuiteReport {
    fn from_checks(suite: Suite, checks: Vec<Check>, data: Value, wall_time: f64) -> Self {
        let max_violation = checks.iter().map(Check::violation).fold(0.0, f64::max);
        let status = if checks.iter().all(|c| c.passed) { Status::Pass } else { Status::Fail };
        Self { suite: suite.name().into(), status, max_violation, checks, data, message: None, wall_time }
    }

    fn failed(suite: Suite, status: Status, message: String, wall_time: f64) -> Self {
        Self {
            suite: suite.name().into(),
            status,
            max_violation: 1.0,
            checks: Vec::new(),
            data: Value::Null,
            message: Some(message),
            wall_time,
        }
    }
}

/// Exit code for a finished run: 1 if anything failed, else 3 if anything
/// was inconclusive, else 0.
pub fn exit_code(reports: &[SuiteReport]) -> i32 {
    if reports.iter().any(|r| r.status == Status::Fail) {
        1
    } else if reports.iter().any(|r| r.status == Status::Inconclusive) {
        3
    } else {
        0
    }
}

/// Outcome of the stability test, shared by every suite.
#[derive(Debug, Clone)]
enum Gate {
    Stable,
    Unstable(String),
    Inconclusive(String),
    Error(String),
}

/// Artifacts built once and shared across suites.
struct Context {
    cfg: RunConfig,
    p: LaurentPoly,
    deg: DegreePair,
    tol: Tolerances,
    mu: BernsteinSzego,
    window: (usize, usize),
    moments: std::result::Result<MomentTable, String>,
    tm: std::result::Result<LaurentMatrixPoly, String>,
    ks: std::result::Result<CdKernelSet, String>,
}

impl Context {
    fn moments(&self) -> Result<&MomentTable> {
        self.moments.as_ref().map_err(|e| Error::ConfigInvalid(format!("moment table unavailable: {e}")))
    }

    fn tm(&self) -> Result<&LaurentMatrixPoly> {
        self.tm.as_ref().map_err(|e| Error::ConfigInvalid(format!("T_m unavailable: {e}")))
    }

    fn ks(&self) -> Result<&CdKernelSet> {
        self.ks.as_ref().map_err(|e| Error::ConfigInvalid(format!("kernel coefficients unavailable: {e}")))
    }

    fn rng(&self, salt: u64) -> SampleRng {
        seeded(self.cfg.seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15))
    }

    fn moment_table(&self, method: MomentMethod) -> Result<MomentTable> {
        match method {
            MomentMethod::Grid => self.mu.moments_grid(self.window, self.cfg.moment_tol.unwrap_or(self.tol.moments)),
            MomentMethod::Series => self.mu.moments_series_auto(self.window),
        }
    }

    fn angles(&self) -> Vec<f64> {
        let n = self.cfg.theta_grid;
        (0..n).map(|t| std::f64::consts::TAU * t as f64 / n as f64 - std::f64::consts::PI).collect()
    }
}

/// Runs the selected suites. Only configuration problems are returned as
/// errors; suite failures are recorded in the reports.
pub fn run(cfg: &RunConfig) -> Result<Vec<SuiteReport>> {
    let (p, deg, suites, tol) = cfg.validate()?;
    if suites.is_empty() {
        return Ok(Vec::new());
    }

    let start = Instant::now();
    let stability = check_stability(&p, deg, cfg.stability_grid);
    let stability_time = start.elapsed().as_secs_f64();
    let gate = match &stability {
        Ok(r) if r.stable => Gate::Stable,
        Ok(r) => Gate::Unstable(match r.witness {
            Some((z, w)) => format!("polynomial vanishes near ({z}, {w})"),
            None => "polynomial is not stable".into(),
        }),
        Err(e @ Error::InconclusiveNearBoundary { .. }) => Gate::Inconclusive(e.to_string()),
        Err(e) => Gate::Error(e.to_string()),
    };

    let mut reports = Vec::with_capacity(suites.len());
    if suites.contains(&Suite::Stability) {
        reports.push(stability_report(&stability, stability_time));
    }
    let rest: Vec<Suite> = suites.into_iter().filter(|&s| s != Suite::Stability).collect();
    if rest.is_empty() {
        return Ok(reports);
    }

    let blocked = |status: Status, why: &str| -> Vec<SuiteReport> {
        rest.iter().map(|&s| SuiteReport::failed(s, status, why.to_string(), 0.0)).collect()
    };
    match &gate {
        Gate::Stable => {}
        Gate::Unstable(why) | Gate::Error(why) => {
            reports.extend(blocked(Status::Fail, why));
            return Ok(reports);
        }
        Gate::Inconclusive(why) => {
            reports.extend(blocked(Status::Inconclusive, why));
            return Ok(reports);
        }
    }

    let mu = match BernsteinSzego::with_resolution(p.clone(), deg, cfg.stability_grid) {
        Ok(mu) => mu,
        Err(e) => {
            reports.extend(blocked(Status::Fail, &e.to_string()));
            return Ok(reports);
        }
    };
    let need = required_window(deg, cfg.margin, cfg.shift_max);
    let need = (need.0.max(deg.n + 1), need.1.max(deg.m + 1));
    let window = match cfg.window {
        Some([a, b]) => (a.max(need.0), b.max(need.1)),
        None => need,
    };
    let tm = build_tm(&p, deg).map_err(|e| e.to_string());
    let ks = match &tm {
        Ok(t) => CdKernelSet::from_tm(t, deg, &p).map_err(|e| e.to_string()),
        Err(e) => Err(e.clone()),
    };
    let mut ctx =
        Context { cfg: cfg.clone(), p, deg, tol, mu, window, moments: Err(String::new()), tm, ks };
    ctx.moments = ctx.moment_table(cfg.moment_method).map_err(|e| e.to_string());

    let mut rest_reports: Vec<SuiteReport> = rest
        .par_iter()
        .map(|&suite| {
            let t0 = Instant::now();
            let outcome = match suite {
                Suite::Stability => unreachable!("handled before the shared artifacts"),
                Suite::Moments => moments_suite(&ctx),
                Suite::SchurCohn => schur_cohn_suite(&ctx),
                Suite::CdKernel => cd_kernel_suite(&ctx),
                Suite::VerifyOrthogonality => orthogonality_suite(&ctx),
                Suite::VerifyCd => cd_formula_suite(&ctx),
                Suite::VerifyKernel => big_kernel_suite(&ctx),
                Suite::Parametric => parametric_suite(&ctx),
            };
            let dt = t0.elapsed().as_secs_f64();
            match outcome {
                Ok((checks, data)) => SuiteReport::from_checks(suite, checks, data, dt),
                Err(e) => SuiteReport::failed(suite, Status::Fail, e.to_string(), dt),
            }
        })
        .collect();
    reports.append(&mut rest_reports);
    Ok(reports)
}

fn stability_report(outcome: &Result<crate::measure::StabilityReport>, wall_time: f64) -> SuiteReport {
    match outcome {
        Ok(r) => {
            let mut rep = SuiteReport::from_checks(
                Suite::Stability,
                vec![Check::max("unstable", if r.stable { 0.0 } else { 1.0 }, 0.5)],
                json!({ "stable": r.stable, "witness": r.witness, "min_modulus": r.min_modulus }),
                wall_time,
            );
            if let Some((z, w)) = r.witness {
                rep.message = Some(format!("polynomial vanishes near ({z}, {w})"));
            }
            rep
        }
        Err(e @ Error::InconclusiveNearBoundary { .. }) => {
            SuiteReport::failed(Suite::Stability, Status::Inconclusive, e.to_string(), wall_time)
        }
        Err(e) => SuiteReport::failed(Suite::Stability, Status::Fail, e.to_string(), wall_time),
    }
}

type Outcome = Result<(Vec<Check>, Value)>;

fn moments_suite(ctx: &Context) -> Outcome {
    let table = ctx.moments()?;
    let other_method = match ctx.cfg.moment_method {
        MomentMethod::Grid => MomentMethod::Series,
        MomentMethod::Series => MomentMethod::Grid,
    };
    let other = ctx.moment_table(other_method)?;
    let checks = vec![
        Check::max("est_error", table.est_error(), ctx.cfg.moment_tol.unwrap_or(ctx.tol.moments)),
        Check::max("grid_vs_series", table.max_abs_diff(&other), ctx.tol.cross_path),
    ];
    Ok((checks, json!({ "method": ctx.cfg.moment_method, "table": table.to_json() })))
}

fn schur_cohn_suite(ctx: &Context) -> Outcome {
    let tm = ctx.tm()?;
    let scan = tm.positivity_scan(ctx.cfg.stability_grid);
    let mut inverse: f64 = 0.0;
    for theta in ctx.angles() {
        inverse = inverse.max(inverse_moment_residual(&ctx.mu, tm, theta)?);
    }
    let checks = vec![
        Check::min("min_eigenvalue", scan.min_eig, 1e-12),
        Check::max("inverse_moment_identity", inverse, ctx.tol.orthogonality),
    ];
    let profiles: Vec<_> = ctx.angles().into_iter().map(|t| tm.principal_determinants(t)).collect();
    Ok((checks, json!({ "positivity": scan, "determinants": profiles })))
}

fn cd_kernel_suite(ctx: &Context) -> Outcome {
    let ks = ctx.ks()?;
    let tm = ctx.tm()?;
    let reflected = ctx.mu.reflected();
    let mut rng = ctx.rng(1);
    let mut division: f64 = 0.0;
    let mut cofactors: f64 = 0.0;
    let mut lnorm: f64 = 0.0;
    for _ in 0..ctx.cfg.etas {
        let eta = disk_point(&mut rng, 2.0);
        let l = ks.kernel_at(eta);
        division = division.max(l.max_abs_diff(&kernel_divided_difference(&ctx.p, ctx.deg, eta)?));
        cofactors = cofactors.max(l.max_abs_diff(&ks.kernel_via_cofactors(eta, &ctx.p, reflected)));
    }
    let mut gram: f64 = 0.0;
    for theta in ctx.angles() {
        let eta = disk_point(&mut rng, 1.5);
        lnorm = lnorm.max(lnorm_identity_check(&ctx.mu, ks, theta, eta)?.residual);
        gram = gram.max(slice_gram_check(&ctx.mu, ks, tm, theta)?.iter().map(|c| c.norm()).fold(0.0, f64::max));
    }
    let sv = ks.span_singular_values();
    let checks = vec![
        Check::max("tm_vs_division", division, ctx.tol.cross_path),
        Check::max("tm_vs_cofactors", cofactors, ctx.tol.cross_path),
        Check::max("cofactor_split", ks.cofactor_residual(&ctx.p, reflected), ctx.tol.cross_path),
        Check::max("reflection_symmetry", ks.symmetry_residual()?, ctx.tol.cross_path),
        Check::max("support_violations", if ks.supports_ok() { 0.0 } else { 1.0 }, 0.5),
        Check::min("min_singular_value", sv.last().copied().unwrap_or(0.0), ctx.tol.orthogonality),
        Check::max("lnorm_identity", lnorm, ctx.tol.identity),
        Check::max("slice_gram_identity", gram, ctx.tol.identity),
    ];
    let n = ctx.deg.n;
    let m = ctx.deg.m;
    let polys = |v: &[LaurentPoly], deg: DegreePair| -> Result<Vec<PolyJson>> { v.iter().map(|a| a.to_json(deg)).collect() };
    let data = json!({
        "a": polys(&ks.coeffs, DegreePair::new(2 * n, m - 1))?,
        "A": polys(&ks.p_cofactors, DegreePair::new(n, m - 1))?,
        "B": polys(&ks.reflected_cofactors, DegreePair::new(n, m - 1))?,
    });
    Ok((checks, data))
}

fn orthogonality_suite(ctx: &Context) -> Outcome {
    let ks = ctx.ks()?;
    let tm = ctx.tm()?;
    let mt = ctx.moments()?;
    let margin = ctx.cfg.margin;
    let ak = orthogonality_suite_ak(ks, mt, margin)?;
    let mut rng = ctx.rng(2);
    let etas: Vec<C64> = (0..ctx.cfg.etas).map(|_| disk_point(&mut rng, 1.5)).collect();
    let l = l_orthogonality(ks, mt, &etas, margin)?;
    let shift = shift_decomposition_check(ks, mt, ctx.cfg.shift_max, margin)?;
    let sv = span_rank_check(ks, mt, ctx.cfg.shift_max)?;
    let mut reconstruction: f64 = 0.0;
    let mut norm_law: f64 = 0.0;
    for (k, a) in ks.coeffs.iter().enumerate() {
        let rec = reconstruct_ak(tm, ctx.deg, k, mt)?;
        reconstruction = reconstruction.max(align_phase(&rec, a).max_abs_diff(a));
        let norm2 = inner_product(a, a, mt)?.re;
        norm_law = norm_law.max((norm2 - tm.mean_entry(k, k).re).abs());
    }
    let tol = ctx.tol.orthogonality;
    let checks = vec![
        Check::max("a_k_orthogonality", ak.max_relative, tol),
        Check::max("l_orthogonality", l.max_relative, tol),
        Check::max("shift_orthogonality", shift.max_relative, tol),
        Check::min("span_min_singular_value", sv.last().copied().unwrap_or(0.0), tol),
        Check::max("reconstruction", reconstruction, tol),
        Check::max("norm_law", norm_law, tol),
    ];
    let data = json!({
        "max_violation_abs": ak.max_violation.max(l.max_violation).max(shift.max_violation),
        "anchors": ak.info.iter().filter(|e| e.label.starts_with("anchor")).collect::<Vec<_>>(),
        "inner_products": ak.entries.len() + l.entries.len() + shift.entries.len(),
    });
    Ok((checks, data))
}

fn cd_formula_suite(ctx: &Context) -> Outcome {
    let mt = ctx.moments()?;
    let verifier = CdVerifier::new(&ctx.mu, mt)?;
    let mut rng = ctx.rng(3);
    let mut worst: f64 = 0.0;
    for _ in 0..ctx.cfg.points {
        let [z, w, z1, w1]: [C64; 4] = std::array::from_fn(|_| disk_point(&mut rng, 1.0));
        worst = worst.max(verifier.terms(z, w, z1, w1)?.residual);
    }
    let zero = C64::new(0.0, 0.0);
    let origin = verifier.terms(zero, zero, zero, zero)?;
    Ok((vec![Check::max("cd_identity", worst, ctx.tol.identity)], json!({ "origin": origin, "points": ctx.cfg.points })))
}

fn big_kernel_suite(ctx: &Context) -> Outcome {
    let mt = ctx.moments()?;
    let mut tests = big_space_monomials(ctx.deg, 10);
    tests.extend(reflected_multiples(&ctx.mu));
    tests.extend(outside_monomials(ctx.deg));
    let mut rng = ctx.rng(4);
    let points: Vec<(C64, C64)> = (0..10).map(|_| (disk_point(&mut rng, 0.7), disk_point(&mut rng, 0.7))).collect();
    let r = verify_big_kernel(&ctx.mu, mt, &tests, &points)?;
    let mut by_label: BTreeMap<&str, f64> = BTreeMap::new();
    for e in &r.entries {
        let slot = by_label.entry(e.label.as_str()).or_insert(0.0);
        *slot = slot.max(e.residual);
    }
    Ok((
        vec![Check::max("reproducing_kernel", r.max_residual, ctx.tol.orthogonality)],
        json!({ "grid": r.grid, "residual_by_function": by_label }),
    ))
}

fn parametric_suite(ctx: &Context) -> Outcome {
    let tm = ctx.tm()?;
    let m = tm.dim();
    let mut offdiag: f64 = 0.0;
    let mut lu_law: f64 = 0.0;
    let mut factor: f64 = 0.0;
    let mut chain: f64 = 0.0;
    let mut uniqueness: f64 = 0.0;
    let mut printed_matches: Option<bool> = None;
    let mut rows = Vec::new();
    for theta in ctx.angles() {
        let family = build_opuc(tm, theta)?;
        let r = opuc_orthogonality_check(&ctx.mu, tm, theta)?;
        offdiag = offdiag.max(r.max_offdiag);
        lu_law = lu_law.max(r.lu_law_residual);
        if let Some(ok) = r.printed_law_matches(ctx.tol.identity) {
            printed_matches = Some(printed_matches.unwrap_or(true) && ok);
        }
        factor = factor.max(family.factor_residual(tm));
        chain = chain.max(family.determinant_chain_residual());
        let gs = gram_schmidt_monic(&ctx.mu.slice_moments(theta, m)?, m)?;
        for (i, g) in gs.iter().enumerate() {
            let lead = family.leading(i);
            for (a, b) in g.iter().zip(&family.phi[i]) {
                uniqueness = uniqueness.max((a * lead - b).norm());
            }
        }
        rows.push(json!({ "theta": theta, "phi": family.phi, "D": family.profile.values }));
    }

    let js: Vec<usize> = match ctx.cfg.j {
        Some(j) => vec![j],
        None => (0..m).collect(),
    };
    let mut vanishing: f64 = 0.0;
    let mut tables = Vec::new();
    for j in js {
        let bound = (ctx.deg.n * (m - j)) as i32;
        let ks: Vec<i32> = (0..=bound + ctx.cfg.k_max as i32).collect();
        let r = moment_vanishing_check(&ctx.mu, tm, j, &ks)?;
        for &(k, v) in &r.values {
            if k > bound {
                vanishing = vanishing.max(v.norm());
            }
        }
        tables.push(r);
    }
    let tol = &ctx.tol;
    let checks = vec![
        Check::max("offdiagonal", offdiag, tol.identity),
        Check::max("lu_law", lu_law, tol.identity),
        Check::max("lu_factorization", factor, tol.cross_path),
        Check::max("determinant_chain", chain, tol.identity),
        Check::max("gram_schmidt_uniqueness", uniqueness, tol.orthogonality),
        Check::max("moment_vanishing", vanishing, tol.orthogonality),
        Check::max("trig_structure", trig_structure_residual(&ctx.mu, ctx.ks()?, 64)?, tol.identity),
    ];
    Ok((checks, json!({ "printed_law_matches": printed_matches, "rows": rows, "vanishing": tables })))
}

/// `serde_json` formatter writing every float with 17 significant digits.
struct SigFigs<'a>(PrettyFormatter<'a>);

impl Formatter for SigFigs<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            write!(w, "{value:.16e}")
        } else {
            w.write_all(b"null")
        }
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

fn sig17(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        String::new()
    }
}

/// Serializes reports: JSON is one object keyed by suite name, CSV is one
/// row per suite.
pub fn render_report(reports: &[SuiteReport], format: Format) -> Result<Vec<u8>> {
    let mut sorted: Vec<&SuiteReport> = reports.iter().collect();
    sorted.sort_by(|a, b| a.suite.cmp(&b.suite));
    match format {
        Format::Json => {
            let doc: BTreeMap<&str, &SuiteReport> = sorted.iter().map(|r| (r.suite.as_str(), *r)).collect();
            let mut out = Vec::new();
            let mut ser = serde_json::Serializer::with_formatter(&mut out, SigFigs(PrettyFormatter::new()));
            doc.serialize(&mut ser)?;
            out.push(b'\n');
            Ok(out)
        }
        Format::Csv => {
            let mut wtr = csv::Writer::from_writer(Vec::new());
            wtr.write_record(["suite", "status", "max_violation", "checks", "failed", "wall_time", "message"])?;
            for r in sorted {
                let failed: Vec<&str> = r.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
                wtr.write_record([
                    r.suite.clone(),
                    r.status.to_string(),
                    sig17(r.max_violation),
                    r.checks.len().to_string(),
                    failed.join(";"),
                    sig17(r.wall_time),
                    r.message.clone().unwrap_or_default(),
                ])?;
            }
            wtr.into_inner().map_err(|e| Error::Io(e.into_error()))
        }
    }
}

/// Writes the rendered report to `path`, or to stdout when `None`.
pub fn emit_report(reports: &[SuiteReport], format: Format, path: Option<&Path>) -> Result<()> {
    let bytes = render_report(reports, format)?;
    match path {
        Some(p) => std::fs::write(p, bytes)?,
        None => io::stdout().lock().write_all(&bytes)?,
    }
    Ok(())
}
