use std::collections::BTreeMap;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rand::SeedableRng;

use super::model::{build, default_functions, expr, expr_matrix, metric, real, samples};
use super::report::{CheckRecord, PointRecord, Report, Status, Timing, Totals};
use super::scenario::{binding_of, AdhmParams, AdhmSpec, Scenario};
use super::HarnessError;
use crate::adhm::{
    adhm_complex_multiplier_sector, adhm_lifted_field, adhm_multiplier_sector, adhm_q_full, adhm_q_unconstrained, complex::frobenius_sq,
    constraint_complex, constraint_real, group_act, multiplier_completion, square_defect, square_residual, ADHMData, AdhmChart,
    GroupElement, LieParams,
};
use crate::equivariant::{check_sigma_parallel, sigma_from_q, verify_brst, BrstCheck, EquivariantForm};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::localization::{classical_localize, find_fixed_points, super_localize, LocalizationOutcome, LocalizationSetup, Prefactor};
use crate::oracle::{global_berezin, BerezinianSection, ChartedManifold, OracleChart, QuadratureOptions, StokesOptions};
use crate::scalar::{Binding, Number, ScalarExpr};
use crate::superalg::SuperFunction;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Localize,
    Oracle,
    Compare,
    BrstCheck,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Localize => "localize",
            Command::Oracle => "oracle",
            Command::Compare => "compare",
            Command::BrstCheck => "brst-check",
        }
    }
}

impl std::str::FromStr for Command {
    type Err = HarnessError;
    fn from_str(s: &str) -> std::result::Result<Self, HarnessError> {
        match s {
            "localize" => Ok(Command::Localize),
            "oracle" => Ok(Command::Oracle),
            "compare" => Ok(Command::Compare),
            "brst-check" => Ok(Command::BrstCheck),
            other => Err(HarnessError::Schema(format!("unknown command `{other}`"))),
        }
    }
}

/// super_localize on every patch, plus classical_localize where Q is tautological.
pub fn run_localize(sc: &Scenario) -> std::result::Result<Report, HarnessError> {
    run(sc, Command::Localize)
}

/// global_berezin over the oracle charts and super_stokes_check on each Stokes domain.
pub fn run_oracle(sc: &Scenario) -> std::result::Result<Report, HarnessError> {
    run(sc, Command::Oracle)
}

/// Both, and |localized − oracle| / max(1, |oracle|) < tol.
pub fn run_compare(sc: &Scenario) -> std::result::Result<Report, HarnessError> {
    run(sc, Command::Compare)
}

/// verify_brst and check_sigma_parallel on every patch; the ADHM suites when present.
pub fn run_brst_check(sc: &Scenario) -> std::result::Result<Report, HarnessError> {
    run(sc, Command::BrstCheck)
}

pub fn run(sc: &Scenario, cmd: Command) -> std::result::Result<Report, HarnessError> {
    let started = Instant::now();
    let started_unix_ms = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis()).unwrap_or(0);
    let mut r = Runner { sc, params: sc.param_binding(), records: Vec::new(), timing: BTreeMap::new(), values: BTreeMap::new(), contributions: Vec::new() };
    match cmd {
        Command::Localize => r.localize()?,
        Command::Oracle => r.oracle()?,
        Command::Compare => {
            r.localize()?;
            r.oracle()?;
            r.compare()?;
        }
        Command::BrstCheck => {
            r.brst()?;
            r.adhm()?;
        }
    }
    let Runner { records, timing, values, contributions, .. } = r;
    let mut records: Vec<CheckRecord> = records.into_iter().filter(|rec| wanted(sc, &rec.name)).collect();
    if let Some(req) = &sc.checks {
        for name in req {
            if !records.iter().any(|rec| matches(name, &rec.name)) {
                records.push(CheckRecord::skipped(name, format!("not produced by `{}`", cmd.name())));
            }
        }
    }
    let mut totals = Totals::default();
    for rec in &records {
        match rec.status {
            Status::Pass => totals.pass += 1,
            Status::Fail => totals.fail += 1,
            Status::Skipped => totals.skipped += 1,
        }
    }
    let status = if totals.fail == 0 { Status::Pass } else { Status::Fail };
    Ok(Report {
        scenario: sc.name.clone(),
        command: cmd.name().into(),
        scenario_hash: sc.hash(),
        status,
        records,
        totals,
        values,
        contributions,
        timing: Timing { started_unix_ms, total_ms: started.elapsed().as_secs_f64() * 1e3, checks_ms: timing },
    })
}

/// A requested name selects a check when equal to it or to its family, e.g. `brst`
/// selects `brst[north].square`.
fn matches(requested: &str, name: &str) -> bool {
    name == requested || name.strip_prefix(requested).is_some_and(|rest| rest.starts_with('[') || rest.starts_with('.'))
}

fn wanted(sc: &Scenario, name: &str) -> bool {
    sc.checks.as_ref().is_none_or(|req| req.iter().any(|r| matches(r, name)))
}

/// Does any requested check belong to one of these families?
fn wanted_any(sc: &Scenario, families: &[&str]) -> bool {
    match &sc.checks {
        None => true,
        Some(req) => req.iter().any(|r| families.iter().any(|f| matches(r, f) || matches(f, r))),
    }
}

struct Runner<'a> {
    sc: &'a Scenario,
    params: Binding,
    records: Vec<CheckRecord>,
    timing: BTreeMap<String, f64>,
    values: BTreeMap<String, f64>,
    contributions: Vec<PointRecord>,
}

/// Verification failures become failed checks, OddDimension a skip; anything else
/// aborts the run.
fn route(name: &str, r: Result<CheckRecord>) -> std::result::Result<CheckRecord, HarnessError> {
    match r {
        Ok(rec) => Ok(rec),
        Err(e @ (Error::NotQClosed(_)
        | Error::NotClosed(_)
        | Error::BrstInvalid(_)
        | Error::AssumptionViolated(_)
        | Error::NotInvariant(_)
        | Error::NotAZero(_)
        | Error::NonlinearTtilde)) => Ok(CheckRecord::flag(name, false, e.to_string())),
        Err(e @ Error::OddDimension(_)) => Ok(CheckRecord::skipped(name, e.to_string())),
        Err(e) => Err(e.into()),
    }
}

impl Runner<'_> {
    /// Runs one check, records it with its runtime and returns it.
    fn check(&mut self, name: &str, f: impl FnOnce() -> Result<CheckRecord>) -> std::result::Result<CheckRecord, HarnessError> {
        let t = Instant::now();
        let rec = route(name, f())?;
        self.timing.insert(name.to_string(), t.elapsed().as_secs_f64() * 1e3);
        self.records.push(rec.clone());
        Ok(rec)
    }

    fn localize(&mut self) -> std::result::Result<(), HarnessError> {
        let sc = self.sc;
        let families = ["super_localize", "classical_localize", "localized_vs_expected", "localized_vs_oracle"];
        if !wanted_any(sc, &families) {
            return Ok(());
        }
        let params = self.params.clone();
        let mut total = 0.0;
        let mut complete = true;
        let mut any = false;
        for patch in sc.patches.iter().filter(|p| p.integrand.is_some()) {
            any = true;
            let built = build(&patch.model)?;
            let f = SuperFunction::parse(&built.chart, patch.integrand.as_deref().unwrap_or_default())?;
            let given: Vec<Binding> = patch.samples.iter().map(binding_of).collect();
            let smp = samples(&given, &built.chart, &params);
            let strategy = patch.fixed_points.clone().ok_or_else(|| HarnessError::Schema(format!("patch `{}` lacks fixed_points", patch.name)))?;
            let field = built.spec.fundamental_field(&built.xi)?;
            let points = match find_fixed_points(&field, &params, &strategy) {
                Ok(p) => p,
                Err(e @ Error::NotAZero(_)) => {
                    self.check(&format!("super_localize[{}]", patch.name), || Err(e))?;
                    complete = false;
                    continue;
                }
                Err(e) => return Err(e.into()),
            };
            let setup = LocalizationSetup {
                spec: &built.spec,
                xi: &built.xi,
                params: &params,
                metric: &built.metric,
                points: &points,
                orientation: patch.orientation,
                samples: &smp,
            };
            let name = format!("super_localize[{}]", patch.name);
            let mut outcome: Option<LocalizationOutcome> = None;
            let rec = self.check(&name, || {
                let o = super_localize(&f, &built.q, &setup)?;
                let failed: Vec<String> = o.checks.iter().filter(|c| !c.passed).map(|c| format!("{} ({:e})", c.name, c.residual)).collect();
                let mut rec = CheckRecord::flag(&name, failed.is_empty(), failed.join(", "));
                rec.lhs = Some(o.total);
                if failed.is_empty() {
                    rec.detail = format!("{} fixed points, prefactor {}", o.contributions.len(), o.prefactor_value);
                }
                outcome = Some(o);
                Ok(rec)
            })?;
            let Some(o) = outcome.filter(|_| rec.status == Status::Pass) else {
                complete = false;
                continue;
            };
            total += o.total;
            for c in &o.contributions {
                self.contributions.push(PointRecord {
                    patch: patch.name.clone(),
                    point: c.point.clone(),
                    integrand0: c.integrand0,
                    half_det: c.half_det,
                    value: c.value,
                    symbolic: c.symbolic.clone(),
                });
            }
            // Tautological Q = d + i_{ξ*} intertwines with d_g at −ξ.
            if patch.model.q == super::scenario::QSpec::Tautological && patch.model.fiber.is_none() {
                let name = format!("classical_localize[{}]", patch.name);
                let neg_xi: Vec<ScalarExpr> = built.xi.iter().map(|e| -e).collect();
                let tol = sc.tolerances.classical;
                self.check(&name, || {
                    let alpha = EquivariantForm::new(f.clone())?;
                    let setup = LocalizationSetup { xi: &neg_xi, ..setup };
                    let c = classical_localize(&alpha, &setup)?;
                    let mut rec = CheckRecord::compare(&name, o.total, c.total, tol);
                    let same = prefactor_equal(&o.prefactor, &c.prefactor);
                    if !same {
                        rec.status = Status::Fail;
                    }
                    rec.detail = format!("{}, prefactors {}", rec.detail, if same { "equal" } else { "differ" });
                    Ok(rec)
                })?;
            }
        }
        if any && complete {
            self.values.insert("localized".into(), total);
            self.against_expected("localized_vs_expected", total)?;
        }
        Ok(())
    }

    fn against_expected(&mut self, name: &str, value: f64) -> std::result::Result<(), HarnessError> {
        let Some(text) = &self.sc.expected else { return Ok(()) };
        let exact = expr(text)?.evaluate_f64(&self.sc.constants())?;
        self.values.insert("expected".into(), exact);
        let tol = self.sc.tolerances.compare;
        self.check(name, || Ok(CheckRecord::compare(name, value, exact, tol)))?;
        Ok(())
    }

    fn oracle(&mut self) -> std::result::Result<(), HarnessError> {
        let sc = self.sc;
        if !sc.oracle.is_empty() && wanted_any(sc, &["global_berezin", "oracle_vs_expected", "localized_vs_oracle"]) {
            let constants = sc.constants();
            let mut charts = Vec::new();
            let mut sections = Vec::new();
            let mut fs = Vec::new();
            for c in &sc.oracle {
                let chart = crate::equivariant::tautological_chart(&c.even.iter().map(String::as_str).collect::<Vec<_>>());
                let h = metric(&chart, c.metric.as_ref())?;
                sections.push(match &c.sigma {
                    Some(s) => BerezinianSection::new(&h, &expr_matrix(s)?)?,
                    None => BerezinianSection::tautological(&h),
                });
                fs.push(SuperFunction::parse(&chart, &c.integrand)?);
                let lower = c.lower.iter().map(|r| real(r, &constants)).collect::<Result<Vec<_>>>()?;
                let upper = c.upper.iter().map(|r| real(r, &constants)).collect::<Result<Vec<_>>>()?;
                charts.push(OracleChart::new(h, lower, upper, c.orientation)?.excluding(&c.excluded));
            }
            let manifold = ChartedManifold::new(charts)?;
            let opts = QuadratureOptions::with_tol(sc.tolerances.quadrature);
            let params = self.params.clone();
            let mut value = None;
            self.check("global_berezin", || {
                let q = global_berezin(&manifold, &sections, &fs, &params, &opts)?;
                value = Some(q.value);
                let mut rec = CheckRecord::passed("global_berezin", format!("{} cells, error estimate {:e}", q.cells, q.error));
                rec.lhs = Some(q.value);
                Ok(rec)
            })?;
            if let Some(v) = value {
                self.values.insert("oracle".into(), v);
                self.against_expected("oracle_vs_expected", v)?;
            }
        }
        for case in &sc.stokes {
            let name = format!("super_stokes[{}]", case.name);
            if !wanted(sc, &name) {
                continue;
            }
            let built = build(&case.model)?;
            let nu = SuperFunction::parse(&built.chart, &case.nu)?;
            let constants = sc.constants();
            let lower = case.lower.iter().map(|r| real(r, &constants)).collect::<Result<Vec<_>>>()?;
            let upper = case.upper.iter().map(|r| real(r, &constants)).collect::<Result<Vec<_>>>()?;
            let opts = StokesOptions {
                tol: sc.tolerances.stokes,
                parallel_tol: sc.tolerances.parallel,
                quadrature: QuadratureOptions::with_tol(sc.tolerances.quadrature.min(1e-11)),
            };
            let params = self.params.clone();
            self.check(&name, || {
                let r = crate::oracle::super_stokes_check(&nu, &built.q, &built.metric, &lower, &upper, &params, &opts)?;
                let mut rec = CheckRecord::flag(&name, r.passed, format!("tol {:e}", opts.tol));
                rec.lhs = Some(r.interior);
                rec.rhs = Some(r.boundary);
                rec.abs_error = Some(r.difference);
                Ok(rec)
            })?;
        }
        Ok(())
    }

    fn compare(&mut self) -> std::result::Result<(), HarnessError> {
        let name = "localized_vs_oracle";
        let tol = self.sc.tolerances.compare;
        let rec = match (self.values.get("localized"), self.values.get("oracle")) {
            (Some(&l), Some(&o)) => CheckRecord::compare(name, l, o, tol),
            (None, _) => CheckRecord::skipped(name, "no localized value"),
            (_, None) => CheckRecord::skipped(name, "no oracle value"),
        };
        self.records.push(rec);
        Ok(())
    }

    fn brst(&mut self) -> std::result::Result<(), HarnessError> {
        let sc = self.sc;
        for patch in &sc.patches {
            let fam = format!("brst[{}]", patch.name);
            let par = format!("sigma_parallel[{}]", patch.name);
            if !wanted_any(sc, &[&fam, &par]) {
                continue;
            }
            let built = build(&patch.model)?;
            let given: Vec<Binding> = patch.samples.iter().map(binding_of).collect();
            let smp = samples(&given, &built.chart, &self.params);
            let functions = if patch.brst_functions.is_empty() {
                default_functions(&built.chart)?
            } else {
                patch.brst_functions.iter().map(|t| SuperFunction::parse(&built.chart, t)).collect::<Result<_>>()?
            };
            let mut check = BrstCheck::new(smp.clone(), functions);
            check.tol = sc.tolerances.brst;
            let t = Instant::now();
            let report = verify_brst(&built.q, &built.spec, &built.xi, &check)?;
            self.timing.insert(fam.clone(), t.elapsed().as_secs_f64() * 1e3);
            for c in report.conditions {
                let mut rec = CheckRecord::flag(&format!("{fam}.{}", c.name), c.passed, c.detail);
                rec.abs_error = Some(c.residual);
                self.records.push(rec);
            }
            let tol = sc.tolerances.parallel;
            let (q, h) = (&built.q, &built.metric);
            self.check(&par, || {
                let sigma = sigma_from_q(q)?;
                let big_h = sigma.transpose().matmul(&h.h)?.matmul(&sigma)?;
                let r = check_sigma_parallel(&sigma, h, &big_h, &smp, tol)?;
                Ok(CheckRecord::residual(&par, r.max_covariant_derivative, tol, format!("worst sample {}", r.worst_sample)))
            })?;
        }
        Ok(())
    }

    fn adhm(&mut self) -> std::result::Result<(), HarnessError> {
        let Some(spec) = &self.sc.adhm else { return Ok(()) };
        if !wanted_any(self.sc, &["adhm"]) {
            return Ok(());
        }
        let lie = lie_params(spec)?;
        let numeric: Vec<Binding> = if spec.samples.is_empty() { vec![Binding::new()] } else { spec.samples.iter().map(binding_of).collect() };
        let tol = self.sc.tolerances.brst;

        for (label, full) in [("unconstrained", false), ("full", true)] {
            let name = format!("adhm.square_{label}");
            if !wanted(self.sc, &name) {
                continue;
            }
            let ch = AdhmChart::new(spec.k, spec.n, full)?;
            let (lie, numeric) = (&lie, &numeric);
            self.check(&name, || {
                let q = if full { adhm_q_full(&ch, lie)? } else { adhm_q_unconstrained(&ch, lie)? };
                let lifted = adhm_lifted_field(&ch, lie)?;
                let defect = square_defect(&q, &lifted)?;
                if defect.is_empty() {
                    return Ok(CheckRecord::residual(&name, 0.0, tol, "symbolic"));
                }
                // a symbolic defect can still vanish at the sampled Lie values
                let mut worst = 0.0f64;
                for at in numeric {
                    worst = worst.max(square_residual(&q, &lifted, &with_sample_coords(&ch, at))?);
                }
                Ok(CheckRecord::residual(&name, worst, tol, format!("nonzero components {}", defect.join(", "))))
            })?;
        }

        if wanted(self.sc, "adhm.sigma_identity") {
            // on the full chart Q(χ) = H, so the multiplier rows of σ vanish
            let ch = AdhmChart::new(spec.k, spec.n, false)?;
            self.check("adhm.sigma_identity", || {
                let sigma = sigma_from_q(&adhm_q_unconstrained(&ch, &lie)?)?;
                let ok = sigma == Matrix::identity(ch.chart.m());
                Ok(CheckRecord::flag("adhm.sigma_identity", ok, format!("{}x{}", sigma.rows(), sigma.cols())))
            })?;
        }
        let ch = AdhmChart::new(spec.k, spec.n, true)?;
        if wanted(self.sc, "adhm.multiplier_residual") {
            self.check("adhm.multiplier_residual", || {
                let (_, report) = multiplier_completion(&adhm_multiplier_sector(&ch, &lie)?, &[])?;
                let detail = if report.residual_vanishes { "symbolic".to_string() } else { report.residual.join("; ") };
                Ok(CheckRecord::flag("adhm.multiplier_residual", report.residual_vanishes, detail))
            })?;
        }
        if wanted(self.sc, "adhm.multiplier_invertible") {
            self.check("adhm.multiplier_invertible", || {
                let (_, report) = multiplier_completion(&adhm_complex_multiplier_sector(&ch, &lie)?, &numeric)?;
                let mut rec = CheckRecord::flag("adhm.multiplier_invertible", report.invertible, format!("det N = {}", report.det_n));
                rec.lhs = Some(report.min_abs_det);
                Ok(rec)
            })?;
        }
        if wanted(self.sc, "adhm.constraint_invariance") {
            let (k, n, count, seed) = (spec.k, spec.n, spec.group_elements, spec.seed);
            self.check("adhm.constraint_invariance", || {
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
                let mut bad = 0;
                for _ in 0..count {
                    let d = ADHMData::random(k, n, &mut rng);
                    let g = GroupElement::random(k, n, &mut rng);
                    let out = group_act(&g, &d)?;
                    let same_r = frobenius_sq(&constraint_real(&out)) == frobenius_sq(&constraint_real(&d));
                    let same_c = frobenius_sq(&constraint_complex(&out)) == frobenius_sq(&constraint_complex(&d));
                    if !(same_r && same_c) {
                        bad += 1;
                    }
                }
                Ok(CheckRecord::flag("adhm.constraint_invariance", bad == 0, format!("{count} group elements, {bad} changed a norm")))
            })?;
        }
        Ok(())
    }
}

fn prefactor_equal(a: &Prefactor, b: &Prefactor) -> bool {
    a.rational == b.rational && a.pi_power == b.pi_power
}

fn lie_params(spec: &AdhmSpec) -> Result<LieParams> {
    Ok(match &spec.lie {
        AdhmParams::CartanSymbols => LieParams::cartan_symbols(spec.k, spec.n),
        AdhmParams::GenericSymbols => LieParams::generic_symbols(spec.k, spec.n),
        AdhmParams::CartanValues { p, a, eps1, eps2 } => {
            let exact = |x: &Number| x.as_rational().cloned().ok_or_else(|| Error::Schema("cartan_values must be exact".into()));
            LieParams::cartan_values(
                &p.iter().map(exact).collect::<Result<Vec<_>>>()?,
                &a.iter().map(exact).collect::<Result<Vec<_>>>()?,
                exact(eps1)?,
                exact(eps2)?,
            )
        }
    })
}

/// Generic coordinate values over the Lie bindings, for the numeric square residual.
fn with_sample_coords(ch: &AdhmChart, at: &Binding) -> Binding {
    let mut b = at.clone();
    for (idx, c) in ch.chart.even().iter().enumerate() {
        b.set_symbol(c.clone(), Number::Float(0.1 * ((idx + 1) as f64).sqrt()));
    }
    b
}
