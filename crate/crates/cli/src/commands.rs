//! One function per subcommand: config in, tables and assertions out.

use std::sync::Arc;

use serde_json::{json, Value};

use pathcalc::drawdown::{check_drawdown_constraint, solve_drawdown};
use pathcalc::equations::{solve_linear, solve_nonlinear, Decomposition, Forcing};
use pathcalc::finance::{dppi, FloorSpec, Market, Multiplier};
use pathcalc::integral::{
    admissible_rep_of_integral, associativity_check, follmer_integral, ito_formula_eval,
    AdmissibleIntegrand, Integrand,
};
use pathcalc::mc::run_mc;
use pathcalc::quadvar::{
    covariation_with, measure_convergence_check, measure_vs_qv_check, qv_sequence_with,
    DiscreteMeasure,
};
use pathcalc::{
    generate, Error, FvPath, Generator, GridPath, PartitionSequence, Result, Status, TimeGrid,
    TrendReport, TrendSpec,
};

use crate::config::*;
use crate::output::{Assertion, Table};

pub struct Outcome {
    pub tables: Vec<Table>,
    pub assertions: Vec<Assertion>,
    pub details: Value,
    /// `(table, x column, y columns)` to plot with `--plot`.
    pub plots: Vec<(String, String, Vec<String>)>,
}

impl Outcome {
    fn new() -> Self {
        Self {
            tables: Vec::new(),
            assertions: Vec::new(),
            details: Value::Null,
            plots: Vec::new(),
        }
    }

    fn plot(&mut self, table: &str, x: &str, ys: &[&str]) {
        self.plots
            .push((table.into(), x.into(), ys.iter().map(|s| s.to_string()).collect()));
    }
}

fn grid(cfg: &GridConfig) -> Result<Arc<TimeGrid>> {
    Ok(Arc::new(TimeGrid::dyadic(cfg.horizon, cfg.level)?))
}

fn sequence(cfg: &PartitionConfig, g: &Arc<TimeGrid>, path: &GridPath) -> Result<PartitionSequence> {
    let [lo, hi] = cfg.levels;
    match cfg.kind {
        PartitionKindConfig::Dyadic => PartitionSequence::dyadic(g, lo, hi),
        PartitionKindConfig::Lebesgue => PartitionSequence::lebesgue(path, lo, hi),
    }
}

/// Configured trend, with module defaults keyed on whether any input is random.
fn trend(cfg: &Option<TrendConfig>, stochastic: bool) -> TrendSpec {
    let base = if stochastic {
        TrendSpec::stochastic()
    } else {
        TrendSpec::deterministic()
    };
    let c = cfg.clone().unwrap_or_default();
    TrendSpec {
        window: c.window.unwrap_or(base.window),
        tol: c.tol.unwrap_or(base.tol),
    }
}

fn fv(gen: &Generator, g: &Arc<TimeGrid>) -> Result<FvPath> {
    FvPath::new(generate(gen, g)?)
}

fn end_time(t: Option<f64>, g: &TimeGrid) -> f64 {
    t.unwrap_or_else(|| g.horizon())
}

fn trend_detail(r: &TrendReport) -> String {
    format!(
        "last {:.3e}, nonincreasing {}, below tol {}",
        r.last.unwrap_or(f64::NAN),
        r.nonincreasing,
        r.below_tol
    )
}

fn status_assertion(name: &str, status: Status, trend: &TrendReport) -> Assertion {
    match status {
        Status::NoQv => Assertion::exact(name, false, "jump condition fails".into()),
        Status::Unwitnessed => Assertion::trend(
            name,
            false,
            format!("integrand has no admissibility witness; {}", trend_detail(trend)),
        ),
        s => Assertion::trend(name, s == Status::Converged, trend_detail(trend)),
    }
}

fn level_table(name: &str, seq: &PartitionSequence, cols: &[(&str, &[f64])]) -> Table {
    let mut header = vec!["level", "mesh"];
    header.extend(cols.iter().map(|c| c.0));
    let mut t = Table::new(name, &header);
    for (k, (&level, mesh)) in seq.levels().iter().zip(seq.meshes()).enumerate() {
        let mut row = vec![Some(level as f64), Some(mesh)];
        row.extend(cols.iter().map(|c| c.1.get(k).copied()));
        t.push(row);
    }
    t
}

fn path_table(name: &str, g: &TimeGrid, cols: &[(&str, &[f64])]) -> Table {
    let mut header = vec!["t"];
    header.extend(cols.iter().map(|c| c.0));
    let mut t = Table::new(name, &header);
    for i in 0..g.len() {
        let mut row = vec![Some(g.time(i))];
        row.extend(cols.iter().map(|c| c.1.get(i).copied()));
        t.push(row);
    }
    t
}

pub fn qv(cfg: &QvConfig) -> Result<Outcome> {
    let g = grid(&cfg.grid)?;
    let x = generate(&cfg.path, &g)?;
    let y = cfg.other.as_ref().map(|o| generate(o, &g)).transpose()?;
    let seq = sequence(&cfg.partition, &g, &x)?;
    let stochastic = cfg.path.is_stochastic() || cfg.other.as_ref().is_some_and(Generator::is_stochastic);
    let tr = trend(&cfg.trend, stochastic);
    let t = end_time(cfg.t, &g);
    let end = g.index_at(t)?;
    let r = match &y {
        Some(y) => covariation_with(&x, y, &seq, &tr)?,
        None => qv_sequence_with(&x, &seq, &tr)?,
    };
    let mut out = Outcome::new();
    let values: Vec<f64> = r.curves.iter().map(|c| c[end]).collect();
    out.tables
        .push(level_table("qv", &seq, &[("qv", &values), ("gap", &r.gaps)]));
    out.tables.push(path_table(
        "qv_path",
        &g,
        &[
            ("limit", &r.limit),
            ("jump_part", &r.jump_part),
            ("continuous_part", &r.continuous_part),
        ],
    ));
    out.plot("qv", "level", &["gap"]);
    out.assertions.push(Assertion::exact(
        "jump condition",
        r.jump_check.passed(),
        format!("{} violations", r.jump_check.violations.len()),
    ));
    out.assertions
        .push(status_assertion("qv convergence", r.status, &r.trend));
    let mut details = json!({
        "t": t,
        "levels": r.levels,
        "status": r.status,
        "fv_rule": r.fv_rule,
        "limit_at_t": r.limit[end],
        "trend": r.trend,
    });
    if cfg.measure_check && y.is_none() {
        let m = measure_vs_qv_check(&x, &seq, t)?;
        out.tables.push(level_table(
            "qv_measure",
            &seq,
            &[("qv", &m.qv), ("measure", &m.measure), ("diff", &m.diff), ("bound", &m.bound)],
        ));
        out.assertions.push(Assertion::exact(
            "measure within bound",
            m.within_bound,
            format!("max diff {:.3e}", m.diff.iter().copied().fold(0.0, f64::max)),
        ));
        details["measure_within_bound"] = json!(m.within_bound);
    }
    out.details = details;
    Ok(out)
}

enum Built {
    Witnessed(AdmissibleIntegrand),
    Raw(GridPath),
}

impl Built {
    fn new(cfg: &IntegrandConfig, g: &Arc<TimeGrid>, x: &GridPath) -> Result<Self> {
        Ok(match cfg {
            IntegrandConfig::Witnessed { function, a } => {
                let a = a.as_ref().map(|a| fv(a, g)).transpose()?;
                Built::Witnessed(AdmissibleIntegrand::new(function.build()?, a, x.clone())?)
            }
            IntegrandConfig::Raw { path } => Built::Raw(generate(path, g)?),
        })
    }

    fn integrand(&self) -> Integrand<'_> {
        match self {
            Built::Witnessed(w) => Integrand::Witnessed(w),
            Built::Raw(p) => Integrand::Raw(p),
        }
    }

    fn forcing(&self) -> Forcing<'_> {
        match self {
            Built::Witnessed(w) => Forcing::Witnessed(w),
            Built::Raw(p) => Forcing::Raw(p),
        }
    }
}

fn integrand_stochastic(cfg: &IntegrandConfig) -> bool {
    match cfg {
        IntegrandConfig::Witnessed { a, .. } => a.as_ref().is_some_and(Generator::is_stochastic),
        IntegrandConfig::Raw { path } => path.is_stochastic(),
    }
}

pub fn integrate(cfg: &IntegrateConfig) -> Result<Outcome> {
    let g = grid(&cfg.grid)?;
    let x = generate(&cfg.x, &g)?;
    let seq = sequence(&cfg.partition, &g, &x)?;
    let tr = trend(&cfg.trend, cfg.x.is_stochastic() || integrand_stochastic(&cfg.integrand));
    let end = g.index_at(end_time(cfg.t, &g))?;
    let built = Built::new(&cfg.integrand, &g, &x)?;
    let r = follmer_integral(built.integrand(), &x, &seq, &tr)?;
    let values: Vec<f64> = r.curves.iter().map(|c| c[end]).collect();
    let mut out = Outcome::new();
    out.tables.push(level_table(
        "integral",
        &seq,
        &[("integral", &values), ("gap", &r.gaps)],
    ));
    out.tables.push(path_table(
        "integral_path",
        &g,
        &[("estimate", r.estimate.values())],
    ));
    out.plot("integral", "level", &["gap"]);
    out.assertions
        .push(status_assertion("integral convergence", r.status, &r.trend));
    out.details = json!({
        "levels": r.levels,
        "value_at_t": r.estimate.x(end),
        "status": r.status,
        "max_jump_error": r.max_jump_error,
        "trend": r.trend,
    });
    Ok(out)
}

pub fn ito_check(cfg: &ItoConfig) -> Result<Outcome> {
    let g = grid(&cfg.grid)?;
    let x = generate(&cfg.x, &g)?;
    let seq = sequence(&cfg.partition, &g, &x)?;
    let stochastic = cfg.x.is_stochastic() || cfg.a.as_ref().is_some_and(Generator::is_stochastic);
    let tr = trend(&cfg.trend, stochastic);
    let a = cfg.a.as_ref().map(|a| fv(a, &g)).transpose()?;
    let f = cfg.function.build()?;
    let t = end_time(cfg.t, &g);
    let r = ito_formula_eval(f.as_ref(), a.as_ref(), &x, &seq, t, &tr)?;
    let jump = vec![r.jump_term; r.levels.len()];
    let mut out = Outcome::new();
    out.tables.push(level_table(
        "ito",
        &seq,
        &[
            ("integral", &r.integral),
            ("drift", &r.drift),
            ("qv_term", &r.qv_term),
            ("jump_term", &jump),
            ("residual", &r.residuals),
        ],
    ));
    out.plot("ito", "level", &["residual"]);
    out.assertions
        .push(Assertion::trend("residual trend", r.trend.passed(), trend_detail(&r.trend)));
    if let Some(max) = cfg.max_residual {
        let worst = r.residuals.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        out.assertions.push(Assertion::exact(
            "residual bound",
            worst <= max,
            format!("max |residual| {worst:.3e} vs {max:.1e}"),
        ));
    }
    out.details = json!({
        "t": t,
        "lhs": r.lhs,
        "jump_term": r.jump_term,
        "residuals": r.residuals,
        "status": r.status,
        "trend": r.trend,
    });
    Ok(out)
}

pub fn assoc(cfg: &AssocConfig) -> Result<Outcome> {
    let g = grid(&cfg.grid)?;
    let x = generate(&cfg.x, &g)?;
    let seq = sequence(&cfg.partition, &g, &x)?;
    let stochastic = cfg.x.is_stochastic()
        || cfg.a.as_ref().is_some_and(Generator::is_stochastic)
        || cfg.eta.as_ref().is_some_and(Generator::is_stochastic);
    let tr = trend(&cfg.trend, stochastic);
    let a = cfg.a.as_ref().map(|a| fv(a, &g)).transpose()?;
    let xi = AdmissibleIntegrand::new(cfg.function.build()?, a, x.clone())?;
    let eta = match &cfg.eta {
        Some(e) => generate(e, &g)?,
        None => {
            let y = follmer_integral(Integrand::Witnessed(&xi), &x, &seq, &tr)?.estimate;
            admissible_rep_of_integral(&xi, &y)?.values()?
        }
    };
    let t = end_time(cfg.t, &g);
    let r = associativity_check(&eta, std::slice::from_ref(&xi), &x, &seq, t, &tr)?;
    let mut out = Outcome::new();
    out.tables.push(level_table(
        "assoc",
        &seq,
        &[("lhs", &r.lhs), ("rhs", &r.rhs), ("gap", &r.gaps)],
    ));
    out.plot("assoc", "level", &["gap"]);
    out.assertions
        .push(status_assertion("gap trend", r.status, &r.trend));
    if let Some(max) = cfg.max_gap {
        let last = *r.gaps.last().unwrap();
        out.assertions.push(Assertion::exact(
            "top-level gap",
            last <= max,
            format!("{last:.3e} vs {max:.1e}"),
        ));
    }
    out.details = json!({ "t": t, "gaps": r.gaps, "status": r.status, "trend": r.trend });
    Ok(out)
}

pub fn linear(cfg: &LinearConfig) -> Result<Outcome> {
    let g = grid(&cfg.grid)?;
    let x = generate(&cfg.x, &g)?;
    let seq = sequence(&cfg.partition, &g, &x)?;
    let tr = trend(&cfg.trend, cfg.x.is_stochastic() || integrand_stochastic(&cfg.forcing));
    let built = Built::new(&cfg.forcing, &g, &x)?;
    let dec = cfg
        .decomposition
        .as_ref()
        .map(|d| -> Result<Decomposition> {
            Ok(Decomposition {
                xi: generate(&d.xi, &g)?,
                a: fv(&d.a, &g)?,
            })
        })
        .transpose()?;
    let t = end_time(cfg.t, &g);
    let s = solve_linear(built.forcing(), dec.as_ref(), &x, &seq, t, &tr)?;
    let end = g.index_at(t)?;
    let mut out = Outcome::new();
    out.tables.push(level_table(
        "linear",
        &seq,
        &[("z", &s.z_at_t), ("residual", &s.residual.residuals)],
    ));
    let mut cols: Vec<(&str, &[f64])> =
        vec![("exponential", s.exponential.path.values()), ("z", s.z.values())];
    if let Some(alt) = &s.z_alt {
        cols.push(("z_alt", alt.values()));
    }
    out.tables.push(path_table("linear_path", &g, &cols));
    out.plot("linear", "level", &["residual"]);
    out.assertions
        .push(status_assertion("residual trend", s.status, &s.residual.trend));
    let z_t = s.z.x(end);
    if let Some(e) = &cfg.expect {
        let err = (z_t - e.value).abs();
        out.assertions.push(Assertion::exact(
            "expected value",
            err <= e.tol,
            format!("Z_t = {z_t}, error {err:.3e} vs {:.1e}", e.tol),
        ));
    }
    if let Some(tol) = cfg.agreement_tol {
        let gap = s.agreement.unwrap_or(f64::INFINITY);
        out.assertions.push(Assertion::exact(
            "expression agreement",
            gap <= tol,
            format!("{gap:.3e} vs {tol:.1e}"),
        ));
    }
    out.details = json!({
        "t": t,
        "z_at_t": z_t,
        "agreement": s.agreement,
        "decomposition_gap": s.decomposition_gap,
        "status": s.status,
        "trend": s.residual.trend,
    });
    Ok(out)
}

pub fn nonlinear(cfg: &NonlinearConfig) -> Result<Outcome> {
    let g = grid(&cfg.grid)?;
    let x = generate(&cfg.x, &g)?;
    let seq = sequence(&cfg.partition, &g, &x)?;
    let tr = trend(&cfg.trend, cfg.x.is_stochastic());
    let t = end_time(cfg.t, &g);
    let drift = cfg.drift;
    let f = move |s: f64, z: f64| drift.eval(s, z);
    let s = solve_nonlinear(&f, &x, cfg.z0, &seq, cfg.preconditions, cfg.spot_radius, t, &tr)?;
    let end = g.index_at(t)?;
    let mut out = Outcome::new();
    out.tables.push(level_table(
        "nonlinear",
        &seq,
        &[("residual", &s.residual.residuals)],
    ));
    out.tables.push(path_table(
        "nonlinear_path",
        &g,
        &[("exponential", s.exponential.path.values()), ("y", &s.y), ("z", s.z.values())],
    ));
    out.plot("nonlinear", "level", &["residual"]);
    out.assertions.push(Assertion::trend(
        "residual trend",
        s.residual.trend.passed(),
        trend_detail(&s.residual.trend),
    ));
    let z_t = s.z.x(end);
    if let Some(e) = &cfg.expect {
        let err = (z_t - e.value).abs();
        out.assertions.push(Assertion::exact(
            "expected value",
            err <= e.tol,
            format!("Z_t = {z_t}, error {err:.3e} vs {:.1e}", e.tol),
        ));
    }
    out.details = json!({
        "t": t,
        "z_at_t": z_t,
        "preconditions": cfg.preconditions,
        "spot_check": s.spot_check,
        "trend": s.residual.trend,
    });
    Ok(out)
}

pub fn drawdown(cfg: &DrawdownConfig) -> Result<Outcome> {
    let g = grid(&cfg.grid)?;
    let x = generate(&cfg.x, &g)?;
    let seq = sequence(&cfg.partition, &g, &x)?;
    let tr = trend(&cfg.trend, cfg.x.is_stochastic());
    let t = end_time(cfg.t, &g);
    let a_star = cfg.a_star.unwrap_or(x.x(0));
    let s = solve_drawdown(&cfg.floor, &x, a_star, &seq, t, &tr)?;
    let ybar = s.y.running_maximum()?.path;
    let floor: Vec<f64> = (0..g.len()).map(|i| cfg.floor.eval(ybar.x(i))).collect();
    let mut out = Outcome::new();
    out.tables.push(level_table(
        "drawdown",
        &seq,
        &[("residual", &s.residual.residuals)],
    ));
    out.tables.push(path_table(
        "drawdown_path",
        &g,
        &[("x", x.values()), ("y", s.y.values()), ("running_max", ybar.values()), ("floor", &floor)],
    ));
    out.plot("drawdown", "level", &["residual"]);
    let c = check_drawdown_constraint(&s.y, &cfg.floor)?;
    out.assertions.push(Assertion::exact(
        "drawdown constraint",
        c.holds,
        format!("min margin {:.3e} at t = {}", c.min_margin, c.at),
    ));
    out.assertions.push(Assertion::exact(
        "round trip",
        s.round_trip <= cfg.round_trip_tol,
        format!("{:.3e} vs {:.1e}", s.round_trip, cfg.round_trip_tol),
    ));
    out.assertions.push(Assertion::trend(
        "residual trend",
        s.residual.trend.passed(),
        trend_detail(&s.residual.trend),
    ));
    out.details = json!({
        "t": t,
        "a_star": a_star,
        "round_trip": s.round_trip,
        "constraint": s.constraint,
        "trend": s.residual.trend,
    });
    Ok(out)
}

/// `cppi` accepts only a constant multiplier; `dppi` also a witnessed one.
pub fn insurance(cfg: &InsuranceConfig, constant_only: bool) -> Result<Outcome> {
    let g = grid(&cfg.grid)?;
    let s = generate(&cfg.s, &g)?;
    let seq = sequence(&cfg.partition, &g, &s)?;
    let b = match &cfg.b {
        Some(b) => fv(b, &g)?,
        None => FvPath::new(GridPath::constant(g.clone(), 1.0).with_finite_variation(true))?,
    };
    let market = Market::new(s.clone(), b)?;
    let floor = match &cfg.floor {
        FloorConfig::Constant(l0) => FloorSpec::constant(g.clone(), *l0)?,
        FloorConfig::Path(gen) => FloorSpec::new(fv(gen, &g)?)?,
    };
    let stochastic = cfg.s.is_stochastic() || cfg.b.as_ref().is_some_and(Generator::is_stochastic);
    let tr = trend(&cfg.trend, stochastic);
    let t = end_time(cfg.t, &g);
    let witness = match &cfg.multiplier {
        MultiplierConfig::Constant(_) => None,
        MultiplierConfig::Witnessed(_) if constant_only => {
            return Err(Error::InvalidParameter(
                "cppi takes a constant multiplier; use dppi".into(),
            ))
        }
        MultiplierConfig::Witnessed(w) => {
            let a = w.a.as_ref().map(|a| fv(a, &g)).transpose()?;
            Some(AdmissibleIntegrand::new(w.function.build()?, a, s.clone())?)
        }
    };
    let m = match (&cfg.multiplier, &witness) {
        (MultiplierConfig::Constant(c), _) => Multiplier::Constant(*c),
        (_, Some(w)) => Multiplier::Witnessed(w),
        _ => unreachable!(),
    };
    let d = dppi(&market, m, &floor, cfg.v0, &seq, t, &tr)?;
    let b = market.b().path();
    let l = floor.l().path();
    let k: Vec<f64> = (0..g.len()).map(|i| l.x(i) * b.x(i)).collect();
    let mut out = Outcome::new();
    out.tables.push(path_table(
        "strategy",
        &g,
        &[
            ("xi", d.strategy.xi.values()),
            ("eta", d.strategy.eta.values()),
            ("V", d.strategy.value.values()),
            ("floor", &k),
        ],
    ));
    out.tables.push(level_table(
        "self_financing",
        &seq,
        &[("residual", &d.self_financing.residuals)],
    ));
    out.plot("self_financing", "level", &["residual"]);
    let detail = format!(
        "min cushion {:.3e}, scale {:.3e}, guarantee claimed {}",
        d.min_cushion, d.floor_scale, d.guarantee_claimed
    );
    out.assertions.push(if d.guarantee_claimed {
        Assertion::exact("floor guarantee", d.floor_holds, detail)
    } else {
        Assertion::trend("floor guarantee", d.floor_holds, detail)
    });
    out.assertions.push(Assertion::trend(
        "self-financing trend",
        d.self_financing.trend.passed(),
        trend_detail(&d.self_financing.trend),
    ));
    out.details = json!({
        "t": t,
        "value_at_t": d.strategy.value.x(g.index_at(t)?),
        "qv_status": d.qv_status,
        "guarantee_claimed": d.guarantee_claimed,
        "floor_holds": d.floor_holds,
        "min_cushion": d.min_cushion,
        "floor_scale": d.floor_scale,
        "general_gap": d.general_gap,
        "trend": d.self_financing.trend,
    });
    Ok(out)
}

pub fn mc(cfg: &McConfig) -> Result<Outcome> {
    let s = run_mc(&cfg.experiment)?;
    let mut per_seed = Table::new(
        "mc",
        &["seed", "level", "error", "oscillation", "max_gap", "passed"],
    );
    for r in &s.per_seed {
        for (k, &level) in s.levels.iter().enumerate() {
            per_seed.push_values(&[
                r.seed as f64,
                level as f64,
                r.errors[k],
                r.oscillations[k],
                r.max_gaps[k],
                if r.passed { 1.0 } else { 0.0 },
            ]);
        }
    }
    let mut levels = Table::new("mc_levels", &["level", "median_error"]);
    for (&l, &e) in s.levels.iter().zip(&s.per_level_median_error) {
        levels.push_values(&[l as f64, e]);
    }
    let mut out = Outcome::new();
    out.tables.push(per_seed);
    out.tables.push(levels);
    out.plot("mc_levels", "level", &["median_error"]);
    out.assertions.push(Assertion::exact(
        "pass fraction",
        s.pass_fraction >= cfg.min_pass_fraction,
        format!(
            "{:.3} (interval {:.3}..{:.3}) vs {}",
            s.pass_fraction, s.pass_interval.0, s.pass_interval.1, cfg.min_pass_fraction
        ),
    ));
    out.assertions.push(Assertion::exact(
        "constructive bounds",
        s.bounds_fraction == 1.0,
        format!("hold on {:.1}% of seeds", 100.0 * s.bounds_fraction),
    ));
    out.details = json!({
        "seeds": s.seeds,
        "levels": s.levels,
        "pass_fraction": s.pass_fraction,
        "pass_interval": s.pass_interval,
        "worst_seed": s.worst_seed,
        "per_level_median_error": s.per_level_median_error,
        "bounds_fraction": s.bounds_fraction,
        "oscillation_sum": s.oscillation_sum,
        "oscillation_bound": s.oscillation_bound,
    });
    Ok(out)
}

pub fn appendix_measure(cfg: &MeasureConfig) -> Result<Outcome> {
    let g = grid(&cfg.grid)?;
    let f = generate(&cfg.f, &g)?;
    let seq = sequence(&cfg.partition, &g, &f)?;
    let tr = trend(&cfg.trend, cfg.f.is_stochastic());
    let t = end_time(cfg.t, &g);
    let atoms = cfg
        .atoms
        .iter()
        .map(|&(s, w)| Ok((g.require(s)?, w)))
        .collect::<Result<Vec<_>>>()?;
    let mu = DiscreteMeasure::new(g.clone(), atoms)?;
    let mus = seq
        .partitions()
        .iter()
        .map(|p| mu.pushforward(p))
        .collect::<Result<Vec<_>>>()?;
    let r = measure_convergence_check(&mus, &seq, &mu, &f, t, &tr)?;
    let mut out = Outcome::new();
    out.tables.push(level_table(
        "measure",
        &seq,
        &[
            ("integral", &r.integrals),
            ("error", &r.errors),
            ("distribution_gap", &r.distribution_gaps),
        ],
    ));
    out.plot("measure", "level", &["error"]);
    out.assertions
        .push(Assertion::trend("error trend", r.trend.passed(), trend_detail(&r.trend)));
    if let Some(tol) = cfg.tol {
        let last = *r.errors.last().unwrap();
        out.assertions.push(Assertion::exact(
            "top-level error",
            last <= tol,
            format!("{last:.3e} vs {tol:.1e}"),
        ));
    }
    out.details = json!({
        "t": t,
        "target": r.target,
        "errors": r.errors,
        "star": r.star,
        "trend": r.trend,
    });
    Ok(out)
}
