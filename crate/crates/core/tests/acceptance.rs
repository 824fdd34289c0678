//! Acceptance criteria, one line each. Run with `cargo test --test acceptance`.

use std::sync::Arc;
use std::time::Instant;

use pathcalc::drawdown::{exponential_reconstruction, solve_drawdown, FloorFunction};
use pathcalc::equations::{solve_linear, Decomposition, Forcing};
use pathcalc::finance::{dppi, FloorSpec, Market, Multiplier, FLOOR_TOL};
use pathcalc::functions::FunctionSpec;
use pathcalc::generate::{AffineTerm, Formula, JumpSizes, JumpSpec};
use pathcalc::integral::{
    admissible_rep_of_integral, associativity_check, follmer_integral, integration_by_parts,
    ito_formula_eval, AdmissibleIntegrand, Integrand,
};
use pathcalc::mc::{run_mc, McExperiment};
use pathcalc::quadvar::{measure_convergence_check, qv_curve, DiscreteMeasure};
use pathcalc::{
    generate, FvPath, Generator, GridPath, Partition, PartitionSequence, Result, TimeGrid,
    TrendSpec,
};

const EXACT_TOL: f64 = 1e-12;
const ITO_STOCHASTIC_TOL: f64 = 5e-2;
const IBP_REL_TOL: f64 = 1e-10;
const ASSOC_STOCHASTIC_TOL: f64 = 5e-2;
const ASSOC_JUMP_TOL: f64 = 1e-10;
const LINEAR_TOL: f64 = 1e-6;
const RECON_JUMP_TOL: f64 = 1e-8;
const ROUND_TRIP_TOL: f64 = 1e-6;
const MC_PASS_FRACTION: f64 = 0.9;

struct Outcome {
    pass: bool,
    detail: String,
}

fn grid(level: u32) -> Arc<TimeGrid> {
    Arc::new(TimeGrid::dyadic(1.0, level).unwrap())
}

fn make(gen: &Generator, g: &Arc<TimeGrid>) -> GridPath {
    generate(gen, g).unwrap()
}

fn brownian(seed: u64, sigma: f64, x0: f64) -> Generator {
    Generator::DyadicBrownian { seed, sigma, x0 }
}

fn fixed_jumps(base: Generator, jumps: Vec<(f64, f64)>) -> Generator {
    Generator::CompoundJump {
        base: Box::new(base),
        jumps: JumpSpec::Fixed { jumps },
    }
}

fn random_jumps(base: Generator, seed: u64, count: usize, c: f64) -> Generator {
    Generator::CompoundJump {
        base: Box::new(base),
        jumps: JumpSpec::Random {
            seed,
            count: Some(count),
            intensity: None,
            sizes: JumpSizes::Coin { c },
        },
    }
}

fn constant(value: f64) -> Generator {
    Generator::Formula {
        formula: Formula::Constant { value },
    }
}

fn linear_t() -> Generator {
    Generator::Formula {
        formula: Formula::Linear { x0: 0.0, slope: 1.0 },
    }
}

fn zigzag() -> Generator {
    Generator::Formula {
        formula: Formula::ZigZag {
            base: 2.0,
            amplitude: 0.5,
            teeth: 4,
        },
    }
}

/// Every partition interval `]t_k, t_k+1]` holds at most one declared jump.
fn isolates(p: &Partition, x: &GridPath) -> bool {
    let mut seen: Vec<usize> = x.jumps().keys().map(|&i| p.straddling(i)).collect();
    let n = seen.len();
    seen.dedup();
    seen.len() == n
}

fn cumulative_jump_squares(x: &GridPath) -> Vec<f64> {
    let mut acc = 0.0;
    (0..x.len())
        .map(|i| {
            acc += x.jump_x(i).powi(2);
            acc
        })
        .collect()
}

fn c1() -> Result<Outcome> {
    let g = grid(10);
    let paths = [
        Generator::Step { c: 0.7, t0: 0.5, x0: 1.0 },
        fixed_jumps(constant(0.0), vec![(0.25, 1.0), (0.375, -0.5), (0.8125, 2.0)]),
        random_jumps(constant(1.0), 11, 20, 0.3),
    ];
    let mut worst = 0.0_f64;
    let mut checked = 0;
    for gen in &paths {
        let x = make(gen, &g);
        let target = cumulative_jump_squares(&x);
        for n in 1..=10 {
            let p = Partition::dyadic(g.clone(), n)?;
            if !isolates(&p, &x) {
                continue;
            }
            let curve = qv_curve(&x, &p);
            let err = curve
                .iter()
                .zip(&target)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            worst = worst.max(err);
            checked += 1;
        }
    }
    Ok(Outcome {
        pass: checked > 0 && worst <= EXACT_TOL,
        detail: format!("{checked} isolating levels, max |QV - sum dX^2| = {worst:.2e}"),
    })
}

fn ito_functions() -> Vec<(&'static str, FunctionSpec)> {
    vec![
        ("x^2", FunctionSpec::x_squared()),
        ("exp", FunctionSpec::exp()),
        ("log", FunctionSpec::Log),
        ("a*x", FunctionSpec::MixedProduct),
    ]
}

fn c2() -> Result<Outcome> {
    let level = 12;
    let g = grid(level);
    let seq = PartitionSequence::dyadic(&g, 6, level)?;
    let trend = TrendSpec::stochastic().with_tol(ITO_STOCHASTIC_TOL);
    // The finite-variation argument of a*x: a pure-jump path for the exact
    // instances, t otherwise.
    let a_jump = FvPath::new(make(&fixed_jumps(constant(1.0), vec![(0.125, 0.5), (0.6875, -0.25)]), &g))?;
    let a_time = FvPath::new(make(&linear_t(), &g))?;
    let exact: Vec<(&str, Generator)> = vec![
        ("step", fixed_jumps(constant(2.0), vec![(0.25, 0.5), (0.625, -0.75)])),
        ("fv-zigzag", zigzag()),
    ];
    let stochastic: Vec<(String, Generator)> = (1..=3)
        .map(|s| (format!("brownian-{s}"), brownian(s, 1.0, 3.0)))
        .chain(std::iter::once((
            "brownian+jumps".to_string(),
            random_jumps(brownian(4, 1.0, 3.0), 5, 3, 0.5),
        )))
        .collect();
    let mut failures = Vec::new();
    let mut worst_exact = 0.0_f64;
    let mut worst_stoch = 0.0_f64;
    for (fname, spec) in ito_functions() {
        let f = spec.build()?;
        for (pname, gen) in &exact {
            let x = make(gen, &g);
            let a = (f.fv_dim() == 1).then_some(&a_jump);
            let r = ito_formula_eval(f.as_ref(), a, &x, &seq, 1.0, &trend)?;
            let res = r.residuals.last().unwrap().abs();
            worst_exact = worst_exact.max(res);
            if res > EXACT_TOL {
                failures.push(format!("{fname}/{pname} {res:.1e}"));
            }
        }
        for (pname, gen) in &stochastic {
            let x = make(gen, &g);
            let a = (f.fv_dim() == 1).then_some(&a_time);
            let r = ito_formula_eval(f.as_ref(), a, &x, &seq, 1.0, &trend)?;
            worst_stoch = worst_stoch.max(r.residuals.last().unwrap().abs());
            if !r.trend.passed() {
                let tail: Vec<String> = r.residuals[r.residuals.len() - 3..]
                    .iter()
                    .map(|v| format!("{:.1e}", v.abs()))
                    .collect();
                failures.push(format!("{fname}/{pname} [{}]", tail.join(" ")));
            }
        }
    }
    Ok(Outcome {
        pass: failures.is_empty(),
        detail: format!(
            "max exact residual {worst_exact:.2e}, max stochastic residual {worst_stoch:.2e}; failing: {}",
            if failures.is_empty() { "none".into() } else { failures.join(", ") }
        ),
    })
}

fn c3() -> Result<Outcome> {
    let g = grid(12);
    let seq = PartitionSequence::dyadic(&g, 1, 12)?;
    let pairs = [
        (brownian(1, 1.0, 1.0), brownian(2, 0.5, -1.0)),
        (Generator::Step { c: 1.5, t0: 0.5, x0: 0.2 }, brownian(3, 1.0, 0.0)),
        (zigzag(), random_jumps(brownian(4, 1.0, 0.0), 5, 4, 0.4)),
        (
            random_jumps(constant(0.0), 6, 10, 1.0),
            fixed_jumps(constant(1.0), vec![(0.25, 2.0), (0.5, -1.0)]),
        ),
        (brownian(7, 2.0, 5.0), brownian(7, 2.0, 5.0)),
    ];
    let mut worst = 0.0_f64;
    for (gx, gy) in &pairs {
        let (x, y) = (make(gx, &g), make(gy, &g));
        let r = integration_by_parts(&x, &y, &seq, 1.0, &TrendSpec::deterministic())?;
        worst = r.discrete_rel.iter().copied().fold(worst, f64::max);
    }
    Ok(Outcome {
        pass: worst <= IBP_REL_TOL,
        detail: format!("{} pairs x 12 levels, max relative defect {worst:.2e}", pairs.len()),
    })
}

/// `xi = X` via `f = x^2 / 2`, `Y = int xi dX`, `eta = Y` through its normal form.
fn assoc_gaps(x: &GridPath, seq: &PartitionSequence, trend: &TrendSpec) -> Result<(Vec<f64>, bool)> {
    let f = FunctionSpec::Polynomial {
        coeffs: vec![0.0, 0.0, 0.5],
    }
    .build()?;
    let xi = AdmissibleIntegrand::new(f, None, x.clone())?;
    let y = follmer_integral(Integrand::Witnessed(&xi), x, seq, trend)?.estimate;
    let eta = admissible_rep_of_integral(&xi, &y)?.values()?;
    let r = associativity_check(&eta, std::slice::from_ref(&xi), x, seq, 1.0, trend)?;
    Ok((r.gaps, r.trend.passed()))
}

fn c4() -> Result<Outcome> {
    let level = 12;
    let g = grid(level);
    let seq = PartitionSequence::dyadic(&g, 4, level)?;
    let trend = TrendSpec::stochastic().with_tol(ASSOC_STOCHASTIC_TOL);
    let mut failures = Vec::new();
    let mut worst_stoch = 0.0_f64;
    for (name, gen) in [
        ("brownian-1", brownian(1, 1.0, 0.0)),
        ("brownian-2", brownian(2, 1.0, 0.5)),
        ("brownian-3", brownian(3, 1.0, -0.5)),
        ("brownian+jumps", random_jumps(brownian(4, 1.0, 0.0), 5, 3, 0.5)),
    ] {
        let x = make(&gen, &g);
        let (gaps, ok) = assoc_gaps(&x, &seq, &trend)?;
        worst_stoch = worst_stoch.max(*gaps.last().unwrap());
        if !ok {
            failures.push(name.to_string());
        }
    }
    // Pure-jump instances: every level whose intervals isolate the jumps.
    let mut worst_jump = 0.0_f64;
    for gen in [
        fixed_jumps(constant(1.0), vec![(0.25, 1.0), (0.5, -0.5), (0.875, 0.75)]),
        random_jumps(constant(0.0), 8, 12, 0.5),
    ] {
        let x = make(&gen, &g);
        let (gaps, _) = assoc_gaps(&x, &seq, &trend)?;
        for (k, p) in seq.partitions().iter().enumerate() {
            if isolates(p, &x) {
                worst_jump = worst_jump.max(gaps[k]);
            }
        }
    }
    if worst_jump > ASSOC_JUMP_TOL {
        failures.push(format!("pure-jump {worst_jump:.1e}"));
    }
    Ok(Outcome {
        pass: failures.is_empty(),
        detail: format!(
            "stochastic gap at level {level} <= {worst_stoch:.2e}, pure-jump gap {worst_jump:.2e}; failing: {}",
            if failures.is_empty() { "none".into() } else { failures.join(", ") }
        ),
    })
}

fn c5() -> Result<Outcome> {
    let e = std::f64::consts::E;
    let trend = TrendSpec::deterministic();

    let g14 = grid(14);
    let seq14 = PartitionSequence::dyadic(&g14, 10, 14)?;
    let x14 = make(&linear_t(), &g14);
    let one = GridPath::constant(g14.clone(), 1.0).with_finite_variation(true);
    let s1 = solve_linear(Forcing::Raw(&one), None, &x14, &seq14, 1.0, &trend)?;
    let err1 = (s1.z.x(x14.len() - 1) - e).abs();

    // Left-point Riemann sums against dH = dt carry an O(2^-n) error, so the
    // forcing H_t = t needs a finer grid than level 14 to reach the tolerance.
    let level = 22;
    let g = grid(level);
    let seq = PartitionSequence::dyadic(&g, 18, level)?;
    let x = make(&linear_t(), &g);
    let h = x.clone();
    let dec = Decomposition {
        xi: GridPath::constant(g.clone(), 0.5),
        a: FvPath::new(x.scale(0.5))?,
    };
    let s2 = solve_linear(Forcing::Raw(&h), Some(&dec), &x, &seq, 1.0, &trend)?;
    let err2 = (s2.z.x(x.len() - 1) - (e - 1.0)).abs();
    let agreement = s2.agreement.unwrap_or(f64::INFINITY);
    Ok(Outcome {
        pass: err1 <= LINEAR_TOL && err2 <= LINEAR_TOL && agreement <= LINEAR_TOL,
        detail: format!(
            "|Z(1) - e| = {err1:.2e} (level 14), |Z(1) - (e-1)| = {err2:.2e} (level {level}), expression agreement {agreement:.2e}"
        ),
    })
}

fn exp_of(base: Generator, scale: f64) -> Generator {
    Generator::Exp {
        base: Box::new(base),
        scale,
    }
}

fn c6() -> Result<Outcome> {
    let trend = TrendSpec::stochastic();
    let g = grid(10);
    let seq = PartitionSequence::dyadic(&g, 4, 10)?;
    let mut worst_jump = 0.0_f64;
    for gen in [
        fixed_jumps(constant(1.0), vec![(0.25, 0.5), (0.5, -0.9), (0.75, 3.0)]),
        Generator::Step { c: -0.5, t0: 0.5, x0: 2.0 },
        exp_of(random_jumps(constant(0.0), 3, 15, 0.4), 1.5),
    ] {
        let s = make(&gen, &g);
        let r = exponential_reconstruction(&s, &seq, &trend)?;
        worst_jump = worst_jump.max(r.sup_error);
    }
    // Stochastic: the same sample refined through grid levels 8..12, so jump
    // times are fixed dyadic times rather than drawn grid indices.
    let mut failures = Vec::new();
    let mut last = 0.0_f64;
    for (name, gen) in [
        ("exp-brownian", exp_of(brownian(7, 0.3, 0.0), 1.0)),
        (
            "exp-brownian+jumps",
            exp_of(fixed_jumps(brownian(8, 0.3, 0.0), vec![(0.3125, 0.2), (0.5625, -0.15), (0.8125, 0.1)]), 1.0),
        ),
    ] {
        let mut errors = Vec::new();
        for level in 8..=12 {
            let g = grid(level);
            let s = make(&gen, &g);
            let seq = PartitionSequence::dyadic(&g, level - 4, level)?;
            errors.push(exponential_reconstruction(&s, &seq, &trend)?.sup_error);
        }
        last = last.max(*errors.last().unwrap());
        if !trend.check(&errors).passed() {
            let shown: Vec<String> = errors.iter().map(|e| format!("{e:.1e}")).collect();
            failures.push(format!("{name} [{}]", shown.join(" ")));
        }
    }
    if worst_jump > RECON_JUMP_TOL {
        failures.push(format!("pure-jump {worst_jump:.1e}"));
    }
    Ok(Outcome {
        pass: failures.is_empty(),
        detail: format!(
            "pure-jump sup error {worst_jump:.2e}, stochastic sup error at level 12 {last:.2e}; failing: {}",
            if failures.is_empty() { "none".into() } else { failures.join(", ") }
        ),
    })
}

fn c7() -> Result<Outcome> {
    let level = 12;
    let g = grid(level);
    let seq = PartitionSequence::dyadic(&g, 6, level)?;
    let x = make(&exp_of(brownian(7, 0.3, 0.0), 1.0), &g).scale(2.0);
    let trend = TrendSpec::stochastic();
    let mut failures = Vec::new();
    let mut worst_rt = 0.0_f64;
    let mut min_margin = f64::INFINITY;
    for (name, w) in [
        ("0", FloorFunction::Zero),
        ("0.3y", FloorFunction::Proportional { alpha: 0.3 }),
        ("y-1", FloorFunction::ConstantMargin { c: 1.0 }),
    ] {
        let s = solve_drawdown(&w, &x, x.x(0), &seq, 1.0, &trend)?;
        worst_rt = worst_rt.max(s.round_trip);
        min_margin = min_margin.min(s.constraint.min_margin);
        if s.round_trip > ROUND_TRIP_TOL || !s.constraint.holds || !s.residual.trend.passed() {
            failures.push(format!(
                "w={name} (round trip {:.1e}, residual last {:.1e} nonincreasing {}, margin {:.2e})",
                s.round_trip,
                s.residual.trend.last.unwrap_or(f64::NAN),
                s.residual.trend.nonincreasing,
                s.constraint.min_margin
            ));
        }
    }
    Ok(Outcome {
        pass: failures.is_empty(),
        detail: format!(
            "round trip <= {worst_rt:.2e}, min constraint margin {min_margin:.3}; failing: {}",
            if failures.is_empty() { "none".into() } else { failures.join(", ") }
        ),
    })
}

fn c8() -> Result<Outcome> {
    let level = 12;
    let g = grid(level);
    let seq = PartitionSequence::dyadic(&g, 6, level)?;
    let b = FvPath::new(make(
        &Generator::Formula {
            formula: Formula::Exponential { x0: 1.0, rate: 0.03 },
        },
        &g,
    ))?;
    let l = FvPath::new(make(
        &Generator::Formula {
            formula: Formula::Linear { x0: 0.8, slope: -0.2 },
        },
        &g,
    ))?;
    let floor = FloorSpec::new(l)?;
    let trend = TrendSpec::stochastic();
    let mut breaches = Vec::new();
    let mut sf_failures = Vec::new();
    let mut worst_cushion = f64::INFINITY;
    for seed in 1..=32u64 {
        let gen = exp_of(
            Generator::Affine {
                terms: vec![
                    AffineTerm {
                        weight: 1.0,
                        path: random_jumps(brownian(seed * 2, 0.25, 0.0), seed * 2 + 1, 4, 0.15),
                    },
                    AffineTerm { weight: 0.02, path: linear_t() },
                ],
                offset: 0.0,
            },
            1.0,
        );
        let market = Market::new(make(&gen, &g), b.clone())?;
        for m in [0.0, 0.5, 1.0] {
            let d = dppi(&market, Multiplier::Constant(m), &floor, 1.0, &seq, 1.0, &trend)?;
            worst_cushion = worst_cushion.min(d.min_cushion / d.floor_scale);
            if !d.floor_holds {
                breaches.push(format!("seed {seed} m {m}"));
            }
            if !d.self_financing.trend.passed() {
                sf_failures.push(format!("seed {seed} m {m}"));
            }
        }
    }
    let shown = |v: &Vec<String>| {
        if v.is_empty() {
            "none".to_string()
        } else if v.len() > 6 {
            format!("{} ({} total)", v[..6].join(", "), v.len())
        } else {
            v.join(", ")
        }
    };
    Ok(Outcome {
        pass: breaches.is_empty() && sf_failures.is_empty(),
        detail: format!(
            "96 runs, floor tolerance {FLOOR_TOL:.0e} x scale, min cushion/scale {worst_cushion:.3e}; floor breaches: {}; self-financing trend failures: {}",
            shown(&breaches),
            shown(&sf_failures)
        ),
    })
}

fn c9() -> Result<Outcome> {
    let exp = McExperiment {
        sigma: 1.0,
        x0: 0.0,
        jumps: None,
        seeds: (1..=64).collect(),
        n_min: 3,
        n_max: 8,
        horizon: 1.0,
        grid_level: 20,
        tol: 5e-2,
        window: 3,
        confidence: 0.95,
    };
    let s = run_mc(&exp)?;
    Ok(Outcome {
        pass: s.pass_fraction >= MC_PASS_FRACTION && s.bounds_fraction == 1.0,
        detail: format!(
            "pass fraction {:.3} (95% CI {:.3}..{:.3}), bounds hold on {:.0}% of seeds, median top-level error {:.3e}",
            s.pass_fraction,
            s.pass_interval.0,
            s.pass_interval.1,
            100.0 * s.bounds_fraction,
            s.per_level_median_error.last().unwrap()
        ),
    })
}

fn c10() -> Result<Outcome> {
    let level = 10;
    let g = grid(12);
    let seq = PartitionSequence::dyadic(&g, 1, level)?;
    let mu = DiscreteMeasure::dirac(g.clone(), 0.5, 1.0)?;
    let mus = seq
        .partitions()
        .iter()
        .map(|p| mu.pushforward(p))
        .collect::<Result<Vec<_>>>()?;
    let f = make(
        &fixed_jumps(constant(0.0), vec![(0.5, 1.0), (0.375, 0.25), (0.498046875, 0.125)]),
        &g,
    );
    let r = measure_convergence_check(&mus, &seq, &mu, &f, 1.0, &TrendSpec::deterministic())?;
    let err = *r.errors.last().unwrap();
    // Variation of f over the level-n interval [t_k, 0.5) that carries the atom.
    let p = seq.top();
    let i = g.require(0.5)?;
    let k = p.indices()[p.straddling(i)];
    let bound: f64 = (k + 1..i).map(|j| f.jump_x(j).abs()).sum();
    Ok(Outcome {
        pass: err <= bound + EXACT_TOL,
        detail: format!(
            "|int f dmu_{level} - f(0.5-)| = {err:.3e}, one-step variation {bound:.3e} (f(0.5-) = {})",
            r.target
        ),
    })
}

fn main() {
    let criteria: Vec<(&str, f64, fn() -> Result<Outcome>)> = vec![
        ("C1 exact jump identities", 1.0, c1),
        ("C2 Ito formula residual", 30.0, c2),
        ("C3 discrete integration by parts", f64::INFINITY, c3),
        ("C4 associativity", 30.0, c4),
        ("C5 linear equation oracle", 5.0, c5),
        ("C6 exponential reconstruction", f64::INFINITY, c6),
        ("C7 drawdown round trip", 10.0, c7),
        ("C8 CPPI floor guarantee", 60.0, c8),
        ("C9 Monte Carlo QV", 120.0, c9),
        ("C10 measure pushforward limit", 1.0, c10),
    ];
    let mut failed = 0;
    for (name, budget, run) in criteria {
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        let (pass, detail) = match outcome {
            Ok(o) => (o.pass && secs < budget, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        let budget = if budget.is_finite() {
            format!(" / {budget:.0} s")
        } else {
            String::new()
        };
        println!(
            "{} {name}: {detail} [{secs:.2} s{budget}]",
            if pass { "PASS" } else { "FAIL" }
        );
        if !pass {
            failed += 1;
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
