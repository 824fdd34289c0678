//! Portfolio insurance (CPPI/DPPI), self-financing checks and drawdown-constrained strategies.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::drawdown::{
    azema_yor_values, check_drawdown_constraint, floor_to_transform, ConstraintReport,
    FloorFunction, Transform,
};
use crate::equations::{exponential_from_qv, EquationResidual, StochasticExponential};
use crate::error::{Error, Result};
use crate::integral::{riemann_path, riemann_sum, AdmissibleIntegrand, Convention};
use crate::numeric::{Accumulator, Status, TrendSpec};
use crate::partition::PartitionSequence;
use crate::path::{check_same_grid, same_grid, FvPath, GridPath};
use crate::quadvar::{qv_sequence_with, stieltjes_left};

/// Relative slack of the floor check.
pub const FLOOR_TOL: f64 = 1e-9;

/// One risky asset `S` and one riskless asset `B` on a common grid.
#[derive(Debug, Clone)]
pub struct Market {
    s: GridPath,
    b: FvPath,
    s_tilde: GridPath,
}

fn require_positive(p: &GridPath) -> Result<()> {
    for i in 0..p.len() {
        if !(p.x(i) > 0.0 && p.left_x(i) > 0.0) {
            return Err(Error::Positivity { t: p.time(i) });
        }
    }
    Ok(())
}

impl Market {
    pub fn new(s: GridPath, b: FvPath) -> Result<Self> {
        s.expect_scalar()?;
        b.path().expect_scalar()?;
        check_same_grid(&s, b.path())?;
        require_positive(&s)?;
        require_positive(b.path())?;
        if (b.path().x(0) - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "B_0 = {} must be 1",
                b.path().x(0)
            )));
        }
        let s_tilde = s.mul(&b.path().map(|v| 1.0 / v)?)?;
        Ok(Self { s, b, s_tilde })
    }

    /// `B = 1`.
    pub fn undiscounted(s: GridPath) -> Result<Self> {
        let one = GridPath::constant(s.grid().clone(), 1.0).with_finite_variation(true);
        Self::new(s, FvPath::new(one)?)
    }

    pub fn s(&self) -> &GridPath {
        &self.s
    }

    pub fn b(&self) -> &FvPath {
        &self.b
    }

    /// `S / B`.
    pub fn discounted(&self) -> &GridPath {
        &self.s_tilde
    }
}

/// `(xi, eta)` and its value `V = xi S + eta B`.
#[derive(Debug, Clone)]
pub struct Strategy {
    pub xi: GridPath,
    pub eta: GridPath,
    pub value: GridPath,
}

impl Strategy {
    /// `sup |V - xi S - eta B|` over the grid.
    pub fn value_gap(&self, market: &Market) -> f64 {
        (0..self.value.len())
            .map(|i| {
                let v = self.xi.x(i) * market.s.x(i) + self.eta.x(i) * market.b.path().x(i);
                (self.value.x(i) - v).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Constant holdings.
pub fn buy_and_hold(market: &Market, xi: f64, eta: f64) -> Result<Strategy> {
    let g = market.s.grid().clone();
    let xi_p = GridPath::constant(g.clone(), xi);
    let eta_p = GridPath::constant(g, eta);
    let value = GridPath::affine(&[(xi, &market.s), (eta, market.b.path())], 0.0)?;
    Ok(Strategy {
        xi: xi_p,
        eta: eta_p,
        value,
    })
}

fn residual_report(t: f64, seq: &PartitionSequence, residuals: Vec<f64>, trend: &TrendSpec) -> EquationResidual {
    let abs: Vec<f64> = residuals.iter().map(|r| r.abs()).collect();
    let report = trend.check(&abs);
    EquationResidual {
        t,
        levels: seq.levels().to_vec(),
        residuals,
        trend: report,
        status: Status::from_trend(&report),
    }
}

/// `V_t - V_0 - int xi_- dS - int eta_- dB` per level.
pub fn self_financing_residual(
    strategy: &Strategy,
    market: &Market,
    seq: &PartitionSequence,
    t: f64,
    trend: &TrendSpec,
) -> Result<EquationResidual> {
    let end = market.s.grid().index_at(t)?;
    let v = &strategy.value;
    let residuals = seq
        .partitions()
        .iter()
        .map(|p| {
            let a = riemann_sum(&strategy.xi, &market.s, p, t, Convention::Truncated)?;
            let b = riemann_sum(&strategy.eta, market.b.path(), p, t, Convention::Truncated)?;
            Ok(v.x(end) - v.x(0) - a - b)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(residual_report(t, seq, residuals, trend))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscountedEquivalence {
    pub raw: EquationResidual,
    /// `V_t / B_t - V_0 - int xi_- d(S/B)` per level.
    pub discounted: EquationResidual,
    /// Both residual trends pass, or both fail.
    pub jointly_vanish: bool,
}

pub fn discounted_equivalence(
    strategy: &Strategy,
    market: &Market,
    seq: &PartitionSequence,
    t: f64,
    trend: &TrendSpec,
) -> Result<DiscountedEquivalence> {
    let raw = self_financing_residual(strategy, market, seq, t, trend)?;
    let end = market.s.grid().index_at(t)?;
    let v = &strategy.value;
    let vt = v.x(end) / market.b.path().x(end);
    let residuals = seq
        .partitions()
        .iter()
        .map(|p| {
            let a = riemann_sum(&strategy.xi, &market.s_tilde, p, t, Convention::Truncated)?;
            Ok(vt - v.x(0) - a)
        })
        .collect::<Result<Vec<_>>>()?;
    let discounted = residual_report(t, seq, residuals, trend);
    let jointly_vanish = raw.trend.passed() == discounted.trend.passed();
    Ok(DiscountedEquivalence {
        raw,
        discounted,
        jointly_vanish,
    })
}

/// Floor `K = L B` given by a nonnegative multiplier `L`.
#[derive(Debug, Clone)]
pub struct FloorSpec {
    l: FvPath,
}

impl FloorSpec {
    pub fn new(l: FvPath) -> Result<Self> {
        l.path().expect_scalar()?;
        for i in 0..l.path().len() {
            if l.path().x(i) < 0.0 || l.path().left_x(i) < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "floor multiplier negative at t = {}",
                    l.path().time(i)
                )));
            }
        }
        Ok(Self { l })
    }

    pub fn constant(grid: std::sync::Arc<crate::path::TimeGrid>, l0: f64) -> Result<Self> {
        Self::new(FvPath::new(
            GridPath::constant(grid, l0).with_finite_variation(true),
        )?)
    }

    pub fn l(&self) -> &FvPath {
        &self.l
    }

    pub fn is_nonincreasing(&self) -> bool {
        let p = self.l.path();
        (1..p.len()).all(|i| p.left_x(i) <= p.x(i - 1) && p.x(i) <= p.left_x(i))
    }
}

/// Multiplier `m`: a constant (CPPI) or an admissible integrand of `S` (DPPI).
#[derive(Debug, Clone, Copy)]
pub enum Multiplier<'a> {
    Constant(f64),
    Witnessed(&'a AdmissibleIntegrand),
}

#[derive(Debug, Clone)]
pub struct Dppi {
    pub strategy: Strategy,
    /// `int m_-/S_- dS + int (1 - m_-)/B_- dB` on the top level.
    pub x: GridPath,
    pub exponential: StochasticExponential,
    pub qv_status: Status,
    /// All jumps of `X` exceed -1.
    pub jumps_above_minus_one: bool,
    /// `L` nonincreasing and `V_0 >= L_0`.
    pub guarantee_claimed: bool,
    /// `min_t (V_t - L_t B_t)`.
    pub min_cushion: f64,
    /// `FLOOR_TOL` times the largest `|V|`, at least 1.
    pub floor_scale: f64,
    pub floor_holds: bool,
    /// `sup |(V - K) - E(X) G|` with `G` the general-floor gap formula at `K = L B`.
    pub general_gap: f64,
    pub self_financing: EquationResidual,
}

#[allow(clippy::too_many_arguments)]
pub fn dppi(
    market: &Market,
    m: Multiplier<'_>,
    floor: &FloorSpec,
    v0: f64,
    seq: &PartitionSequence,
    t: f64,
    trend: &TrendSpec,
) -> Result<Dppi> {
    let s = &market.s;
    let b = market.b.path();
    let l = floor.l.path();
    check_same_grid(s, l)?;
    if !same_grid(s.grid(), seq.grid()) {
        return Err(Error::GridMismatch);
    }
    if v0 < l.x(0) {
        return Err(Error::Precondition(format!("V_0 = {v0} below L_0 = {}", l.x(0))));
    }
    let n = s.len();
    let m_path = match m {
        Multiplier::Constant(c) => GridPath::constant(s.grid().clone(), c),
        Multiplier::Witnessed(w) => {
            if w.x() != s {
                return Err(Error::InvalidParameter(
                    "multiplier is witnessed against a different path".into(),
                ));
            }
            w.xi().clone()
        }
    };
    m_path.expect_scalar()?;

    // X on the top level, declared jumps from left limits.
    let top = seq.top();
    let risky: Vec<f64> = (0..n).map(|i| m_path.x(i) / s.x(i)).collect();
    let safe: Vec<f64> = (0..n).map(|i| (1.0 - m_path.x(i)) / b.x(i)).collect();
    let risky = GridPath::scalar(s.grid().clone(), risky, [])?;
    let safe = GridPath::scalar(s.grid().clone(), safe, [])?;
    let xr = riemann_path(&risky, s, top)?;
    let xb = riemann_path(&safe, b, top)?;
    let mut idx: Vec<usize> = s.jumps().keys().chain(b.jumps().keys()).copied().collect();
    idx.sort_unstable();
    idx.dedup();
    let mut x_jumps = BTreeMap::new();
    for &i in &idx {
        let ml = m_path.left_x(i);
        let dx = ml * s.jump_x(i) / s.left_x(i) + (1.0 - ml) * b.jump_x(i) / b.left_x(i);
        if dx == -1.0 {
            return Err(Error::ZeroHit { t: s.time(i) });
        }
        x_jumps.insert(i, vec![dx]);
    }
    let x_values: Vec<f64> = xr.iter().zip(&xb).map(|(a, c)| a + c).collect();
    let x = GridPath::new(s.grid().clone(), 1, x_values, x_jumps)?
        .with_finite_variation(s.is_finite_variation());
    let jumps_above_minus_one = x.jumps().values().all(|d| d[0] > -1.0);

    let qv = qv_sequence_with(&x, seq, trend)?;
    let se = exponential_from_qv(&x, &qv)?;

    // V = L B + E(X) (V_0 - L_0 - int B_-/E_- dL^c - sum B ΔL / (E_- (1 + ΔX))).
    let lc = floor.l.continuous_part().scalar_values();
    let w: Vec<f64> = (0..n).map(|i| b.left_x(i) / se.left(i)).collect();
    let cont = stieltjes_left(&w, &lc);
    let mut jump_acc = Accumulator::new();
    let mut bracket = Vec::with_capacity(n);
    let mut bracket_left = Vec::with_capacity(n);
    for i in 0..n {
        let before = v0 - l.x(0) - cont[i] - jump_acc.value();
        let dl = l.jump_x(i);
        if dl != 0.0 {
            jump_acc.add(b.x(i) * dl / (se.left(i) * (1.0 + x.jump_x(i))));
        }
        bracket_left.push(before);
        bracket.push(v0 - l.x(0) - cont[i] - jump_acc.value());
    }
    let values: Vec<f64> = (0..n)
        .map(|i| l.x(i) * b.x(i) + se.value(i) * bracket[i])
        .collect();
    let mut all: Vec<usize> = idx.iter().chain(l.jumps().keys()).copied().collect();
    all.sort_unstable();
    all.dedup();
    let mut v_jumps = BTreeMap::new();
    for &i in &all {
        let left = l.left_x(i) * b.left_x(i) + se.left(i) * bracket_left[i];
        v_jumps.insert(i, vec![values[i] - left]);
    }
    let value = GridPath::new(s.grid().clone(), 1, values, v_jumps)?;

    let xi_at = |v: f64, l: f64, b: f64, m: f64, s: f64| m * (v - l * b) / s;
    let xi_values: Vec<f64> = (0..n)
        .map(|i| xi_at(value.x(i), l.x(i), b.x(i), m_path.x(i), s.x(i)))
        .collect();
    let eta_values: Vec<f64> = (0..n)
        .map(|i| (value.x(i) - xi_values[i] * s.x(i)) / b.x(i))
        .collect();
    let mut xi_jumps = BTreeMap::new();
    let mut eta_jumps = BTreeMap::new();
    let mut union: Vec<usize> = all.iter().chain(m_path.jumps().keys()).copied().collect();
    union.sort_unstable();
    union.dedup();
    for &i in &union {
        let xl = xi_at(value.left_x(i), l.left_x(i), b.left_x(i), m_path.left_x(i), s.left_x(i));
        let el = (value.left_x(i) - xl * s.left_x(i)) / b.left_x(i);
        xi_jumps.insert(i, vec![xi_values[i] - xl]);
        eta_jumps.insert(i, vec![eta_values[i] - el]);
    }
    let strategy = Strategy {
        xi: GridPath::new(s.grid().clone(), 1, xi_values, xi_jumps)?,
        eta: GridPath::new(s.grid().clone(), 1, eta_values, eta_jumps)?,
        value,
    };

    let floor_scale = FLOOR_TOL
        * strategy
            .value
            .values()
            .iter()
            .fold(1.0_f64, |a, v| a.max(v.abs()));
    let min_cushion = (0..n)
        .map(|i| strategy.value.x(i) - l.x(i) * b.x(i))
        .fold(f64::INFINITY, f64::min);
    let general_gap = general_floor_gap(&strategy.value, &x, &se, b, l, v0)?;
    let self_financing = self_financing_residual(&strategy, market, seq, t, trend)?;
    Ok(Dppi {
        strategy,
        x,
        exponential: se,
        qv_status: qv.status,
        jumps_above_minus_one,
        guarantee_claimed: floor.is_nonincreasing(),
        min_cushion,
        floor_scale,
        floor_holds: min_cushion >= -floor_scale,
        general_gap,
        self_financing,
    })
}

/// Evaluates the gap `V - K` for a general floor `K` through `E(X)` and
/// compares it with the constructed value path, `K = L B` here.
fn general_floor_gap(
    v: &GridPath,
    x: &GridPath,
    se: &StochasticExponential,
    b: &GridPath,
    l: &GridPath,
    v0: f64,
) -> Result<f64> {
    let k = l.mul(b)?;
    let n = v.len();
    let inv: Vec<f64> = (0..n).map(|i| 1.0 / se.left(i)).collect();
    // Continuous parts of the Stieltjes integrals; jumps are handled in the sum.
    let mut acc = Accumulator::new();
    let mut worst = 0.0_f64;
    for i in 0..n {
        if i > 0 {
            let db = b.x(i) - b.x(i - 1) - b.jump_x(i);
            let dk = k.x(i) - k.x(i - 1) - k.jump_x(i);
            acc.add(inv[i] * (k.left_x(i) / b.left_x(i) * db - dk));
            let dx = x.jump_x(i);
            if dx != 0.0 || b.jump_x(i) != 0.0 || k.jump_x(i) != 0.0 {
                let (dbj, dkj) = (b.jump_x(i), k.jump_x(i));
                // The integrals' own jump contributions.
                acc.add(inv[i] * (k.left_x(i) / b.left_x(i) * dbj - dkj));
                acc.add(inv[i] * (dkj * dx - k.left_x(i) / b.left_x(i) * dbj * dx) / (1.0 + dx));
            }
        }
        let g = v0 - k.x(0) + acc.value();
        let predicted = se.value(i) * g;
        worst = worst.max(((v.x(i) - k.x(i)) - predicted).abs());
    }
    Ok(worst)
}

#[derive(Debug, Clone)]
pub struct DrawdownStrategy {
    pub strategy: Strategy,
    pub transform: Transform,
    pub constraint: ConstraintReport,
    pub self_financing: EquationResidual,
}

/// `xi = U'(max S)`, `V = M^U(S)`, `eta = V - xi S` with `B = 1`.
pub fn drawdown_strategy(
    s: &GridPath,
    v0: f64,
    w: &FloorFunction,
    seq: &PartitionSequence,
    t: f64,
    trend: &TrendSpec,
) -> Result<DrawdownStrategy> {
    let market = Market::undiscounted(s.clone())?;
    let rm = s.running_maximum()?;
    if let Some(i) = rm.first_break {
        return Err(Error::DiscontinuousMaximum { t: s.time(i) });
    }
    let smax = rm.path;
    let transform = floor_to_transform(w, s.x(0), v0, smax.x(s.len() - 1))?;
    let u = &transform.u;
    let value = azema_yor_values(u, s)?;
    let xi_values: Vec<f64> = smax.values().iter().map(|&m| u.d1(m)).collect();
    let xi = GridPath::scalar(s.grid().clone(), xi_values, [])?;
    let eta = value.sub(&xi.mul(s)?)?;
    let strategy = Strategy { xi, eta, value };
    let constraint = check_drawdown_constraint(&strategy.value, w)?;
    let self_financing = self_financing_residual(&strategy, &market, seq, t, trend)?;
    Ok(DrawdownStrategy {
        strategy,
        transform,
        constraint,
        self_financing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::{generate, Generator, JumpSizes, JumpSpec};
    use crate::path::TimeGrid;
    use std::sync::Arc;

    fn grid(level: u32) -> (Arc<TimeGrid>, PartitionSequence) {
        let g = Arc::new(TimeGrid::dyadic(1.0, level).unwrap());
        let seq = PartitionSequence::dyadic(&g, 1, level).unwrap();
        (g, seq)
    }

    fn step_price(g: &Arc<TimeGrid>, c: f64) -> GridPath {
        generate(&Generator::Step { c, t0: 0.5, x0: 1.0 }, g).unwrap()
    }

    fn exp_brownian(g: &Arc<TimeGrid>, seed: u64) -> GridPath {
        generate(
            &Generator::Exp {
                base: Box::new(Generator::DyadicBrownian { seed, sigma: 0.2, x0: 0.0 }),
                scale: 1.0,
            },
            g,
        )
        .unwrap()
    }

    #[test]
    fn buy_and_hold_is_self_financing() {
        let (g, seq) = grid(6);
        let b = generate(
            &Generator::Formula {
                formula: crate::generate::Formula::Exponential { x0: 1.0, rate: 0.05 },
            },
            &g,
        )
        .unwrap();
        let market = Market::new(exp_brownian(&g, 1), FvPath::new(b).unwrap()).unwrap();
        let st = buy_and_hold(&market, 2.0, -0.5).unwrap();
        let r = discounted_equivalence(&st, &market, &seq, 1.0, &TrendSpec::deterministic()).unwrap();
        assert!(r.raw.residuals.iter().all(|v| v.abs() < 1e-13));
        assert!(r.discounted.residuals.iter().all(|v| v.abs() < 1e-13));
    }

    #[test]
    fn cppi_full_multiplier_on_step() {
        let (g, seq) = grid(6);
        let market = Market::undiscounted(step_price(&g, 0.5)).unwrap();
        let floor = FloorSpec::constant(g.clone(), 0.4).unwrap();
        let d = dppi(&market, Multiplier::Constant(1.0), &floor, 1.0, &seq, 1.0, &TrendSpec::deterministic()).unwrap();
        // V = L_0 + (v0 - L_0) S / S_0.
        let want = 0.4 + 0.6 * 1.5;
        assert!((d.strategy.value.x(64) - want).abs() < 1e-14);
        assert!(d.floor_holds);
        assert!(d.general_gap < 1e-14);
        assert!(d.self_financing.residuals.last().unwrap().abs() < 1e-15);
    }

    #[test]
    fn cppi_zero_multiplier_is_riskless() {
        let (g, seq) = grid(6);
        let b = generate(
            &Generator::Formula {
                formula: crate::generate::Formula::Exponential { x0: 1.0, rate: 0.1 },
            },
            &g,
        )
        .unwrap();
        let market = Market::new(exp_brownian(&g, 2), FvPath::new(b.clone()).unwrap()).unwrap();
        let floor = FloorSpec::constant(g.clone(), 0.5).unwrap();
        let d = dppi(&market, Multiplier::Constant(0.0), &floor, 1.0, &seq, 1.0, &TrendSpec::deterministic()).unwrap();
        // X is the left-point Riemann path of dB/B_-, so E(X) differs from B by its discretisation.
        let err = d.exponential.path.sup_distance(&b).unwrap();
        assert!(err < 1e-3);
        assert!(d.strategy.xi.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn jump_sum_uses_post_jump_riskless_price() {
        // Single jump of L and of B at t0; V_T by hand with B_{t0} (not B_{t0-}).
        let (g, seq) = grid(4);
        let s = GridPath::constant(g.clone(), 1.0).with_finite_variation(true);
        let b = generate(&Generator::Step { c: 1.0, t0: 0.5, x0: 1.0 }, &g).unwrap();
        let l = generate(&Generator::Step { c: -0.25, t0: 0.5, x0: 0.5 }, &g).unwrap();
        let market = Market::new(s, FvPath::new(b).unwrap()).unwrap();
        let floor = FloorSpec::new(FvPath::new(l).unwrap()).unwrap();
        let d = dppi(&market, Multiplier::Constant(0.5), &floor, 1.0, &seq, 1.0, &TrendSpec::deterministic()).unwrap();
        // dX = (1 - m) dB / B_- = 0.5, E = 1.5 after the jump.
        // V = L B + E (V_0 - L_0 - B dL / (E_- (1 + dX))) = 0.25*2 + 1.5*(0.5 + 2*0.25/1.5).
        let want = 0.5 + 1.5 * (0.5 + 2.0 * 0.25 / 1.5);
        assert!((d.strategy.value.x(16) - want).abs() < 1e-14);
        assert!(d.general_gap < 1e-14);
    }

    #[test]
    fn cppi_floor_on_jump_market() {
        let (g, seq) = grid(10);
        let s = generate(
            &Generator::Exp {
                base: Box::new(Generator::CompoundJump {
                    base: Box::new(Generator::DyadicBrownian { seed: 4, sigma: 0.3, x0: 0.0 }),
                    jumps: JumpSpec::Random {
                        seed: 5,
                        count: Some(3),
                        intensity: None,
                        sizes: JumpSizes::Uniform { half_width: 0.5 },
                    },
                }),
                scale: 1.0,
            },
            &g,
        )
        .unwrap();
        let market = Market::undiscounted(s).unwrap();
        let floor = FloorSpec::constant(g.clone(), 0.8).unwrap();
        let d = dppi(&market, Multiplier::Constant(0.5), &floor, 1.0, &seq, 1.0, &TrendSpec::stochastic()).unwrap();
        assert!(d.jumps_above_minus_one && d.guarantee_claimed);
        assert!(d.floor_holds, "min cushion {}", d.min_cushion);
    }

    #[test]
    fn drawdown_strategy_identity() {
        let (g, seq) = grid(8);
        let s = exp_brownian(&g, 3);
        let r = drawdown_strategy(&s, 1.0, &FloorFunction::Zero, &seq, 1.0, &TrendSpec::stochastic()).unwrap();
        assert!(r.strategy.xi.values().iter().all(|v| (v - 1.0).abs() < 1e-10));
        assert!(r.strategy.value.sup_distance(&s).unwrap() < 1e-10);
        assert!(r.constraint.holds);
    }

    #[test]
    fn drawdown_strategy_constant_price() {
        let (g, seq) = grid(4);
        let s = GridPath::constant(g.clone(), 2.0);
        let r = drawdown_strategy(&s, 1.5, &FloorFunction::Proportional { alpha: 0.3 }, &seq, 1.0, &TrendSpec::deterministic()).unwrap();
        assert!(r.strategy.value.values().iter().all(|v| (v - 1.5).abs() < 1e-12));
        assert!(r.self_financing.residuals.iter().all(|v| v.abs() < 1e-12));
    }
}
