//! Path generators. Every generator is a pure function of its parameters and
//! the grid; stochastic kinds are keyed by a 64-bit seed.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::path::{GridPath, TimeGrid};

/// ChaCha stream reserved for jump sampling; Brownian levels use streams `0..=level`.
const JUMP_STREAM: u64 = u64::MAX - 1;

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Generator {
    Formula {
        formula: Formula,
    },
    /// Midpoint construction on a dyadic grid; coarse values never move under refinement.
    DyadicBrownian {
        seed: u64,
        #[serde(default = "one")]
        sigma: f64,
        #[serde(default)]
        x0: f64,
    },
    /// `x0 + c 1{t >= t0}`.
    Step {
        c: f64,
        t0: f64,
        #[serde(default)]
        x0: f64,
    },
    CompoundJump {
        base: Box<Generator>,
        jumps: JumpSpec,
    },
    Affine {
        terms: Vec<AffineTerm>,
        #[serde(default)]
        offset: f64,
    },
    /// `scale * exp(base)`.
    Exp {
        base: Box<Generator>,
        #[serde(default = "one")]
        scale: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AffineTerm {
    pub weight: f64,
    pub path: Generator,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Formula {
    Constant {
        value: f64,
    },
    Linear {
        #[serde(default)]
        x0: f64,
        slope: f64,
    },
    /// Triangle wave `base + amplitude * tri(teeth * t / T)` starting and ending at `base`.
    ZigZag {
        #[serde(default)]
        base: f64,
        amplitude: f64,
        teeth: u32,
    },
    Exponential {
        #[serde(default = "one")]
        x0: f64,
        rate: f64,
    },
    Sine {
        #[serde(default)]
        x0: f64,
        amplitude: f64,
        frequency: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case", deny_unknown_fields)]
pub enum JumpSpec {
    /// `(time, size)` pairs; times must be grid times.
    Fixed { jumps: Vec<(f64, f64)> },
    /// Jump times uniform over grid points, count given or Poisson with `intensity * T`.
    Random {
        seed: u64,
        #[serde(default)]
        count: Option<usize>,
        #[serde(default)]
        intensity: Option<f64>,
        sizes: JumpSizes,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "kebab-case", deny_unknown_fields)]
pub enum JumpSizes {
    /// `+c` or `-c` with equal probability.
    Coin { c: f64 },
    /// Uniform on `[-half_width, half_width]`.
    Uniform { half_width: f64 },
}

impl JumpSizes {
    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match *self {
            JumpSizes::Coin { c } => {
                if rng.random::<bool>() {
                    c
                } else {
                    -c
                }
            }
            JumpSizes::Uniform { half_width } => rng.random_range(-half_width..=half_width),
        }
    }
}

impl Formula {
    fn eval(&self, t: f64, horizon: f64) -> f64 {
        match *self {
            Formula::Constant { value } => value,
            Formula::Linear { x0, slope } => x0 + slope * t,
            Formula::ZigZag {
                base,
                amplitude,
                teeth,
            } => {
                let u = teeth as f64 * t / horizon;
                let frac = u - u.floor();
                base + amplitude * (1.0 - (2.0 * frac - 1.0).abs())
            }
            Formula::Exponential { x0, rate } => x0 * (rate * t).exp(),
            Formula::Sine {
                x0,
                amplitude,
                frequency,
            } => x0 + amplitude * (2.0 * std::f64::consts::PI * frequency * t).sin(),
        }
    }
}

impl Generator {
    pub fn is_stochastic(&self) -> bool {
        match self {
            Generator::Formula { .. } | Generator::Step { .. } => false,
            Generator::DyadicBrownian { .. } => true,
            Generator::CompoundJump { base, jumps } => {
                base.is_stochastic() || matches!(jumps, JumpSpec::Random { .. })
            }
            Generator::Affine { terms, .. } => terms.iter().any(|t| t.path.is_stochastic()),
            Generator::Exp { base, .. } => base.is_stochastic(),
        }
    }

    /// Replaces every seed in the tree by `seed + k`, `k` counting stochastic
    /// leaves in depth-first order.
    pub fn reseed(&mut self, seed: u64) {
        let mut k = 0u64;
        self.reseed_inner(seed, &mut k);
    }

    fn reseed_inner(&mut self, seed: u64, k: &mut u64) {
        match self {
            Generator::DyadicBrownian { seed: s, .. } => {
                *s = seed.wrapping_add(*k);
                *k += 1;
            }
            Generator::CompoundJump { base, jumps } => {
                base.reseed_inner(seed, k);
                if let JumpSpec::Random { seed: s, .. } = jumps {
                    *s = seed.wrapping_add(*k);
                    *k += 1;
                }
            }
            Generator::Affine { terms, .. } => {
                for t in terms {
                    t.path.reseed_inner(seed, k);
                }
            }
            Generator::Exp { base, .. } => base.reseed_inner(seed, k),
            Generator::Formula { .. } | Generator::Step { .. } => {}
        }
    }
}

pub fn generate(gen: &Generator, grid: &Arc<TimeGrid>) -> Result<GridPath> {
    match gen {
        Generator::Formula { formula } => {
            let horizon = grid.horizon();
            let values = grid.times().iter().map(|&t| formula.eval(t, horizon)).collect();
            Ok(GridPath::continuous(grid.clone(), values)?.with_finite_variation(true))
        }
        Generator::DyadicBrownian { seed, sigma, x0 } => {
            dyadic_brownian(grid, *seed, *sigma, *x0)
        }
        Generator::Step { c, t0, x0 } => {
            let i = grid.find(*t0).ok_or_else(|| {
                Error::IncompatibleGrid(format!("step time {t0} is not a grid time"))
            })?;
            if i == 0 {
                return Err(Error::IncompatibleGrid("step at t = 0".into()));
            }
            let values = (0..grid.len())
                .map(|j| if j >= i { x0 + c } else { *x0 })
                .collect();
            Ok(GridPath::scalar(grid.clone(), values, [(i, *c)])?.with_finite_variation(true))
        }
        Generator::CompoundJump { base, jumps } => {
            let base = generate(base, grid)?;
            base.expect_scalar()?;
            let list = match jumps {
                JumpSpec::Fixed { jumps } => {
                    let mut out = Vec::with_capacity(jumps.len());
                    for &(t, size) in jumps {
                        let i = grid.find(t).ok_or_else(|| {
                            Error::IncompatibleGrid(format!("jump time {t} is not a grid time"))
                        })?;
                        if i == 0 {
                            return Err(Error::IncompatibleGrid("jump at t = 0".into()));
                        }
                        out.push((i, size));
                    }
                    out
                }
                JumpSpec::Random {
                    seed,
                    count,
                    intensity,
                    sizes,
                } => random_jumps(grid, *seed, *count, *intensity, sizes)?,
            };
            overlay_jumps(&base, &list)
        }
        Generator::Affine { terms, offset } => {
            if terms.is_empty() {
                return Err(Error::InvalidParameter("affine combination without terms".into()));
            }
            let paths = terms
                .iter()
                .map(|t| generate(&t.path, grid))
                .collect::<Result<Vec<_>>>()?;
            let weighted: Vec<(f64, &GridPath)> =
                terms.iter().zip(&paths).map(|(t, p)| (t.weight, p)).collect();
            GridPath::affine(&weighted, *offset)
        }
        Generator::Exp { base, scale } => {
            let base = generate(base, grid)?;
            let fv = base.is_finite_variation();
            Ok(base.map(|x| scale * x.exp())?.with_finite_variation(fv))
        }
    }
}

/// Adds jumps `(index, size)` to a scalar path.
pub fn overlay_jumps(base: &GridPath, list: &[(usize, f64)]) -> Result<GridPath> {
    let n = base.len();
    let mut incr = vec![0.0; n];
    let mut jumps: BTreeMap<usize, f64> = base.jumps().iter().map(|(&i, d)| (i, d[0])).collect();
    for &(i, size) in list {
        if i == 0 || i >= n {
            return Err(Error::IndexOutOfRange { index: i, len: n });
        }
        incr[i] += size;
        *jumps.entry(i).or_insert(0.0) += size;
    }
    let mut acc = 0.0;
    let values = (0..n)
        .map(|i| {
            acc += incr[i];
            base.x(i) + acc
        })
        .collect();
    Ok(GridPath::scalar(base.grid().clone(), values, jumps)?
        .with_finite_variation(base.is_finite_variation()))
}

fn random_jumps(
    grid: &TimeGrid,
    seed: u64,
    count: Option<usize>,
    intensity: Option<f64>,
    sizes: &JumpSizes,
) -> Result<Vec<(usize, f64)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(JUMP_STREAM);
    let slots = grid.len() - 1;
    let count = match (count, intensity) {
        (Some(c), None) => c,
        (None, Some(lambda)) => {
            let mean = lambda * grid.horizon();
            if !(mean >= 0.0) || !mean.is_finite() {
                return Err(Error::InvalidParameter(format!("jump intensity {lambda}")));
            }
            if mean == 0.0 {
                0
            } else {
                let poisson = Poisson::new(mean)
                    .map_err(|e| Error::InvalidParameter(format!("poisson: {e}")))?;
                let draw: f64 = poisson.sample(&mut rng);
                draw as usize
            }
        }
        _ => {
            return Err(Error::InvalidParameter(
                "give exactly one of jump count or intensity".into(),
            ))
        }
    };
    if count > slots {
        return Err(Error::InvalidParameter(format!(
            "{count} jumps do not fit on {slots} grid points"
        )));
    }
    let mut idx: Vec<usize> = index::sample(&mut rng, slots, count)
        .into_iter()
        .map(|i| i + 1)
        .collect();
    idx.sort_unstable();
    Ok(idx.into_iter().map(|i| (i, sizes.sample(&mut rng))).collect())
}

fn dyadic_brownian(grid: &Arc<TimeGrid>, seed: u64, sigma: f64, x0: f64) -> Result<GridPath> {
    let info = grid.dyadic_info().ok_or_else(|| {
        Error::IncompatibleGrid("dyadic Brownian paths need a dyadic grid".into())
    })?;
    let level = info.level;
    let horizon = info.horizon;
    let n = 1usize << level;
    let mut values = vec![x0; n + 1];

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0);
    let z: f64 = StandardNormal.sample(&mut rng);
    values[n] = x0 + sigma * horizon.sqrt() * z;

    for l in 1..=level {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(l as u64);
        // Bridge midpoint over an interval of length T 2^{1-l} has variance T 2^{-l-1}.
        let sd = sigma * (horizon * (-(l as f64) - 1.0).exp2()).sqrt();
        let step = 1usize << (level - l);
        let mut k = step;
        while k < n {
            let z: f64 = StandardNormal.sample(&mut rng);
            values[k] = 0.5 * (values[k - step] + values[k + step]) + sd * z;
            k += 2 * step;
        }
    }
    GridPath::continuous(grid.clone(), values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dyadic(level: u32) -> Arc<TimeGrid> {
        Arc::new(TimeGrid::dyadic(1.0, level).unwrap())
    }

    #[test]
    fn step_has_single_declared_jump() {
        let g = dyadic(4);
        let p = generate(&Generator::Step { c: 2.0, t0: 0.5, x0: 0.0 }, &g).unwrap();
        assert_eq!(p.jumps().len(), 1);
        assert_eq!(p.jump_x(8), 2.0);
        assert_eq!(p.x(7), 0.0);
        assert_eq!(p.x(8), 2.0);
        assert!(p.is_finite_variation());
    }

    #[test]
    fn step_off_grid_rejected() {
        let g = dyadic(2);
        let err = generate(&Generator::Step { c: 1.0, t0: 0.3, x0: 0.0 }, &g).unwrap_err();
        assert!(matches!(err, Error::IncompatibleGrid(_)));
    }

    #[test]
    fn brownian_refinement_is_bitwise_consistent() {
        let gen = Generator::DyadicBrownian {
            seed: 7,
            sigma: 1.0,
            x0: 0.0,
        };
        let coarse = generate(&gen, &dyadic(3)).unwrap();
        let fine = generate(&gen, &dyadic(4)).unwrap();
        for k in 0..=8 {
            assert_eq!(coarse.x(k).to_bits(), fine.x(2 * k).to_bits());
        }
    }

    #[test]
    fn brownian_requires_dyadic_grid() {
        let g = Arc::new(TimeGrid::uniform(1.0, 10).unwrap());
        let gen = Generator::DyadicBrownian {
            seed: 1,
            sigma: 1.0,
            x0: 0.0,
        };
        assert!(matches!(generate(&gen, &g), Err(Error::IncompatibleGrid(_))));
    }

    #[test]
    fn same_seed_same_path() {
        let gen = Generator::CompoundJump {
            base: Box::new(Generator::DyadicBrownian {
                seed: 3,
                sigma: 0.5,
                x0: 1.0,
            }),
            jumps: JumpSpec::Random {
                seed: 9,
                count: Some(4),
                intensity: None,
                sizes: JumpSizes::Uniform { half_width: 0.3 },
            },
        };
        let g = dyadic(8);
        let a = generate(&gen, &g).unwrap();
        let b = generate(&gen, &g).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.jumps().len(), 4);
        for (&i, d) in a.jumps() {
            assert!((a.x(i) - a.left_x(i) - d[0]).abs() < 1e-14);
        }
    }

    #[test]
    fn affine_combination_is_pointwise() {
        let g = dyadic(3);
        let gen = Generator::Affine {
            terms: vec![
                AffineTerm {
                    weight: 2.0,
                    path: Generator::Step { c: 1.0, t0: 0.25, x0: 0.0 },
                },
                AffineTerm {
                    weight: -1.0,
                    path: Generator::Step { c: 3.0, t0: 0.75, x0: 0.0 },
                },
            ],
            offset: 0.5,
        };
        let p = generate(&gen, &g).unwrap();
        assert_eq!(p.x(0), 0.5);
        assert_eq!(p.x(2), 2.5);
        assert_eq!(p.x(6), -0.5);
        assert_eq!(p.jump_x(2), 2.0);
        assert_eq!(p.jump_x(6), -3.0);
    }

    #[test]
    fn zigzag_returns_to_base() {
        let g = dyadic(6);
        let p = generate(
            &Generator::Formula {
                formula: Formula::ZigZag {
                    base: 1.0,
                    amplitude: 0.5,
                    teeth: 2,
                },
            },
            &g,
        )
        .unwrap();
        assert_eq!(p.x(0), 1.0);
        assert_eq!(p.x(16), 1.5);
        assert_eq!(p.x(32), 1.0);
        assert_eq!(p.x(64), 1.0);
    }

    #[test]
    fn config_round_trip_and_unknown_keys() {
        let gen = Generator::Exp {
            base: Box::new(Generator::DyadicBrownian {
                seed: 1,
                sigma: 0.2,
                x0: 0.0,
            }),
            scale: 100.0,
        };
        let s = serde_json::to_string(&gen).unwrap();
        let back: Generator = serde_json::from_str(&s).unwrap();
        assert_eq!(back, gen);
        let bad = r#"{"kind":"step","c":1.0,"t0":0.5,"colour":3}"#;
        assert!(serde_json::from_str::<Generator>(bad).is_err());
    }

    #[test]
    fn reseed_counts_leaves() {
        let mut gen = Generator::Affine {
            terms: vec![
                AffineTerm {
                    weight: 1.0,
                    path: Generator::DyadicBrownian { seed: 0, sigma: 1.0, x0: 0.0 },
                },
                AffineTerm {
                    weight: 1.0,
                    path: Generator::DyadicBrownian { seed: 0, sigma: 1.0, x0: 0.0 },
                },
            ],
            offset: 0.0,
        };
        gen.reseed(10);
        let Generator::Affine { terms, .. } = &gen else { unreachable!() };
        assert_eq!(terms[0].path, Generator::DyadicBrownian { seed: 10, sigma: 1.0, x0: 0.0 });
        assert_eq!(terms[1].path, Generator::DyadicBrownian { seed: 11, sigma: 1.0, x0: 0.0 });
    }
}
