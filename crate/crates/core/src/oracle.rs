//! Brute-force boundary values by direct search over witnesses `W`.
//!
//! The search is restricted (finite atom grid, bounded atom count), so its
//! minimum is an upper bound on the true lower boundary and its maximum a
//! lower bound on the true upper boundary. Marginals are used exactly, not
//! snapped to a lattice.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::envelope::Direction;
use crate::nnls::convex_weights;
use crate::prob::{Channel, DivergenceKernel, Distribution, ProbError, SimplexFunctional};
use crate::sweep::{Atom, SweepError, WitnessChannel};

/// Slack on the constraint `x ≥ x_t` (lower) or `x ≤ x_t` (upper).
const CONSTRAINT_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleConfig {
    /// At most `m + 1` atoms are ever needed.
    pub atom_budget: usize,
    /// Atoms are drawn from the simplex lattice of this resolution.
    pub grid_resolution: u32,
    /// Random atom sets tried per target for `m ≥ 3`.
    pub restarts: usize,
    pub seed: u64,
    /// Largest NNLS residual accepted when solving for weights.
    pub tolerance: f64,
}

impl OracleConfig {
    pub fn for_alphabet(m: usize) -> Self {
        OracleConfig {
            atom_budget: m + 1,
            grid_resolution: if m == 2 { 512 } else { 64 },
            restarts: 20_000,
            seed: 0,
            tolerance: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub x_target: f64,
    pub direction: Direction,
    pub best_y: f64,
    /// `x` of the best witness.
    pub x: f64,
    pub witness: WitnessChannel,
    /// False when no witness met the constraint; the trivial witness is
    /// reported instead.
    pub feasible: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Best {
    y: f64,
    key: u64,
    t: f64,
    x: f64,
}

fn improves(candidate: (f64, u64), incumbent: Option<&Best>, direction: Direction) -> bool {
    match incumbent {
        None => true,
        Some(b) => {
            let better = match direction {
                Direction::Lower => candidate.0 < b.y,
                Direction::Upper => candidate.0 > b.y,
            };
            better || (candidate.0 == b.y && candidate.1 < b.key)
        }
    }
}

fn merge(a: Option<Best>, b: Option<Best>, direction: Direction) -> Option<Best> {
    match (a, b) {
        (None, x) | (x, None) => x,
        (Some(a), Some(b)) => Some(if improves((b.y, b.key), Some(&a), direction) { b } else { a }),
    }
}

fn feasible_x(x: f64, target: f64, direction: Direction) -> bool {
    match direction {
        Direction::Lower => x >= target - CONSTRAINT_SLACK,
        Direction::Upper => x <= target + CONSTRAINT_SLACK,
    }
}

/// Binary-input search over the grid `P(X = 1) = i / R`.
struct BinaryGrid {
    resolution: u32,
    q: f64,
    xs: Vec<f64>,
    ys: Vec<f64>,
    fq: (f64, f64),
}

impl BinaryGrid {
    fn new(
        f: &SimplexFunctional,
        g: &SimplexFunctional,
        channel: &Channel,
        q: f64,
        resolution: u32,
    ) -> Result<Self, SweepError> {
        let r = resolution as f64;
        let mut xs = Vec::with_capacity(resolution as usize + 1);
        let mut ys = Vec::with_capacity(resolution as usize + 1);
        for i in 0..=resolution {
            let a = i as f64 / r;
            let p = [1.0 - a, a];
            xs.push(f.eval(&p)?);
            ys.push(g.eval(&channel.apply(&p))?);
        }
        let pq = [1.0 - q, q];
        let fq = (f.eval(&pq)?, g.eval(&channel.apply(&pq))?);
        Ok(BinaryGrid {
            resolution,
            q,
            xs,
            ys,
            fq,
        })
    }

    fn abscissa(&self, i: u32) -> f64 {
        i as f64 / self.resolution as f64
    }

    /// Weight on `a` in the pair `(a, c)` with `a < q < c`.
    fn pair_weight(&self, a: u32, c: u32) -> f64 {
        let (pa, pc) = (self.abscissa(a), self.abscissa(c));
        (pc - self.q) / (pc - pa)
    }

    fn pair(&self, a: u32, c: u32) -> (f64, f64) {
        let w = self.pair_weight(a, c);
        let (a, c) = (a as usize, c as usize);
        (
            w * self.xs[a] + (1.0 - w) * self.xs[c],
            w * self.ys[a] + (1.0 - w) * self.ys[c],
        )
    }

    /// Indices strictly below and strictly above `q`.
    fn split(&self) -> (Vec<u32>, Vec<u32>) {
        let below = (0..=self.resolution).filter(|&i| self.abscissa(i) < self.q).collect();
        let above = (0..=self.resolution).filter(|&i| self.abscissa(i) > self.q).collect();
        (below, above)
    }

    /// Encodes a candidate. `b = R + 1` marks a plain pair.
    fn key(&self, a: u32, b: u32, c: u32) -> u64 {
        let s = self.resolution as u64 + 2;
        (a as u64 * s + b as u64) * s + c as u64
    }

    fn decode(&self, key: u64) -> (u32, u32, u32) {
        let s = self.resolution as u64 + 2;
        ((key / (s * s)) as u32, ((key / s) % s) as u32, (key % s) as u32)
    }

    fn trivial_key(&self) -> u64 {
        u64::MAX
    }

    fn point(&self, a: u32) -> Distribution {
        Distribution::binary(self.abscissa(a)).expect("grid point")
    }

    /// Rebuilds the witness of a candidate.
    fn witness(&self, best: &Best, q: &Distribution) -> Result<WitnessChannel, SweepError> {
        if best.key == self.trivial_key() {
            return Ok(WitnessChannel::trivial(q));
        }
        let (a, b, c) = self.decode(best.key);
        let w = self.pair_weight(a, c);
        let mut atoms = vec![(a, (1.0 - best.t) * w), (c, (1.0 - best.t) * (1.0 - w))];
        if b <= self.resolution {
            let pb = self.abscissa(b);
            if pb < self.q {
                let v = self.pair_weight(b, c);
                atoms.push((b, best.t * v));
                atoms.push((c, best.t * (1.0 - v)));
            } else if pb > self.q {
                let v = self.pair_weight(a, b);
                atoms.push((a, best.t * v));
                atoms.push((b, best.t * (1.0 - v)));
            } else {
                atoms.push((b, best.t));
            }
        }
        let mut merged: Vec<(u32, f64)> = Vec::new();
        for (i, w) in atoms {
            match merged.iter_mut().find(|(j, _)| *j == i) {
                Some(e) => e.1 += w,
                None => merged.push((i, w)),
            }
        }
        let atoms = merged
            .into_iter()
            .map(|(i, weight)| Atom {
                weight,
                conditional: self.point(i),
            })
            .collect();
        WitnessChannel::new(atoms, q.clone())
    }
}

/// Best `y` per target among all pairs, and (budget ≥ 3) all three-atom
/// refinements. Reduction is keyed so the result is independent of
/// scheduling.
fn search_binary(
    grid: &BinaryGrid,
    targets: &[f64],
    direction: Direction,
    budget: usize,
) -> Vec<Option<Best>> {
    let mut best: Vec<Option<Best>> = targets
        .iter()
        .map(|&t| {
            feasible_x(grid.fq.0, t, direction).then_some(Best {
                y: grid.fq.1,
                key: grid.trivial_key(),
                t: 0.0,
                x: grid.fq.0,
            })
        })
        .collect();
    if budget < 2 {
        return best;
    }
    let (below, above) = grid.split();
    let none = grid.resolution + 1;
    let partial: Vec<Vec<Option<Best>>> = below
        .par_iter()
        .map(|&a| {
            let mut local: Vec<Option<Best>> = vec![None; targets.len()];
            let mut offer = |k: usize, y: f64, key: u64, t: f64, x: f64| {
                if improves((y, key), local[k].as_ref(), direction) {
                    local[k] = Some(Best { y, key, t, x });
                }
            };
            for &c in &above {
                let p0 = grid.pair(a, c);
                let key0 = grid.key(a, none, c);
                for (k, &t) in targets.iter().enumerate() {
                    if feasible_x(p0.0, t, direction) {
                        offer(k, p0.1, key0, 0.0, p0.0);
                    }
                }
                if budget < 3 {
                    continue;
                }
                for b in 0..=grid.resolution {
                    if b == a || b == c {
                        continue;
                    }
                    let pb = grid.abscissa(b);
                    let p1 = if pb < grid.q {
                        grid.pair(b, c)
                    } else if pb > grid.q {
                        grid.pair(a, b)
                    } else {
                        grid.fq
                    };
                    let key = grid.key(a, b, c);
                    let dx = p1.0 - p0.0;
                    if dx == 0.0 {
                        continue;
                    }
                    for (k, &t) in targets.iter().enumerate() {
                        let s = (t - p0.0) / dx;
                        if s > 0.0 && s < 1.0 {
                            let y = p0.1 + s * (p1.1 - p0.1);
                            offer(k, y, key, s, t);
                        }
                    }
                }
            }
            local
        })
        .collect();
    for local in partial {
        for (k, cand) in local.into_iter().enumerate() {
            best[k] = merge(best[k], cand, direction);
        }
    }
    best
}

fn resolve_pair(
    f: DivergenceKernel,
    g: DivergenceKernel,
    channel: &Channel,
    q: &Distribution,
) -> Result<(SimplexFunctional, SimplexFunctional), SweepError> {
    Ok((
        SimplexFunctional::resolve(f, q)?,
        SimplexFunctional::resolve(g, &channel.push_forward(q)?)?,
    ))
}

fn finish(
    targets: &[f64],
    direction: Direction,
    best: Vec<Option<Best>>,
    q: &Distribution,
    fallback: (f64, f64),
    witness_of: impl Fn(&Best) -> Result<WitnessChannel, SweepError>,
) -> Result<Vec<OracleResult>, SweepError> {
    targets
        .iter()
        .zip(best)
        .map(|(&x_target, b)| {
            Ok(match b {
                Some(b) => OracleResult {
                    x_target,
                    direction,
                    best_y: b.y,
                    x: b.x,
                    witness: witness_of(&b)?,
                    feasible: true,
                },
                None => OracleResult {
                    x_target,
                    direction,
                    best_y: fallback.1,
                    x: fallback.0,
                    witness: WitnessChannel::trivial(q),
                    feasible: false,
                },
            })
        })
        .collect()
}

/// Exhaustive two- and three-atom search for a binary input through a
/// BSC with crossover `delta`, with `q = P(X = 1)`.
#[allow(clippy::too_many_arguments)]
pub fn oracle_exhaustive_binary(
    f: DivergenceKernel,
    g: DivergenceKernel,
    delta: f64,
    q: f64,
    x_grid: &[f64],
    direction: Direction,
    resolution: u32,
    budget: usize,
) -> Result<Vec<OracleResult>, SweepError> {
    let channel = Channel::bsc(delta)?;
    oracle_exhaustive_binary_channel(f, g, &channel, q, x_grid, direction, resolution, budget)
}

/// [`oracle_exhaustive_binary`] for any channel with two inputs.
#[allow(clippy::too_many_arguments)]
pub fn oracle_exhaustive_binary_channel(
    f: DivergenceKernel,
    g: DivergenceKernel,
    channel: &Channel,
    q: f64,
    x_grid: &[f64],
    direction: Direction,
    resolution: u32,
    budget: usize,
) -> Result<Vec<OracleResult>, SweepError> {
    if channel.inputs() != 2 {
        return Err(ProbError::DimensionMismatch(2, channel.inputs()).into());
    }
    if resolution == 0 {
        return Err(crate::envelope::EnvelopeError::Resolution(0).into());
    }
    let qd = Distribution::binary(q)?;
    let (ff, gg) = resolve_pair(f, g, channel, &qd)?;
    let grid = BinaryGrid::new(&ff, &gg, channel, q, resolution)?;
    let best = search_binary(&grid, x_grid, direction, budget.min(3));
    finish(x_grid, direction, best, &qd, grid.fq, |b| grid.witness(b, &qd))
}

/// Best boundary value at `x_target` by direct search. Binary inputs use the
/// exhaustive grid search; larger alphabets sample atom sets at random
/// (seeded) and solve for weights by nonnegative least squares.
pub fn oracle_boundary(
    f: DivergenceKernel,
    g: DivergenceKernel,
    channel: &Channel,
    q: &Distribution,
    x_target: f64,
    direction: Direction,
    cfg: &OracleConfig,
) -> Result<OracleResult, SweepError> {
    if cfg.atom_budget == 0 {
        return Err(SweepError::InvalidWitness("atom budget must be positive".into()));
    }
    let m = q.len();
    if channel.inputs() != m {
        return Err(ProbError::DimensionMismatch(channel.inputs(), m).into());
    }
    let budget = cfg.atom_budget.min(m + 1);
    if m == 2 {
        let r = oracle_exhaustive_binary_channel(
            f,
            g,
            channel,
            q.probs()[1],
            &[x_target],
            direction,
            cfg.grid_resolution,
            budget,
        )?;
        return Ok(r.into_iter().next().expect("one target"));
    }
    let (ff, gg) = resolve_pair(f, g, channel, q)?;
    let eval = |w: &WitnessChannel| w.evaluate(&ff, &gg, channel);

    let trivial = WitnessChannel::trivial(q);
    let (tx, ty) = eval(&trivial)?;
    let mut fixed = vec![trivial];
    if budget >= m {
        fixed.push(WitnessChannel::deterministic(q)?);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let atom_sets: Vec<Vec<Distribution>> = (0..cfg.restarts)
        .map(|_| {
            (0..budget)
                .map(|_| random_lattice_point(&mut rng, m, cfg.grid_resolution))
                .collect()
        })
        .collect();
    let sampled: Vec<Option<WitnessChannel>> = atom_sets
        .par_iter()
        .map(|atoms| {
            let refs: Vec<&[f64]> = atoms.iter().map(|a| a.probs()).collect();
            let weights = convex_weights(&refs, q.probs(), cfg.tolerance)?;
            let atoms = weights
                .into_iter()
                .zip(atoms.iter().cloned())
                .map(|(weight, conditional)| Atom {
                    weight,
                    conditional,
                })
                .collect();
            WitnessChannel::new(atoms, q.clone()).ok()
        })
        .collect();

    let candidates: Vec<WitnessChannel> = fixed.into_iter().chain(sampled.into_iter().flatten()).collect();
    let scored: Vec<(f64, f64)> = candidates
        .par_iter()
        .map(eval)
        .collect::<Result<_, _>>()?;
    let mut best: Option<Best> = None;
    for (i, &(x, y)) in scored.iter().enumerate() {
        if feasible_x(x, x_target, direction) && improves((y, i as u64), best.as_ref(), direction) {
            best = Some(Best { y, key: i as u64, t: 0.0, x });
        }
    }
    Ok(match best {
        Some(b) => OracleResult {
            x_target,
            direction,
            best_y: b.y,
            x: b.x,
            witness: candidates[b.key as usize].clone(),
            feasible: true,
        },
        None => OracleResult {
            x_target,
            direction,
            best_y: ty,
            x: tx,
            witness: WitnessChannel::trivial(q),
            feasible: false,
        },
    })
}

/// Uniform point of the simplex rounded to the lattice of resolution `n`.
fn random_lattice_point(rng: &mut ChaCha8Rng, m: usize, n: u32) -> Distribution {
    let mut cuts: Vec<u32> = (0..m - 1).map(|_| rng.gen_range(0..=n)).collect();
    cuts.sort_unstable();
    let mut prev = 0;
    let mut probs = Vec::with_capacity(m);
    for c in cuts {
        probs.push((c - prev) as f64 / n as f64);
        prev = c;
    }
    probs.push((n - prev) as f64 / n as f64);
    Distribution::new(probs).expect("lattice point")
}

/// CSV with columns `x_target, direction, best_y, feasible, witness_json,
/// budget, resolution, seed`.
pub fn write_oracle_csv<W: Write>(
    results: &[OracleResult],
    budget: usize,
    resolution: u32,
    seed: u64,
    out: W,
) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "x_target",
        "direction",
        "best_y",
        "feasible",
        "witness_json",
        "budget",
        "resolution",
        "seed",
    ])?;
    for r in results {
        w.write_record([
            r.x_target.to_string(),
            r.direction.to_string(),
            r.best_y.to_string(),
            r.feasible.to_string(),
            r.witness.to_json(),
            budget.to_string(),
            resolution.to_string(),
            seed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
