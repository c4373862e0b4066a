//! Repeated A/A splits of a user population.
//!
//! Each iteration partitions all users into two disjoint groups, A and A′,
//! and runs the two-sample z-test on every event column using that same
//! split. Collecting the p-values over iterations gives, per event, a sample
//! that should be uniform on [0, 1] whenever the normal approximation to the
//! difference in means holds.
//!
//! Iteration `i` draws its split from a generator seeded by
//! `(master_seed, i)` alone, so iterations may run in any order and on any
//! number of threads with bit-identical results.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::UserMetricMatrix;
use crate::seed::{substream, DOMAIN_SPLIT};
use crate::stats::ZTest;

pub const DEFAULT_ITERATIONS: usize = 5000;
pub const DEFAULT_ALPHA: f64 = 0.05;
pub const MIN_POPULATION: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResamplePlan {
    pub iterations: usize,
    pub master_seed: u64,
    pub alpha: f64,
    /// Fraction of users assigned to group A.
    pub split_fraction: f64,
    /// Whether users without any outcome for an event take part in that
    /// event's comparison with outcome 0.
    pub include_zero_users: bool,
}

impl Default for ResamplePlan {
    fn default() -> Self {
        ResamplePlan {
            iterations: DEFAULT_ITERATIONS,
            master_seed: 0,
            alpha: DEFAULT_ALPHA,
            split_fraction: 0.5,
            include_zero_users: true,
        }
    }
}

impl ResamplePlan {
    pub fn new(iterations: usize, master_seed: u64) -> Self {
        ResamplePlan {
            iterations,
            master_seed,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::Config("iterations must be at least 1".into()));
        }
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return Err(Error::Config(format!(
                "split_fraction must lie in (0, 1), got {}",
                self.split_fraction
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        Ok(())
    }

    /// |A| for a population of `user_count`.
    pub fn group_a_size(&self, user_count: usize) -> usize {
        (self.split_fraction * user_count as f64).round() as usize
    }
}

/// The A/A p-values collected for one event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PvalueSample {
    pub event_id: String,
    /// One p-value per iteration, in iteration order.
    pub pvalues: Vec<f64>,
    pub reject_count_at_alpha: usize,
}

/// Reusable buffers for drawing splits without reallocating.
struct SplitScratch {
    perm: Vec<u32>,
    in_a: Vec<bool>,
}

impl SplitScratch {
    fn new(user_count: usize) -> Self {
        SplitScratch {
            perm: Vec::with_capacity(user_count),
            in_a: vec![false; user_count],
        }
    }

    /// Marks the members of A for `iteration` in `self.in_a`.
    ///
    /// A uniformly random subset of size k is the first k entries of a
    /// partial Fisher-Yates shuffle; when A is the larger side, the smaller
    /// complement is drawn instead.
    fn draw(&mut self, user_count: usize, a_size: usize, iteration: usize, seed: u64) {
        let mut rng = substream(seed, DOMAIN_SPLIT, iteration as u64);
        let n = user_count as u32;
        self.perm.clear();
        self.perm.extend(0..n);
        let (chosen, chosen_are_a) = if a_size <= user_count - a_size {
            (a_size, true)
        } else {
            (user_count - a_size, false)
        };
        for i in 0..chosen as u32 {
            let j = rng.random_range(i..n);
            self.perm.swap(i as usize, j as usize);
        }
        self.in_a.fill(!chosen_are_a);
        for &u in &self.perm[..chosen] {
            self.in_a[u as usize] = chosen_are_a;
        }
    }
}

fn check_population(user_count: usize, plan: &ResamplePlan) -> Result<usize> {
    if user_count < MIN_POPULATION {
        return Err(Error::InsufficientPopulation { users: user_count });
    }
    let a = plan.group_a_size(user_count);
    if a == 0 || a == user_count {
        return Err(Error::Config(format!(
            "split_fraction {} leaves an empty group for {user_count} users",
            plan.split_fraction
        )));
    }
    Ok(a)
}

/// The split used by iteration `iteration_index`, as sorted user indices of
/// A and A′.
pub fn split_population(
    user_count: usize,
    iteration_index: usize,
    plan: &ResamplePlan,
) -> Result<(Vec<u32>, Vec<u32>)> {
    plan.validate()?;
    let a_size = check_population(user_count, plan)?;
    let mut scratch = SplitScratch::new(user_count);
    scratch.draw(user_count, a_size, iteration_index, plan.master_seed);
    let (mut a, mut b) = (Vec::with_capacity(a_size), Vec::new());
    for (u, &in_a) in scratch.in_a.iter().enumerate() {
        if in_a {
            a.push(u as u32);
        } else {
            b.push(u as u32);
        }
    }
    Ok((a, b))
}

/// An event column recentred for accumulation.
///
/// Outcomes are stored as deviations from a pivot (the column median), and
/// only users whose deviation is nonzero are kept. Group sums of deviations
/// then give means and variances without cancellation, and a column that is
/// mostly zeros stays sparse.
#[derive(Debug, Clone)]
struct PreparedColumn {
    entries: Vec<(u32, f64)>,
    /// True when every user participates (zero-outcome users included), in
    /// which case group sizes come from the split itself.
    all_users: bool,
}

fn median(values: &mut [f64]) -> f64 {
    let mid = values.len() / 2;
    let (_, m, _) = values.select_nth_unstable_by(mid, f64::total_cmp);
    *m
}

impl PreparedColumn {
    fn new(matrix: &UserMetricMatrix, event: usize, include_zero_users: bool) -> Self {
        let column = matrix.column(event);
        if include_zero_users {
            let dense = matrix.dense_column(event);
            let pivot = median(&mut dense.clone());
            let entries = if pivot == 0.0 {
                column.entries.clone()
            } else {
                dense
                    .iter()
                    .enumerate()
                    .filter_map(|(u, &v)| {
                        let d = v - pivot;
                        (d != 0.0).then_some((u as u32, d))
                    })
                    .collect()
            };
            PreparedColumn {
                entries,
                all_users: true,
            }
        } else {
            let mut values: Vec<f64> = column.entries.iter().map(|&(_, v)| v).collect();
            let pivot = if values.is_empty() { 0.0 } else { median(&mut values) };
            let entries = column.entries.iter().map(|&(u, v)| (u, v - pivot)).collect();
            PreparedColumn {
                entries,
                all_users: false,
            }
        }
    }
}

#[derive(Default, Clone, Copy)]
struct Accumulator {
    n: usize,
    sum: f64,
    sum_sq: f64,
}

impl Accumulator {
    /// (mean, population variance) of a group of `n` users whose nonzero
    /// deviations were accumulated here.
    fn moments(&self, n: usize) -> (f64, f64) {
        let nf = n as f64;
        let mean = self.sum / nf;
        let var = (self.sum_sq / nf - mean * mean).max(0.0);
        (mean, var)
    }
}

const LANES: usize = 4;

/// Sums of deviations and squared deviations for groups A and A′.
///
/// Membership enters as a 0/1 multiplier rather than a branch, and each
/// group keeps `LANES` independent partial sums so consecutive additions
/// don't wait on each other. The lane layout is fixed, so the result is
/// the same on every run.
fn accumulate(entries: &[(u32, f64)], in_a: &[bool]) -> (Accumulator, Accumulator) {
    let mut sum_a = [0.0f64; LANES];
    let mut sq_a = [0.0f64; LANES];
    let mut sum_b = [0.0f64; LANES];
    let mut sq_b = [0.0f64; LANES];
    let mut n_a = 0usize;
    let chunks = entries.chunks_exact(LANES);
    let tail = chunks.remainder();
    for chunk in chunks {
        for (l, &(u, d)) in chunk.iter().enumerate() {
            let member = in_a[u as usize];
            let m = member as u8 as f64;
            let d2 = d * d;
            // d·m is exactly d or 0, so d − d·m is exact as well.
            sum_a[l] += d * m;
            sum_b[l] += d - d * m;
            sq_a[l] += d2 * m;
            sq_b[l] += d2 - d2 * m;
            n_a += member as usize;
        }
    }
    for (l, &(u, d)) in tail.iter().enumerate() {
        let member = in_a[u as usize];
        let m = member as u8 as f64;
        let d2 = d * d;
        sum_a[l] += d * m;
        sum_b[l] += d - d * m;
        sq_a[l] += d2 * m;
        sq_b[l] += d2 - d2 * m;
        n_a += member as usize;
    }
    let fold = |x: [f64; LANES]| (x[0] + x[1]) + (x[2] + x[3]);
    (
        Accumulator {
            n: n_a,
            sum: fold(sum_a),
            sum_sq: fold(sq_a),
        },
        Accumulator {
            n: entries.len() - n_a,
            sum: fold(sum_b),
            sum_sq: fold(sq_b),
        },
    )
}

/// Read-only audit state shared by all iterations.
pub struct AaEngine<'m> {
    matrix: &'m UserMetricMatrix,
    plan: ResamplePlan,
    a_size: usize,
    columns: Vec<PreparedColumn>,
    test: ZTest,
}

impl<'m> AaEngine<'m> {
    pub fn new(matrix: &'m UserMetricMatrix, plan: ResamplePlan) -> Result<Self> {
        plan.validate()?;
        let a_size = check_population(matrix.n_users(), &plan)?;
        if matrix.n_events() == 0 {
            return Err(Error::InsufficientData("matrix has no event columns".into()));
        }
        let columns = (0..matrix.n_events())
            .into_par_iter()
            .map(|e| PreparedColumn::new(matrix, e, plan.include_zero_users))
            .collect();
        Ok(AaEngine {
            matrix,
            plan,
            a_size,
            columns,
            test: ZTest::new(plan.alpha)?,
        })
    }

    pub fn plan(&self) -> &ResamplePlan {
        &self.plan
    }

    /// Group-A membership for one iteration, indexed by user.
    pub fn split_mask(&self, iteration: usize) -> Vec<bool> {
        let mut scratch = SplitScratch::new(self.matrix.n_users());
        scratch.draw(self.matrix.n_users(), self.a_size, iteration, self.plan.master_seed);
        scratch.in_a
    }

    fn run_iteration(&self, iteration: usize, scratch: &mut SplitScratch) -> Result<Vec<f64>> {
        let n_users = self.matrix.n_users();
        scratch.draw(n_users, self.a_size, iteration, self.plan.master_seed);
        let in_a = &scratch.in_a;
        self.columns
            .iter()
            .enumerate()
            .map(|(e, col)| {
                let (a, b) = accumulate(&col.entries, in_a);
                let (n_a, n_b) = if col.all_users {
                    (self.a_size, n_users - self.a_size)
                } else {
                    (a.n, b.n)
                };
                if n_a < 2 || n_b < 2 {
                    return Err(Error::InsufficientData(format!(
                        "event {:?}: iteration {iteration} has groups of {n_a} and {n_b} users",
                        self.matrix.event_ids()[e]
                    )));
                }
                let (mean_a, var_a) = a.moments(n_a);
                let (mean_b, var_b) = b.moments(n_b);
                let se = (var_a / n_a as f64 + var_b / n_b as f64).sqrt();
                Ok(self.test.finish(mean_b - mean_a, se).p)
            })
            .collect()
    }

    /// Runs every iteration on the current rayon pool.
    pub fn run(&self) -> Result<Vec<PvalueSample>> {
        let n_users = self.matrix.n_users();
        let per_iteration: Vec<Vec<f64>> = (0..self.plan.iterations)
            .into_par_iter()
            .map_init(
                || SplitScratch::new(n_users),
                |scratch, i| self.run_iteration(i, scratch),
            )
            .collect::<Result<_>>()?;

        Ok(self
            .matrix
            .event_ids()
            .iter()
            .enumerate()
            .map(|(e, id)| {
                let pvalues: Vec<f64> = per_iteration.iter().map(|row| row[e]).collect();
                let reject_count_at_alpha =
                    pvalues.iter().filter(|&&p| p < self.plan.alpha).count();
                PvalueSample {
                    event_id: id.clone(),
                    pvalues,
                    reject_count_at_alpha,
                }
            })
            .collect())
    }
}

/// Runs `plan.iterations` A/A comparisons over `matrix`, returning one
/// p-value sample per event in the matrix's event order.
pub fn run_aa_audit(matrix: &UserMetricMatrix, plan: &ResamplePlan) -> Result<Vec<PvalueSample>> {
    AaEngine::new(matrix, *plan)?.run()
}
