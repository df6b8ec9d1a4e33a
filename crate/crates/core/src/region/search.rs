//! Pattern search over products of probability simplices.
//!
//! A candidate is a flat vector made of row-stochastic blocks. A move shifts
//! mass `step` from one entry of a row to another; the first improving move is
//! kept, and the step halves after a sweep without improvement.

use rand::Rng;
use rand_distr::Exp1;

/// Shape of one row-stochastic block.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Block {
    pub name: &'static str,
    pub rows: usize,
    pub cols: usize,
}

/// Region terms of a candidate: `R_SM <= a`, `R_SK + R_SM <= b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Score {
    pub a_raw: f64,
    pub b_raw: f64,
    /// Unclamped sum bound, used to leave plateaus of the clamped one.
    pub b_unclamped: f64,
    pub feasible: bool,
}

impl Score {
    pub fn a(&self) -> f64 {
        self.a_raw.max(0.0).min(self.b())
    }

    pub fn b(&self) -> f64 {
        self.b_raw.max(0.0)
    }

    /// The two non-trivial corners of the coupling's region.
    pub fn corners(&self) -> [(f64, f64); 2] {
        let (a, b) = (self.a(), self.b());
        [(b, 0.0), (b - a, a)]
    }

    /// Best weighted sum over the region, then a smooth tie-breaker.
    fn objective(&self, (lambda, mu): (f64, f64)) -> (f64, f64) {
        let primary = lambda * self.b() + ((mu - lambda) * self.a()).max(0.0);
        let secondary = lambda * self.b_unclamped + mu * self.a_raw;
        (primary, secondary)
    }
}

pub(crate) trait Landscape: Sync {
    fn blocks(&self) -> &[Block];
    fn score(&self, x: &[f64]) -> Score;
    /// Starting points tried before random ones.
    fn structured_starts(&self) -> Vec<Vec<f64>>;
    /// Edit `x` into a feasible point (always possible by dropping the source part).
    fn make_feasible(&self, x: &mut [f64]);
}

pub(crate) struct Climb {
    pub point: Vec<f64>,
    pub score: Score,
    /// `(a, b)` of every accepted candidate.
    pub visited: Vec<(f64, f64)>,
    pub evaluations: usize,
}

pub(crate) struct ClimbSettings {
    pub budget: usize,
    pub step: f64,
    pub min_step: f64,
}

pub(crate) fn random_point<R: Rng>(blocks: &[Block], rng: &mut R) -> Vec<f64> {
    let mut x = Vec::new();
    for b in blocks {
        for _ in 0..b.rows {
            let row: Vec<f64> = (0..b.cols).map(|_| rng.sample::<f64, _>(Exp1)).collect();
            let s: f64 = row.iter().sum();
            x.extend(row.iter().map(|v| v / s));
        }
    }
    x
}

fn better(new: (f64, f64), old: (f64, f64)) -> bool {
    const TIE: f64 = 1e-13;
    if new.0 > old.0 + TIE {
        return true;
    }
    new.0 >= old.0 - TIE && new.1 > old.1 + TIE
}

pub(crate) fn climb<L: Landscape + ?Sized>(
    land: &L,
    start: Vec<f64>,
    direction: (f64, f64),
    settings: &ClimbSettings,
) -> Climb {
    let mut x = start;
    let mut cur = land.score(&x);
    if !cur.feasible {
        land.make_feasible(&mut x);
        cur = land.score(&x);
    }
    let mut evaluations = 1;
    let mut visited = vec![(cur.a(), cur.b())];
    let mut cur_obj = cur.objective(direction);

    let mut rows = Vec::new();
    let mut off = 0;
    for b in land.blocks() {
        for _ in 0..b.rows {
            if b.cols > 1 {
                rows.push((off, b.cols));
            }
            off += b.cols;
        }
    }

    let mut step = settings.step;
    'outer: while step >= settings.min_step {
        let mut improved = false;
        for &(start, len) in &rows {
            for i in start..start + len {
                for j in start..start + len {
                    if i == j || x[i] <= 0.0 {
                        continue;
                    }
                    if evaluations >= settings.budget {
                        break 'outer;
                    }
                    let (xi, xj) = (x[i], x[j]);
                    let amount = step.min(xi);
                    x[i] = if amount == xi { 0.0 } else { xi - amount };
                    x[j] = xj + amount;
                    let s = land.score(&x);
                    evaluations += 1;
                    let obj = s.objective(direction);
                    if s.feasible && better(obj, cur_obj) {
                        cur = s;
                        cur_obj = obj;
                        visited.push((s.a(), s.b()));
                        improved = true;
                    } else {
                        x[i] = xi;
                        x[j] = xj;
                    }
                }
            }
        }
        if !improved {
            step /= 2.0;
        }
    }
    Climb {
        point: x,
        score: cur,
        visited,
        evaluations,
    }
}
