use rand::Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::walk::WalkSpec;
use crate::error::{Error, Result};
use crate::model::Lattice;
use crate::sampler::{sweep_rng, Estimate};

const PATH_BLOCK: usize = 2048;
const WALK_STREAM: u64 = 0x7761_6c6b;

/// Monte Carlo occupation times at the requested targets and the exit time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WalkSimulation {
    pub start: usize,
    pub targets: Vec<usize>,
    pub occupation: Vec<Estimate>,
    pub exit_time: Estimate,
    pub n_paths: usize,
}

#[derive(Clone, Default)]
struct Sums {
    occ: Vec<(f64, f64)>,
    exit: (f64, f64),
}

impl Sums {
    fn merge(mut self, other: &Sums) -> Sums {
        for (a, b) in self.occ.iter_mut().zip(&other.occ) {
            a.0 += b.0;
            a.1 += b.1;
        }
        self.exit.0 += other.exit.0;
        self.exit.1 += other.exit.1;
        self
    }
}

fn iid_estimate((s, s2): (f64, f64), n: usize) -> Estimate {
    let nf = n as f64;
    let mean = s / nf;
    if n < 2 {
        return Estimate::exact(mean, n);
    }
    let var = ((s2 - s * mean) / (nf - 1.0)).max(0.0);
    Estimate {
        mean,
        std_error: (var / nf).sqrt(),
        tau_int: 0.5,
        ess: nf,
        count: n,
        underpowered: false,
    }
}

/// Simulates `n_paths` independent paths from `start` with exponential
/// holding times. Path `p` draws from its own stream, so the result does not
/// depend on the number of worker threads.
pub fn simulate_walk(
    lattice: &Lattice,
    walk: &WalkSpec,
    start: usize,
    targets: &[usize],
    n_paths: usize,
    seed: u64,
) -> Result<WalkSimulation> {
    walk.check_lattice(lattice)?;
    if n_paths == 0 {
        return Err(Error::param("n_paths", "must be at least 1"));
    }
    if let Some(&bad) = targets.iter().chain([&start]).find(|&&i| i >= lattice.len()) {
        return Err(Error::param("site", format!("{bad} outside lattice of {} sites", lattice.len())));
    }
    if walk.is_absorbing(start) {
        return Ok(WalkSimulation {
            start,
            targets: targets.to_vec(),
            occupation: vec![Estimate::exact(0.0, n_paths); targets.len()],
            exit_time: Estimate::exact(0.0, n_paths),
            n_paths,
        });
    }
    let n = lattice.len();
    // cumulative rate tables; destination `usize::MAX` absorbs
    let mut tables: Vec<(f64, Vec<(f64, usize)>)> = Vec::with_capacity(n);
    for i in 0..n {
        let mut acc = 0.0;
        let mut row = Vec::new();
        for (dest, c) in walk.jumps(lattice, i) {
            acc += c;
            row.push((acc, dest.unwrap_or(usize::MAX)));
        }
        if acc <= 0.0 && !walk.is_absorbing(i) {
            return Err(Error::Solver(format!("site {i} has no outgoing jumps")));
        }
        tables.push((acc, row));
    }
    let mut slot = vec![usize::MAX; n];
    for (k, &t) in targets.iter().enumerate() {
        slot[t] = k;
    }

    let blocks = n_paths.div_ceil(PATH_BLOCK);
    let partial: Vec<Sums> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut sums = Sums {
                occ: vec![(0.0, 0.0); targets.len()],
                exit: (0.0, 0.0),
            };
            let mut occ = vec![0.0; targets.len()];
            for p in b * PATH_BLOCK..((b + 1) * PATH_BLOCK).min(n_paths) {
                let mut rng = sweep_rng(seed, WALK_STREAM, p as u64);
                occ.iter_mut().for_each(|o| *o = 0.0);
                let mut t = 0.0;
                let mut x = start;
                while x != usize::MAX {
                    let (total, row) = &tables[x];
                    let hold = rng.sample::<f64, _>(Exp1) / total;
                    t += hold;
                    if slot[x] != usize::MAX {
                        occ[slot[x]] += hold;
                    }
                    let u = rng.random::<f64>() * total;
                    x = row.iter().find(|(c, _)| u < *c).unwrap_or(row.last().unwrap()).1;
                }
                for (s, o) in sums.occ.iter_mut().zip(&occ) {
                    s.0 += o;
                    s.1 += o * o;
                }
                sums.exit.0 += t;
                sums.exit.1 += t * t;
            }
            sums
        })
        .collect();
    let total = partial[1..].iter().fold(partial[0].clone(), Sums::merge);
    Ok(WalkSimulation {
        start,
        targets: targets.to_vec(),
        occupation: total.occ.iter().map(|&s| iid_estimate(s, n_paths)).collect(),
        exit_time: iid_estimate(total.exit, n_paths),
        n_paths,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Offset;
    use crate::oracle::PinnedSet;

    fn chain_walk() -> WalkSpec {
        WalkSpec::new([(Offset(1, 0), 1.0), (Offset(-1, 0), 1.0)]).unwrap()
    }

    #[test]
    fn absorbing_start_is_zero() {
        let lat = Lattice::chain(3, 1, 0.0).unwrap();
        let walk = chain_walk().with_absorbing(PinnedSet::from_indices(3, &[1]));
        let s = simulate_walk(&lat, &walk, 1, &[0, 1, 2], 10, 1).unwrap();
        assert!(s.occupation.iter().all(|e| e.mean == 0.0));
        assert_eq!(s.exit_time.mean, 0.0);
    }

    #[test]
    fn two_site_occupation_matches_green() {
        let lat = Lattice::chain(2, 1, 0.0).unwrap();
        let s = simulate_walk(&lat, &chain_walk(), 0, &[0, 1], 100_000, 11).unwrap();
        assert!(s.occupation[0].agrees_with(2.0 / 3.0, 3.0), "{:?}", s.occupation[0]);
        assert!(s.occupation[1].agrees_with(1.0 / 3.0, 3.0), "{:?}", s.occupation[1]);
        assert!(s.exit_time.agrees_with(1.0, 3.0));
    }

    #[test]
    fn deterministic_in_seed() {
        let lat = Lattice::chain(4, 1, 0.0).unwrap();
        let a = simulate_walk(&lat, &chain_walk(), 1, &[2], 5000, 3).unwrap();
        let b = simulate_walk(&lat, &chain_walk(), 1, &[2], 5000, 3).unwrap();
        assert_eq!(a, b);
    }
}
