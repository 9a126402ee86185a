//! Search over the binary offloading action: exhaustive enumeration (the
//! oracle) and coordinate descent (the CD benchmark).
//!
//! Both are generic over the per-action evaluator so they work with either
//! the drift-plus-penalty allocation or the myopic variant.

use rayon::prelude::*;

use crate::domain::{OffloadAction, ResourceAllocation};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Largest network exhaustive enumeration accepts (2^20 evaluations).
pub const EXHAUSTIVE_MAX_WD: usize = 20;

/// Action for enumeration index `k`, with WD 1 as the most significant bit.
fn action_from_index(k: usize, n: usize) -> OffloadAction {
    OffloadAction {
        bits: (0..n).map(|i| (k >> (n - 1 - i)) & 1 == 1).collect(),
    }
}

type Evaluated<R> = (usize, ResourceAllocation<R>, R);

fn better<R: Real>(a: &Evaluated<R>, b: &Evaluated<R>) -> bool {
    // ties broken toward the smallest enumeration index
    a.2 > b.2 || (a.2 == b.2 && a.0 < b.0)
}

/// Maximizes `eval` over all `2^n` binary actions. Deterministic: ties are
/// broken toward the smallest action read as a binary number with WD 1 as
/// the most significant bit.
pub fn exhaustive_best<R, F>(
    n: usize,
    eval: F,
    parallel: bool,
) -> Result<(OffloadAction, ResourceAllocation<R>, R)>
where
    R: Real,
    F: Fn(&OffloadAction) -> Result<(ResourceAllocation<R>, R)> + Sync,
{
    if n == 0 || n > EXHAUSTIVE_MAX_WD {
        return Err(Error::InvalidInput(format!(
            "exhaustive search supports 1..={EXHAUSTIVE_MAX_WD} WDs, got {n}"
        )));
    }
    let total = 1usize << n;
    let eval_k = |k: usize| -> Result<Evaluated<R>> {
        let action = action_from_index(k, n);
        let (alloc, g) = eval(&action)?;
        Ok((k, alloc, g))
    };
    let best = if parallel {
        (0..total)
            .into_par_iter()
            .map(eval_k)
            .try_reduce_with(|a, b| Ok(if better(&b, &a) { b } else { a }))
            .expect("at least one action")?
    } else {
        let mut best: Option<Evaluated<R>> = None;
        for k in 0..total {
            let cand = eval_k(k)?;
            if best.as_ref().is_none_or(|b| better(&cand, b)) {
                best = Some(cand);
            }
        }
        best.expect("at least one action")
    };
    Ok((action_from_index(best.0, n), best.1, best.2))
}

/// Improvements smaller than this fraction of |G| do not count as strict.
const CD_REL_IMPROVEMENT: f64 = 1e-9;

/// Coordinate descent over single-bit flips, starting from all-local.
/// Each sweep evaluates all `n` flips and applies the single best strictly
/// improving one (lowest index among equals); stops when no flip improves
/// or after `max_sweeps` (default `n`) sweeps.
pub fn coordinate_descent_best<R, F>(
    n: usize,
    eval: F,
    parallel: bool,
    max_sweeps: Option<usize>,
) -> Result<(OffloadAction, ResourceAllocation<R>, R)>
where
    R: Real,
    F: Fn(&OffloadAction) -> Result<(ResourceAllocation<R>, R)> + Sync,
{
    let sweeps = max_sweeps.unwrap_or(n).max(1);
    let mut current = OffloadAction::all_local(n);
    let (mut alloc, mut g) = eval(&current)?;

    for _ in 0..sweeps {
        let flip_of = |j: usize| {
            let mut x = current.clone();
            x.bits[j] = !x.bits[j];
            x
        };
        let results: Vec<(ResourceAllocation<R>, R)> = if parallel {
            (0..n)
                .into_par_iter()
                .map(|j| eval(&flip_of(j)))
                .collect::<Result<_>>()?
        } else {
            (0..n).map(|j| eval(&flip_of(j))).collect::<Result<_>>()?
        };
        let threshold = g + R::of(CD_REL_IMPROVEMENT) * g.abs();
        let mut best: Option<usize> = None;
        for (j, (_, gj)) in results.iter().enumerate() {
            if *gj > threshold && best.is_none_or(|b| *gj > results[b].1) {
                best = Some(j);
            }
        }
        match best {
            Some(j) => {
                current.bits[j] = !current.bits[j];
                let (aj, gj) = results.into_iter().nth(j).expect("index in range");
                alloc = aj;
                g = gj;
            }
            None => break,
        }
    }
    Ok((current, alloc, g))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::allocator::{solve_allocation, AllocatorOptions};
    use crate::domain::{FrameInput, SystemConfig};

    fn unit_cfg(n: usize) -> SystemConfig<f64> {
        let mut cfg = SystemConfig::reference(n);
        cfg.data_unit = 1.0;
        cfg
    }

    fn eval_for<'a>(
        xi: &'a FrameInput<f64>,
        cfg: &'a SystemConfig<f64>,
    ) -> impl Fn(&OffloadAction) -> Result<(ResourceAllocation<f64>, f64)> + Sync + 'a {
        move |x| solve_allocation(x, xi, cfg, &AllocatorOptions::default())
    }

    #[test]
    fn single_wd_prefers_local_when_channel_is_tiny() {
        let cfg = unit_cfg(1);
        let xi = FrameInput {
            channel: vec![1e-16],
            data_queue: vec![1e9],
            energy_queue: vec![0.0],
        };
        let (x, _, g) = exhaustive_best(1, eval_for(&xi, &cfg), false).unwrap();
        assert_eq!(x.bits, vec![false]);
        // cross-check against the two-candidate comparison
        let g_local = eval_for(&xi, &cfg)(&OffloadAction::all_local(1)).unwrap().1;
        assert_eq!(g, g_local);
    }

    #[test]
    fn single_wd_prefers_offload_when_cpu_is_tiny() {
        let mut cfg = unit_cfg(1);
        cfg.per_wd[0].cpu_max = 1e5;
        let xi = FrameInput {
            channel: vec![1e-9],
            data_queue: vec![1e8],
            energy_queue: vec![0.0],
        };
        let (x, _, _) = exhaustive_best(1, eval_for(&xi, &cfg), false).unwrap();
        assert_eq!(x.bits, vec![true]);
    }

    #[test]
    fn exhaustive_dominates_every_explicit_action() {
        let cfg = unit_cfg(3);
        let xi = FrameInput {
            channel: vec![2e-11, 8e-11, 4e-12],
            data_queue: vec![3e6, 1e6, 6e6],
            energy_queue: vec![10.0, 0.0, 250.0],
        };
        let eval = eval_for(&xi, &cfg);
        let (_, _, g_star) = exhaustive_best(3, &eval, false).unwrap();
        for k in 0..8usize {
            let x = action_from_index(k, 3);
            let (_, g) = eval(&x).unwrap();
            assert!(g_star >= g);
        }
    }

    #[test]
    fn exhaustive_guard_rejects_large_networks() {
        let cfg = unit_cfg(1);
        let xi = FrameInput {
            channel: vec![1e-11],
            data_queue: vec![1e6],
            energy_queue: vec![0.0],
        };
        assert!(exhaustive_best(21, eval_for(&xi, &cfg), false).is_err());
    }

    #[test]
    fn exhaustive_is_permutation_equivariant() {
        let cfg = unit_cfg(3);
        let xi = FrameInput {
            channel: vec![2e-11, 8e-11, 4e-12],
            data_queue: vec![3e6, 1e6, 6e6],
            energy_queue: vec![10.0, 0.0, 250.0],
        };
        let (x, _, g) = exhaustive_best(3, eval_for(&xi, &cfg), false).unwrap();

        // relabel WDs with the cycle 0 -> 1 -> 2 -> 0
        let perm = [2usize, 0, 1]; // position i takes old WD perm[i]
        let mut cfg_p = cfg.clone();
        let xi_p = FrameInput {
            channel: perm.iter().map(|&j| xi.channel[j]).collect(),
            data_queue: perm.iter().map(|&j| xi.data_queue[j]).collect(),
            energy_queue: perm.iter().map(|&j| xi.energy_queue[j]).collect(),
        };
        cfg_p.per_wd = perm.iter().map(|&j| cfg.per_wd[j].clone()).collect();
        let (x_p, _, g_p) = exhaustive_best(3, eval_for(&xi_p, &cfg_p), false).unwrap();
        assert!((g - g_p).abs() / g.abs().max(1.0) < 1e-9);
        for i in 0..3 {
            assert_eq!(x_p.bits[i], x.bits[perm[i]]);
        }
    }

    #[test]
    fn parallel_and_sequential_agree() {
        let cfg = unit_cfg(4);
        let xi = FrameInput {
            channel: vec![2e-11, 8e-11, 4e-12, 5e-11],
            data_queue: vec![3e6, 1e6, 6e6, 2e5],
            energy_queue: vec![10.0, 0.0, 250.0, 3.0],
        };
        let eval = eval_for(&xi, &cfg);
        let (xs, _, gs) = exhaustive_best(4, &eval, false).unwrap();
        let (xp, _, gp) = exhaustive_best(4, &eval, true).unwrap();
        assert_eq!(xs, xp);
        assert_eq!(gs, gp);
    }

    #[test]
    fn cd_never_worsens_the_start_and_fixed_points_stay_put() {
        let cfg = unit_cfg(3);
        // tiny channels: offloading is useless, all-local is a flip-local
        // optimum already
        let xi = FrameInput {
            channel: vec![1e-16; 3],
            data_queue: vec![1e6; 3],
            energy_queue: vec![0.0; 3],
        };
        let eval = eval_for(&xi, &cfg);
        let g0 = eval(&OffloadAction::all_local(3)).unwrap().1;
        let (x, _, g) = coordinate_descent_best(3, &eval, false, None).unwrap();
        assert_eq!(x.bits, vec![false; 3]);
        assert_eq!(g, g0);
    }

    #[test]
    fn cd_tracks_exhaustive_on_small_random_instances() {
        use rand::Rng;
        let mut rng = crate::env::substream(4021, crate::env::Stream::Instance);
        let cfg = unit_cfg(3);
        let mut hits = 0;
        let trials = 100;
        for _ in 0..trials {
            let xi = FrameInput {
                channel: (0..3).map(|_| 10f64.powf(rng.random_range(-12.0..-10.0))).collect(),
                data_queue: (0..3).map(|_| 10f64.powf(rng.random_range(4.5..7.0))).collect(),
                energy_queue: (0..3)
                    .map(|_| if rng.random_bool(0.3) { 0.0 } else { 10f64.powf(rng.random_range(0.0..3.0)) })
                    .collect(),
            };
            let eval = eval_for(&xi, &cfg);
            let (_, _, g_cd) = coordinate_descent_best(3, &eval, false, None).unwrap();
            let (_, _, g_ex) = exhaustive_best(3, &eval, false).unwrap();
            assert!(g_cd <= g_ex + 1e-9 * g_ex.abs());
            if g_cd >= 0.99 * g_ex {
                hits += 1;
            }
        }
        assert!(hits >= 95, "CD within 1% on only {hits}/{trials} instances");
    }
}
