//! Exact solver for the per-frame resource allocation problem under a fixed
//! binary offloading action, plus the myopic (queue-blind, energy-budgeted)
//! variant.
//!
//! Structure of the problem: local users are separable with a closed-form
//! optimal CPU frequency. Offloading users couple only through the time
//! budget `sum tau_i <= 1`. For each offloader the partially-maximized
//! value `g_i(tau)` (best transmit energy for a given time share) is
//! concave in `tau`, so the coupling is resolved by bisection on a single
//! dual multiplier `mu`, with each `tau_i(mu) = argmax g_i(tau) - mu tau`
//! found by golden-section search.
//!
//! `g_i` is linear in `tau` until the queue cap bites (the optimal energy
//! scales with `tau`, so rate and cost do too). When several users sit on
//! linear segments, `sum tau_i(mu)` jumps across 1 and no multiplier
//! attains the budget exactly; the final allocation then distributes the
//! leftover budget across the users whose shares collapsed between the two
//! bracket ends. Values at both ends differ by at most the bracket width,
//! so the completed allocation is optimal to solver precision.

use crate::domain::{FrameInput, OffloadAction, ResourceAllocation, SystemConfig};
use crate::error::Result;
use crate::queueing::objective_coefficients;
use crate::queueing::QueueState;
use crate::scalar::Real;

/// Solver tolerances.
#[derive(Debug, Clone, Copy)]
pub struct AllocatorOptions<R> {
    /// Bisection stop on the time-budget residual `|sum tau - 1|`.
    pub dual_tol: R,
    /// Golden-section interval stop for the inner 1-D search.
    pub inner_tol: R,
    /// Cap on bisection iterations.
    pub max_iters: usize,
}

impl<R: Real> Default for AllocatorOptions<R> {
    fn default() -> Self {
        AllocatorOptions {
            dual_tol: R::of(1e-6),
            inner_tol: R::of(1e-9),
            max_iters: 200,
        }
    }
}

/// Relative bracket width below which the bisection declares a jump.
const BRACKET_EPS: f64 = 1e-12;
/// Time shares below this are snapped to exactly zero.
const TAU_FLOOR: f64 = 1e-12;

/// Golden-section maximization of a concave `f` on `[lo, hi]`.
/// Deterministic; ties keep the left bracket. Returns `(x, f(x))`.
fn golden_max<R: Real, F: Fn(R) -> R>(f: F, lo: R, hi: R, tol: R) -> (R, R) {
    let ratio = R::of(0.618_033_988_749_894_9);
    let (mut a, mut b) = (lo, hi);
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while b - a > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f(d);
        }
    }
    let (mut x, mut fx) = if fc >= fd { (c, fc) } else { (d, fd) };
    // snap to the endpoints when the bracket collapsed onto them
    let f_lo = f(lo);
    if x - lo <= tol && f_lo >= fx {
        x = lo;
        fx = f_lo;
    }
    let f_hi = f(hi);
    if hi - x <= tol && f_hi >= fx {
        x = hi;
        fx = f_hi;
    }
    (x, fx)
}

/// Partially-maximized offloading value curve for one user: the best
/// objective contribution achievable with time share `tau`, energy already
/// optimized out. Concave in `tau` with `g(0) = 0`.
#[derive(Debug, Clone)]
enum OffloadCurve<R> {
    /// Drift-plus-penalty form: `a r - y e`.
    Weighted {
        a: R,
        y: R,
        /// queue cap, data units
        q: R,
        /// N0 / h
        n0h: R,
        /// rate per unit tau per log2(1 + snr), data units
        w_eff: R,
        /// optimal energy per unit tau, clamped to [0, P^max]
        e_unit: R,
        /// rate per unit tau at `e_unit`, data units
        rho: R,
        /// tau where the queue cap starts to bind
        tau_q: R,
    },
    /// Myopic form: `c r` under `e <= min(P^max tau, budget)`.
    Budgeted {
        c: R,
        q: R,
        n0h: R,
        w_eff: R,
        p_max: R,
        budget: R,
    },
}

impl<R: Real> OffloadCurve<R> {
    fn weighted(a: R, y: R, q: R, h: R, p_max: R, cfg: &SystemConfig<R>) -> Self {
        let n0h = cfg.noise_power / h;
        let w_eff = cfg.bandwidth * cfg.frame_duration / (cfg.rate_overhead * cfg.data_unit);
        let e_unit = if y > R::zero() {
            (a * w_eff / (R::LN_2() * y) - n0h).max(R::zero()).min(p_max)
        } else {
            p_max
        };
        let rho = w_eff * (R::one() + e_unit / n0h).log2();
        let tau_q = if rho > R::zero() { q / rho } else { R::infinity() };
        OffloadCurve::Weighted {
            a,
            y,
            q,
            n0h,
            w_eff,
            e_unit,
            rho,
            tau_q,
        }
    }

    fn budgeted(c: R, q: R, h: R, p_max: R, budget: R, cfg: &SystemConfig<R>) -> Self {
        OffloadCurve::Budgeted {
            c,
            q,
            n0h: cfg.noise_power / h,
            w_eff: cfg.bandwidth * cfg.frame_duration / (cfg.rate_overhead * cfg.data_unit),
            p_max,
            budget,
        }
    }

    /// Whether any positive time share can produce positive value.
    fn is_active(&self) -> bool {
        match *self {
            OffloadCurve::Weighted { q, rho, e_unit, a, y, .. } => {
                q > R::zero() && rho > R::zero() && a * rho - y * e_unit > R::zero()
            }
            OffloadCurve::Budgeted { c, q, budget, .. } => {
                c > R::zero() && q > R::zero() && budget > R::zero()
            }
        }
    }

    /// Upper bound on the slope of `g` (its derivative at 0+).
    fn max_slope(&self) -> R {
        match *self {
            OffloadCurve::Weighted { a, y, rho, e_unit, .. } => a * rho - y * e_unit,
            OffloadCurve::Budgeted { c, n0h, w_eff, p_max, .. } => {
                c * w_eff * (R::one() + p_max / n0h).log2()
            }
        }
    }

    /// Minimal energy that pushes exactly `q` data units through time
    /// share `tau`.
    fn energy_at_cap(q: R, w_eff: R, n0h: R, tau: R) -> R {
        ((q / (w_eff * tau)).exp2() - R::one()) * n0h * tau
    }

    /// `g(tau)`.
    fn value(&self, tau: R) -> R {
        if tau <= R::zero() {
            return R::zero();
        }
        match *self {
            OffloadCurve::Weighted {
                a,
                y,
                q,
                n0h,
                w_eff,
                e_unit,
                rho,
                tau_q,
            } => {
                if tau < tau_q {
                    (a * rho - y * e_unit) * tau
                } else if y > R::zero() {
                    a * q - y * Self::energy_at_cap(q, w_eff, n0h, tau)
                } else {
                    a * q
                }
            }
            OffloadCurve::Budgeted {
                c,
                q,
                n0h,
                w_eff,
                p_max,
                budget,
            } => {
                let e = (p_max * tau).min(budget);
                if e <= R::zero() {
                    return R::zero();
                }
                let rate = w_eff * tau * (R::one() + e / (n0h * tau)).log2();
                c * rate.min(q)
            }
        }
    }

    /// Energy (joules) and rate (data units) actually allocated at `tau`,
    /// with the minimal-energy tie-break at the queue cap.
    fn allocation(&self, tau: R) -> (R, R) {
        if tau <= R::zero() {
            return (R::zero(), R::zero());
        }
        match *self {
            OffloadCurve::Weighted {
                q,
                n0h,
                w_eff,
                e_unit,
                rho,
                tau_q,
                ..
            } => {
                if tau < tau_q {
                    (e_unit * tau, rho * tau)
                } else {
                    (Self::energy_at_cap(q, w_eff, n0h, tau), q)
                }
            }
            OffloadCurve::Budgeted {
                q,
                n0h,
                w_eff,
                p_max,
                budget,
                ..
            } => {
                let e = (p_max * tau).min(budget);
                if e <= R::zero() {
                    return (R::zero(), R::zero());
                }
                let rate = w_eff * tau * (R::one() + e / (n0h * tau)).log2();
                if rate > q {
                    (Self::energy_at_cap(q, w_eff, n0h, tau), q)
                } else {
                    (e, rate)
                }
            }
        }
    }
}

/// Best response `tau_i(mu)` for every active curve.
fn best_responses<R: Real>(
    curves: &[OffloadCurve<R>],
    active: &[usize],
    mu: R,
    inner_tol: R,
) -> Vec<R> {
    let mut taus = vec![R::zero(); curves.len()];
    for &i in active {
        let c = &curves[i];
        // g is concave with g(0) = 0 and slope at most max_slope, so a
        // price at or above that slope makes tau = 0 exactly optimal
        if mu >= c.max_slope() {
            continue;
        }
        let (tau, _) = golden_max(|t| c.value(t) - mu * t, R::zero(), R::one(), inner_tol);
        taus[i] = tau;
    }
    taus
}

/// Maximizes `sum_i g_i(tau_i)` subject to `sum tau_i <= 1`.
fn dual_time_share<R: Real>(curves: &[OffloadCurve<R>], opts: &AllocatorOptions<R>) -> Vec<R> {
    let active: Vec<usize> = (0..curves.len())
        .filter(|&i| curves[i].is_active())
        .collect();
    let mut taus = vec![R::zero(); curves.len()];
    if active.is_empty() {
        return taus;
    }

    // unconstrained best responses
    let tau0 = best_responses(curves, &active, R::zero(), opts.inner_tol);
    let sum0: R = tau0.iter().copied().sum();
    if sum0 <= R::one() {
        return tau0;
    }

    // bracket: mu = 0 overshoots the budget, mu above every slope zeroes it
    let slope_cap = active
        .iter()
        .map(|&i| curves[i].max_slope())
        .fold(R::zero(), R::max);
    let mut lo = R::zero();
    let mut hi = slope_cap * R::of(1.0 + 1e-6) + R::of(1e-9);
    let mut tau_lo = tau0;
    let mut tau_hi = vec![R::zero(); curves.len()];
    let width_eps = R::of(BRACKET_EPS) * hi.max(R::one());

    for _ in 0..opts.max_iters {
        let mid = (lo + hi) * R::of(0.5);
        let tau_mid = best_responses(curves, &active, mid, opts.inner_tol);
        let sum: R = tau_mid.iter().copied().sum();
        if (sum - R::one()).abs() <= opts.dual_tol {
            tau_lo = tau_mid;
            tau_hi = tau_lo.clone();
            break;
        }
        if sum > R::one() {
            lo = mid;
            tau_lo = tau_mid;
        } else {
            hi = mid;
            tau_hi = tau_mid;
        }
        if hi - lo <= width_eps {
            break;
        }
    }

    // complete across the jump: hand the leftover budget to the users whose
    // shares collapsed between the bracket ends
    let sum_hi: R = tau_hi.iter().copied().sum();
    let slack = (R::one() - sum_hi).max(R::zero());
    let deltas: Vec<R> = (0..curves.len())
        .map(|i| (tau_lo[i] - tau_hi[i]).max(R::zero()))
        .collect();
    let delta_sum: R = deltas.iter().copied().sum();
    for &i in &active {
        taus[i] = if delta_sum > R::zero() {
            tau_hi[i] + slack * deltas[i] / delta_sum
        } else {
            tau_hi[i]
        };
    }

    // the accepted-tolerance exit may sit slightly above the budget
    let total: R = taus.iter().copied().sum();
    if total > R::one() {
        for t in &mut taus {
            *t /= total;
        }
    }
    taus
}

/// Closed-form optimal local CPU frequency for weight `a`, virtual energy
/// queue `y`, and queue `q` (data units): stationarity of
/// `a f / phi - y kappa f^3` clamped by the frequency and queue caps.
fn local_frequency<R: Real>(a: R, y: R, q: R, cpu_max: R, cfg: &SystemConfig<R>) -> R {
    let phi_du = cfg.cycles_per_unit();
    let f_cap = cpu_max.min(phi_du * q / cfg.frame_duration);
    if f_cap <= R::zero() {
        return R::zero();
    }
    if y > R::zero() {
        let three = R::of(3.0);
        (a / (three * phi_du * cfg.energy_efficiency * y))
            .sqrt()
            .min(f_cap)
    } else {
        f_cap
    }
}

fn assemble<R: Real>(
    action: &OffloadAction,
    cfg: &SystemConfig<R>,
    locals: &[(usize, R, R)],
    offloads: &[(usize, R, R, R)],
) -> ResourceAllocation<R> {
    let mut alloc = ResourceAllocation::zero(cfg.n_wd);
    debug_assert_eq!(action.len(), cfg.n_wd);
    for &(i, f, _value) in locals {
        alloc.cpu[i] = f;
    }
    for &(i, tau, e, r_du) in offloads {
        alloc.tau[i] = tau;
        alloc.offload_energy[i] = e;
        alloc.offload_rate[i] = r_du * cfg.data_unit;
    }
    alloc
}

/// Solves the convex resource-allocation problem for a fixed binary action,
/// returning the optimal allocation and its objective value
/// `G = sum a_i r_i - sum Y_i e_i` (rates in data units).
pub fn solve_allocation<R: Real>(
    action: &OffloadAction,
    input: &FrameInput<R>,
    cfg: &SystemConfig<R>,
    opts: &AllocatorOptions<R>,
) -> Result<(ResourceAllocation<R>, R)> {
    input.validate(cfg.n_wd)?;
    let state = QueueState {
        data: input.data_queue.clone(),
        energy: input.energy_queue.clone(),
    };
    let (a, y) = objective_coefficients(&state, cfg);

    let mut value = R::zero();
    let mut locals = Vec::new();
    let mut offload_idx = Vec::new();
    let mut curves = Vec::new();
    for i in 0..cfg.n_wd {
        let q = input.data_queue[i];
        if action.bits[i] {
            offload_idx.push(i);
            curves.push(OffloadCurve::weighted(
                a[i],
                y[i],
                q,
                input.channel[i],
                cfg.per_wd[i].tx_power_max,
                cfg,
            ));
        } else {
            let f = local_frequency(a[i], y[i], q, cfg.per_wd[i].cpu_max, cfg);
            let t = cfg.frame_duration;
            let bits_du = f * t / cfg.cycles_per_unit();
            let energy = cfg.energy_efficiency * f * f * f * t;
            let v = a[i] * bits_du - y[i] * energy;
            value += v;
            locals.push((i, f, v));
        }
    }

    let taus = dual_time_share(&curves, opts);
    let mut offloads = Vec::with_capacity(offload_idx.len());
    for (k, &i) in offload_idx.iter().enumerate() {
        let tau = if taus[k] < R::of(TAU_FLOOR) {
            R::zero()
        } else {
            taus[k]
        };
        let (e, r_du) = curves[k].allocation(tau);
        value = value + a[i] * r_du - y[i] * e;
        offloads.push((i, tau, e, r_du));
    }

    Ok((assemble(action, cfg, &locals, &offloads), value))
}

/// Myopic per-frame variant: maximizes the weighted sum rate
/// `sum c_i r_i` under the same per-frame constraints plus a per-WD energy
/// budget `e_i <= budget_i` carried over from past frames. Queue backlogs
/// only enter through the data causality caps.
pub fn solve_myopic_allocation<R: Real>(
    action: &OffloadAction,
    input: &FrameInput<R>,
    budgets: &[R],
    cfg: &SystemConfig<R>,
    opts: &AllocatorOptions<R>,
) -> Result<(ResourceAllocation<R>, R)> {
    input.validate(cfg.n_wd)?;
    let t = cfg.frame_duration;
    let phi_du = cfg.cycles_per_unit();

    let mut value = R::zero();
    let mut locals = Vec::new();
    let mut offload_idx = Vec::new();
    let mut curves = Vec::new();
    for i in 0..cfg.n_wd {
        let q = input.data_queue[i];
        let c = cfg.per_wd[i].weight;
        let b = budgets[i].max(R::zero());
        if action.bits[i] {
            offload_idx.push(i);
            curves.push(OffloadCurve::budgeted(
                c,
                q,
                input.channel[i],
                cfg.per_wd[i].tx_power_max,
                b,
                cfg,
            ));
        } else {
            // rate is monotone in f: run at the tightest of the frequency,
            // queue, and energy-budget caps
            let f_energy = (b / (cfg.energy_efficiency * t)).cbrt();
            let f = cfg
                .per_wd[i]
                .cpu_max
                .min(phi_du * q / t)
                .min(f_energy)
                .max(R::zero());
            let v = c * f * t / phi_du;
            value += v;
            locals.push((i, f, v));
        }
    }

    let taus = dual_time_share(&curves, opts);
    let mut offloads = Vec::with_capacity(offload_idx.len());
    for (k, &i) in offload_idx.iter().enumerate() {
        let tau = if taus[k] < R::of(TAU_FLOOR) {
            R::zero()
        } else {
            taus[k]
        };
        let (e, r_du) = curves[k].allocation(tau);
        value += cfg.per_wd[i].weight * r_du;
        offloads.push((i, tau, e, r_du));
    }

    Ok((assemble(action, cfg, &locals, &offloads), value))
}
