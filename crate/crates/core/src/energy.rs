//! The multinomial energy
//! `ℰ_p[u] = Σ_{|β|=p} (p choose β) Π θ_i^{β_i²} ∫ Π u_i^{β_i} dx`,
//! its equivalence with `Σ ‖u_i‖_p^p`, a dissipation monitor along
//! trajectories, and space-time `L²` norms.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::solver::Trajectory;
use crate::systems::StateVector;

/// Largest `p` with exact integer multinomial weights.
pub const MAX_ORDER: u32 = 20;

/// All `β ∈ ℤ₊^m` with `|β| = p`, in lexicographic order.
pub fn enumerate_multiindices(m: usize, p: u32) -> Vec<Vec<u32>> {
    fn fill(prefix: &mut Vec<u32>, slots: usize, left: u32, out: &mut Vec<Vec<u32>>) {
        if slots == 1 {
            prefix.push(left);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for b in 0..=left {
            prefix.push(b);
            fill(prefix, slots - 1, left - b, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if m > 0 {
        fill(&mut Vec::with_capacity(m), m, p, &mut out);
    }
    out
}

/// `p! / Π β_i!`, exact.
pub fn multinomial(beta: &[u32]) -> u128 {
    // Built as a product of binomials so every intermediate stays integral.
    let mut total = 0u128;
    let mut acc = 1u128;
    for &b in beta {
        for k in 1..=u128::from(b) {
            total += 1;
            acc = acc * total / k;
        }
    }
    acc
}

fn check_order_and_theta(m: usize, p: u32, theta: &[f64]) -> Result<()> {
    if p > MAX_ORDER {
        return Err(Error::EnergyOverflow(format!(
            "order p = {p} exceeds the exact-weight cap {MAX_ORDER}"
        )));
    }
    if theta.len() != m {
        return Err(invalid(format!(
            "expected {m} theta weights, got {}",
            theta.len()
        )));
    }
    if theta.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
        return Err(invalid("theta weights must be positive and finite"));
    }
    Ok(())
}

/// `(p choose β) Π θ_i^{β_i²}` for every multi-index.
fn weights(m: usize, p: u32, theta: &[f64]) -> Result<Vec<(Vec<u32>, f64)>> {
    check_order_and_theta(m, p, theta)?;
    enumerate_multiindices(m, p)
        .into_iter()
        .map(|beta| {
            let w = beta
                .iter()
                .zip(theta)
                .fold(multinomial(&beta) as f64, |acc, (&b, &t)| {
                    acc * t.powi((b * b) as i32)
                });
            if !w.is_finite() || w == 0.0 {
                return Err(Error::EnergyOverflow(format!(
                    "weight of multi-index {beta:?} is {w}"
                )));
            }
            Ok((beta, w))
        })
        .collect()
}

fn monomial(u: &[f64], beta: &[u32]) -> f64 {
    u.iter().zip(beta).fold(
        1.0,
        |acc, (&v, &b)| if b == 0 { acc } else { acc * v.powi(b as i32) },
    )
}

pub fn lp_energy(state: &StateVector, p: u32, theta: &[f64]) -> Result<f64> {
    let m = state.species_count();
    let table = weights(m, p, theta)?;
    let grid = *state.grid();
    let mut u = vec![0.0; m];
    let mut density = vec![0.0; grid.len()];
    for (k, d) in density.iter_mut().enumerate() {
        state.at_node(k, &mut u);
        *d = table.iter().map(|(beta, w)| w * monomial(&u, beta)).sum();
    }
    let e = grid.quadrature(&density);
    if !e.is_finite() {
        return Err(Error::EnergyOverflow(format!("energy evaluated to {e}")));
    }
    Ok(e)
}

/// `ℰ_p[u] / Σ_i ‖u_i‖_p^p`.
pub fn energy_ratio(state: &StateVector, p: u32, theta: &[f64]) -> Result<f64> {
    let denom: f64 = state
        .species()
        .iter()
        .map(|f| f.lp_norm(f64::from(p)).map(|n| n.powi(p as i32)))
        .sum::<Result<f64>>()?;
    if denom == 0.0 {
        return Err(invalid("energy ratio is undefined for the zero state"));
    }
    Ok(lp_energy(state, p, theta)? / denom)
}

/// Empirical `(λ_low, λ_high)` with `λ_low Σ‖u_i‖_p^p ≤ ℰ_p[u] ≤ λ_high Σ‖u_i‖_p^p`.
///
/// Both sides integrate degree-`p` homogeneous densities, so the ratio for
/// any nonnegative field is an average of the pointwise ratio over the
/// simplex `{a ≥ 0, Σ a_i = 1}`. The extremes are searched there: vertices,
/// edge midpoints, the barycentre, `samples` uniform points, then a local
/// pattern search from the best candidates.
pub fn norm_equivalence_lambda(
    m: usize,
    p: u32,
    theta: &[f64],
    samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if m == 0 || p == 0 {
        return Err(invalid("norm equivalence needs m >= 1 and p >= 1"));
    }
    let table = weights(m, p, theta)?;
    let ratio = |a: &[f64]| {
        let num: f64 = table.iter().map(|(beta, w)| w * monomial(a, beta)).sum();
        let den: f64 = a.iter().map(|v| v.powi(p as i32)).sum();
        num / den
    };
    let mut candidates: Vec<Vec<f64>> = Vec::new();
    for i in 0..m {
        let mut v = vec![0.0; m];
        v[i] = 1.0;
        candidates.push(v);
        for j in i + 1..m {
            let mut e = vec![0.0; m];
            e[i] = 0.5;
            e[j] = 0.5;
            candidates.push(e);
        }
    }
    candidates.push(vec![1.0 / m as f64; m]);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..samples {
        // Uniform on the simplex via normalized exponentials.
        let e: Vec<f64> = (0..m).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
        let s: f64 = e.iter().sum();
        candidates.push(e.into_iter().map(|v| v / s).collect());
    }
    let scored: Vec<(f64, &Vec<f64>)> = candidates.iter().map(|a| (ratio(a), a)).collect();
    let lowest = scored
        .iter()
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .expect("candidates are never empty");
    let highest = scored
        .iter()
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .expect("candidates are never empty");
    let low = polish(lowest.1.clone(), |a| ratio(a));
    let high = -polish(highest.1.clone(), |a| -ratio(a));
    if !(low.is_finite() && high.is_finite() && low > 0.0) {
        return Err(Error::EnergyOverflow(format!(
            "norm-equivalence bounds are not finite and positive: ({low}, {high})"
        )));
    }
    Ok((low, high))
}

/// Minimizes `f` on the simplex by moving mass between coordinate pairs.
fn polish(mut a: Vec<f64>, f: impl Fn(&[f64]) -> f64) -> f64 {
    let m = a.len();
    let mut best = f(&a);
    let mut step = 0.25_f64;
    while step > 1e-9 {
        let mut improved = false;
        for i in 0..m {
            for j in 0..m {
                if i == j || a[j] == 0.0 {
                    continue;
                }
                let moved = step.min(a[j]);
                let mut trial = a.clone();
                trial[i] += moved;
                trial[j] -= moved;
                let v = f(&trial);
                if v < best {
                    best = v;
                    a = trial;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyMonitor {
    pub p: u32,
    pub theta: Vec<f64>,
    pub alpha: f64,
    pub times: Vec<f64>,
    pub energy: Vec<f64>,
    pub de_dt: Vec<f64>,
    /// `Σ_i ∫ |∂_x(u_i^{p/2})|²`.
    pub grad_term: Vec<f64>,
    /// `1 + Σ_i ∫ u_i^{p−1+r}`.
    pub rhs_term: Vec<f64>,
    /// `(dℰ/dt + α · grad_term) / rhs_term`.
    pub ratio: Vec<f64>,
    pub sup_ratio: f64,
}

/// Samples the dissipation inequality along a trajectory. `dℰ/dt` uses
/// centred differences over snapshots and one-sided ones at the ends.
pub fn energy_dissipation_monitor(
    traj: &Trajectory,
    p: u32,
    theta: &[f64],
    r: f64,
    alpha: f64,
) -> Result<EnergyMonitor> {
    let snaps = traj.snapshots();
    if snaps.len() < 3 {
        return Err(invalid(format!(
            "the energy monitor needs at least 3 snapshots, got {}",
            snaps.len()
        )));
    }
    if p == 0 || !r.is_finite() || !alpha.is_finite() {
        return Err(invalid("monitor needs p >= 1 and finite r, alpha"));
    }
    let times = traj.times();
    let energy = snaps
        .iter()
        .map(|s| lp_energy(s, p, theta))
        .collect::<Result<Vec<_>>>()?;
    let n = snaps.len();
    let de_dt: Vec<f64> = (0..n)
        .map(|j| {
            let (a, b) = match j {
                0 => (0, 1),
                _ if j == n - 1 => (n - 2, n - 1),
                _ => (j - 1, j + 1),
            };
            (energy[b] - energy[a]) / (times[b] - times[a])
        })
        .collect();
    let half = 0.5 * f64::from(p);
    let source = f64::from(p) - 1.0 + r;
    let mut grad_term = Vec::with_capacity(n);
    let mut rhs_term = Vec::with_capacity(n);
    for s in snaps {
        let mut g = 0.0;
        let mut rhs = 1.0;
        for f in s.species() {
            let powered = f.map(|v| v.max(0.0).powf(half));
            g += powered.derivative().map(|v| v * v).integrate()?;
            rhs += f.map(|v| v.max(0.0).powf(source)).integrate()?;
        }
        grad_term.push(g);
        rhs_term.push(rhs);
    }
    let ratio: Vec<f64> = (0..n)
        .map(|j| (de_dt[j] + alpha * grad_term[j]) / rhs_term[j])
        .collect();
    let sup_ratio = ratio.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(EnergyMonitor {
        p,
        theta: theta.to_vec(),
        alpha,
        times,
        energy,
        de_dt,
        grad_term,
        rhs_term,
        ratio,
        sup_ratio,
    })
}

/// `‖u_i‖_{L²(τ,T;L²(Ω))}` per species. The squared spatial norms are
/// integrated in time by the trapezoid rule over snapshots, with linear
/// interpolation when `τ` or `T` fall between snapshots.
pub fn spacetime_l2(traj: &Trajectory, tau: f64, t_end: f64) -> Result<Vec<f64>> {
    let times = traj.times();
    let (first, last) = (times[0], times[times.len() - 1]);
    if !(tau < t_end && tau >= first && t_end <= last) {
        return Err(invalid(format!(
            "window [{tau}, {t_end}] is not inside the trajectory span [{first}, {last}]"
        )));
    }
    let m = traj.snapshots()[0].species_count();
    let squared: Vec<Vec<f64>> = traj
        .snapshots()
        .iter()
        .map(|s| {
            s.species()
                .iter()
                .map(|f| f.map(|v| v * v).integrate())
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let mut out = vec![0.0; m];
    for j in 1..times.len() {
        let (a, b) = (times[j - 1], times[j]);
        let lo = a.max(tau);
        let hi = b.min(t_end);
        if hi <= lo {
            continue;
        }
        for (i, acc) in out.iter_mut().enumerate() {
            let at = |t: f64| {
                let s = (t - a) / (b - a);
                squared[j - 1][i] * (1.0 - s) + squared[j][i] * s
            };
            *acc += 0.5 * (hi - lo) * (at(lo) + at(hi));
        }
    }
    Ok(out.into_iter().map(f64::sqrt).collect())
}

/// `Σ_i` of [`spacetime_l2`] squared, square-rooted: the norm of the
/// whole state.
pub fn spacetime_l2_total(traj: &Trajectory, tau: f64, t_end: f64) -> Result<f64> {
    Ok(spacetime_l2(traj, tau, t_end)?
        .iter()
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Field, Grid1D};
    use crate::solver::{simulate, SolverConfig, Termination};
    use crate::systems::Preset;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn const_state(g: Grid1D, values: &[f64]) -> StateVector {
        StateVector::new(0.0, values.iter().map(|&c| Field::constant(g, c)).collect()).unwrap()
    }

    #[test]
    fn multiindex_examples() {
        assert_eq!(enumerate_multiindices(1, 5), vec![vec![5]]);
        assert_eq!(
            enumerate_multiindices(2, 2),
            vec![vec![0, 2], vec![1, 1], vec![2, 0]]
        );
        assert_eq!(enumerate_multiindices(3, 2).len(), 6);
        assert_eq!(enumerate_multiindices(3, 0), vec![vec![0, 0, 0]]);
    }

    #[test]
    fn multiindex_counts_follow_stars_and_bars() {
        fn binomial(n: u64, k: u64) -> u64 {
            (1..=k).fold(1, |acc, i| acc * (n + 1 - i) / i)
        }
        for m in 1..=5usize {
            for p in 0..=8u32 {
                let list = enumerate_multiindices(m, p);
                assert_eq!(
                    list.len() as u64,
                    binomial(u64::from(p) + m as u64 - 1, m as u64 - 1)
                );
                assert!(list.windows(2).all(|w| w[0] < w[1]));
                assert!(list.iter().all(|b| b.iter().sum::<u32>() == p));
            }
        }
    }

    #[test]
    fn multinomials_are_exact() {
        assert_eq!(multinomial(&[1, 1]), 2);
        assert_eq!(multinomial(&[2, 1, 1]), 12);
        assert_eq!(multinomial(&[20]), 1);
        assert_eq!(multinomial(&[10, 10]), 184_756);
        // 20! / (5!)^4
        assert_eq!(multinomial(&[5, 5, 5, 5]), 11_732_745_024);
        // Multinomial coefficients of order p over m species sum to m^p.
        let total: u128 = enumerate_multiindices(3, 20)
            .iter()
            .map(|b| multinomial(b))
            .sum();
        assert_eq!(total, 3u128.pow(20));
    }

    #[test]
    fn energy_examples() {
        let g = Grid1D::new(1.0, 11).unwrap();
        assert_eq!(lp_energy(&const_state(g, &[1.0]), 2, &[1.0]).unwrap(), 1.0);
        assert_eq!(
            lp_energy(&const_state(g, &[1.0, 1.0]), 2, &[2.0, 1.0]).unwrap(),
            21.0
        );
        assert!(matches!(
            lp_energy(&const_state(g, &[1.0]), 21, &[1.0]),
            Err(Error::EnergyOverflow(_))
        ));
        assert!(matches!(
            lp_energy(&const_state(g, &[1.0, 1.0]), 20, &[1e10, 1.0]),
            Err(Error::EnergyOverflow(_))
        ));
        assert!(lp_energy(&const_state(g, &[1.0]), 2, &[0.0]).is_err());
    }

    fn random_state() -> impl Strategy<Value = (usize, Vec<f64>)> {
        (1usize..=3).prop_flat_map(|m| (Just(m), prop::collection::vec(0.0..4.0_f64, m * 17)))
    }

    proptest! {
        #[test]
        fn unit_theta_collapses_to_power_of_sum((m, v) in random_state(), p in 2u32..=4) {
            let g = Grid1D::new(1.5, 17).unwrap();
            let species = v.chunks(17).map(|c| Field::new(g, c.to_vec()).unwrap()).collect();
            let s = StateVector::new(0.0, species).unwrap();
            let e = lp_energy(&s, p, &vec![1.0; m]).unwrap();
            let direct = s.total().map(|z| z.powi(p as i32)).integrate().unwrap();
            prop_assert!((e - direct).abs() <= 1e-12 * direct.max(1e-300));
        }

        #[test]
        fn lambda_brackets_random_states(v in prop::collection::vec(0.0..3.0_f64, 2 * 17), p in 2u32..=4) {
            let g = Grid1D::new(1.0, 17).unwrap();
            let theta = [1.3, 0.7];
            let (lo, hi) = norm_equivalence_lambda(2, p, &theta, 200, 1).unwrap();
            let species = v.chunks(17).map(|c| Field::new(g, c.to_vec()).unwrap()).collect();
            let s = StateVector::new(0.0, species).unwrap();
            prop_assume!(s.max_linf() > 1e-6);
            let r = energy_ratio(&s, p, &theta).unwrap();
            prop_assert!(lo > 0.0);
            prop_assert!(r >= lo * (1.0 - 1e-9) && r <= hi * (1.0 + 1e-9), "{lo} {r} {hi}");
        }
    }

    #[test]
    fn lambda_examples() {
        let (lo, hi) = norm_equivalence_lambda(1, 3, &[1.0], 50, 0).unwrap();
        assert_eq!((lo, hi), (1.0, 1.0));
        let (lo, hi) = norm_equivalence_lambda(2, 2, &[1.0, 1.0], 500, 0).unwrap();
        assert!(lo >= 1.0 - 1e-12 && hi <= 2.0 + 1e-12);
        assert!((lo - 1.0).abs() < 1e-9 && (hi - 2.0).abs() < 1e-6);
        // One species switched off: the ratio is θ_j^{p²}.
        let g = Grid1D::new(1.0, 11).unwrap();
        let s =
            StateVector::new(0.0, vec![Field::zeros(g), Field::from_fn(g, |x| 1.0 + x)]).unwrap();
        let r = energy_ratio(&s, 3, &[2.0, 1.1]).unwrap();
        assert!((r - 1.1_f64.powi(9)).abs() < 1e-12 * r);
    }

    #[test]
    fn constant_heat_monitor() {
        let g = Grid1D::new(1.0, 21).unwrap();
        let sys = Preset::Heat { species: 1 }.build();
        let traj = simulate(&sys, &const_state(g, &[2.0]), 1.0, &SolverConfig::default()).unwrap();
        let mon = energy_dissipation_monitor(&traj, 2, &[1.0], 3.0, 1.0).unwrap();
        assert!(mon.de_dt.iter().all(|&v| v == 0.0));
        assert!(mon.grad_term.iter().all(|&v| v == 0.0));
        assert!(mon.sup_ratio <= 0.0);
    }

    #[test]
    fn heat_energy_identity() {
        // dE/dt = −2d ∫ u_x² for E = ∫ u².
        let g = Grid1D::new(1.0, 201).unwrap();
        let sys = Preset::Heat { species: 1 }.build();
        let u0 = StateVector::new(0.0, vec![Field::from_fn(g, |x| 2.0 + (PI * x).cos())]).unwrap();
        let cfg = SolverConfig {
            dt_max: 1e-4,
            dt_initial: 1e-4,
            snapshot_stride: 20,
            scheme: crate::solver::Scheme::CrankNicolson,
            ..SolverConfig::default()
        };
        let traj = simulate(&sys, &u0, 0.1, &cfg).unwrap();
        assert_eq!(traj.termination(), &Termination::Completed);
        let mon = energy_dissipation_monitor(&traj, 2, &[1.0], 3.0, 2.0).unwrap();
        let interior = 1..mon.times.len() - 1;
        for j in interior {
            let expected = -2.0 * mon.grad_term[j];
            assert!(
                (mon.de_dt[j] - expected).abs() < 1e-3 * expected.abs(),
                "{} vs {expected}",
                mon.de_dt[j]
            );
            assert!(mon.ratio[j].abs() < 1e-3);
        }
    }

    #[test]
    fn spacetime_examples() {
        let g = Grid1D::new(1.0, 101).unwrap();
        let snaps = (0..=4)
            .map(|j| StateVector::new(j as f64 * 0.5, vec![Field::constant(g, 1.0)]).unwrap())
            .collect();
        let traj = Trajectory::from_snapshots(snaps, Termination::Completed).unwrap();
        assert!((spacetime_l2(&traj, 0.5, 1.5).unwrap()[0] - 1.0).abs() < 1e-15);
        assert!((spacetime_l2(&traj, 0.25, 1.25).unwrap()[0] - 1.0).abs() < 1e-15);
        assert!(spacetime_l2(&traj, 1.0, 1.0).is_err());
        assert!(spacetime_l2(&traj, 0.0, 3.0).is_err());

        let zero = Trajectory::from_snapshots(
            vec![
                StateVector::new(0.0, vec![Field::zeros(g)]).unwrap(),
                StateVector::new(1.0, vec![Field::zeros(g)]).unwrap(),
            ],
            Termination::Completed,
        )
        .unwrap();
        assert_eq!(spacetime_l2(&zero, 0.0, 1.0).unwrap(), vec![0.0]);
    }

    #[test]
    fn spacetime_heat_mode() {
        // u = e^{−π² t} cos(πx): ∫_0^T ∫ u² = (1 − e^{−2π²T}) / (4π²).
        let g = Grid1D::new(1.0, 201).unwrap();
        let times: Vec<f64> = (0..=400).map(|j| j as f64 * 0.0025).collect();
        let snaps = times
            .iter()
            .map(|&t| {
                StateVector::new(
                    t,
                    vec![Field::from_fn(g, |x| (-PI * PI * t).exp() * (PI * x).cos())],
                )
                .unwrap()
            })
            .collect();
        let traj = Trajectory::from_snapshots(snaps, Termination::Completed).unwrap();
        let exact = ((1.0 - (-2.0 * PI * PI).exp()) / (4.0 * PI * PI)).sqrt();
        let v = spacetime_l2(&traj, 0.0, 1.0).unwrap()[0];
        assert!((v - exact).abs() < 1e-3, "{v} vs {exact}");
    }
}
