//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! failure.

use std::f64::consts::PI;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rd_core::energy::{
    energy_dissipation_monitor, energy_ratio, lp_energy, norm_equivalence_lambda,
};
use rd_core::grid::{Field, Grid1D};
use rd_core::inequalities::{
    calibrate_constant, generate_ensemble, validate_constant, xi_admissible, EnsembleSpec,
    InequalityId,
};
use rd_core::morrey::{
    auxiliary_fields, delta_from_gamma, estimate_holder, max_localized_mass, morrey_norm,
    track_morrey, HolderConfig, MorreyParams, SpaceTime,
};
use rd_core::solver::{simulate, InitialData, Scheme, SolverConfig, Termination, Trajectory};
use rd_core::systems::{
    augment_conservative, rescale_exponential, Preset, PresetConfig, ReactionSystem,
    RescaleDirection, StateVector, SystemConfig,
};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn system(preset: &str, d: &[f64]) -> ReactionSystem {
    SystemConfig::Preset(PresetConfig {
        d: Some(d.to_vec()),
        ..match SystemConfig::preset(preset) {
            SystemConfig::Preset(p) => p,
            SystemConfig::Table(_) => unreachable!(),
        }
    })
    .build()
    .expect("preset builds")
}

fn run(
    sys: &ReactionSystem,
    n: usize,
    seed: u64,
    t_end: f64,
    cfg: &SolverConfig,
) -> Result<Trajectory, String> {
    let grid = Grid1D::new(1.0, n).map_err(err)?;
    let u0 = InitialData::random_cosine(3.0)
        .state(grid, sys.species(), seed)
        .map_err(err)?;
    simulate(sys, &u0, t_end, cfg).map_err(err)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn mass_balance() -> Outcome {
    let cfg = SolverConfig {
        snapshot_stride: 1,
        ..SolverConfig::default()
    };
    let exchange = run(&system("cubic_exchange", &[1.0, 0.1]), 401, 0, 10.0, &cfg)?;
    let m0 = exchange.snapshots()[0].total_mass().map_err(err)?;
    let mut drift = 0.0_f64;
    for s in exchange.snapshots() {
        drift = drift.max(rel(s.total_mass().map_err(err)?, m0));
    }
    let auto = run(
        &system("cubic_autocatalysis", &[1.0, 0.1]),
        401,
        0,
        10.0,
        &cfg,
    )?;
    let masses = auto
        .snapshots()
        .iter()
        .map(|s| s.total_mass())
        .collect::<rd_core::Result<Vec<_>>>()
        .map_err(err)?;
    let rise = masses
        .windows(2)
        .map(|w| (w[1] - w[0]) / masses[0])
        .fold(f64::NEG_INFINITY, f64::max);
    check(
        exchange.termination().is_completed()
            && auto.termination().is_completed()
            && drift <= 1e-10
            && rise <= 1e-10,
        format!(
            "exchange drift {drift:.2e}, autocatalysis largest step rise {rise:.2e} over {} steps",
            masses.len() - 1
        ),
    )
}

struct BoundedRun {
    preset: &'static str,
    seed: u64,
    sup: [f64; 2],
    completed: bool,
    ratio: f64,
    delta: f64,
}

fn bounded_runs() -> Result<Vec<BoundedRun>, String> {
    let cases: Vec<(&'static str, u64)> = ["cubic_exchange", "cubic_autocatalysis"]
        .into_iter()
        .flat_map(|p| (0..10).map(move |s| (p, s)))
        .collect();
    cases
        .into_par_iter()
        .map(|(preset, seed)| {
            let sys = system(preset, &[1.0, 0.1]);
            let cfg = SolverConfig::default();
            let coarse = run(&sys, 401, seed, 10.0, &cfg)?;
            let fine = run(&sys, 801, seed, 10.0, &cfg)?;
            let completed =
                coarse.termination().is_completed() && fine.termination().is_completed();
            let (ratio, delta) = if completed {
                let aux = auxiliary_fields(&coarse, sys.diffusion(), 0.0).map_err(err)?;
                let est = estimate_holder(&aux.y, &HolderConfig::default()).map_err(err)?;
                let delta = delta_from_gamma(est.gamma).map_err(err)?;
                let series = track_morrey(&coarse, &MorreyParams::new(delta)).map_err(err)?;
                (series.nonconcentration_ratio, delta)
            } else {
                (f64::NAN, f64::NAN)
            };
            Ok(BoundedRun {
                preset,
                seed,
                sup: [coarse.sup_linf(), fine.sup_linf()],
                completed,
                ratio,
                delta,
            })
        })
        .collect()
}

fn boundedness(runs: &[BoundedRun]) -> Outcome {
    let blown = runs.iter().filter(|r| !r.completed).count();
    let worst = runs
        .iter()
        .max_by(|a, b| rel(a.sup[0], a.sup[1]).total_cmp(&rel(b.sup[0], b.sup[1])))
        .expect("runs");
    let dev = rel(worst.sup[0], worst.sup[1]);
    check(
        blown == 0 && dev <= 0.05,
        format!(
            "{} runs, {blown} not completed; worst n=401/801 sup mismatch {:.2}% ({} seed {})",
            runs.len(),
            100.0 * dev,
            worst.preset,
            worst.seed
        ),
    )
}

fn nonconcentration(runs: &[BoundedRun]) -> Outcome {
    let worst = runs
        .iter()
        .max_by(|a, b| a.ratio.total_cmp(&b.ratio))
        .expect("runs");
    let all = runs.iter().all(|r| r.ratio <= 1.25);
    let (dmin, dmax) = runs.iter().fold((f64::INFINITY, 0.0_f64), |(a, b), r| {
        (a.min(r.delta), b.max(r.delta))
    });
    check(
        all,
        format!(
            "largest ratio {:.4} ({} seed {}), delta in [{dmin:.3}, {dmax:.3}]",
            worst.ratio, worst.preset, worst.seed
        ),
    )
}

fn localized_scaling() -> Outcome {
    let sys = system("cubic_exchange", &[1.0, 0.1]);
    let cfg = SolverConfig {
        output_times: vec![1.0, 5.0, 10.0],
        ..SolverConfig::default()
    };
    let traj = run(&sys, 401, 0, 10.0, &cfg)?;
    let aux = auxiliary_fields(&traj, sys.diffusion(), 0.0).map_err(err)?;
    let est = estimate_holder(&aux.y, &HolderConfig::default()).map_err(err)?;
    let delta = delta_from_gamma(est.gamma).map_err(err)?;
    let mut ks = Vec::new();
    for t in [1.0, 5.0, 10.0] {
        let z = traj
            .at_time(t)
            .ok_or(format!("no snapshot at t = {t}"))?
            .total();
        let mut k = 0.0_f64;
        for j in 2..=6 {
            let eps = 1.0 / f64::from(1u32 << j);
            k = k.max(max_localized_mass(&z, eps).map_err(err)? / eps.powf(delta));
        }
        ks.push(k);
    }
    let lo = ks.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ks.iter().copied().fold(0.0, f64::max);
    let spread = hi / lo - 1.0;
    check(
        spread <= 0.25,
        format!(
            "delta {delta:.3}, K(1,5,10) = {:.4} / {:.4} / {:.4}, spread {:.2}%",
            ks[0],
            ks[1],
            ks[2],
            100.0 * spread
        ),
    )
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u: f64 = 1.0 - rng.gen::<f64>();
    let v: f64 = rng.gen();
    (-2.0 * u.ln()).sqrt() * (2.0 * PI * v).cos()
}

/// Fractional Brownian motion on `n + 1` equispaced points of `[0, 1]` by
/// circulant embedding of the increment covariance.
fn fbm(n: usize, hurst: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let cov = |k: f64| {
        0.5 * ((k + 1.0).powf(2.0 * hurst) - 2.0 * k.powf(2.0 * hurst)
            + (k - 1.0).abs().powf(2.0 * hurst))
    };
    let m = 2 * n;
    let mut c: Vec<Complex<f64>> = (0..m)
        .map(|j| Complex::new(cov(j.min(m - j) as f64), 0.0))
        .collect();
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(m);
    fft.process(&mut c);
    let mut w: Vec<Complex<f64>> = c
        .iter()
        .map(|l| {
            let s = (l.re.max(0.0) / m as f64).sqrt();
            Complex::new(s * gaussian(rng), s * gaussian(rng))
        })
        .collect();
    fft.process(&mut w);
    let step = (1.0 / n as f64).powf(hurst);
    let mut path = Vec::with_capacity(n + 1);
    path.push(0.0);
    for x in &w[..n] {
        let last = *path.last().expect("nonempty");
        path.push(last + step * x.re);
    }
    path
}

fn holder_accuracy() -> Outcome {
    let grid = Grid1D::new(1.0, 33).map_err(err)?;
    let nt = 4096;
    let times: Vec<f64> = (0..=nt).map(|j| j as f64 / nt as f64).collect();
    let mut lines = Vec::new();
    let mut ok = true;
    for (i, hurst) in [0.5, 0.6, 0.8].into_iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + i as u64);
        let path = fbm(nt, hurst, &mut rng);
        let rows = path.iter().map(|&v| vec![v; grid.len()]).collect();
        let y = SpaceTime::new(grid, times.clone(), rows).map_err(err)?;
        let est = estimate_holder(&y, &HolderConfig::default()).map_err(err)?;
        ok &= (est.gamma - hurst).abs() <= 0.05 && est.pairs >= 100_000;
        lines.push(format!("{hurst} -> {:.3}", est.gamma));
    }
    check(ok, format!("{}, 1e5 pairs each", lines.join(", ")))
}

fn morrey_oracles() -> Outcome {
    let grid = Grid1D::new(1.0, 401).map_err(err)?;
    let h = grid.spacing();
    let mut worst_const = 0.0_f64;
    let mut worst_spike = 0.0_f64;
    for delta in [0.1, 0.25, 0.5, 0.9] {
        let p = MorreyParams::new(delta);
        let c = morrey_norm(&Field::constant(grid, 1.0), &p).map_err(err)?;
        worst_const = worst_const.max(rel(c, 2f64.powf(delta)));
        let mut v = vec![0.0; grid.len()];
        v[200] = 1.0 / h;
        let s = morrey_norm(&Field::new(grid, v).map_err(err)?, &p).map_err(err)?;
        worst_spike = worst_spike.max(rel(s, (0.5 * h).powf(-delta)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let p = MorreyParams::new(0.3);
    let (mut homog, mut excess) = (0.0_f64, f64::NEG_INFINITY);
    for _ in 0..100 {
        let f = Field::new(
            grid,
            (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        )
        .map_err(err)?;
        let g = Field::new(
            grid,
            (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        )
        .map_err(err)?;
        let c: f64 = rng.gen_range(-10.0..10.0);
        let nf = morrey_norm(&f, &p).map_err(err)?;
        let ng = morrey_norm(&g, &p).map_err(err)?;
        homog = homog.max(rel(
            morrey_norm(&f.scaled(c), &p).map_err(err)?,
            c.abs() * nf,
        ));
        let sum = f.zip_map(&g, |a, b| a + b).map_err(err)?;
        excess = excess.max((morrey_norm(&sum, &p).map_err(err)? - nf - ng) / (nf + ng));
    }
    check(
        worst_const <= 0.02 && worst_spike <= 0.05 && homog <= 1e-12 && excess <= 1e-12,
        format!(
            "constant {:.2e}, spike {:.2e}, homogeneity {homog:.1e}, subadditivity excess {excess:.1e}",
            worst_const, worst_spike
        ),
    )
}

fn inequality_suites() -> Outcome {
    let grid = Grid1D::new(1.0, 201).map_err(err)?;
    let train = generate_ensemble(
        grid,
        &EnsembleSpec {
            seed: 0,
            ..EnsembleSpec::default()
        },
    )
    .map_err(err)?;
    let held = generate_ensemble(
        grid,
        &EnsembleSpec {
            seed: 1,
            ..EnsembleSpec::default()
        },
    )
    .map_err(err)?;
    let ids = vec![
        InequalityId::key1_default(&grid),
        InequalityId::key2_default(&grid, 0.1),
        InequalityId::key2_default(&grid, 0.25),
        InequalityId::InterpMorrey {
            delta: 0.25,
            eps_weight: 1.0,
        },
        InequalityId::InterpMorrey {
            delta: 0.25,
            eps_weight: 0.1,
        },
        InequalityId::InterpMorrey {
            delta: 0.25,
            eps_weight: 0.01,
        },
    ];
    let mut ok = true;
    let mut lines = Vec::new();
    let mut scale_err = 0.0_f64;
    for id in &ids {
        let c = calibrate_constant(&train, id).map_err(err)?;
        let report = validate_constant(&held, id, 1.5 * c).map_err(err)?;
        ok &= report.pass();
        let label = match id {
            InequalityId::Key1 { .. } => "key1".to_string(),
            InequalityId::Key2 { delta, .. } => format!("key2 delta={delta}"),
            InequalityId::InterpMorrey { eps_weight, .. } => format!("interp eps_w={eps_weight}"),
        };
        lines.push(format!(
            "{label}: C {c:.4e}, {} violations",
            report.violations
        ));
        for u in held.iter().take(50) {
            let base = calibrate_constant(std::slice::from_ref(u), id).map_err(err)?;
            for s in [1e-3, 1e3] {
                let scaled = calibrate_constant(&[u.scaled(s)], id).map_err(err)?;
                if base > 0.0 {
                    scale_err = scale_err.max(rel(scaled, base));
                } else {
                    scale_err = scale_err.max(scaled);
                }
            }
        }
    }
    ok &= scale_err <= 1e-10;
    check(
        ok,
        format!("{}; scale invariance {scale_err:.1e}", lines.join("; ")),
    )
}

fn random_state(grid: Grid1D, m: usize, rng: &mut ChaCha8Rng) -> StateVector {
    let fields = (0..m)
        .map(|_| {
            let a: f64 = rng.gen_range(0.0..2.0);
            let b: f64 = rng.gen_range(0.0..1.0);
            let k: f64 = rng.gen_range(1..6) as f64;
            let phase: f64 = rng.gen_range(0.0..PI);
            Field::from_fn(grid, |x| a + b * (k * PI * x + phase).cos().abs())
        })
        .collect();
    StateVector::new(0.0, fields).expect("consistent grid")
}

fn energy_machinery() -> Outcome {
    let grid = Grid1D::new(1.0, 101).map_err(err)?;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut collapse = 0.0_f64;
    for _ in 0..50 {
        let m = rng.gen_range(1..=4);
        let s = random_state(grid, m, &mut rng);
        for p in 2..=4 {
            let e = lp_energy(&s, p, &vec![1.0; m]).map_err(err)?;
            let direct = s
                .total()
                .map(|v| v.powi(p as i32))
                .integrate()
                .map_err(err)?;
            collapse = collapse.max(rel(e, direct));
        }
    }
    let theta = [1.0, 1.3];
    let mut bracket_misses = 0;
    for p in 2..=4 {
        let (lo, hi) = norm_equivalence_lambda(2, p, &theta, 2000, 0).map_err(err)?;
        for _ in 0..1000 {
            let r = energy_ratio(&random_state(grid, 2, &mut rng), p, &theta).map_err(err)?;
            if r < lo * (1.0 - 1e-9) || r > hi * (1.0 + 1e-9) {
                bracket_misses += 1;
            }
        }
    }
    let sys = system("cubic_exchange", &[1.0, 0.1]);
    let mut sups = Vec::new();
    for n in [201, 401] {
        let traj = run(&sys, n, 0, 2.0, &SolverConfig::default())?;
        let mon =
            energy_dissipation_monitor(&traj, 2, &[1.0, 1.0], sys.isc_order(), 0.5).map_err(err)?;
        sups.push(mon.sup_ratio);
    }
    let stable = sups.iter().all(|v| v.is_finite()) && rel(sups[0], sups[1]) <= 0.2;
    check(
        collapse <= 1e-12 && bracket_misses == 0 && stable,
        format!(
            "collapse {collapse:.1e}, {bracket_misses} bracket misses in 3000 states, monitor sup {:.4} / {:.4}",
            sups[0], sups[1]
        ),
    )
}

fn structural() -> Outcome {
    let grid = Grid1D::new(1.0, 201).map_err(err)?;
    let sys = system("cubic_autocatalysis", &[1.0, 0.1]);
    let aug = augment_conservative(&sys);
    let u0 = InitialData::random_cosine(3.0)
        .state(grid, 2, 4)
        .map_err(err)?;
    let cfg = SolverConfig::fixed_step(1e-3);
    let base = simulate(&sys, &u0, 2.0, &cfg).map_err(err)?;
    let ext = simulate(&aug, &u0.extended_with_zero_species(), 2.0, &cfg).map_err(err)?;
    let mut aug_err = 0.0_f64;
    for (a, b) in base.snapshots().iter().zip(ext.snapshots()) {
        for i in 0..2 {
            for (x, y) in a.field(i).values().iter().zip(b.field(i).values()) {
                aug_err = aug_err.max((x - y).abs());
            }
        }
    }
    let mc = Preset::MassControl
        .build()
        .with_mass_control(vec![1.0, 1.0], 1.0, 0.4)
        .map_err(err)?;
    let k1 = mc.k1();
    let traj = simulate(
        &mc,
        &InitialData::random_cosine(3.0)
            .state(grid, 2, 5)
            .map_err(err)?,
        5.0,
        &SolverConfig::default(),
    )
    .map_err(err)?;
    let mut trip = 0.0_f64;
    for s in traj.snapshots() {
        let y = rescale_exponential(s, k1, RescaleDirection::Forward).map_err(err)?;
        let back = rescale_exponential(&y, k1, RescaleDirection::Inverse).map_err(err)?;
        for i in 0..2 {
            for (x, y) in back.field(i).values().iter().zip(s.field(i).values()) {
                trip = trip.max((x - y).abs() / y.abs().max(1.0));
            }
        }
    }
    let mut identity = 0.0_f64;
    let mut monotone = true;
    let mut last = 0.0;
    for j in 1..1000 {
        let d = j as f64 / 1000.0;
        let xi = xi_admissible(d).xi_max;
        identity = identity.max((d * (2.0 - xi) - xi * (3.0 + xi)).abs());
        monotone &= xi > last;
        last = xi;
    }
    check(
        base.termination().is_completed() && aug_err <= 1e-8 && trip <= 1e-6 && identity <= 1e-10 && monotone,
        format!(
            "augmented mismatch {aug_err:.1e}, rescaling round trip {trip:.1e} (k1 {k1}), xi identity {identity:.1e}, monotone {monotone}"
        ),
    )
}

fn heat_error(
    n: usize,
    dt: f64,
    t_end: f64,
    scheme: Scheme,
    discrete_exact: bool,
) -> Result<f64, String> {
    let grid = Grid1D::new(1.0, n).map_err(err)?;
    let sys = Preset::Heat { species: 1 }.build();
    let u0 =
        StateVector::new(0.0, vec![Field::from_fn(grid, |x| 2.0 + (PI * x).cos())]).map_err(err)?;
    let cfg = SolverConfig {
        scheme,
        ..SolverConfig::fixed_step(dt)
    };
    let traj = simulate(&sys, &u0, t_end, &cfg).map_err(err)?;
    let h = grid.spacing();
    let rate = if discrete_exact {
        2.0 * (1.0 - (PI * h).cos()) / (h * h)
    } else {
        PI * PI
    };
    let decay = (-rate * t_end).exp();
    Ok(traj
        .final_state()
        .field(0)
        .values()
        .iter()
        .zip(grid.nodes())
        .fold(0.0_f64, |m, (v, x)| {
            m.max((v - 2.0 - decay * (PI * x).cos()).abs())
        }))
}

fn orders(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

fn convergence() -> Outcome {
    let space = [21, 41, 81, 161]
        .iter()
        .map(|&n| heat_error(n, 1e-5, 0.1, Scheme::CrankNicolson, false))
        .collect::<Result<Vec<_>, _>>()?;
    let dts = [0.02, 0.01, 0.005, 0.0025];
    let be = dts
        .iter()
        .map(|&dt| heat_error(101, dt, 0.2, Scheme::BackwardEuler, true))
        .collect::<Result<Vec<_>, _>>()?;
    let cn = dts
        .iter()
        .map(|&dt| heat_error(101, dt, 0.2, Scheme::CrankNicolson, true))
        .collect::<Result<Vec<_>, _>>()?;
    let (qs, qb, qc) = (orders(&space), orders(&be), orders(&cn));
    let within = |q: &[f64], lo: f64, hi: f64| q.iter().all(|v| (lo..=hi).contains(v));

    let grid = Grid1D::new(1.0, 21).map_err(err)?;
    let sys = Preset::QuadraticBlowup.build();
    let mut blow = Vec::new();
    let mut blow_ok = true;
    for u0 in [1.0, 4.0, 10.0] {
        let s = StateVector::new(0.0, vec![Field::constant(grid, u0)]).map_err(err)?;
        let traj = simulate(&sys, &s, 2.0 / u0, &SolverConfig::default()).map_err(err)?;
        match traj.termination() {
            Termination::BlownUp { t, .. } => {
                blow_ok &= rel(*t, 1.0 / u0) <= 0.2;
                blow.push(format!("{:.4}", t * u0));
            }
            _ => {
                blow_ok = false;
                blow.push("none".into());
            }
        }
    }
    let fmt = |q: &[f64]| {
        q.iter()
            .map(|v| format!("{v:.3}"))
            .collect::<Vec<_>>()
            .join("/")
    };
    check(
        within(&qs, 1.8, 2.2) && within(&qb, 0.8, 1.2) && within(&qc, 1.8, 2.2) && blow_ok,
        format!(
            "space {}, BE {}, CN {}, t*u0 {}",
            fmt(&qs),
            fmt(&qb),
            fmt(&qc),
            blow.join("/")
        ),
    )
}

fn main() {
    let mut failed = 0;
    let mut report = |id: u32, name: &str, start: Instant, outcome: Outcome| {
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {id:>2} {tag} {name} [{secs:.1}s]: {detail}");
    };

    let t = Instant::now();
    report(1, "mass conservation and dissipation", t, mass_balance());

    let t = Instant::now();
    let runs = bounded_runs();
    match &runs {
        Ok(runs) => {
            report(2, "global boundedness", t, boundedness(runs));
            report(3, "non-concentration", t, nonconcentration(runs));
        }
        Err(e) => {
            report(2, "global boundedness", t, Err(e.clone()));
            report(3, "non-concentration", t, Err(e.clone()));
        }
    }

    let t = Instant::now();
    report(4, "localized mass scaling", t, localized_scaling());
    let t = Instant::now();
    report(5, "Hölder estimator accuracy", t, holder_accuracy());
    let t = Instant::now();
    report(6, "Morrey oracle values", t, morrey_oracles());
    let t = Instant::now();
    report(7, "inequality suites", t, inequality_suites());
    let t = Instant::now();
    report(8, "energy machinery", t, energy_machinery());
    let t = Instant::now();
    report(9, "structural equivalences", t, structural());
    let t = Instant::now();
    report(10, "solver convergence and blow-up", t, convergence());

    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
    println!("all criteria passed");
}
