//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! The process exits successfully even when criteria fail; the lines are
//! the report. Infrastructure errors (a run that cannot be executed) panic.

use std::f64::consts::E;
use std::sync::Arc;
use std::time::Instant;

use backsolve::cli::{parse_config, run, Results, SolveRow};
use backsolve::mesh::MeshPair;
use backsolve::operators::{normal_matrix_dense, Discretization, LinearOperator};
use backsolve::oracle::{check_log_convexity, check_smoothing, decay_rate_fit, SpectralField};
use backsolve::solver::{build_system, fit_rate, SymmetricOperator};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Report {
    passed: usize,
    total: usize,
}

impl Report {
    fn line(&mut self, id: usize, name: &str, ok: bool, detail: String, started: Instant) {
        self.total += 1;
        self.passed += ok as usize;
        let tag = if ok { "PASS" } else { "FAIL" };
        println!("[{tag}] {id:>2} {name}: {detail} ({:.1}s)", started.elapsed().as_secs_f64());
    }
}

fn solve_rows(config: &str) -> (Vec<f64>, Vec<SolveRow>) {
    match run(&parse_config(config).expect("valid config")).expect("experiment runs") {
        Results::Solve { slice_times, rows } => (slice_times, rows),
        other => panic!("unexpected results {other:?}"),
    }
}

fn slice_index(slices: &[f64], t: f64) -> usize {
    slices.iter().position(|s| (s - t).abs() < 1e-14).expect("slice column")
}

fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    num / den.max(f64::MIN_POSITIVE)
}

fn sci(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn sci_pairs(v: &[(f64, f64)]) -> String {
    let parts: Vec<String> = v.iter().map(|(a, b)| format!("({a:.3e}, {b:.3e})")).collect();
    format!("[{}]", parts.join(", "))
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn dense_apply(m: &DMatrix<f64>, x: &[f64]) -> Vec<f64> {
    (m * DVector::from_column_slice(x)).as_slice().to_vec()
}

const CONVERGENCE: &str = "experiment = convergence\nd = 2\nT = 1\nk_range = 1..4\nl = 0\n\
                           solution = poly-cubic\nepsilon_strategy = plain\nslice_times = 1/4, 1/2, 3/4, 1\n";

fn main() {
    let mut rep = Report { passed: 0, total: 0 };
    let mut all_runs: Vec<(&str, SolveRow)> = Vec::new();

    // 1, 2: convergence with exact data
    let t = Instant::now();
    let (slices, conv) = solve_rows(CONVERGENCE);
    let dofs: Vec<f64> = conv.iter().map(|r| r.dofs as f64).collect();
    let h1: Vec<f64> = conv.iter().map(|r| r.err_l2h1).collect();
    let slope = fit_rate(&dofs, &h1).unwrap();
    rep.line(
        1,
        "convergence d=2",
        (-0.45..=-0.21).contains(&slope),
        format!("L2(H1) slope {slope:.3} in [-0.45, -0.21]; errors {}", sci(&h1)),
        t,
    );

    let t = Instant::now();
    let (i_q, i_3q, i_t) = (slice_index(&slices, 0.25), slice_index(&slices, 0.75), slice_index(&slices, 1.0));
    let at_t: Vec<f64> = conv.iter().map(|r| r.slice_errors[i_t]).collect();
    let slope_t = fit_rate(&dofs, &at_t).unwrap();
    let ordering: Vec<(f64, f64)> = conv.iter().map(|r| (r.slice_errors[i_q], r.slice_errors[i_3q])).collect();
    let ordered = ordering.iter().all(|(a, b)| a >= b);
    rep.line(
        2,
        "slice convergence d=2",
        (-0.80..=-0.50).contains(&slope_t) && ordered,
        format!(
            "slope at T {slope_t:.3} in [-0.80, -0.50]; err(T/4) >= err(3T/4) per level: {ordered} {}",
            sci_pairs(&ordering)
        ),
        t,
    );
    all_runs.extend(conv.iter().map(|r| ("convergence", r.clone())));

    // 3: inf-sup
    let t = Instant::now();
    let gammas = match run(&parse_config("experiment = infsup\nd = 2\nT = 1\nk_range = 1..3\nl = 0\nl_big = 1\n").unwrap())
        .unwrap()
    {
        Results::InfSup(rows) => rows.iter().map(|r| r.gamma_infsup).collect::<Vec<_>>(),
        other => panic!("unexpected results {other:?}"),
    };
    let (gmin, gmax) = gammas.iter().fold((f64::INFINITY, 0.0f64), |(a, b), g| (a.min(*g), b.max(*g)));
    rep.line(
        3,
        "inf-sup l=0",
        gmax / gmin < 2.0 && gmin > 0.1,
        format!("gamma {gammas:.4?}, max/min {:.3} < 2, min > 0.1", gmax / gmin),
        t,
    );

    // 4, 5: operator equivalence and SPD on the k=1 mesh pair
    let t = Instant::now();
    let meshes = MeshPair::uniform(2, 0.0, 1.0, 1).unwrap();
    let disc = Arc::new(Discretization::new(meshes, 0).unwrap());
    let b = disc.b();
    let (gram_x, gram_y) = (disc.gram_x(), disc.gram_y());
    let eps = 0.3;
    let system = build_system(Arc::clone(&disc), eps, |_, _| 1.0, |_| 1.0, 4).unwrap();
    let gt = disc.trace(1.0).unwrap().to_dense();
    let g0 = disc.trace(0.0).unwrap().to_dense();
    let m = disc.space_mass().to_dense();
    let s_dense = normal_matrix_dense(&disc) + gt.transpose() * &m * &gt + g0.transpose() * &m * &g0 * (eps * eps);
    let (b_d, gx_d, gy_d) = (b.to_dense(), gram_x.to_dense(), gram_y.to_dense());
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let x = random_vec(&mut rng, disc.n_trial());
        let v = random_vec(&mut rng, disc.n_test());
        worst = worst
            .max(rel_diff(&b.apply(&x), &dense_apply(&b_d, &x)))
            .max(rel_diff(&gram_x.apply(&x), &dense_apply(&gx_d, &x)))
            .max(rel_diff(&gram_y.apply(&v), &dense_apply(&gy_d, &v)))
            .max(rel_diff(&system.apply(&x).unwrap(), &dense_apply(&s_dense, &x)));
    }
    rep.line(
        4,
        "matrix-free vs dense (k=1)",
        worst <= 1e-12,
        format!("max relative difference {worst:.2e} <= 1e-12 over B, Gram_X, Gram_Y, S_eps"),
        t,
    );

    let t = Instant::now();
    let mut asym: f64 = 0.0;
    for _ in 0..100 {
        let x = random_vec(&mut rng, disc.n_trial());
        let y = random_vec(&mut rng, disc.n_trial());
        let xsy: f64 = x.iter().zip(system.apply(&y).unwrap()).map(|(a, b)| a * b).sum();
        let ysx: f64 = y.iter().zip(system.apply(&x).unwrap()).map(|(a, b)| a * b).sum();
        asym = asym.max((xsy - ysx).abs() / xsy.abs().max(ysx.abs()).max(1e-300));
    }
    let min_eig = SymmetricEigen::new((&s_dense + s_dense.transpose()) * 0.5).eigenvalues.min();
    let minimizer: Vec<(f64, f64)> = conv.iter().map(|r| (r.functional, r.functional_interpolant)).collect();
    let below = minimizer.iter().all(|(a, b)| a <= b);
    rep.line(
        5,
        "SPD and minimizer",
        asym <= 1e-12 && min_eig > 0.0 && below,
        format!(
            "symmetry defect {asym:.2e} <= 1e-12; min eigenvalue {min_eig:.3e} > 0; J(pcg) <= J(Iu) per level: {below}"
        ),
        t,
    );

    // 9, 10, 11 runs (criterion 6 is evaluated over all of them)
    let t9 = Instant::now();
    let (s9, mode) = solve_rows(
        "experiment = perturb-mode\nd = 2\nT = 1/8\nk_range = 1..4\nmode_n = 1\namplitude = 0.05\nslice_times = 1/16\n",
    );
    let d9 = t9.elapsed();
    let t10 = Instant::now();
    let (s10, random) = solve_rows(
        "experiment = perturb-random\nd = 2\nT = 1/8\nk_range = 1..4\ntarget_norm = 0.01\nseed = 42\nslice_times = 1/16\n",
    );
    let d10 = t10.elapsed();
    let t11 = Instant::now();
    let (s11, interval) = solve_rows(
        "experiment = interval-length\nd = 2\nT = 1\nL = 1/8, 1\nk_range = 1..3\ntime_level_offset = 3\n\
         solution = heat-mode\nepsilon_strategy = explicit\nepsilon_values = 1/16, 1/32, 1/64\nslice_times = 15/16\n",
    );
    let d11 = t11.elapsed();
    all_runs.extend(mode.iter().map(|r| ("perturb-mode", r.clone())));
    all_runs.extend(random.iter().map(|r| ("perturb-random", r.clone())));
    all_runs.extend(interval.iter().map(|r| ("interval-length", r.clone())));

    let t = Instant::now();
    let not_monotone: Vec<String> = all_runs
        .iter()
        .filter(|(_, r)| !r.residual_monotone)
        .map(|(name, r)| format!("{name} k={} {}", r.k, r.strategy.as_deref().unwrap_or("")))
        .collect();
    let above: Vec<String> = all_runs
        .iter()
        .filter(|(_, r)| !(r.converged && r.stopping_value <= r.threshold))
        .map(|(name, r)| format!("{name} k={}", r.k))
        .collect();
    rep.line(
        6,
        "stopping criterion and monotone residual",
        not_monotone.is_empty() && above.is_empty(),
        format!(
            "{} runs; final r'G_X r above threshold: {above:?}; nonmonotone histories: {not_monotone:?}",
            all_runs.len()
        ),
        t,
    );

    // 7, 8: spectral oracle
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let fields: Vec<SpectralField> = (0..100).map(|_| SpectralField::random(2, 8, &mut rng).unwrap()).collect();
    let violation = fields
        .iter()
        .map(|u0| check_log_convexity(u0, 1.0, 200).max_violation)
        .fold(f64::NEG_INFINITY, f64::max);
    let single = SpectralField::single_mode(&[2, 1], 0.7).unwrap();
    let sc = check_log_convexity(&single, 1.0, 200);
    let equality = sc
        .actual_values
        .iter()
        .zip(&sc.bound_values)
        .map(|(a, b)| (a - b).abs() / b.abs().max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max);
    rep.line(
        7,
        "log-convexity oracle",
        violation <= 1e-10 && equality <= 1e-12,
        format!("max violation {violation:.2e} <= 1e-10 on 100 fields; single-mode defect {equality:.2e} <= 1e-12"),
        t,
    );

    let t = Instant::now();
    let smooth_max = fields.iter().map(|u0| check_smoothing(u0, 1.0).sup_value).fold(0.0, f64::max);
    let single_sup = check_smoothing(&SpectralField::single_mode(&[1, 1], 1.0).unwrap(), 1.0).sup_value;
    rep.line(
        8,
        "smoothing estimate",
        smooth_max <= 1.0 && (single_sup - 1.0 / E).abs() <= 1e-12,
        format!(
            "sup t|u'(t)|/|u(0)| = {smooth_max:.4} <= 1; single mode {single_sup:.15} vs 1/e (diff {:.1e})",
            (single_sup - 1.0 / E).abs()
        ),
        t,
    );

    // 9: mode perturbation
    let i9 = slice_index(&s9, 1.0 / 16.0);
    let by = |rows: &[SolveRow], k: u32, s: &str, i: usize| {
        rows.iter().find(|r| r.k == k && r.strategy.as_deref() == Some(s)).unwrap().slice_errors[i]
    };
    let (plain4, aware4) = (by(&mode, 4, "plain", i9), by(&mode, 4, "data-aware", i9));
    rep.line(
        9,
        "mode perturbation",
        aware4 <= plain4,
        format!("k=4 slice error data-aware {aware4:.3e} <= plain {plain4:.3e}"),
        Instant::now() - d9,
    );

    // 10: random perturbation
    let i10 = slice_index(&s10, 1.0 / 16.0);
    let ratios: Vec<f64> = (1..=4)
        .map(|k| {
            let (a, b) = (by(&random, k, "plain", i10), by(&random, k, "data-aware", i10));
            a.max(b) / a.min(b)
        })
        .collect();
    rep.line(
        10,
        "random perturbation",
        ratios.iter().all(|r| *r <= 3.0),
        format!("plain/data-aware slice error ratios {ratios:.2?} <= 3 for k=1..4"),
        Instant::now() - d10,
    );

    // 11: interval length
    let i11 = slice_index(&s11, 15.0 / 16.0);
    let pairs: Vec<(f64, f64)> = (1..=3)
        .map(|k| {
            let get = |l: f64| {
                interval.iter().find(|r| r.k == k && r.length == Some(l)).unwrap().slice_errors[i11]
            };
            (get(0.125), get(1.0))
        })
        .collect();
    rep.line(
        11,
        "interval length",
        pairs.iter().all(|(a, b)| a < b),
        format!("slice error (L=1/8, L=1) per k {}", sci_pairs(&pairs)),
        Instant::now() - d11,
    );

    // 12: decay rate
    let t = Instant::now();
    let modes: Vec<usize> = (4..=32).step_by(4).collect();
    let fits: Vec<(f64, f64, f64)> = [0.0, 0.5]
        .iter()
        .map(|&beta| {
            let f = decay_rate_fit(2, beta, 1.0, &modes).unwrap();
            (beta, f.slope, f.expected)
        })
        .collect();
    rep.line(
        12,
        "decay rate",
        fits.iter().all(|(_, s, e)| (s - e).abs() <= 0.2 * e.abs()),
        format!("(beta, slope, expected) {fits:.3?} within 20%"),
        t,
    );

    println!("acceptance: {}/{} criteria passed", rep.passed, rep.total);
}
