//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use common::*;
use gridobs::benchmark::{self, reference_targets};
use gridobs::certify;
use gridobs::control;
use gridobs::estimation::{self, Observer};
use gridobs::linalg;
use gridobs::modal::{self, SWING_BAND, SWING_THRESHOLD};
use gridobs::nalgebra::{Complex, DMatrix, DVector};
use gridobs::simulate::{self, Pulse, DEFAULT_DT, DEFAULT_PULSE, DEFAULT_T_END};
use gridobs::Model;

const RANDOM_MODELS: usize = 100;
const M1_FREQUENCY: f64 = 3.90;
const ENVELOPE_FRACTION: f64 = 0.1;
const K_GRID: (f64, f64, f64) = (0.0, 0.5, 50.0);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn accepted_models(count: usize) -> Vec<Model> {
    (0..u64::MAX)
        .filter_map(|seed| {
            let mut r = rng(seed);
            let model = random_model(&mut r, 3 + (seed % 4) as usize);
            estimation::check_uio_existence(&model).ok()?.accepted().then_some(model)
        })
        .take(count)
        .collect()
}

fn seeded_error(n: usize, seed: u64, norm: f64) -> DVector<f64> {
    let v = random_matrix(&mut rng(1000 + seed), n, 1).column(0).into_owned();
    &v * (norm / v.norm())
}

fn calibration() -> Outcome {
    let start = Instant::now();
    let targets = reference_targets::<f64>();
    let Ok(params) = benchmark::calibrate_two_area(&targets) else {
        return outcome(false, "calibration failed".into());
    };
    let elapsed = start.elapsed().as_secs_f64();
    let mut worst = 0.0f64;
    let mut m1_damping = f64::NAN;
    for (name, p) in [("calibrated", params), ("shipped", benchmark::default_params())] {
        let model = benchmark::build_two_area(&p).unwrap();
        let swing = modal::identify_swing_modes(&model, SWING_BAND, SWING_THRESHOLD).unwrap();
        if swing.len() != 3 {
            return outcome(false, format!("{name} model has {} swing modes", swing.len()));
        }
        for (m, t) in swing.iter().zip(&targets) {
            worst = worst.max((m.eigenvalue - t).norm() / t.norm());
        }
        m1_damping = swing[0].damping;
    }
    let pass = worst <= 0.05 && (m1_damping - 0.009).abs() <= 0.003 && elapsed <= 10.0;
    outcome(pass, format!("max mode error {worst:.2e}, M1 damping {m1_damping:.4}, {elapsed:.2} s"))
}

fn uio_algebra(models: &[Model]) -> Outcome {
    let mut worst = [0.0f64; 3];
    for model in models {
        let (uio, _) = estimation::design_uio(model).unwrap();
        let r = uio.residuals(model);
        worst[0] = worst[0].max(r.decoupling / model.e().amax());
        worst[1] = worst[1].max(r.input);
        worst[2] = worst[2].max(r.sylvester / model.a().amax());
    }
    let pass = worst[0] <= 1e-12 && worst[1] == 0.0 && worst[2] <= 1e-10;
    outcome(
        pass,
        format!(
            "{} models: |ME|/|E| {:.1e}, |MB-TB| {:.1e}, sylvester/|A| {:.1e}",
            models.len(),
            worst[0],
            worst[1],
            worst[2]
        ),
    )
}

fn lmi_certificates(models: &[Model]) -> Outcome {
    let mut worst = f64::NEG_INFINITY;
    let mut all_pd = true;
    for model in models {
        let (uio, cert) = estimation::design_uio(model).unwrap();
        let r = cert.r.as_ref().expect("UIO certificate carries R");
        let lmi = certify::verify_uio_lmi(&cert.p, r, &uio.m, model.a(), model.cl());
        let bound = 1e-8 * linalg::norm2(&cert.p) * linalg::norm2(model.a());
        worst = worst.max(lmi / bound);
        all_pd &= linalg::sym_eig_range(&cert.p).0 > 0.0;
    }
    let pass = worst <= -1.0 && all_pd;
    outcome(pass, format!("worst LMI eigenvalue / (1e-8 |P||A|) = {worst:.3e}, P positive definite: {all_pd}"))
}

fn luenberger_contrast(model: &Model) -> Outcome {
    let (luen, _) = estimation::design_luenberger(model, 2.0).unwrap();
    let (uio, _) = estimation::design_uio(model).unwrap();
    let (luen, uio) = (Observer::Luenberger(luen), Observer::Uio(uio));
    let n = model.n();
    let x0 = DVector::zeros(n);
    let mut worst = 0.0f64;
    for seed in 0..10 {
        let e0 = seeded_error(n, seed, 0.01);
        let tr = simulate::simulate_estimation(model, &luen, None, &x0, &(&x0 - &e0), 5.0, DEFAULT_DT).unwrap();
        let norms = tr.error_norms();
        worst = worst.max(norms.last().unwrap() / norms[0]);
    }
    let peak = |obs: &Observer<f64>| {
        let tr = simulate::simulate_estimation(model, obs, Some(&DEFAULT_PULSE), &x0, &x0, DEFAULT_T_END, DEFAULT_DT)
            .unwrap();
        tr.error_norms().into_iter().fold(0.0f64, f64::max)
    };
    let (pl, pu) = (peak(&luen), peak(&uio));
    let pass = worst <= 1e-3 && pl >= 10.0 * pu && pl > 0.0;
    outcome(pass, format!("max |e(5)|/|e(0)| {worst:.2e}; pulse peak |e| Luenberger {pl:.2e} vs UIO {pu:.2e}"))
}

fn uio_decoupling(model: &Model) -> Outcome {
    let (uio, _) = estimation::design_uio(model).unwrap();
    let obs = Observer::Uio(uio);
    let n = model.n();
    let x0 = DVector::zeros(n);
    let xh0 = &x0 - seeded_error(n, 7, 0.01);
    let run = |amp: f64, xh: &DVector<f64>| {
        let p = Pulse { amplitude: amp, ..DEFAULT_PULSE };
        simulate::simulate_estimation(model, &obs, Some(&p), &x0, xh, DEFAULT_T_END, DEFAULT_DT).unwrap()
    };
    let (a, b) = (run(0.05, &xh0), run(0.10, &xh0));
    let (ea, eb) = (&a.estimates.as_ref().unwrap().e, &b.estimates.as_ref().unwrap().e);
    let diff = ea.iter().zip(eb).fold(0.0f64, |m, (x, y)| m.max((x - y).amax()));

    let tr = run(0.05, &x0);
    let est = tr.estimates.as_ref().unwrap();
    let peak = tr.y_r.iter().fold(0.0f64, |m, y| m.max(y.amax()));
    let track = tr
        .t
        .iter()
        .zip(tr.y_r.iter().zip(&est.y_r_hat))
        .filter(|(t, _)| **t >= 2.0)
        .fold(0.0f64, |m, (_, (y, yh))| m.max((y - yh).amax()));
    let pass = diff <= 1e-9 && track <= 1e-6 * peak;
    outcome(pass, format!("amplitude sweep |e| difference {diff:.1e}; |y_r - y_r_hat| / peak {:.1e}", track / peak))
}

/// Pairs each eigenvalue of `a` with the nearest unused one of `b`.
fn spectrum_distance(a: &[Complex<f64>], b: &[Complex<f64>]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let mut used = vec![false; b.len()];
    let mut worst = 0.0f64;
    for z in a {
        let (j, d) = b
            .iter()
            .enumerate()
            .filter(|(j, _)| !used[*j])
            .map(|(j, w)| (j, (z - w).norm()))
            .min_by(|x, y| x.1.total_cmp(&y.1))
            .unwrap();
        used[j] = true;
        worst = worst.max(d);
    }
    worst
}

fn closed_loop(model: &Model) -> Outcome {
    let sel = benchmark::default_selector();
    let (uio, _) = estimation::design_uio(model).unwrap();
    let grid = control::gain_grid(K_GRID.0, K_GRID.1, K_GRID.2).unwrap();
    let Ok((wapss, report)) = control::tune_static_gain(model, &uio, &sel, &grid) else {
        return outcome(false, "no stabilizing gain on the grid".into());
    };
    let x0 = DVector::zeros(model.n());
    let settle = DEFAULT_PULSE.end() + 2.0 * 2.0 * std::f64::consts::PI / M1_FREQUENCY;
    let ratio = |k: f64| {
        let tr = simulate::simulate_closed_loop(model, &uio, &sel, k, Some(&DEFAULT_PULSE), &x0, &x0, DEFAULT_T_END, DEFAULT_DT)
            .unwrap();
        let s = tr.output_difference(sel.local_rows[0], sel.remote_rows[0]);
        simulate::envelope_verdict(&tr.t, &s, settle, ENVELOPE_FRACTION)
    };
    let (open, closed) = (ratio(0.0), ratio(wapss.k));

    let aug = control::closed_loop_model(model, &uio, &sel, wapss.k);
    let aug_eigs = linalg::eigenvalues(&aug).unwrap();
    let mut union = linalg::eigenvalues(&control::plant_block(model, &sel, wapss.k)).unwrap();
    union.extend(linalg::eigenvalues(&uio.f).unwrap());
    let sep = spectrum_distance(&aug_eigs, &union) / aug.amax().max(1.0);
    let stable = report.augmented_abscissa < 0.0;

    let pass = closed.pass && !open.pass && stable && sep <= 1e-8;
    outcome(
        pass,
        format!(
            "k = {}, envelope ratio closed {:.3} / open {:.3}, augmented abscissa {:.4}, separation {sep:.1e}",
            wapss.k, closed.ratio, open.ratio, report.augmented_abscissa
        ),
    )
}

fn numerical_oracles(model: &Model) -> Outcome {
    let n = model.n();
    let mut x0 = DVector::zeros(n);
    x0[benchmark::omega_index(1)] = 1e-3;
    let tr = simulate::simulate_plant(model, |_| DVector::zeros(model.inputs()), Some(&DEFAULT_PULSE), &x0, 10.0, DEFAULT_DT)
        .unwrap();
    let e = model.e().column(0).into_owned();
    let (t0, t1, amp) = (DEFAULT_PULSE.start, DEFAULT_PULSE.end(), DEFAULT_PULSE.amplitude);
    let oracle = rk4(model.a(), |t| if t >= t0 && t < t1 { &e * amp } else { DVector::zeros(n) }, &x0, 10.0, 1e-4);
    let scale = oracle.iter().fold(0.0f64, |m, x| m.max(x.amax()));
    let zoh = tr.x.iter().enumerate().fold(0.0f64, |m, (k, x)| m.max((x - &oracle[k * 10]).amax())) / scale;

    let mut r = rng(77);
    let mut lyap = 0.0f64;
    let mut bound_ok = true;
    let mut systems: Vec<DMatrix<f64>> = vec![model.a().clone()];
    systems.extend((0..RANDOM_MODELS).map(|i| random_hurwitz(&mut r, 2 + i % 6, 0.05 + 0.01 * (i % 10) as f64)));
    for (i, a) in systems.iter().enumerate() {
        let m = a.nrows();
        let q = DMatrix::identity(m, m);
        let p = certify::solve_lyapunov(a, &q).unwrap();
        let res = (a.transpose() * &p + &p * a + &q).amax() / (p.amax() * a.amax() + q.amax());
        lyap = lyap.max(res);
        if i == 0 {
            continue;
        }
        let cert = certify::exponential_rate(a).unwrap();
        let step = simulate::matrix_exponential(a, 0.02).unwrap();
        let v = |x: &DVector<f64>| (x.transpose() * &cert.p * x)[(0, 0)];
        let mut x = random_matrix(&mut r, m, 1).column(0).into_owned();
        let v0 = v(&x);
        for k in 1..=500 {
            x = &step * x;
            bound_ok &= v(&x) <= (-2.0 * cert.alpha * 0.02 * k as f64).exp() * v0 * (1.0 + 1e-9);
        }
    }
    let pass = zoh <= 1e-6 && lyap <= 1e-9 && bound_ok;
    outcome(pass, format!("ZOH vs RK4 {zoh:.1e}, Lyapunov residual {lyap:.1e}, rate bound holds: {bound_ok}"))
}

fn main() -> ExitCode {
    let start = Instant::now();
    let model: Model = benchmark::default_benchmark();
    let mut models = vec![model.clone()];
    models.extend(accepted_models(RANDOM_MODELS));

    let results = [
        ("benchmark calibration", calibration()),
        ("UIO algebra", uio_algebra(&models)),
        ("LMI certificate", lmi_certificates(&models)),
        ("Luenberger convergence and pulse contrast", luenberger_contrast(&model)),
        ("UIO disturbance decoupling", uio_decoupling(&model)),
        ("closed-loop two-cycle envelope", closed_loop(&model)),
        ("numerical oracles", numerical_oracles(&model)),
    ];
    let mut failed = 0;
    for (i, (name, o)) in results.iter().enumerate() {
        println!("{} criterion {}: {name}: {}", if o.pass { "PASS" } else { "FAIL" }, i + 1, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("acceptance finished in {:.1} s, {failed} failing", start.elapsed().as_secs_f64());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
