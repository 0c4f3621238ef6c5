use std::fs;
use std::path::Path;

use gridobs::benchmark;
use gridobs::control;
use gridobs::estimation::{self, Observer};
use gridobs::modal::{self, SWING_BAND, SWING_THRESHOLD};
use gridobs::model::{load_model, SignalSelector};
use gridobs::nalgebra::DVector;
use gridobs::simulate::{self, Pulse};
use gridobs::{Error, Model};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::{ClosedLoopArgs, Common, ObserverArgs, ObserverKind, TimeArgs};

pub const DEFAULT_K_GRID: &str = "0,0.5,50";
const ENVELOPE_FRACTION: f64 = 0.1;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

type CmdResult<T = ()> = Result<T, Failure>;

const EXIT_FAILURE: u8 = 1;
const EXIT_MODEL: u8 = 2;
const EXIT_EXISTENCE: u8 = 3;
const EXIT_TUNING: u8 = 4;

fn fail(code: u8, message: impl Into<String>) -> Failure {
    Failure { code, message: message.into() }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Parse(_)
            | Error::DimensionMismatch(_)
            | Error::NonFinite(_)
            | Error::InvalidLabels(_)
            | Error::IndexOutOfRange(_) => EXIT_MODEL,
            Error::UioExistence(_) => EXIT_EXISTENCE,
            Error::NoStabilizingGain => EXIT_TUNING,
            _ => EXIT_FAILURE,
        };
        fail(code, e.to_string())
    }
}

struct Loaded {
    model: Model,
    selector: SignalSelector,
}

fn load(common: &Common) -> CmdResult<Loaded> {
    if common.model == "builtin" {
        return Ok(Loaded { model: benchmark::default_benchmark(), selector: benchmark::default_selector() });
    }
    let bytes = fs::read(&common.model).map_err(|e| fail(EXIT_MODEL, format!("{}: {e}", common.model)))?;
    let model: Model = load_model(&bytes).map_err(|e| fail(EXIT_MODEL, format!("{}: {e}", common.model)))?;
    let selector = SignalSelector::infer(&model).map_err(|e| fail(EXIT_MODEL, e.to_string()))?;
    Ok(Loaded { model, selector })
}

fn out_dir(common: &Common) -> CmdResult<&Path> {
    fs::create_dir_all(&common.out).map_err(|e| fail(EXIT_FAILURE, format!("{}: {e}", common.out.display())))?;
    Ok(&common.out)
}

fn write(dir: &Path, name: &str, contents: &[u8]) -> CmdResult {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| fail(EXIT_FAILURE, format!("{}: {e}", path.display())))
}

fn write_json(dir: &Path, name: &str, value: &Value) -> CmdResult {
    let mut s = serde_json::to_string_pretty(value).expect("JSON values serialize");
    s.push('\n');
    write(dir, name, s.as_bytes())
}

fn parse_list(s: &str, what: &str, len: usize) -> CmdResult<Vec<f64>> {
    let vals: Result<Vec<f64>, _> = s.split(',').map(|p| p.trim().parse::<f64>()).collect();
    match vals {
        Ok(v) if v.len() == len && v.iter().all(|x| x.is_finite()) => Ok(v),
        _ => Err(fail(EXIT_FAILURE, format!("{what} expects {len} comma-separated numbers, got `{s}`"))),
    }
}

fn parse_pulse(time: &TimeArgs) -> CmdResult<Option<Pulse<f64>>> {
    if time.pulse.eq_ignore_ascii_case("off") {
        return Ok(None);
    }
    let v = parse_list(&time.pulse, "--pulse", 3)?;
    let p = Pulse::new(v[0], v[1], v[2], 0).map_err(|e| fail(EXIT_FAILURE, e.to_string()))?;
    p.steps(time.dt).map_err(|e| fail(EXIT_FAILURE, e.to_string()))?;
    Ok(Some(p))
}

fn fmt_complex(re: f64, im: f64) -> String {
    format!("{re:+.6}{im:+.6}j")
}

pub fn modal(args: &Common) -> CmdResult {
    let Loaded { model, .. } = load(args)?;
    let dir = out_dir(args)?;
    let dec = modal::eigenmodes(model.a())?;
    let swings = modal::identify_swing_modes(&model, SWING_BAND, SWING_THRESHOLD)?;
    let is_swing = |lam: gridobs::nalgebra::Complex<f64>| swings.iter().any(|s| s.eigenvalue == lam);

    let modes: Vec<Value> = dec
        .modes
        .iter()
        .enumerate()
        .map(|(i, m)| {
            json!({
                "index": i,
                "re": m.eigenvalue.re,
                "im": m.eigenvalue.im,
                "frequency": m.frequency,
                "damping": m.damping,
                "is_swing": !m.is_conjugate && is_swing(m.eigenvalue),
                "is_conjugate": m.is_conjugate,
            })
        })
        .collect();
    let swing_json: Vec<Value> = swings
        .iter()
        .map(|m| json!({"re": m.eigenvalue.re, "im": m.eigenvalue.im, "damping": m.damping}))
        .collect();
    write_json(dir, "modes.json", &json!({ "modes": modes, "swing_modes": swing_json }))?;

    let pf = dec.participation_matrix();
    let mut csv = String::from("state");
    for i in 0..dec.modes.len() {
        csv.push_str(&format!(",mode{i}"));
    }
    csv.push('\n');
    for (k, label) in model.state_labels().iter().enumerate() {
        csv.push_str(&label.name);
        for i in 0..dec.modes.len() {
            csv.push_str(&format!(",{:.16e}", pf[(k, i)]));
        }
        csv.push('\n');
    }
    write(dir, "participation.csv", csv.as_bytes())?;

    let mut lsi = String::from("rank,input,output,lsi\n");
    if let Some(m1) = swings.first() {
        for (r, s) in modal::rank_loops(&model, m1)?.iter().enumerate() {
            lsi.push_str(&format!("{},{},{},{:.16e}\n", r + 1, s.input_index + 1, s.output, s.value));
        }
    }
    write(dir, "lsi.csv", lsi.as_bytes())?;

    println!("{} modes, {} swing modes", dec.modes.len(), swings.len());
    for m in &swings {
        println!("  swing {}  zeta = {:.4}", fmt_complex(m.eigenvalue.re, m.eigenvalue.im), m.damping);
    }
    Ok(())
}

/// Seeded initial estimation error of norm `scale`.
pub fn initial_error(n: usize, seed: u64, scale: f64) -> DVector<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
    let norm = v.norm();
    if norm == 0.0 || scale == 0.0 {
        DVector::zeros(n)
    } else {
        v * (scale / norm)
    }
}

fn series_names(prefix: &str, count: usize) -> Vec<String> {
    if count == 1 {
        vec![prefix.to_string()]
    } else {
        (1..=count).map(|i| format!("{prefix}{i}")).collect()
    }
}

pub fn observer(args: &ObserverArgs) -> CmdResult {
    let Loaded { model, .. } = load(&args.common)?;
    let pulse = parse_pulse(&args.time)?;
    let n = model.n();
    let (obs, cert) = match args.kind {
        ObserverKind::Luenberger => {
            let (o, c) = estimation::design_luenberger(&model, args.alpha)?;
            (Observer::Luenberger(o), c)
        }
        ObserverKind::Uio => {
            let diag = estimation::check_uio_existence(&model)?;
            if !diag.accepted() {
                return Err(fail(
                    EXIT_EXISTENCE,
                    format!("unknown-input observer does not exist: {}", diag.reasons().join("; ")),
                ));
            }
            let (o, c) = estimation::design_uio(&model).map_err(|e| match e {
                Error::NotDetectable { .. } => fail(EXIT_EXISTENCE, e.to_string()),
                other => other.into(),
            })?;
            (Observer::Uio(o), c)
        }
    };
    let dir = out_dir(&args.common)?;
    let scale = args.e0.unwrap_or(match args.kind {
        ObserverKind::Luenberger => 0.01,
        ObserverKind::Uio => 0.0,
    });
    let x0 = DVector::zeros(n);
    let x_hat0 = &x0 - initial_error(n, args.common.seed, scale);
    let tr = simulate::simulate_estimation(&model, &obs, pulse.as_ref(), &x0, &x_hat0, args.time.t_end, args.time.dt)?;
    let est = tr.estimates.as_ref().expect("observer runs record estimates");

    let norms = tr.error_norms();
    let mut names = series_names("e", n);
    names.push("norm".into());
    let mut cols: Vec<Vec<f64>> = (0..n).map(|i| est.e.iter().map(|e| e[i]).collect()).collect();
    cols.push(norms.clone());
    write(dir, "error.csv", simulate::csv_table(&tr.t, &names, &cols).as_bytes())?;

    let pr = model.remote_outputs();
    let mut names = series_names("y_r", pr);
    names.extend(series_names("y_r_hat", pr));
    let mut cols: Vec<Vec<f64>> = (0..pr).map(|j| tr.y_r.iter().map(|y| y[j]).collect()).collect();
    cols.extend((0..pr).map(|j| est.y_r_hat.iter().map(|y| y[j]).collect::<Vec<_>>()));
    write(dir, "estimate.csv", simulate::csv_table(&tr.t, &names, &cols).as_bytes())?;

    let mut cert_json = cert.to_json();
    cert_json["observer"] = obs.to_json();
    if let Observer::Luenberger(_) = obs {
        cert_json["design_alpha"] = json!(args.alpha);
    }
    write_json(dir, "certificate.json", &cert_json)?;

    let e_first = norms.first().copied().unwrap_or(0.0);
    let e_last = norms.last().copied().unwrap_or(0.0);
    let e_peak = norms.iter().fold(0.0f64, |m, &x| m.max(x));
    let track = tr
        .y_r
        .iter()
        .zip(&est.y_r_hat)
        .fold(0.0f64, |m, (y, yh)| m.max((y - yh).amax()));
    println!("observer: {:?}", args.kind);
    println!("  certified decay rate alpha = {:.6}", cert.alpha);
    if let Some(l) = cert.lmi_max_eig {
        println!("  LMI most-positive eigenvalue = {l:.6e}");
    }
    println!("  |e(0)| = {e_first:.6e}  |e(end)| = {e_last:.6e}  peak |e| = {e_peak:.6e}");
    println!("  max |y_r - y_r_hat| = {track:.6e}");
    Ok(())
}

pub fn closed_loop(args: &ClosedLoopArgs) -> CmdResult {
    let Loaded { model, selector } = load(&args.common)?;
    let pulse = parse_pulse(&args.time)?;
    let g = parse_list(&args.k_grid, "--k-grid", 3)?;
    let grid = control::gain_grid(g[0], g[1], g[2]).map_err(|e| fail(EXIT_FAILURE, e.to_string()))?;
    let diag = estimation::check_uio_existence(&model)?;
    if !diag.accepted() {
        return Err(fail(
            EXIT_EXISTENCE,
            format!("unknown-input observer does not exist: {}", diag.reasons().join("; ")),
        ));
    }
    let (uio, _) = estimation::design_uio(&model)?;
    let (wapss, report) = control::tune_static_gain(&model, &uio, &selector, &grid)?;
    let dir = out_dir(&args.common)?;

    let n = model.n();
    let x0 = DVector::zeros(n);
    let run = |k: f64| {
        simulate::simulate_closed_loop(&model, &uio, &selector, k, pulse.as_ref(), &x0, &x0, args.time.t_end, args.time.dt)
    };
    let (li, ri) = (selector.local_rows[0], selector.remote_rows[0]);
    let name = format!("dw{}", signal_suffix(&model, &selector));
    let open = run(0.0)?;
    let closed = run(wapss.k)?;
    let open_dw = open.output_difference(li, ri);
    let closed_dw = closed.output_difference(li, ri);
    let closed_hat = closed.synthesized_difference(li, ri);
    write(dir, "dw24_open.csv", simulate::csv_table(&open.t, std::slice::from_ref(&name), std::slice::from_ref(&open_dw)).as_bytes())?;
    write(
        dir,
        "dw24_closed.csv",
        simulate::csv_table(&closed.t, &[name.clone(), format!("{name}_hat")], &[closed_dw.clone(), closed_hat])
            .as_bytes(),
    )?;
    write_json(dir, "tuning.json", &report.to_json())?;

    let window = two_cycle_window(&model)?;
    let settle = pulse.map_or(0.0, |p| p.end()) + window;
    let vo = simulate::envelope_verdict(&open.t, &open_dw, settle, ENVELOPE_FRACTION);
    let vc = simulate::envelope_verdict(&closed.t, &closed_dw, settle, ENVELOPE_FRACTION);
    let verdict = |pass: bool| if pass { "PASS" } else { "FAIL" };
    println!("selected k = {}  min swing damping = {:.4}", wapss.k, report.best().min_damping().unwrap_or(f64::NAN));
    println!("augmented spectral abscissa = {:.6}", report.augmented_abscissa);
    println!("two-cycle window = {window:.3} s after pulse end");
    println!("  open loop  : residual/peak = {:.4}  {}", vo.ratio, verdict(vo.pass));
    println!("  closed loop: residual/peak = {:.4}  {}", vc.ratio, verdict(vc.pass));
    println!("two-cycle envelope verdict: {}", verdict(vc.pass));
    Ok(())
}

/// Machines whose speed difference forms the feedback signal, e.g. `24`.
fn signal_suffix(model: &Model, sel: &SignalSelector) -> String {
    let machine = |row: gridobs::nalgebra::DMatrix<f64>| -> String {
        let nz: Vec<usize> = (0..row.ncols()).filter(|&j| row[(0, j)] != 0.0).collect();
        match nz.as_slice() {
            [j] if model.state_labels()[*j].machine > 0 => model.state_labels()[*j].machine.to_string(),
            _ => "?".into(),
        }
    };
    format!("{}{}", machine(sel.local_row(model)), machine(sel.remote_row(model)))
}

/// Two periods of the lowest-frequency swing mode.
fn two_cycle_window(model: &Model) -> CmdResult<f64> {
    let swings = modal::identify_swing_modes(model, SWING_BAND, SWING_THRESHOLD)?;
    let m1 = swings.first().ok_or_else(|| fail(EXIT_FAILURE, "model has no swing modes"))?;
    Ok(2.0 * 2.0 * std::f64::consts::PI / m1.frequency)
}
