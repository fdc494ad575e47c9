//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

use std::collections::VecDeque;
use std::process::Command as Proc;
use std::time::{Duration, Instant};

use mipilot_core::comlink::{
    decode, elevon_step, encode, Command, CommandFrame, CommandMap, ElevonState, QuadCommandLog,
};
use mipilot_core::csp::{apply_csp, extract_features, fit_csp};
use mipilot_core::filter::bandpass;
use mipilot_core::lda::{fisher_criterion, fit_lda};
use mipilot_core::linalg::Matrix;
use mipilot_core::signal::{epoch_windows, extract_epoch, ClassId, SpatialCovariance};
use mipilot_core::stream::{Decision, DecisionClass, PipelineConfig, RollingVariance, StreamClassifier};
use mipilot_core::svm::{fit_binary_svm_detailed, gram_matrix, kernel_eval, KernelSpec, SmoParams, DEFAULT_C_CAP};
use mipilot_core::synth::{generate_session, generate_trial, NormalStream, SessionLayout, SynthSpec};
use mipilot_core::training::{evaluate, train, Mode, TrainConfig};
use nalgebra::{DMatrix, DVector};

type Criterion = (&'static str, Duration, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn na(m: &Matrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

fn random_spd(rng: &mut NormalStream, ch: usize) -> SpatialCovariance {
    let a = DMatrix::from_fn(ch, ch + 2, |_, _| rng.normal());
    let c = &a * a.transpose() + DMatrix::identity(ch, ch) * (0.05 * ch as f64);
    let data: Vec<f64> = c.transpose().iter().copied().collect();
    SpatialCovariance::normalized(Matrix::from_row_major(ch, ch, data).unwrap()).unwrap()
}

fn csp_joint_diagonalization() -> Outcome {
    let mut rng = NormalStream::new(0xC5);
    let (mut whitening, mut off_diag) = (0.0f64, 0.0f64);
    for k in 0..200 {
        let ch = [2, 4, 8, 14][k % 4];
        let (s1, s2) = (random_spd(&mut rng, ch), random_spd(&mut rng, ch));
        let model = fit_csp(&s1, &s2, 1).unwrap();
        let w = na(model.w_full());
        let (a, b) = (na(s1.matrix()), na(s2.matrix()));
        let sum = w.transpose() * (&a + &b) * &w - DMatrix::identity(ch, ch);
        whitening = whitening.max(sum.amax());
        let d1 = w.transpose() * &a * &w;
        for i in 0..ch {
            for j in 0..ch {
                if i != j {
                    off_diag = off_diag.max(d1[(i, j)].abs());
                }
            }
        }
    }
    Outcome {
        pass: whitening <= 1e-8 && off_diag <= 1e-8,
        detail: format!("max|WᵀΣW−I|={whitening:.2e} max offdiag(WᵀΣ₁W)={off_diag:.2e} (≤1e-8, 200 pairs)"),
    }
}

fn cloud(rng: &mut NormalStream, mix: &DMatrix<f64>, shift: &DVector<f64>, n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            let z = DVector::from_fn(mix.ncols(), |_, _| rng.normal());
            (mix * z + shift).iter().copied().collect()
        })
        .collect()
}

fn mean_scatter(xs: &[Vec<f64>]) -> (DVector<f64>, DMatrix<f64>) {
    let d = xs[0].len();
    let n = xs.len() as f64;
    let mu = xs
        .iter()
        .fold(DVector::zeros(d), |acc, x| acc + DVector::from_column_slice(x))
        / n;
    let s = xs.iter().fold(DMatrix::zeros(d, d), |acc, x| {
        let v = DVector::from_column_slice(x) - &mu;
        acc + &v * v.transpose()
    }) / n;
    (mu, s)
}

fn lda_oracle_equivalence() -> Outcome {
    let mut rng = NormalStream::new(0x1DA);
    let (mut worst_cos, mut beaten) = (1.0f64, 0usize);
    let (c1, c2) = (ClassId::new(1).unwrap(), ClassId::new(2).unwrap());
    for k in 0..100 {
        let d = 2 + k % 5;
        let mix = DMatrix::from_fn(d, d, |_, _| rng.normal());
        let shift = DVector::from_fn(d, |_, _| 0.7 * rng.normal());
        let a = cloud(&mut rng, &mix, &shift, 40);
        let b = cloud(&mut rng, &mix, &(-&shift), 35);
        let (model, report) = fit_lda(&a, &b, c1, c2).unwrap();
        let (m1, s1) = mean_scatter(&a);
        let (m2, s2) = mean_scatter(&b);
        let oracle = (s1 + s2).lu().solve(&(m1 - m2)).unwrap().normalize();
        worst_cos = worst_cos.min(DVector::from_column_slice(model.w()).dot(&oracle));
        let best = fisher_criterion(model.w(), &report.sb, &report.sw);
        for _ in 0..1000 {
            let v: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
            if fisher_criterion(&v, &report.sb, &report.sw) > best + 1e-9 {
                beaten += 1;
            }
        }
    }
    Outcome {
        pass: worst_cos >= 1.0 - 1e-10 && beaten == 0,
        detail: format!("min cosine={worst_cos:.15} (≥1−1e-10), random directions beating J(ŵ)={beaten}/100000"),
    }
}

/// Exact dual optimum by enumerating box faces.
fn brute_dual(q: &DMatrix<f64>, y: &[f64], c: f64) -> f64 {
    let n = y.len();
    let mut best = f64::NEG_INFINITY;
    for code in 0..3usize.pow(n as u32) {
        let state: Vec<usize> = (0..n).map(|i| code / 3usize.pow(i as u32) % 3).collect();
        let free: Vec<usize> = (0..n).filter(|&i| state[i] == 2).collect();
        let mut alpha = DVector::from_fn(n, |i, _| if state[i] == 1 { c } else { 0.0 });
        let fixed: f64 = (0..n).map(|i| alpha[i] * y[i]).sum();
        if free.is_empty() {
            if fixed.abs() > 1e-9 * c.max(1.0) {
                continue;
            }
        } else {
            let f = free.len();
            let mut m = DMatrix::zeros(f + 1, f + 1);
            let mut r = DVector::zeros(f + 1);
            for (a, &i) in free.iter().enumerate() {
                for (b, &j) in free.iter().enumerate() {
                    m[(a, b)] = q[(i, j)];
                }
                m[(a, f)] = y[i];
                m[(f, a)] = y[i];
                r[a] = 1.0 - (0..n).filter(|&j| state[j] == 1).map(|j| q[(i, j)] * c).sum::<f64>();
            }
            r[f] = -fixed;
            let sol = m.clone().pseudo_inverse(1e-12).unwrap() * &r;
            if (&m * &sol - &r).amax() > 1e-7 * (1.0 + r.amax()) {
                continue;
            }
            let tol = 1e-9 * c.max(1.0);
            if (0..f).any(|a| sol[a] < -tol || sol[a] > c + tol) {
                continue;
            }
            for (a, &i) in free.iter().enumerate() {
                alpha[i] = sol[a].clamp(0.0, c);
            }
        }
        best = best.max(alpha.sum() - 0.5 * (alpha.transpose() * q * &alpha)[(0, 0)]);
    }
    best
}

fn kkt(xs: &[Vec<f64>], ys: &[i8], alpha: &[f64], b: f64, k: &KernelSpec, c: f64) -> f64 {
    let mut worst = 0.0f64;
    for (i, x) in xs.iter().enumerate() {
        let f: f64 = (0..xs.len())
            .map(|j| alpha[j] * ys[j] as f64 * kernel_eval(&xs[j], x, k).unwrap())
            .sum::<f64>()
            + b;
        let m = ys[i] as f64 * f - 1.0;
        let eps = 1e-9 * c.max(1.0);
        worst = worst.max(if alpha[i] <= eps {
            (-m).max(0.0)
        } else if alpha[i] >= c - eps {
            m.max(0.0)
        } else {
            m.abs()
        });
    }
    worst
}

fn svm_dual_correctness() -> Outcome {
    let mut rng = NormalStream::new(0x5E7);
    let kernel = KernelSpec::default();
    let mut sets: Vec<(Vec<Vec<f64>>, Vec<i8>, f64)> = Vec::new();
    while sets.len() < 50 {
        let n = 3 + sets.len() % 6;
        let d = 2 + sets.len() % 3;
        let xs: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.normal()).collect()).collect();
        let ys: Vec<i8> = (0..n).map(|_| if rng.uniform() < 0.5 { 1 } else { -1 }).collect();
        if ys.contains(&1) && ys.contains(&-1) {
            sets.push((xs, ys, 10.0));
        }
    }
    sets.push((
        vec![vec![1.0, 1.0], vec![-1.0, -1.0], vec![1.0, -1.0], vec![-1.0, 1.0]],
        vec![1, 1, -1, -1],
        DEFAULT_C_CAP,
    ));
    let (mut gap, mut resid) = (0.0f64, 0.0f64);
    for (xs, ys, c) in &sets {
        let fit = fit_binary_svm_detailed(xs, ys, kernel, *c, SmoParams::default()).unwrap();
        let y: Vec<f64> = ys.iter().map(|&v| v as f64).collect();
        let g = na(&gram_matrix(xs, &kernel));
        let q = DMatrix::from_fn(y.len(), y.len(), |i, j| y[i] * y[j] * g[(i, j)]);
        gap = gap.max((fit.objective - brute_dual(&q, &y, *c)).abs());
        resid = resid.max(kkt(xs, ys, &fit.alphas, fit.model.bias(), &kernel, *c));
    }
    Outcome {
        pass: gap <= 1e-4 && resid <= 1e-6,
        detail: format!("max objective gap={gap:.2e} (≤1e-4), max KKT residual={resid:.2e} (≤1e-6), 51 sets"),
    }
}

fn svm_two_point() -> Outcome {
    let fit = fit_binary_svm_detailed(
        &[[1.0], [-1.0]],
        &[1, -1],
        KernelSpec::new(1).unwrap(),
        f64::INFINITY,
        SmoParams::default(),
    )
    .unwrap();
    let (a1, a2, b) = (fit.alphas[0], fit.alphas[1], fit.model.bias());
    Outcome {
        pass: (a1 - 0.5).abs() <= 1e-8 && (a2 - 0.5).abs() <= 1e-8 && b.abs() <= 1e-8,
        detail: format!("α=({a1}, {a2}) b={b}"),
    }
}

fn held_out(mode: Mode) -> f64 {
    let spec = SynthSpec::motor_imagery(14, mode.class_count(), 4.0, 128.0, 0x5EED, 7).unwrap();
    let layout = SessionLayout {
        trials_per_class: 20,
        trial_s: 4.0,
        rest_s: 2.0,
    };
    let train_set = generate_session(&spec, &layout).unwrap();
    let test_set = generate_session(&spec.with_seed(8), &layout).unwrap();
    let cfg = TrainConfig::new(mode, 128.0);
    let model = train(&train_set, &cfg).unwrap();
    evaluate(&model, &test_set, cfg.zero_phase, cfg.window_stride)
        .unwrap()
        .accuracy()
}

fn end_to_end_accuracy() -> Outcome {
    let two = held_out(Mode::TwoClass);
    let four = held_out(Mode::FourClass);
    Outcome {
        pass: two >= 0.95 && four >= 0.85,
        detail: format!("2-class LDA held-out={two:.4} (≥0.95), 4-class SVM held-out={four:.4} (≥0.85)"),
    }
}

fn metric(out: &str, key: &str) -> Option<f64> {
    out.lines()
        .filter(|l| l.starts_with("rate="))
        .flat_map(|l| l.split(','))
        .find_map(|kv| kv.strip_prefix(key)?.strip_prefix('=')?.parse().ok())
}

fn bench(mode: &str, extra: &[&str]) -> Result<(f64, f64, f64), String> {
    let out = Proc::new(env!("CARGO_BIN_EXE_mipilot"))
        .args(["bench", "--mode", mode, "--seconds", "10"])
        .args(extra)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(String::from_utf8_lossy(&out.stderr).into_owned());
    }
    let text = String::from_utf8_lossy(&out.stdout);
    let get = |k| metric(&text, k).ok_or(format!("no {k} in output"));
    Ok((get("rate")?, get("wall_s")?, get("data_s")?))
}

fn throughput() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for mode in ["two_class", "four_class"] {
        match (bench(mode, &["--realtime"]), bench(mode, &[])) {
            (Ok((rt, wall, data)), Ok((max, _, _))) => {
                pass &= rt >= 90.0 && data >= 10.0;
                let stretch = if rt >= 97.0 { "met" } else { "missed" };
                parts.push(format!(
                    "{mode}: paced {rt:.1}/s over {data:.0}s of data ({wall:.2}s wall) (stretch 97 {stretch}), unpaced {max:.0}/s"
                ));
            }
            (Err(e), _) | (_, Err(e)) => {
                pass = false;
                parts.push(format!("{mode}: bench failed: {}", e.trim()));
            }
        }
    }
    Outcome {
        pass,
        detail: parts.join("; "),
    }
}

fn codec_and_sinks() -> Outcome {
    let mut rng = NormalStream::new(0xF4);
    let map = CommandMap::four_class();
    let mut round_trips = 0;
    for class in ClassId::all() {
        for _ in 0..1000 {
            let seq = (rng.uniform() * 65536.0) as u16;
            let d = Decision {
                timestamp: 0,
                class: DecisionClass::Class(class),
                confidence: 0.0,
                latency_us: 0,
            };
            let f = decode(&encode(&d, &map, seq).unwrap()).unwrap();
            if f.seq == seq && Some(f.cmd) == map.get(class) {
                round_trips += 1;
            }
        }
    }
    let cmds = [Command::Left, Command::Right, Command::Hold];
    let mut state = ElevonState::default();
    let mut clamp_ok = true;
    for i in 0..100_000u32 {
        let c = cmds[(rng.uniform() * 3.0) as usize % 3];
        state = elevon_step(state, &CommandFrame::new(c, i as u16)).unwrap();
        clamp_ok &= state.left_deg.abs() <= 30.0 && state.right_deg.abs() <= 30.0;
    }
    let mut log = QuadCommandLog::new();
    let mut sent = Vec::new();
    let mut seq = 65_000u16;
    for t in 0..20_000u64 {
        let r = rng.uniform();
        let f = if r < 0.6 || sent.is_empty() {
            seq = seq.wrapping_add(1);
            sent.push(CommandFrame::new(Command::Forward, seq));
            *sent.last().unwrap()
        } else {
            sent[sent.len() - 1 - ((rng.uniform() * sent.len().min(100) as f64) as usize).min(sent.len() - 1)]
        };
        log.ingest(&f, t);
    }
    let monotone = log
        .entries()
        .windows(2)
        .all(|w| (1..0x8000).contains(&w[1].seq.wrapping_sub(w[0].seq)));
    let complete = log.entries().len() == sent.len();
    Outcome {
        pass: round_trips == 4000 && clamp_ok && monotone && complete,
        detail: format!(
            "round trips={round_trips}/4000, elevon clamp held over 1e5 frames={clamp_ok}, quad monotone={monotone} ({} accepted, {} duplicate, {} stale)",
            log.entries().len(),
            log.duplicates(),
            log.stale()
        ),
    }
}

fn streaming_equivalence() -> Outcome {
    let len = 128;
    let mut rng = NormalStream::new(0x57);
    let mut rv = RollingVariance::new(len);
    let mut ring = VecDeque::with_capacity(len);
    let (mut worst, mut windows, mut step) = (0.0f64, 0u64, 0u64);
    while windows < 1_000_000 {
        let scale = if (step / 7000) % 2 == 0 { 1.0 } else { 30.0 };
        let x = 3.0 + scale * rng.normal();
        step += 1;
        rv.push(x);
        if ring.len() == len {
            ring.pop_front();
        }
        ring.push_back(x);
        if ring.len() < len {
            continue;
        }
        let v = ring.make_contiguous();
        let m = v.iter().sum::<f64>() / len as f64;
        let exact = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / len as f64;
        worst = worst.max((rv.variance() - exact).abs() / exact);
        windows += 1;
    }

    let spec = SynthSpec::motor_imagery(14, 2, 4.0, 128.0, 0x5EED, 3).unwrap();
    let layout = SessionLayout {
        trials_per_class: 6,
        trial_s: 4.0,
        rest_s: 0.0,
    };
    let mut cfg = TrainConfig::new(Mode::TwoClass, 128.0);
    cfg.zero_phase = false;
    let model = train(&generate_session(&spec, &layout).unwrap(), &cfg).unwrap();
    let trial = generate_trial(&spec.with_seed(4), ClassId::new(1).unwrap(), 40.0, 0).unwrap();
    let offline = bandpass(&trial, &model.band, false).unwrap();
    let mut sc = StreamClassifier::new(&model, PipelineConfig::for_model(&model)).unwrap();
    let mut epochs = epoch_windows(trial.len(), model.window_len, 1).unwrap();
    let mut feature_worst = 0.0f64;
    let mut compared = 0;
    for t in 0..trial.len() {
        if sc.push_sample(&trial.sample_at(t)).unwrap().is_some() {
            let e = epochs.next().unwrap();
            let streamed = sc.current_features().unwrap();
            let reference = extract_features(&apply_csp(&model.csp, &extract_epoch(&offline, e)).unwrap()).unwrap();
            for (a, b) in streamed.values().iter().zip(reference.values()) {
                feature_worst = feature_worst.max((a - b).abs() / b.abs().max(1e-300));
            }
            compared += 1;
        }
    }
    Outcome {
        pass: worst <= 1e-9 && feature_worst <= 1e-9,
        detail: format!(
            "rolling variance rel err={worst:.2e} over {windows} windows; pipeline features rel err={feature_worst:.2e} over {compared} windows (≤1e-9)"
        ),
    }
}

fn main() {
    let criteria: [Criterion; 8] = [
        (
            "csp-joint-diagonalization",
            Duration::from_secs(10),
            csp_joint_diagonalization,
        ),
        (
            "lda-oracle-equivalence",
            Duration::from_secs(10),
            lda_oracle_equivalence,
        ),
        ("svm-dual-correctness", Duration::from_secs(60), svm_dual_correctness),
        ("svm-two-point-analytic", Duration::from_secs(10), svm_two_point),
        (
            "end-to-end-synthetic-accuracy",
            Duration::from_secs(120),
            end_to_end_accuracy,
        ),
        ("throughput", Duration::from_secs(120), throughput),
        ("codec-and-sinks", Duration::from_secs(10), codec_and_sinks),
        (
            "streaming-offline-equivalence",
            Duration::from_secs(60),
            streaming_equivalence,
        ),
    ];
    let mut failed = 0;
    for (name, budget, run) in criteria {
        let start = Instant::now();
        let out = run();
        let took = start.elapsed();
        let pass = out.pass && took <= budget;
        if !pass {
            failed += 1;
        }
        println!(
            "{} {name}: {} [{:.2}s / {}s]",
            if pass { "PASS" } else { "FAIL" },
            out.detail,
            took.as_secs_f64(),
            budget.as_secs()
        );
    }
    println!("acceptance: {} passed, {failed} failed", 8 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
