//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use percep::eval::{afc_credit, best_threshold_accuracy, mean_afc_credit, srocc};
use percep::inference::conv2d;
use percep::model_io::FixtureLayout;
use percep::perception::{mu1, mu2, perceptual_efficacy, read_scores_csv, CsfModel};
use percep::stimuli::{oriented_grating, radial_grating, StimulusGrid};
use percep::Tensor;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn random_tensor(rng: &mut ChaCha8Rng, shape: Vec<usize>) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.random_range(-1.0f32..1.0)).collect()).unwrap()
}

fn direct_conv(x: &Tensor, w: &Tensor, b: Option<&[f32]>, stride: usize, pad: usize) -> Vec<f64> {
    let (c, h, wd) = x.dims3().unwrap();
    let (o, kh, kw) = (w.shape()[0], w.shape()[2], w.shape()[3]);
    let oh = (h + 2 * pad - kh) / stride + 1;
    let ow = (wd + 2 * pad - kw) / stride + 1;
    let mut out = Vec::with_capacity(o * oh * ow);
    for m in 0..o {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut acc = b.map_or(0.0, |b| b[m] as f64);
                for ci in 0..c {
                    for ky in 0..kh {
                        for kx in 0..kw {
                            let iy = (oy * stride + ky) as isize - pad as isize;
                            let ix = (ox * stride + kx) as isize - pad as isize;
                            if (0..h as isize).contains(&iy) && (0..wd as isize).contains(&ix) {
                                acc += x.data()[(ci * h + iy as usize) * wd + ix as usize] as f64
                                    * w.data()[((m * c + ci) * kh + ky) * kw + kx] as f64;
                            }
                        }
                    }
                }
                out.push(acc);
            }
        }
    }
    out
}

fn conv_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for case in 0..50 {
        let c = rng.random_range(1..6);
        let o = rng.random_range(1..9);
        let k = rng.random_range(1..8);
        let stride = rng.random_range(1..4);
        let pad = rng.random_range(0..4);
        let h = rng.random_range(k..40);
        let w = rng.random_range(k..40);
        let x = random_tensor(&mut rng, vec![c, h, w]);
        let wt = random_tensor(&mut rng, vec![o, c, k, k]);
        let bias: Option<Vec<f32>> = rng
            .random_bool(0.5)
            .then(|| (0..o).map(|_| rng.random_range(-1.0f32..1.0)).collect());
        let got = conv2d(&x, &wt, bias.as_deref(), stride, pad).map_err(|e| e.to_string())?;
        let want = direct_conv(&x, &wt, bias.as_deref(), stride, pad);
        check(got.len() == want.len(), format!("case {case}: size mismatch"))?;
        let scale = want.iter().fold(1e-12f64, |m, v| m.max(v.abs()));
        for (g, w) in got.data().iter().zip(&want) {
            worst = worst.max((*g as f64 - w).abs() / scale);
        }
    }
    let elapsed = start.elapsed();
    check(worst <= 1e-4, format!("max relative error {worst:.2e}"))?;
    check(elapsed < Duration::from_secs(30), format!("took {elapsed:?}"))?;
    Ok(format!("50 cases, max relative error {worst:.2e}, {elapsed:.2?}"))
}

fn score_units() -> Outcome {
    let e = |r: percep::Result<f64>| r.map_err(|e| e.to_string());
    let freqs: Vec<f64> = (0..63).map(|i| 0.5 + 0.25 * i as f64).collect();
    let csf = CsfModel::default();
    check(e(mu1(&vec![0.7; 63], &csf, &freqs))? == 0.0, "mu1 of a constant curve")?;
    check(e(mu2(&vec![0.7; 36]))? == 0.0, "mu2 of a constant curve")?;
    let mut one_hot = vec![0.0; 36];
    one_hot[0] = 1.0;
    let m2 = e(mu2(&one_hot))?;
    check(m2 == 35.0, format!("one-hot mu2 = {m2}"))?;
    let pe = perceptual_efficacy("l", &[1.0, 3.0], &[2.0, 2.0]).map_err(|e| e.to_string())?;
    check(pe == [0.125, 0.375], format!("hand case {pe:?}"))?;
    let m1 = [0.3, 1.7, 0.02, 5.5];
    let m2v = [1.0, 0.25, 3.0, 0.5];
    let base = perceptual_efficacy("l", &m1, &m2v).unwrap();
    let mut worst = 0.0f64;
    for k in [1e-6, 0.37, 3.0, 1e4] {
        let scaled: Vec<f64> = m1.iter().map(|v| v * k).collect();
        let pe = perceptual_efficacy("l", &scaled, &m2v).unwrap();
        for (a, b) in pe.iter().zip(&base) {
            worst = worst.max((a - b).abs());
        }
    }
    check(worst <= 1e-12, format!("scaling deviation {worst:.2e}"))?;
    Ok(format!("one-hot mu2 = {m2}, PE {pe:?}, scaling deviation {worst:.1e}"))
}

fn dft_peak(signal: &[f64]) -> usize {
    let n = signal.len();
    let mean = signal.iter().sum::<f64>() / n as f64;
    let mag = |k: usize| {
        let (mut re, mut im) = (0.0, 0.0);
        for (t, &s) in signal.iter().enumerate() {
            let a = -2.0 * PI * (k * t) as f64 / n as f64;
            re += (s - mean) * a.cos();
            im += (s - mean) * a.sin();
        }
        re.hypot(im)
    };
    (1..=n / 2).fold(1, |best, k| if mag(k) > mag(best) { k } else { best })
}

fn stimulus_suite() -> Outcome {
    let n = 128;
    let grid = StimulusGrid::with_size(1, n, n);
    let mut worst_bin = 0.0f64;
    for &cpd in &[0.5, 1.0, 3.25, 6.0, 8.0, 11.75, 16.0] {
        let target = grid.geometry.cycles_per_pixel(cpd) * n as f64;
        let img = oriented_grating(0.0, cpd, &grid).unwrap();
        let row: Vec<f64> = img.data()[n / 2 * n..(n / 2 + 1) * n].iter().map(|&v| v as f64).collect();
        worst_bin = worst_bin.max((dft_peak(&row) as f64 - target).abs());
        let img = radial_grating(cpd, &grid).unwrap();
        let half: Vec<f64> = img.data()[n / 2 * n + n / 2..(n / 2 + 1) * n].iter().map(|&v| v as f64).collect();
        worst_bin = worst_bin.max((dft_peak(&half) as f64 - target / 2.0).abs());
    }
    check(worst_bin <= 1.0, format!("peak {worst_bin} bins off target"))?;
    for theta in (0..36).map(|i| i as f64 * 5.0) {
        for cpd in [2.0, 8.0] {
            let a = oriented_grating(theta, cpd, &grid).unwrap();
            let b = oriented_grating(theta + 180.0, cpd, &grid).unwrap();
            check(a == b, format!("theta {theta} and theta+180 differ"))?;
        }
    }
    // At 32 px/deg every 0.25 cpd step puts a whole number of periods across
    // 128 px along x for theta = 0 and along y for theta = 90; theta = 60
    // covers whole periods along x when f is a multiple of 0.5 cpd.
    let mut worst_mean = 0.0f64;
    for &cpd in &grid.frequencies {
        let mut thetas = vec![0.0, 90.0];
        if (cpd * 2.0).fract() == 0.0 {
            thetas.push(60.0);
        }
        for theta in thetas {
            let img = oriented_grating(theta, cpd, &grid).unwrap();
            worst_mean = worst_mean.max((img.mean() - 0.5).abs());
        }
    }
    check(worst_mean <= 0.01, format!("mean luminance off by {worst_mean}"))?;
    Ok(format!(
        "peak within {worst_bin} bin, theta/theta+180 exact, |mean - 0.5| <= {worst_mean:.1e}"
    ))
}

fn statistics_suite() -> Outcome {
    let s = |x: &[f64], y: &[f64]| srocc(x, y).map_err(|e| e.to_string());
    let x = [1.0, 2.0, 3.0, 4.0, 5.0];
    check(s(&x, &[2.0, 4.0, 8.0, 16.0, 32.0])? == 1.0, "increasing != 1")?;
    check(s(&x, &[5.0, 4.0, 3.0, 2.0, 1.0])? == -1.0, "reversed != -1")?;
    let r = s(&[1.0, 2.0, 3.0, 4.0], &[2.0, 1.0, 4.0, 3.0])?;
    check((r - 0.6).abs() < 1e-12, format!("hand case {r}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..100 {
        let n = rng.random_range(3..30);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let base = s(&x, &y)?;
        let ex: Vec<f64> = x.iter().map(|v| v.exp()).collect();
        let cy: Vec<f64> = y.iter().map(|v| v * v * v).collect();
        check((s(&ex, &cy)? - base).abs() <= 1e-12, "srocc changed under exp/cube")?;
    }

    let mut instances = 0;
    while instances < 100 {
        let n = rng.random_range(2..40);
        let d: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let l: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
        if l.iter().all(|&v| v) || l.iter().all(|&v| !v) {
            continue;
        }
        instances += 1;
        let (acc, _) = best_threshold_accuracy(&d, &l).map_err(|e| e.to_string())?;
        let pos = l.iter().filter(|&&v| v).count();
        let majority = 100.0 * pos.max(n - pos) as f64 / n as f64;
        check(acc >= majority, format!("accuracy {acc} below majority {majority}"))?;
    }

    let p: Vec<f64> = (0..200).map(|_| rng.random_range(0.0..=1.0)).collect();
    let afc = mean_afc_credit(&vec![0.1; 200], &vec![0.2; 200], &p).map_err(|e| e.to_string())?;
    let mean = p.iter().sum::<f64>() / p.len() as f64;
    check((afc - mean).abs() <= 1e-12, format!("always-I1 {afc} vs mean(p) {mean}"))?;
    check(afc_credit(0.1, 0.2, 0.7) == 0.7, "credit rule")?;
    Ok(format!("srocc 1/-1/{r:.1}, monotone invariance, JND >= majority on 100, always-I1 = mean(p)"))
}

fn percep(dir: &Path, args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_percep"))
        .current_dir(dir)
        .args(args)
        .env_remove("PERCEP_THREADS")
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!(
            "percep {} failed: {}",
            args.join(" "),
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn read_srocc(path: &Path) -> Result<f64, String> {
    let text = std::fs::read_to_string(path).map_err(|e| e.to_string())?;
    let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    v["statistics"]["srocc"]
        .as_f64()
        .ok_or_else(|| format!("no srocc in {}", path.display()))
}

fn fixture_end_to_end() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let dir = tmp.path();
    let start = Instant::now();
    let t1 = ["--threads", "1"];
    percep(dir, &[&t1[..], &["gen-fixture", "--seed", "7", "--out", "fx", "--datasets"]].concat())?;
    percep(dir, &[&t1[..], &["probe", "--model", "fx/model.json", "--out", "scores.csv"]].concat())?;
    let scores = read_scores_csv(std::fs::File::open(dir.join("scores.csv")).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let layout = FixtureLayout::standard();
    let worst_gabor = layout.gabor.clone().map(|m| scores[m].rank).max().unwrap();
    check(
        worst_gabor == layout.gabor.len(),
        format!("a non-Gabor channel outranks a Gabor channel (worst Gabor rank {worst_gabor})"),
    )?;
    for mode in ["high", "low"] {
        percep(
            dir,
            &[
                &t1[..],
                &[
                    "evaluate", "--protocol", "qa", "--manifest", "fx/datasets/qa.csv",
                    "--model", "fx/model.json", "--scores", "scores.csv", "--mode", mode,
                    "--percent", "25", "--out", &format!("{mode}.json"),
                ],
            ]
            .concat(),
        )?;
    }
    let elapsed = start.elapsed();
    let (h, l) = (read_srocc(&dir.join("high.json"))?, read_srocc(&dir.join("low.json"))?);
    let detail = format!(
        "Gabor channels hold PE ranks 1-8; srocc H-25 {h:.4} vs L-25 {l:.4} (diff {:+.4}); {elapsed:.2?}",
        h - l
    );
    check(h - l > 0.0, detail.clone())?;
    check(elapsed < Duration::from_secs(120), detail.clone())?;
    Ok(detail)
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let dir = tmp.path();
    percep(dir, &["gen-fixture", "--seed", "3", "--out", "fx", "--datasets"])?;
    let n = std::thread::available_parallelism().map_or(4, |n| n.get()).max(2).to_string();
    let runs = [("1", "a"), ("1", "b"), (n.as_str(), "c")];
    for (threads, tag) in runs {
        percep(
            dir,
            &["--threads", threads, "probe", "--model", "fx/model.json", "--out", &format!("{tag}/scores.csv")],
        )?;
        for (protocol, manifest) in [("qa", "qa.csv"), ("jnd", "jnd.csv"), ("2afc", "2afc.csv")] {
            percep(
                dir,
                &[
                    "--threads", threads, "evaluate", "--protocol", protocol,
                    "--manifest", &format!("fx/datasets/{manifest}"), "--model", "fx/model.json",
                    "--scores", &format!("{tag}/scores.csv"), "--mode", "high", "--percent", "25",
                    "--out", &format!("{tag}/{protocol}.json"),
                ],
            )?;
        }
    }
    let files = [
        "scores.csv", "scores.freq.csv", "scores.orient.csv", "qa.json", "jnd.json", "2afc.json",
    ];
    for f in files {
        let a = std::fs::read(dir.join("a").join(f)).map_err(|e| e.to_string())?;
        for other in ["b", "c"] {
            let b = std::fs::read(dir.join(other).join(f)).map_err(|e| e.to_string())?;
            check(a == b, format!("{f} differs between run a and run {other}"))?;
        }
    }
    Ok(format!("{} files byte-identical over 2 runs and --threads 1 vs {n}", files.len()))
}

fn main() {
    let criteria: [Criterion; 6] = [
        ("convolution oracle", conv_oracle),
        ("mu1/mu2/PE unit suite", score_units),
        ("stimulus suite", stimulus_suite),
        ("statistics suite", statistics_suite),
        ("fixture end-to-end", fixture_end_to_end),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(run))
            .unwrap_or_else(|p| Err(format!("panicked: {:?}", p.downcast_ref::<String>())));
        match outcome {
            Ok(detail) => println!("PASS [PRIMARY] {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL [PRIMARY] {name}: {detail}");
            }
        }
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
