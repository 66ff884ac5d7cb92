//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::Instant;

use lbcnnm::augment::{cnnm_forecast, generation_matrix};
use lbcnnm::diagnostics::CoherenceReport;
use lbcnnm::linalg::{l1_norm, numerical_rank};
use lbcnnm::metrics::{nrmse, smape};
use lbcnnm::model_selection::estimate_model_size;
use lbcnnm::pipeline::benchmark::missing_flags;
use lbcnnm::pipeline::{
    forecast, forecast_lbcnnm_with, forecast_missing, load_dataset, Baseline, DataModel, DatasetFormat, ForecastConfig,
    LoadedSeries, Method,
};
use lbcnnm::signal::{conv_matrix, SamplingMask, TimeSeries};
use lbcnnm::solvers::{
    lbcnnm_solve_direct, lbcnnm_solve_fft, nuclear_norm, orthonormal_fit_l1, orthonormal_fit_l2, pcp, AdmmConfig,
};
use lbcnnm::transform::{learn_pca, learn_pcp};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn gaussian(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.sample(StandardNormal))
}

fn conv_rank(z: &[f64], k: usize) -> usize {
    let c = conv_matrix(z, k).unwrap();
    let s: Vec<f64> = c.clone().svd(false, false).singular_values.iter().copied().collect();
    numerical_rank(&s, c.nrows(), c.ncols())
}

fn rel_err(est: &[f64], truth: &[f64]) -> f64 {
    let num: f64 = est.iter().zip(truth).map(|(a, b)| (a - b).powi(2)).sum();
    let den: f64 = truth.iter().map(|b| b * b).sum();
    (num / den).sqrt()
}

fn metric_exactness() -> Outcome {
    let (y, f) = ([1.0, 1.0], [10.0, 1.0]);
    let s = smape(&y, &f).unwrap();
    let n = nrmse(&y, &f).unwrap();
    check((s - 81.81).abs() < 0.01 && (n - 636.39).abs() < 0.01, format!("sMAPE {s:.4}, NRMSE {n:.4}"))
}

fn fourier_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for i in 0..200 {
        let w = [4, 16, 37, 128][i % 4];
        let z: Vec<f64> = (0..w).map(|_| rng.sample(StandardNormal)).collect();
        let dft_l1: f64 = (0..w)
            .map(|f| {
                let (mut re, mut im) = (0.0, 0.0);
                for (t, v) in z.iter().enumerate() {
                    let a = -2.0 * std::f64::consts::PI * ((f * t) % w) as f64 / w as f64;
                    re += v * a.cos();
                    im += v * a.sin();
                }
                re.hypot(im)
            })
            .sum();
        let nn = nuclear_norm(&conv_matrix(&z, w).unwrap());
        worst = worst.max((nn - dft_l1).abs() / dft_l1);
    }
    check(worst < 1e-6, format!("max relative gap {worst:.2e} over 200 vectors"))
}

fn structural_rank_bounds() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for p in 1..=6 {
        for c in 1..=4 {
            let base: Vec<f64> = (0..p).map(|_| rng.sample(StandardNormal)).collect();
            let z: Vec<f64> = (0..c * p).map(|i| base[i % p]).collect();
            for k in 1..=z.len() {
                let r = conv_rank(&z, k);
                if r > p {
                    return Err(format!("periodic p={p} c={c} k={k}: rank {r}"));
                }
            }
        }
    }
    let line: Vec<f64> = (0..80).map(|t| 0.7 * t as f64 - 3.0).collect();
    for m in [5, 20, 40] {
        let g = generation_matrix(&line, m).unwrap();
        let s: Vec<f64> = g.clone().svd(false, false).singular_values.iter().copied().collect();
        let r = numerical_rank(&s, g.nrows(), g.ncols());
        if r > 2 {
            return Err(format!("linear generation matrix m={m}: rank {r}"));
        }
    }
    for _ in 0..5 {
        let v = gaussian(&mut rng, 9, 1);
        let model = learn_pca(&v).unwrap();
        let av = model.apply(v.as_slice()).unwrap();
        for k in 1..=model.q() {
            let r = conv_rank(&av, k);
            if r > 2 {
                return Err(format!("single-vector PCA k={k}: rank {r}"));
            }
        }
    }
    Ok("periodic ≤ p, linear G0 ≤ 2, single-vector PCA ≤ 2".into())
}

fn simulation_coherences() -> Outcome {
    let train: Vec<f64> = (1..=200).map(|i| i as f64 + 1.0).collect();
    let (m, h) = (90, 10);
    let g = generation_matrix(&train, m).unwrap();
    let model = learn_pcp(&g).unwrap();
    let a = model.matrix();
    let q = model.q();
    let mut ranks = Vec::new();
    let (mut mu_a, mut mu2) = (Vec::new(), Vec::new());
    for col in g.column_iter() {
        let rep = CoherenceReport::compute(a, col.as_slice(), q, h).unwrap();
        ranks.push(rep.conv_rank);
        mu_a.push(rep.mu_a);
        mu2.push(rep.mu2);
    }
    let test = CoherenceReport::compute(a, &[2.0; 90], q, h).unwrap();
    let spread = |v: &[f64], c: f64| v.iter().map(|x| (x - c).abs()).fold(0.0, f64::max);
    let ok_train = ranks.iter().all(|&r| r == 3) && spread(&mu_a, 2.62) <= 0.05 && spread(&mu2, 1.0) <= 0.05;
    let ok_test = test.conv_rank == 3 && (test.mu_a - 2.62).abs() <= 0.05 && (test.mu2 - 1.0).abs() <= 0.05;
    let ok_bar = (test.mu_bar_a - 12.66).abs() <= 0.1;
    let ok_tilde = (test.mu_tilde_a - 2.36).abs() <= 0.05;
    let detail = format!(
        "train r∈[{},{}] μ_A∈[{:.3},{:.3}] μ̂₂∈[{:.3},{:.3}]; test r={} μ_A={:.3} μ̂₂={:.3}; μ̄(A)={:.3} (want 12.66) μ̃(A)={:.3} (want 2.36)",
        ranks.iter().min().unwrap(),
        ranks.iter().max().unwrap(),
        mu_a.iter().cloned().fold(f64::INFINITY, f64::min),
        mu_a.iter().cloned().fold(0.0, f64::max),
        mu2.iter().cloned().fold(f64::INFINITY, f64::min),
        mu2.iter().cloned().fold(0.0, f64::max),
        test.conv_rank,
        test.mu_a,
        test.mu2,
        test.mu_bar_a,
        test.mu_tilde_a,
    );
    check(ok_train && ok_test && ok_bar && ok_tilde, detail)
}

fn exact_recovery() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let cfg = AdmmConfig::default();
    let (mut worst_clean, mut worst_ratio): (f64, f64) = (0.0, 0.0);
    for p in [4, 6, 8, 10, 12] {
        let base: Vec<f64> = (0..p).map(|_| 10.0 + 3.0 * rng.sample::<f64, _>(StandardNormal)).collect();
        let (m, h) = (4 * p, p / 2);
        let l = 3 * m;
        let series: Vec<f64> = (0..l + h).map(|t| base[t % p]).collect();
        let (hist, truth) = series.split_at(l);
        let x = cnnm_forecast(hist, h, m, &cfg).unwrap();
        worst_clean = worst_clean.max(rel_err(&x[m - h..], truth));

        let noise: Vec<f64> = (0..l).map(|_| rng.sample(StandardNormal)).collect();
        let window = &hist[l - (m - h)..];
        let scale = (window.iter().map(|v| v * v).sum::<f64>()
            / noise[l - (m - h)..].iter().map(|v| v * v).sum::<f64>())
        .sqrt();
        let noisy: Vec<f64> = hist.iter().zip(&noise).map(|(v, e)| v + 0.01 * scale * e).collect();
        let x = cnnm_forecast(&noisy, h, m, &cfg).unwrap();
        worst_ratio = worst_ratio.max(rel_err(&x[m - h..], truth) / 0.01);
    }

    let line = |t: usize| 1.5 * t as f64 + 12.0;
    let (l, h, m) = (100, 8, 30);
    let s = TimeSeries::new("trend", (0..l).map(line).collect(), h).unwrap();
    let truth: Vec<f64> = (l..l + h).map(line).collect();
    let fcfg = ForecastConfig { model_size: Some(m), ..Default::default() };
    let r = forecast_lbcnnm_with(&s, DataModel::G0Pca, &fcfg);
    let trend = rel_err(&r.forecast, &truth);
    check(
        worst_clean < 1e-3 && trend < 0.01 && worst_ratio < 5.0,
        format!(
            "(a) CNNM periodic rel err {worst_clean:.2e}; (b) PCA trend rel err {trend:.2e}; (c) noisy err / noise {worst_ratio:.2}"
        ),
    )
}

fn pcp_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let l0 = gaussian(&mut rng, 40, 2) * gaussian(&mut rng, 2, 60);
    let big = 10.0 * l0.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let s0 = DMatrix::from_fn(40, 60, |_, _| {
        if rng.random::<f64>() < 0.05 {
            if rng.random::<bool>() {
                big
            } else {
                -big
            }
        } else {
            0.0
        }
    });
    let res = pcp(&(&l0 + &s0), 1.0 / 60f64.sqrt()).unwrap();
    let err = (&res.l - &l0).norm() / l0.norm();
    check(err < 1e-3, format!("‖L−L0‖/‖L0‖ = {err:.2e}"))
}

fn l1_fit_planted() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let m = 8;
    let b0 = gaussian(&mut rng, 2 * m, m).qr().q();
    let y = gaussian(&mut rng, m, 40);
    let e = &b0 * &y;
    let b = orthonormal_fit_l1(&y, &e, &AdmmConfig::default()).unwrap();
    let obj = l1_norm(&(&b * &y - &e));
    let bound = 1e-5 * l1_norm(&e);
    let first = orthonormal_fit_l1(&y, &e, &AdmmConfig { max_iters: 1, ..Default::default() }).unwrap();
    let same = first == orthonormal_fit_l2(&y, &e).unwrap();
    check(obj < bound && same, format!("objective {obj:.2e} vs bound {bound:.2e}; first iterate equals ℓ2: {same}"))
}

fn fft_fast_path() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst: f64 = 0.0;
    for i in 0..20 {
        let m = 6 + i % 7;
        let h = 1 + m / 4;
        let train: Vec<f64> = (0..3 * m).map(|_| 20.0 + rng.sample::<f64, _>(StandardNormal)).collect();
        let g = generation_matrix(&train, m).unwrap();
        let a = learn_pcp(&g).unwrap().matrix().clone();
        let mut y = train[train.len() - m..].to_vec();
        y[m - h..].iter_mut().for_each(|v| *v = 0.0);
        let mask = SamplingMask::prefix(m, m - h).unwrap();
        let cfg = AdmmConfig::default();
        let f = lbcnnm_solve_fft(&y, &mask, &a, 1000.0, &cfg).unwrap();
        let d = lbcnnm_solve_direct(&y, &mask, &a, 2 * m, 1000.0, &cfg).unwrap();
        for (u, v) in f.x.iter().zip(&d.x) {
            worst = worst.max((u - v).abs());
        }
    }
    check(worst < 1e-8, format!("max |x_fft − x_direct| = {worst:.2e} over 20 instances"))
}

fn mean_metric(series: &[LoadedSeries], method: Method, cfg: &ForecastConfig, use_nrmse: bool) -> f64 {
    let v: Vec<f64> = series
        .iter()
        .map(|s| {
            let mut r = forecast(&s.series, method, cfg);
            r.score(s.truth.as_ref().expect("test file supplies futures"), None).unwrap();
            if use_nrmse {
                r.nrmse.unwrap()
            } else {
                r.smape.unwrap()
            }
        })
        .collect();
    v.iter().sum::<f64>() / v.len() as f64
}

fn m4_dir() -> Result<PathBuf, String> {
    let dir = std::env::var_os("LBCNNM_M4_DIR").ok_or("LBCNNM_M4_DIR is not set; M4 data unavailable")?;
    Ok(PathBuf::from(dir))
}

fn load_m4(dir: &std::path::Path, category: &str) -> Result<Vec<LoadedSeries>, String> {
    let train = dir.join(format!("{category}-train.csv"));
    let test = dir.join(format!("{category}-test.csv"));
    if !train.exists() || !test.exists() {
        return Err(format!("{} or {} missing", train.display(), test.display()));
    }
    let data = load_dataset(&train, Some(&test), DatasetFormat::M4, None).map_err(|e| e.to_string())?;
    Ok(data.series)
}

fn m4_hourly() -> Outcome {
    let dir = m4_dir()?;
    let hourly = load_m4(&dir, "Hourly")?;
    if hourly.len() != 414 {
        return Err(format!("expected 414 Hourly series, found {}", hourly.len()));
    }
    let base = ForecastConfig::default();
    let naive = mean_metric(&hourly, Method::Baseline(Baseline::Naive), &base, true);
    let average = mean_metric(&hourly, Method::Baseline(Baseline::Average), &base, true);
    // both model-based methods share the searched model size
    let sized: Vec<(LoadedSeries, ForecastConfig)> = hourly
        .iter()
        .map(|s| {
            let m = estimate_model_size(&s.series.values, s.series.horizon).ok().map(|r| r.chosen_m);
            (s.clone(), ForecastConfig { model_size: m, ..base.clone() })
        })
        .collect();
    let per = |method: Method| {
        let v: Vec<f64> = sized
            .iter()
            .map(|(s, cfg)| {
                let mut r = forecast(&s.series, method, cfg);
                r.score(s.truth.as_ref().unwrap(), None).unwrap();
                r.nrmse.unwrap()
            })
            .collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    let lb = per(Method::Lbcnnm(DataModel::Combined));
    let cnnm = per(Method::Cnnm);
    let hourly_ok = (naive - 45.94).abs() <= 0.5 && (average - 37.09).abs() <= 1.0 && lb < naive && lb < cnnm;
    let mut detail =
        format!("Hourly NRMSE: naive {naive:.2} (45.94), average {average:.2} (37.09), LbCNNM {lb:.2}, CNNM {cnnm:.2}");

    let mut sample = Vec::new();
    for (cat, share) in
        [("Yearly", 230), ("Quarterly", 240), ("Monthly", 480), ("Weekly", 4), ("Daily", 42), ("Hourly", 4)]
    {
        let mut all = load_m4(&dir, cat)?;
        all.sort_by(|a, b| a.series.id.cmp(&b.series.id));
        let stride = (all.len() / share).max(1);
        sample.extend(all.into_iter().step_by(stride).take(share));
    }
    let combined = mean_metric(&sample, Method::Lbcnnm(DataModel::Combined), &base, false);
    let concat = mean_metric(&sample, Method::Lbcnnm(DataModel::G0GcGsGe), &base, false);
    let gc = mean_metric(&sample, Method::Lbcnnm(DataModel::Gc), &base, false);
    detail += &format!("; {}-series sMAPE: ⊕ {combined:.2}, concat {concat:.2}, Gc {gc:.2}", sample.len());
    check(hourly_ok && combined <= concat && concat <= gc, detail)
}

fn missing_data_trend() -> Outcome {
    let rates = [0.0, 0.05, 0.1, 0.2, 0.3];
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let cfg = ForecastConfig::default();
    let (l, h) = (120, 6);
    let mut totals = [0.0; 5];
    for i in 0..50 {
        let p = 4 + i % 9;
        let base: Vec<f64> = (0..p).map(|_| 50.0 + 10.0 * rng.sample::<f64, _>(StandardNormal)).collect();
        let values: Vec<f64> = (0..l + h).map(|t| base[t % p] + 0.5 * rng.sample::<f64, _>(StandardNormal)).collect();
        let s = TimeSeries::new(format!("p{i}"), values[..l].to_vec(), h).unwrap();
        for (j, &rate) in rates.iter().enumerate() {
            let flags = missing_flags(l, rate, 1000 * i as u64 + j as u64);
            let r = forecast_missing(&s, &flags, &cfg);
            totals[j] += smape(&values[l..], &r.forecast).unwrap() / 50.0;
        }
    }
    let monotone = totals.windows(2).all(|w| w[1] >= w[0]);
    let detail = rates.iter().zip(&totals).map(|(r, e)| format!("{r}: {e:.3}")).collect::<Vec<_>>().join(", ");
    check(monotone && totals[4] > totals[2], format!("mean sMAPE by rate {detail}"))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("metric exactness", metric_exactness),
        ("Fourier identity", fourier_identity),
        ("structural rank bounds", structural_rank_bounds),
        ("simulation coherences", simulation_coherences),
        ("exact recovery", exact_recovery),
        ("PCP oracle", pcp_oracle),
        ("l1 fit planted solution", l1_fit_planted),
        ("FFT fast path", fft_fast_path),
        ("M4 Hourly and subsample", m4_hourly),
        ("missing-data trend", missing_data_trend),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("criterion {:>2} PASS {name} ({secs:.1}s): {d}", i + 1),
            Err(d) => {
                failed += 1;
                println!("criterion {:>2} FAIL {name} ({secs:.1}s): {d}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
