//! Statistical invariant checks shared by the invariant tests and the
//! acceptance report. Each returns a short detail string, as `Err` on failure.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use nclangevin::analysis::{covariance, density_distance, kde2d, kde2d_on, GridGeometry};
use nclangevin::models::{dsm_fit_affine, tweedie_denoise, Component, GmmModel, SampleSet};
use nclangevin::rng::Stream;
use nclangevin::samplers::{basic_langevin_update, noise_corrected_update, run_chain, ChainRunner, SamplerConfig};
use nclangevin::theory::{contraction_check, covariance_recursion_step, drift_matrix, iterate_to_stationary, stationary_covariance};

pub type Check = Result<String, String>;

fn verdict(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

pub fn frobenius(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Two overlapping 1D kernels, used where binning needs a single axis.
pub fn bimodal_1d() -> GmmModel {
    GmmModel::new(
        1,
        vec![
            Component { weight: 0.4, mean: vec![-1.0], variance: 0.5 },
            Component { weight: 0.6, mean: vec![1.0], variance: 0.5 },
        ],
    )
    .unwrap()
}

/// Replays the chain's variate stream through the basic update: with
/// `σ² = 0` the noise-corrected chain must match it bit for bit. Likewise the
/// half-denoising chain must match the noise-corrected update at `μ = σ²/2`.
pub fn check_reductions() -> Check {
    let model = GmmModel::canonical(3).unwrap();
    let noisy = model.noisy_model(0.3).unwrap();
    let steps = 2_000;
    let dim = 2;
    let (mut n, mut nu, mut x_noisy, mut grad, mut next) =
        (vec![0.0; dim], vec![0.0; dim], vec![0.0; dim], vec![0.0; dim], vec![0.0; dim]);

    let nc = run_chain(&SamplerConfig::noise_corrected(0.05, 0.0, steps, 11).unwrap(), &model).unwrap();
    let mut rng = Stream::new(11, 0);
    let mut x = vec![0.0; dim];
    rng.fill_normal(&mut x);
    for t in 1..=steps {
        rng.fill_normal(&mut n);
        rng.fill_normal(&mut nu);
        basic_langevin_update(&model, 0.05, &x, &nu, &mut grad, &mut next).unwrap();
        x.copy_from_slice(&next);
        if nc.state(t) != x.as_slice() {
            return Err(format!("sigma2 = 0 differs from basic at step {t}"));
        }
    }

    let hd = run_chain(&SamplerConfig::half_denoise(0.3, steps, 12).unwrap(), &noisy).unwrap();
    let mut rng = Stream::new(12, 0);
    rng.fill_normal(&mut x);
    for t in 1..=steps {
        rng.fill_normal(&mut n);
        noise_corrected_update(&noisy, 0.3 / 2.0, 0.3, &x, &n, &nu, &mut x_noisy, &mut grad, &mut next).unwrap();
        x.copy_from_slice(&next);
        if hd.state(t) != x.as_slice() {
            return Err(format!("mu = sigma2/2 differs from half-denoising at step {t}"));
        }
    }
    Ok(format!("{steps} steps bit-exact for both reductions"))
}

/// Largest relative deviation between the score and a central difference
/// of the log-density (`h = 1e-5`) over `points` random points.
pub fn max_score_fd_error(model: &GmmModel, points: usize, seed: u64) -> f64 {
    let h = 1e-5;
    let mut rng = Stream::new(seed, 0);
    let mut worst = 0.0f64;
    let mut p = vec![0.0; model.dim()];
    for _ in 0..points {
        rng.fill_normal(&mut p);
        p.iter_mut().for_each(|v| *v *= 2.0);
        let score = model.score(&p).unwrap();
        for i in 0..p.len() {
            let mut hi = p.clone();
            let mut lo = p.clone();
            hi[i] += h;
            lo[i] -= h;
            let fd = (model.log_pdf(&hi).unwrap() - model.log_pdf(&lo).unwrap()) / (2.0 * h);
            worst = worst.max((fd - score[i]).abs() / score[i].abs().max(1.0));
        }
    }
    worst
}

pub fn check_score_fd() -> Check {
    let mut models = vec![bimodal_1d(), GmmModel::gaussian(5, 0.7).unwrap()];
    for k in 1..=4 {
        let m = GmmModel::canonical(k).unwrap();
        models.push(m.noisy_model(0.1).unwrap());
        models.push(m);
    }
    let worst = models.iter().enumerate().map(|(i, m)| max_score_fd_error(m, 100, i as u64)).fold(0.0, f64::max);
    verdict(worst < 1e-5, format!("max relative error {worst:.2e} over {} models", models.len()))
}

/// Along a noise-corrected chain, `x̃ = x + σ n` has covariance
/// `cov(x) + σ² I`, and matches a basic chain with the same step on the same
/// noisy score.
pub fn check_hidden_langevin() -> Check {
    let sigma2 = 0.3;
    let mu = 0.2;
    let steps = 1_000_000;
    let burn = 1_000;
    let noisy = GmmModel::canonical(2).unwrap().noisy_model(sigma2).unwrap();
    let config = SamplerConfig::noise_corrected(mu, sigma2, steps, 21).unwrap();
    let mut runner = ChainRunner::new(&config, &noisy).unwrap();
    let mut xs = Vec::with_capacity(2 * steps);
    let mut tilde = Vec::with_capacity(2 * steps);
    for t in 0..steps {
        if t >= burn {
            xs.extend_from_slice(runner.state());
        }
        runner.advance().unwrap();
        if t >= burn {
            tilde.extend_from_slice(runner.last_noisy_point());
        }
    }
    let cov_x = covariance(&SampleSet::new(2, xs).unwrap()).unwrap();
    let cov_t = covariance(&SampleSet::new(2, tilde).unwrap()).unwrap();
    let shift = frobenius(&(&cov_t - &cov_x - DMatrix::identity(2, 2) * sigma2));

    let basic = run_chain(&SamplerConfig::basic(mu, steps, 22).unwrap(), &noisy).unwrap();
    let tail: Vec<f64> = basic.states().skip(burn).flatten().copied().collect();
    let cov_b = covariance(&SampleSet::new(2, tail).unwrap()).unwrap();
    let versus_basic = frobenius(&(&cov_t - &cov_b));
    verdict(
        shift < 0.01 && versus_basic < 0.06,
        format!("|cov(x~) - cov(x) - s2 I| = {shift:.4}, |cov(x~) - cov(basic)| = {versus_basic:.4}"),
    )
}

pub fn check_kde_mass() -> Check {
    let mut worst = 0.0f64;
    for k in [1, 2, 4] {
        let model = GmmModel::canonical(k).unwrap();
        let sample = model.exact_sample(50_000, &mut Stream::new(k as u64, 1)).unwrap();
        let grid = kde2d(&sample, 0.1, 0.1).unwrap();
        worst = worst.max((grid.mass() - 1.0).abs());
    }
    verdict(worst < 0.01, format!("max |mass - 1| = {worst:.2e}"))
}

/// Largest z-score between a binned mean and its prediction, over bins with
/// at least `min_count` members.
fn max_bin_z(keys: &[f64], values: &[f64], predicted: &[f64], edges: (f64, f64, usize), min_count: usize) -> f64 {
    let (lo, hi, bins) = edges;
    let mut sum = vec![0.0; bins];
    let mut sum2 = vec![0.0; bins];
    let mut pred = vec![0.0; bins];
    let mut count = vec![0usize; bins];
    for i in 0..keys.len() {
        let b = ((keys[i] - lo) / (hi - lo) * bins as f64).floor();
        if b < 0.0 || b >= bins as f64 {
            continue;
        }
        let b = b as usize;
        sum[b] += values[i];
        sum2[b] += values[i] * values[i];
        pred[b] += predicted[i];
        count[b] += 1;
    }
    (0..bins)
        .filter(|&b| count[b] >= min_count)
        .map(|b| {
            let n = count[b] as f64;
            let mean = sum[b] / n;
            let var = (sum2[b] / n - mean * mean).max(1e-300);
            (mean - pred[b] / n).abs() / (var / n).sqrt()
        })
        .fold(0.0, f64::max)
}

/// Within bins of the noisy value, the mean noise-free score matches the mean
/// noisy-data score and the mean clean value matches the Tweedie estimate.
pub fn check_conditional_expectation() -> Check {
    let model = bimodal_1d();
    let sigma2 = 0.3;
    let noisy = model.noisy_model(sigma2).unwrap();
    let n = 1_000_000;
    let clean = model.exact_sample(n, &mut Stream::new(31, 1)).unwrap();
    let mut rng = Stream::new(31, 3);
    let mut keys = Vec::with_capacity(n);
    let mut clean_score = Vec::with_capacity(n);
    let mut noisy_score = Vec::with_capacity(n);
    let mut xs = Vec::with_capacity(n);
    let mut denoised = Vec::with_capacity(n);
    for x in clean.iter() {
        let xt = x[0] + sigma2.sqrt() * rng.normal();
        keys.push(xt);
        xs.push(x[0]);
        clean_score.push(model.score(x).unwrap()[0]);
        noisy_score.push(noisy.score(&[xt]).unwrap()[0]);
        denoised.push(tweedie_denoise(&noisy, sigma2, &[xt]).unwrap()[0]);
    }
    let edges = (-3.0, 3.0, 40);
    let z_score = max_bin_z(&keys, &clean_score, &noisy_score, edges, 2_000);
    let z_mean = max_bin_z(&keys, &xs, &denoised, edges, 2_000);
    verdict(
        z_score < 4.5 && z_mean < 4.5,
        format!("max bin z: score {z_score:.2}, posterior mean {z_mean:.2} (40 bins)"),
    )
}

pub fn check_dsm_recovery() -> Check {
    let sigma2 = 0.3;
    let data = GmmModel::gaussian(1, 1.0).unwrap();
    let samples = data.exact_sample(100_000, &mut Stream::new(41, 1)).unwrap();
    let fit = dsm_fit_affine(&samples, sigma2, &mut Stream::new(41, 3)).unwrap();
    let a = fit.matrix()[(0, 0)];
    let b = fit.offset()[0];
    let target = -1.0 / 1.3;
    let rel = (a / target - 1.0).abs();
    verdict(
        rel < 0.02 && b.abs() < 0.02,
        format!("A = {a:.5} (target {target:.5}, {:.2}% off), b = {b:.5}", 100.0 * rel),
    )
}

pub fn check_tweedie_mse() -> Check {
    let sigma2 = 0.3;
    let mut lines = Vec::new();
    let mut ok = true;
    for (label, model) in [("1D mixture", bimodal_1d()), ("K=2", GmmModel::canonical(2).unwrap())] {
        let noisy = model.noisy_model(sigma2).unwrap();
        let dim = model.dim();
        let n = 100_000;
        let clean = model.exact_sample(n, &mut Stream::new(51, 1)).unwrap();
        let mut rng = Stream::new(51, 3);
        let mut noise = vec![0.0; dim];
        let mut mse = 0.0;
        for x in clean.iter() {
            rng.fill_normal(&mut noise);
            let xt: Vec<f64> = x.iter().zip(&noise).map(|(a, e)| a + sigma2.sqrt() * e).collect();
            let d = tweedie_denoise(&noisy, sigma2, &xt).unwrap();
            mse += d.iter().zip(x).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        }
        mse /= n as f64;
        ok &= mse < sigma2 * dim as f64;
        lines.push(format!("{label}: {mse:.4} < {:.2}", sigma2 * dim as f64));
    }
    verdict(ok, lines.join(", "))
}

/// Random symmetric positive definite matrix with eigenvalues in `[lo, hi]`.
pub fn random_spd(dim: usize, lo: f64, hi: f64, rng: &mut Stream) -> DMatrix<f64> {
    let g = DMatrix::from_fn(dim, dim, |_, _| rng.normal());
    let q = g.qr().q();
    let d = DVector::from_fn(dim, |_, _| lo + (hi - lo) * rng.uniform());
    let m = &q * DMatrix::from_diagonal(&d) * q.transpose();
    (&m + m.transpose()) * 0.5
}

/// The difference between two covariance trajectories obeys
/// `‖ε_k‖ ≤ ‖M‖^{2k} ‖ε_0‖`.
pub fn check_contraction_bound() -> Check {
    let mut rng = Stream::new(61, 0);
    let mut worst = f64::NEG_INFINITY;
    for trial in 0..20 {
        let dim = 1 + trial % 6;
        let s = random_spd(dim, 0.5, 2.0, &mut rng);
        let mu = 0.4 * rng.uniform() + 0.05;
        let sigma2 = 2.0 * mu * rng.uniform();
        let norm = contraction_check(&s, mu).unwrap();
        let mut a = random_spd(dim, 0.1, 3.0, &mut rng);
        let mut b = random_spd(dim, 0.1, 3.0, &mut rng);
        let e0 = frobenius(&(&a - &b));
        for k in 1..=50 {
            a = covariance_recursion_step(&a, &s, mu, sigma2).unwrap();
            b = covariance_recursion_step(&b, &s, mu, sigma2).unwrap();
            let bound = norm.powi(2 * k) * e0;
            worst = worst.max(frobenius(&(&a - &b)) - bound * (1.0 + 1e-9) - 1e-14);
        }
    }
    verdict(worst <= 0.0, format!("max excess over bound {worst:.2e} (20 matrices, 50 steps)"))
}

/// Closed-form fixed point against the iterated recursion for random score
/// covariances in dimensions 1 to 10.
pub fn check_closed_form_vs_recursion(count: usize, seed: u64) -> Check {
    let mut rng = Stream::new(seed, 0);
    let mut worst = 0.0f64;
    for trial in 0..count {
        let dim = 1 + trial % 10;
        let s = random_spd(dim, 0.5, 3.0, &mut rng);
        let mu = 0.05 + 0.4 * rng.uniform();
        let sigma2 = 2.0 * mu * rng.uniform();
        let closed = stationary_covariance(&s, mu, sigma2).unwrap();
        let m = drift_matrix(&s, mu).unwrap();
        assert!(m.nrows() == dim);
        let (iterated, _) = iterate_to_stationary(&DMatrix::identity(dim, dim), &s, mu, sigma2, 1e-13, 100_000).unwrap();
        worst = worst.max(frobenius(&(&closed - &iterated)));
    }
    verdict(worst < 1e-8, format!("max |closed - iterated| = {worst:.2e} over {count} matrices"))
}

/// Normalized distance between KDEs of two independent exact samples of the
/// canonical `kernels`-kernel mixture.
pub fn ground_truth_floor(kernels: usize, n: usize, seed: u64) -> f64 {
    let model = GmmModel::canonical(kernels).unwrap();
    let a = model.exact_sample(n, &mut Stream::new(seed, 1)).unwrap();
    let b = model.exact_sample(n, &mut Stream::new(seed, 2)).unwrap();
    let geometry = GridGeometry::covering(&[&a, &b], 0.1, 0.1).unwrap();
    let ga = kde2d_on(&a, 0.1, &geometry).unwrap();
    let gb = kde2d_on(&b, 0.1, &geometry).unwrap();
    density_distance(&gb, &ga, &ga).unwrap()
}
