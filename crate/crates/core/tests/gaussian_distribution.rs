//! Monte Carlo checks that the Gaussian samplers reproduce the target law:
//! empirical moments against the covariance, agreement of the two
//! factorization methods in law, self-similarity under time scaling, and
//! the characteristic function of increment vectors.

mod common;

use ltlab_core::gaussian::{
    fbm_covariance, gaussian_charfn, Covariance, GaussianSampler, SamplingMethod,
};
use ltlab_core::{numeric, stats, StreamFamily, TimeGrid};

fn terminal_samples(sampler: &GaussianSampler, family: &StreamFamily, n: u32, k: usize) -> Vec<f64> {
    (0..n)
        .map(|rep| {
            let mut rng = family.stream(rep);
            sampler.sample(&mut rng).scalar(k)
        })
        .collect()
}

#[test]
fn brownian_terminal_variance_within_three_se() {
    let grid = TimeGrid::new(0.0, 1.0, 8).unwrap();
    let sampler =
        GaussianSampler::new(&Covariance::fbm(0.5).unwrap(), 1, grid, SamplingMethod::Cholesky)
            .unwrap();
    let n = 100_000u32;
    let vals = terminal_samples(&sampler, &StreamFamily::new(1101, 0), n, 8);
    let var = vals.iter().map(|x| x * x).sum::<f64>() / n as f64;
    // Var of X^2 for a standard normal is 2
    let se = (2.0 / n as f64).sqrt();
    assert!(
        (var - 1.0).abs() <= 3.0 * se,
        "Var(X_1) = {var}, allowed 1 +- {}",
        3.0 * se
    );
}

#[test]
fn sample_covariance_matches_target_on_coarse_grid() {
    let h = 0.7;
    let m = 9usize; // grid points including t = 0
    let grid = TimeGrid::new(0.0, 1.0, m - 1).unwrap();
    let cov = Covariance::fbm(h).unwrap();
    let sampler = GaussianSampler::new(&cov, 1, grid, SamplingMethod::Cholesky).unwrap();
    let family = StreamFamily::new(1102, 0);
    let n = 100_000usize;
    let mut acc = vec![0.0f64; m * m];
    for rep in 0..n {
        let mut rng = family.stream(rep as u32);
        let path = sampler.sample(&mut rng);
        for i in 1..m {
            for j in i..m {
                acc[i * m + j] += path.scalar(i) * path.scalar(j);
            }
        }
    }
    let mut worst = 0.0f64;
    for i in 1..m {
        for j in i..m {
            let (s, t) = (grid.point(i), grid.point(j));
            let target = fbm_covariance(s, t, h).unwrap();
            // Isserlis: Var(X_s X_t) = R(s,s) R(t,t) + R(s,t)^2
            let v = fbm_covariance(s, s, h).unwrap() * fbm_covariance(t, t, h).unwrap()
                + target * target;
            let se = (v / n as f64).sqrt();
            worst = worst.max((acc[i * m + j] / n as f64 - target).abs() / se);
        }
    }
    assert!(worst <= 3.0, "worst covariance deviation {worst:.2} se");
}

#[test]
fn factorization_methods_agree_in_law() {
    let h = 0.3;
    let n_steps = 512usize;
    let grid = TimeGrid::new(0.0, 1.0, n_steps).unwrap();
    let cov = Covariance::fbm(h).unwrap();
    let chol = GaussianSampler::new(&cov, 1, grid, SamplingMethod::Cholesky).unwrap();
    let circ = GaussianSampler::new(&cov, 1, grid, SamplingMethod::CirculantEmbedding).unwrap();
    let n = 4000u32;
    let a = terminal_samples(&chol, &StreamFamily::new(1103, 0), n, n_steps);
    let b = terminal_samples(&circ, &StreamFamily::new(1103, 1), n, n_steps);

    let ks = stats::ks_two_sample(&a, &b).unwrap();
    assert!(
        ks.p_value >= 1e-3,
        "KS separates the methods: D = {}, p = {}",
        ks.statistic,
        ks.p_value
    );

    // sample variances of X_1 (target value 1) agree within MC error
    let (va, vb) = (numeric::variance(&a), numeric::variance(&b));
    let se_diff = (2.0 * 2.0 / n as f64).sqrt();
    assert!(
        (va - vb).abs() <= 3.0 * se_diff,
        "variances {va} vs {vb}, allowed gap {}",
        3.0 * se_diff
    );
}

#[test]
fn fbm_is_self_similar_under_time_scaling() {
    let h = 0.6;
    let c = 4.0f64;
    let n_steps = 512usize;
    let cov = Covariance::fbm(h).unwrap();
    let long = GaussianSampler::new(
        &cov,
        1,
        TimeGrid::new(0.0, c, n_steps).unwrap(),
        SamplingMethod::Auto,
    )
    .unwrap();
    let unit = GaussianSampler::new(
        &cov,
        1,
        TimeGrid::new(0.0, 1.0, n_steps).unwrap(),
        SamplingMethod::Auto,
    )
    .unwrap();
    let n = 4000u32;
    let fam_a = StreamFamily::new(1104, 0);
    let fam_b = StreamFamily::new(1104, 1);
    let scale = c.powf(h);
    // X_{c t} against c^H X_t at the endpoint and at mid-span
    for k in [n_steps, n_steps / 2] {
        let a = terminal_samples(&long, &fam_a, n, k);
        let b: Vec<f64> = terminal_samples(&unit, &fam_b, n, k)
            .into_iter()
            .map(|x| scale * x)
            .collect();
        let ks = stats::ks_two_sample(&a, &b).unwrap();
        assert!(
            ks.p_value >= 1e-3,
            "marginal at index {k}: D = {}, p = {}",
            ks.statistic,
            ks.p_value
        );
    }
}

#[test]
fn increment_charfn_matches_monte_carlo() {
    let h = 0.7;
    let cov = Covariance::fbm(h).unwrap();
    let partition = [0.0, 0.5, 1.0];
    let grid = TimeGrid::new(0.0, 1.0, 2).unwrap();
    let sampler = GaussianSampler::new(&cov, 1, grid, SamplingMethod::Cholesky).unwrap();
    let family = StreamFamily::new(1105, 0);
    let n = 1_000_000usize;
    let xis: [[f64; 2]; 2] = [[1.0, 1.0], [2.0, -1.0]];
    let mut vals: Vec<Vec<f64>> = vec![Vec::with_capacity(n); xis.len()];
    for rep in 0..n {
        let mut rng = family.stream(rep as u32);
        let p = sampler.sample(&mut rng);
        let d = [p.scalar(1) - p.scalar(0), p.scalar(2) - p.scalar(1)];
        for (k, xi) in xis.iter().enumerate() {
            vals[k].push(xi[0] * d[0] + xi[1] * d[1]);
        }
    }
    for (k, xi) in xis.iter().enumerate() {
        let exact = gaussian_charfn(&cov, 1, &partition, xi).unwrap();
        let (r, se) = common::charfn_radius(&vals[k], 1.0);
        assert!(
            (r - exact).abs() <= 3.0 * se,
            "xi = {xi:?}: |phi| = {r} vs exact {exact}, se = {se}"
        );
    }
}
