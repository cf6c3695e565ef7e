//! Acceptance criteria. Each test prints one PASS/FAIL line.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::io::Write;

use eigencycle::analysis::{
    exact_fine_structure, fine_structure_tests, fit_eigencycle_columns, pooled_regression, rank_consistency,
    sigma_regressions, single_mode_linear_spread, single_mode_ode_spread, spectrum, Pooling,
};
use eigencycle::dynamics::{cross_mode_average, simulate_agents, AgentConfig, NoiseRestartConfig, Policy};
use eigencycle::fixtures::FixtureSet;
use eigencycle::game::{big_to_f64, PayoffBimatrix};
use eigencycle::spectral::SubspacePair;
use eigencycle::stats::spearman;
use eigencycle::tsmetrics::{
    accumulated_angular_momentum_points, angular_momentum_table, net_transit, net_transit_states, TransitMode,
};

fn verdict(n: u32, title: &str, pass: bool, detail: String) {
    // written to the stdout handle rather than through `println!`, which the
    // test harness captures for passing tests
    let line = format!("{} criterion {n:>2} ({title}): {detail}\n", if pass { "PASS" } else { "FAIL" });
    let _ = std::io::stdout().lock().write_all(line.as_bytes());
    assert!(pass, "criterion {n} ({title}) failed: {detail}");
}

#[test]
fn criterion_01_eigenvalues() {
    let spec = spectrum(&PayoffBimatrix::oneill()).unwrap();
    let mut want = vec![
        Complex64::new(0.0, 0.8),
        Complex64::new(0.0, 0.4),
        Complex64::new(0.0, 0.4),
        Complex64::new(0.2, 0.0),
        Complex64::new(-0.2, 0.0),
        Complex64::new(0.0, -0.4),
        Complex64::new(0.0, -0.4),
        Complex64::new(0.0, -0.8),
    ];
    // greedy matching of the computed spectrum against the exact one
    let mut worst = 0.0_f64;
    for e in &spec.eigs {
        let (k, d) = want
            .iter()
            .enumerate()
            .map(|(k, w)| (k, (e.lambda - w).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        worst = worst.max(d);
        want.remove(k);
    }
    verdict(1, "eigen system", want.is_empty() && worst < 1e-10, format!("max |error| = {worst:.2e} (tol 1e-10)"));
}

#[test]
fn criterion_02_eigencycle_table() {
    let f = FixtureSet::embedded().unwrap();
    let game = PayoffBimatrix::oneill();
    let spec = spectrum(&game).unwrap();
    let fits = fit_eigencycle_columns(&spec, &f.eigen_table).unwrap();
    let worst = fits.iter().map(|c| c.max_abs_error).fold(0.0, f64::max);
    let r = exact_fine_structure(&game, &spec).unwrap();
    let ratio: Vec<f64> = r.iter().map(big_to_f64).collect();
    let ratio_err = (ratio[0] - 9.0).abs().max((ratio[1].abs() - 3.0).abs()).max((ratio[2] - 1.0).abs());
    let pass = fits.len() == 6 && worst < 5e-4 && ratio_err < 1e-9;
    verdict(
        2,
        "eigencycle table",
        pass,
        format!(
            "{} columns, max |dσ| = {worst:.2e} (tol 5e-4); exact ratio {}:{}:{} (|err| {ratio_err:.1e})",
            fits.len(),
            r[0],
            r[1],
            r[2]
        ),
    );
}

#[test]
fn criterion_03_rank_consistency() {
    let f = FixtureSet::embedded().unwrap();
    let (rho, _) = rank_consistency(&f.l_table).unwrap();
    let want = &f.reference.rank_consistency.rho;
    let mut worst = 0.0_f64;
    let mut within = 0;
    let mut total = 0;
    for a in 0..rho.len() {
        for b in 0..a {
            let d = (rho[a][b] - want[a][b]).abs();
            worst = worst.max(d);
            within += (d <= 0.01) as usize;
            total += 1;
        }
    }
    verdict(
        3,
        "Spearman matrix",
        total == 15 && within == total,
        format!("{within}/{total} entries within ±0.01, max |dρ| = {worst:.4}; O/B ρ = {:.4} vs 0.706", rho[1][0]),
    );
}

#[test]
fn criterion_04_sigma_regressions() {
    let f = FixtureSet::embedded().unwrap();
    let names = &f.l_table.experiments;
    let fast = sigma_regressions(&f.l_table, &f.eigen_table.eigencycle_column(".8i").unwrap(), "s").unwrap();
    let want = &f.reference.sigma_regressions[".8i"];
    let mut dt = 0.0_f64;
    let mut dr = 0.0_f64;
    for (i, r) in fast.iter().enumerate() {
        dt = dt.max((r.coefficients[1].t - want.slope_t[i]).abs());
        dr = dr.max((r.r_squared - want.r_squared[i]).abs());
    }
    let o = names.iter().position(|n| n == "O").unwrap();
    let tt = names.iter().position(|n| n == "TT").unwrap();
    let pinned = (fast[o].coefficients[1].t - 8.26).abs() <= 0.3
        && (fast[o].r_squared - 0.724).abs() <= 0.02
        && (fast[tt].coefficients[1].t - 12.39).abs() <= 0.3
        && (fast[tt].r_squared - 0.8552).abs() <= 0.02;
    let mut min_p = 1.0_f64;
    for tag in [".4i_1", ".4i_2"] {
        let regs = sigma_regressions(&f.l_table, &f.eigen_table.eigencycle_column(tag).unwrap(), "s").unwrap();
        min_p = regs.iter().map(|r| r.coefficients[1].p).fold(min_p, f64::min);
    }
    verdict(
        4,
        "single regressions",
        dt <= 0.3 && dr <= 0.02 && pinned && min_p > 0.1,
        format!("max |dt| = {dt:.3}, max |dR²| = {dr:.4}, slow-mode min p = {min_p:.3}"),
    );
}

#[test]
fn criterion_05_fine_structure_tests() {
    let f = FixtureSet::embedded().unwrap();
    let (a, b) = fine_structure_tests(&f.l_table).unwrap();
    verdict(
        5,
        "fine-structure t-tests",
        a.n == 24 && a.p < 1e-8 && b.n == 54 && b.p < 1e-5,
        format!("N={} p = {:.4e} (< 1e-8); N={} p = {:.4e} (< 1e-5)", a.n, a.p, b.n, b.p),
    );
}

#[test]
fn criterion_06_pooled_regression() {
    let f = FixtureSet::embedded().unwrap();
    let r = pooled_regression(&f, Pooling::Unweighted).unwrap();
    let slopes = &r.coefficients[1..];
    let intercept = &r.coefficients[0];
    let c8 = slopes[0].estimate;
    let pass = slopes.iter().all(|c| c.estimate > 0.0 && c.p < 0.05)
        && intercept.p > 0.2
        && (c8 - 0.0565).abs() <= 0.2 * 0.0565;
    let coefs: Vec<String> = slopes.iter().map(|c| format!("{:.4} (p {:.1e})", c.estimate, c.p)).collect();
    verdict(6, "pooled regression", pass, format!("coef {}, intercept p {:.3}", coefs.join(", "), intercept.p));
}

#[test]
fn criterion_07_ratio_invariance() {
    let game = PayoffBimatrix::oneill();
    let spec = spectrum(&game).unwrap();
    let lin = single_mode_linear_spread(&spec, ".8i", 1e-3, 64).unwrap();
    let ode = single_mode_ode_spread(&game, &spec, ".8i", 1e-3, 200).unwrap();
    verdict(
        7,
        "single-mode ratio invariance",
        lin.max_instant < 1e-6 && ode.max_instant < 0.02,
        format!(
            "linear spread {:.2e} (< 1e-6), ODE spread {:.2e} (< 2%) over {} subspaces",
            lin.max_instant, ode.max_instant, ode.subspaces
        ),
    );
}

#[test]
fn criterion_08_closed_loop() {
    let tour = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [0.0, 0.0]];
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst = 0.0_f64;
    for _ in 0..100 {
        let o = [rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)];
        let acc = accumulated_angular_momentum_points(&tour, o).unwrap();
        worst = worst.max((acc[acc.len() - 1] - 2.0).abs());
    }
    verdict(8, "closed loop", worst < 1e-12, format!("max |L - 2| over 100 origins = {worst:.1e}"));
}

#[test]
fn criterion_09_null_model() {
    let f = FixtureSet::embedded().unwrap();
    let game = PayoffBimatrix::oneill();
    let origin = spectrum(&game).unwrap().rest_point;
    let uniform = simulate_agents(&game, &AgentConfig { policy: Policy::Uniform, rounds: 100_000, seed: 9 }).unwrap();
    let table = angular_momentum_table(&uniform, &origin).unwrap();
    let se = table.std_errors().unwrap();
    let worst_z = table.values().iter().zip(se).map(|(l, s)| (l / s).abs()).fold(0.0, f64::max);
    let sigma = f.eigen_table.eigencycle_column(".8i").unwrap();
    let mut rhos = Vec::new();
    for policy in [Policy::WinStayLoseShift { eps: 0.1 }, Policy::NoisyBestResponse { eps: 0.1 }] {
        let s = simulate_agents(&game, &AgentConfig { policy, rounds: 100_000, seed: 9 }).unwrap();
        let l = angular_momentum_table(&s, &origin).unwrap();
        rhos.push(spearman(l.values(), sigma.values()).unwrap().rho);
    }
    verdict(
        9,
        "null model and agents",
        worst_z < 3.0 && rhos.iter().all(|&r| r > 0.5),
        format!("uniform max |L|/SE = {worst_z:.2} (< 3); Spearman WSLS {:.3}, NBR {:.3} (> 0.5)", rhos[0], rhos[1]),
    );
}

#[test]
fn criterion_10_cross_mode_averages() {
    let spec = spectrum(&PayoffBimatrix::oneill()).unwrap();
    let (s1, s2, fast) = (spec.by_tag(".4i_1").unwrap(), spec.by_tag(".4i_2").unwrap(), spec.by_tag(".8i").unwrap());
    let c = Complex64::new(0.5, 0.0);
    let noisy = NoiseRestartConfig { shock_rate: 1.0, seed: 10 };
    let mut worst_z = 0.0_f64;
    let mut shocks = 0;
    let mut tested = 0;
    for p in SubspacePair::enumerate(8) {
        let probe = (0..16).map(|k| eigencycle::dynamics::cross_mode_angular_momentum(s1, c, s2, c, p, k as f64 * 0.7));
        if probe.fold(0.0_f64, |m, v| m.max(v.abs())) < 1e-9 {
            continue;
        }
        let avg = cross_mode_average(s1, c, s2, c, p, &noisy, 1e4, 0.05).unwrap();
        worst_z = worst_z.max(avg.mean.abs() / avg.std_err);
        shocks = avg.shocks;
        tested += 1;
    }
    let quiet = NoiseRestartConfig { shock_rate: 0.0, seed: 10 };
    let horizon = 1e4 * 2.0 * PI / 0.4;
    let mut worst_mean = 0.0_f64;
    for p in SubspacePair::enumerate(8) {
        let avg = cross_mode_average(fast, c, s1, c, p, &quiet, horizon, 0.25).unwrap();
        worst_mean = worst_mean.max(avg.mean.abs());
    }
    verdict(
        10,
        "cross-mode averages",
        tested > 0 && shocks >= 9_000 && worst_z < 3.0 && worst_mean < 1e-3,
        format!(
            "degenerate with {shocks} shocks: max |mean|/SE = {worst_z:.2} over {tested} subspaces (< 3); \
             distinct frequencies: max |mean| = {worst_mean:.2e} (< 1e-3)"
        ),
    );
}

#[test]
fn criterion_11_net_transit() {
    let game = PayoffBimatrix::oneill();
    let s = simulate_agents(
        &game,
        &AgentConfig { policy: Policy::NoisyBestResponse { eps: 0.1 }, rounds: 20_000, seed: 11 },
    )
    .unwrap();
    let mut asym = 0.0_f64;
    for mode in [TransitMode::Occupancy, TransitMode::WithinPopulation, TransitMode::JointProfile] {
        asym = asym.max(net_transit(&s, mode).unwrap().max_asymmetry());
    }
    // a walk on a tree crosses every edge equally often both ways
    let balanced = net_transit_states(&[0, 1, 0, 2, 3, 2, 0, 1, 0], 4).unwrap();
    let balanced_max = balanced.t.iter().flatten().fold(0.0_f64, |m, v| m.max(v.abs()));
    let cycle = net_transit_states(&[0, 1, 2, 0, 1, 2, 0, 1, 2, 0], 3).unwrap();
    let third = 1.0 / 3.0;
    let cycle_err = [(0, 1, third), (1, 2, third), (2, 0, third), (1, 0, -third), (2, 1, -third), (0, 2, -third)]
        .iter()
        .map(|&(i, j, v)| (cycle.t[i][j] - v).abs())
        .fold(0.0, f64::max);
    verdict(
        11,
        "net transit",
        asym == 0.0 && balanced_max == 0.0 && cycle_err < 1e-15,
        format!("max |T + Tᵀ| = {asym}, balanced max |T| = {balanced_max}, 3-cycle |err| = {cycle_err:.1e}"),
    );
}
