//! The acceptance checklist. Each test prints one `criterion N: PASS|FAIL`
//! line with the measured quantities, then asserts.

use std::sync::Mutex;
use std::time::{Duration, Instant};

use lossyrom::forward::{
    assemble_fd, eval_transfer, exact_spectral_data, homogeneous_transfer, sample_transfer,
};
use lossyrom::grid::{asymptotic_step, spectrally_matched_grid};
use lossyrom::invert::{eigenbasis, impedance_from_rom, loss_direct, DEFAULT_FINE_CELLS};
use lossyrom::media::FourierMedium;
use lossyrom::optim::{
    default_omega_max, forward_to_rom, fourier_profile, gauss_newton, jacobian, misfit_vector,
    Extraction, ForwardSettings, GnSettings,
};
use lossyrom::ratfit::{estimate_r0, fit_poles_residues};
use lossyrom::rom::{eval_rom_transfer, extract_coefficients, lanczos, passivity_scan, Reorth};
use lossyrom::sampled::relative_error;
use lossyrom::{Complex64, MediumProfile, RomMatrix, SpectralData, TransferSamples};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// keeps wall-clock budgets meaningful under the parallel test runner
static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> std::sync::MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

fn report(k: usize, pass: bool, detail: String) {
    println!(
        "criterion {k}: {} {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn rom_matrix(m: &MediumProfile, n: usize) -> (SpectralData, RomMatrix) {
    let op = assemble_fd(m, lossyrom_testbed::CELLS).unwrap();
    let data = exact_spectral_data(&op, n).unwrap();
    let rom = lanczos(&data, Reorth::Auto).unwrap();
    (data, rom)
}

#[test]
fn criterion_01_forward_oracle() {
    let _g = serial();
    let t0 = Instant::now();
    let mut worst = 0.0f64;
    for zeta0 in [1.0, 2.0] {
        for r0 in [0.0, 1.0] {
            let op = assemble_fd(&lossyrom_testbed::constant(zeta0, r0), 3000).unwrap();
            for s in [c(1.0, 0.0), c(0.0, 1.0), c(1.0, 5.0), c(0.0, 10.0)] {
                let fd = eval_transfer(&op, s).unwrap();
                let exact = homogeneous_transfer(zeta0, r0, 1.0, s);
                worst = worst.max((fd - exact).norm() / exact.norm());
            }
        }
    }
    let dt = t0.elapsed();
    let pass = worst <= 1e-3 && dt < Duration::from_secs(1);
    report(
        1,
        pass,
        format!(
            "max rel err {worst:.3e} (tol 1e-3), {:.3} s (limit 1 s)",
            dt.as_secs_f64()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_02_constant_loss_exactness() {
    let _g = serial();
    let t0 = Instant::now();
    let m = lossyrom_testbed::bumpy_impedance();
    let mut worst = (0.0f64, 0.0f64);
    for n in [10, 40] {
        let rom = forward_to_rom(&m, n, Extraction::Exact, &ForwardSettings::default()).unwrap();
        worst.0 = rom
            .r_primary
            .iter()
            .fold(worst.0, |a, r| a.max((r - 1.0).abs()));
        worst.1 = rom.r_dual.iter().fold(worst.1, |a, r| a.max(r.abs()));
    }
    let dt = t0.elapsed();
    let pass = worst.0 <= 1e-6 && worst.1 <= 1e-6 && dt < Duration::from_secs(10);
    report(
        2,
        pass,
        format!(
            "max|r_j - 1| {:.3e}, max|r^_j| {:.3e} (tol 1e-6), {:.2} s (limit 10 s)",
            worst.0,
            worst.1,
            dt.as_secs_f64()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_03_impedance_convergence() {
    let _g = serial();
    let t0 = Instant::now();
    let m = lossyrom_testbed::bumpy_lossy(0.2);
    let errs: Vec<f64> = [10, 40, 90]
        .iter()
        .map(|&n| {
            let rom =
                forward_to_rom(&m, n, Extraction::Exact, &ForwardSettings::default()).unwrap();
            let z = impedance_from_rom(&rom, &spectrally_matched_grid(n, 1.0).unwrap()).unwrap();
            relative_error(|t| z.eval(t), |t| m.zeta(t), 1.0, 6000, 1)
        })
        .collect();
    let dt = t0.elapsed();
    let pass =
        errs[0] > errs[1] && errs[1] > errs[2] && errs[2] <= 0.05 && dt < Duration::from_secs(120);
    report(
        3,
        pass,
        format!(
            "L1 errors n=10,40,90: {:.4}, {:.4}, {:.4} (decreasing, final <= 0.05), {:.2} s (limit 120 s)",
            errs[0],
            errs[1],
            errs[2],
            dt.as_secs_f64()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_04_spectrally_matched_grid() {
    let _g = serial();
    let mut pass = true;
    let mut detail = Vec::new();
    for n in [8, 16, 90] {
        let g = spectrally_matched_grid(n, 1.0).unwrap();
        let first = (g.h_hat[0] - 0.5 / n as f64).abs();
        let total = g.h.iter().sum::<f64>();
        let mid = (n / 4..=n / 2)
            .map(|j| (g.h[j - 1] / asymptotic_step(n, j, 1.0) - 1.0).abs())
            .fold(0.0f64, f64::max);
        let ok = g.steps_interlace()
            && g.nodes_interlace()
            && first <= 1e-10
            && (total - 1.0).abs() <= 0.1
            && mid <= 0.25;
        pass &= ok;
        detail.push(format!(
            "n={n}: |h^1 - 1/2n| {first:.1e}, sum h {total:.4}, mid dev {mid:.3}"
        ));
    }
    report(4, pass, detail.join("; "));
    assert!(pass);
}

#[test]
fn criterion_05_interpolation_identity() {
    let _g = serial();
    let m = lossyrom_testbed::bumpy_lossy(0.3);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut transfer_err, mut eig_err) = (0.0f64, 0.0f64);
    for n in [10, 40] {
        let (data, rom) = rom_matrix(&m, n);
        for _ in 0..20 {
            let s = c(rng.random_range(0.1..5.0), rng.random_range(-100.0..100.0));
            let a = eval_rom_transfer(&rom, s).unwrap();
            let b = data.eval(s);
            transfer_err = transfer_err.max((a - b).norm() / b.norm());
        }
        let eig = rom
            .dense()
            .schur()
            .eigenvalues()
            .expect("complex Schur form");
        for p in data.poles.iter().flat_map(|p| [*p, p.conj()]) {
            let near = eig
                .iter()
                .map(|e| (-e - p).norm())
                .fold(f64::INFINITY, f64::min);
            eig_err = eig_err.max(near / p.norm());
        }
    }
    let pass = transfer_err <= 1e-9 && eig_err <= 1e-7;
    report(
        5,
        pass,
        format!(
            "transfer rel err {transfer_err:.3e} (tol 1e-9), pole rel err {eig_err:.3e} (tol 1e-7)"
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_06_small_loss_regime() {
    let _g = serial();
    let mut pass = true;
    let mut detail = Vec::new();
    let mut check = |label: String, rom: &RomMatrix| {
        let coeffs = extract_coefficients(rom).unwrap();
        let max_b2 = rom
            .beta_squares
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        let min_g = coeffs
            .gammas
            .iter()
            .chain(&coeffs.gamma_hats)
            .cloned()
            .fold(f64::INFINITY, f64::min);
        pass &= max_b2 < 0.0 && min_g > 0.0;
        detail.push(format!(
            "{label}: max beta^2 {max_b2:.3e}, min gamma {min_g:.3e}"
        ));
    };
    for a in [0.1, 0.2, 0.3] {
        let m = lossyrom_testbed::oscillating_loss(a);
        assert!((m.decompose_loss().alpha / m.decompose_loss().r0 - a).abs() < 1e-3);
        check(format!("alpha/r0={a} exact"), &rom_matrix(&m, 40).1);
    }
    let m = lossyrom_testbed::oscillating_loss(0.3);
    let op = assemble_fd(&m, lossyrom_testbed::CELLS).unwrap();
    let samples = sample_transfer(&op, default_omega_max(40, 1.0), 10000).unwrap();
    let tail = estimate_r0(&samples, 1.0, m.zeta0).unwrap();
    let fit = fit_poles_residues(&samples, Some(&tail), 40).unwrap();
    check(
        "alpha/r0=0.3 fitted".into(),
        &lanczos(&fit.data, Reorth::Auto).unwrap(),
    );
    report(6, pass, detail.join("; "));
    assert!(pass);
}

#[test]
fn criterion_07_passivity() {
    let _g = serial();
    let media: Vec<(&str, MediumProfile)> = vec![
        ("constant", lossyrom_testbed::constant(1.0, 1.0)),
        ("constant zeta0=2", lossyrom_testbed::constant(2.0, 0.5)),
        ("bumps", lossyrom_testbed::bumpy_lossy(0.3)),
        ("oscillating", lossyrom_testbed::oscillating_loss(0.3)),
        ("layered", lossyrom_testbed::layered()),
    ];
    let mut pass = true;
    let mut worst = (f64::INFINITY, "", 0, 0.0);
    for (name, m) in &media {
        for n in [10, 40, 90] {
            let (_, rom) = rom_matrix(m, n);
            let rep = passivity_scan(&rom, default_omega_max(n, 1.0), 2000).unwrap();
            pass &= rep.min_real > 0.0;
            if rep.min_real < worst.0 {
                worst = (rep.min_real, name, n, rep.argmin_omega);
            }
        }
    }
    report(
        7,
        pass,
        format!(
            "min Re D_rom(i w) over 5 media x n=10,40,90: {:.3e} ({} n={} at w={:.3})",
            worst.0, worst.1, worst.2, worst.3
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_08_second_order_insensitivity() {
    let _g = serial();
    let n = 40;
    let g = spectrally_matched_grid(n, 1.0).unwrap();
    let settings = ForwardSettings::default();
    let zeta_at = |a: f64| {
        let rom = forward_to_rom(
            &lossyrom_testbed::oscillating_loss(a),
            n,
            Extraction::Exact,
            &settings,
        )
        .unwrap();
        impedance_from_rom(&rom, &g).unwrap()
    };
    // the alpha-independent discretization error is removed by differencing
    // against the estimate for the same impedance without loss variation
    let base = zeta_at(0.0);
    let alphas = [0.05, 0.1, 0.2];
    let errs: Vec<f64> = alphas
        .iter()
        .map(|&a| {
            let z = zeta_at(a);
            relative_error(|t| z.eval(t), |t| base.eval(t), 1.0, 6000, 1)
        })
        .collect();
    let (lx, ly): (Vec<f64>, Vec<f64>) = alphas
        .iter()
        .zip(&errs)
        .map(|(a, e)| (a.ln(), e.ln()))
        .unzip();
    let mx = lx.iter().sum::<f64>() / 3.0;
    let my = ly.iter().sum::<f64>() / 3.0;
    let slope = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| (x - mx) * (y - my))
        .sum::<f64>()
        / lx.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    let pass = slope >= 1.7;
    report(
        8,
        pass,
        format!(
            "impedance shift {:.3e}, {:.3e}, {:.3e} at alpha 0.05, 0.1, 0.2; slope {slope:.3} (need >= 1.7)",
            errs[0], errs[1], errs[2]
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_09_rational_fit() {
    let _g = serial();
    let poles: Vec<Complex64> = (0..8)
        .map(|j| c(-0.3 - 0.15 * j as f64, 4.0 + 9.5 * j as f64))
        .collect();
    let residues: Vec<Complex64> = (0..8)
        .map(|j| c(1.0 + 0.1 * j as f64, 0.05 * (j as f64 - 3.5)))
        .collect();
    let planted = SpectralData {
        poles,
        residues,
        zeta0: 1.0,
    };
    let s_points = lossyrom::forward::sample_points(100.0, 10000);
    let values = s_points.iter().map(|&s| planted.eval(s)).collect();
    let samples = TransferSamples {
        s_points,
        values,
        omega_max: 100.0,
    };
    let fit = fit_poles_residues(&samples, None, 8).unwrap();
    let pole_err = planted
        .poles
        .iter()
        .zip(&fit.data.poles)
        .map(|(a, b)| (a - b).norm() / a.norm())
        .fold(0.0, f64::max);
    let res_err = planted
        .residues
        .iter()
        .zip(&fit.data.residues)
        .map(|(a, b)| (a - b).norm() / a.norm())
        .fold(0.0, f64::max);

    let mut r0_err = 0.0f64;
    for m in [
        lossyrom_testbed::constant(1.0, 1.0),
        lossyrom_testbed::bumpy_impedance(),
    ] {
        let op = assemble_fd(&m, lossyrom_testbed::CELLS).unwrap();
        let s = sample_transfer(&op, 93.0, 10000).unwrap();
        let tail = estimate_r0(&s, 1.0, m.zeta0).unwrap();
        r0_err = r0_err.max((tail.r0_est - 1.0).abs());
    }
    let pass = pole_err <= 1e-6 && res_err <= 1e-6 && r0_err <= 0.01;
    report(
        9,
        pass,
        format!("pole rel err {pole_err:.3e}, residue rel err {res_err:.3e} (tol 1e-6), r0 rel err {r0_err:.3e} (tol 0.01)"),
    );
    assert!(pass);
}

fn misfit_at(f: &FourierMedium, n: usize, s: &GnSettings) -> Vec<f64> {
    let m = fourier_profile(f, s.fd_cells).unwrap();
    let op = assemble_fd(&m, s.fd_cells).unwrap();
    let rom =
        extract_coefficients(&lanczos(&exact_spectral_data(&op, n).unwrap(), s.reorth).unwrap())
            .unwrap();
    misfit_vector(
        &rom,
        &spectrally_matched_grid(n, f.t_max).unwrap(),
        &s.order,
    )
}

#[test]
fn criterion_10_gauss_newton() {
    let _g = serial();
    let truth = lossyrom_testbed::gentle();
    let n = 20;
    let settings = GnSettings::default();
    let data = forward_to_rom(&truth, n, Extraction::Exact, &ForwardSettings::default()).unwrap();
    let op = assemble_fd(&truth, lossyrom_testbed::CELLS).unwrap();
    let samples = sample_transfer(&op, default_omega_max(n, 1.0), 10000).unwrap();
    let r0 = estimate_r0(&samples, 1.0, truth.zeta0).unwrap().r0_est;
    let init = FourierMedium::constant(1.0, n, truth.zeta0, r0);
    let state = gauss_newton(&data, &init, n, &settings).unwrap();
    let zeta_err = relative_error(|t| state.medium.zeta(t), |t| truth.zeta(t), 1.0, 6000, 2);
    let loss_err = relative_error(|t| state.medium.loss(t), |t| truth.loss(t), 1.0, 6000, 2);
    let monotone = state
        .trace
        .windows(2)
        .all(|w| w[1].objective <= w[0].objective);

    // Jacobian check on a smaller basis, at a point away from the constant medium
    let jn = 10;
    let point = FourierMedium::project(&truth, FourierMedium::modes(jn));
    let point = point.with_params(&point.params().iter().map(|p| 0.8 * p).collect::<Vec<_>>());
    let base = misfit_at(&point, jn, &settings);
    let g = spectrally_matched_grid(jn, 1.0).unwrap();
    let fwd = jacobian(&point, &base, jn, &g, &settings, settings.delta).unwrap();
    let p = point.params();
    let mut col_err = 0.0f64;
    for k in 0..p.len() {
        let shifted = |d: f64| {
            let mut q = p.clone();
            q[k] += d;
            misfit_at(&point.with_params(&q), jn, &settings)
        };
        let (up, down) = (shifted(1e-3), shifted(-1e-3));
        let central: Vec<f64> = up.iter().zip(&down).map(|(a, b)| (a - b) / 2e-3).collect();
        let diff = central
            .iter()
            .enumerate()
            .map(|(i, v)| (fwd[(i, k)] - v).powi(2))
            .sum::<f64>()
            .sqrt();
        let norm = central.iter().map(|v| v * v).sum::<f64>().sqrt();
        col_err = col_err.max(diff / norm);
    }

    let pass = zeta_err <= 0.02
        && loss_err <= 0.02
        && state.iteration <= 10
        && monotone
        && col_err <= 0.02;
    report(
        10,
        pass,
        format!(
            "n={n}: {} iterations, L2 err zeta {zeta_err:.3e}, loss {loss_err:.3e} (tol 0.02), monotone {monotone}, \
             worst Jacobian column rel diff {col_err:.3e} (tol 0.02)",
            state.iteration
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_11_noise_pipeline() {
    let _g = serial();
    let n = 90;
    let m = lossyrom_testbed::bumpy_lossy(0.3);
    let settings = ForwardSettings {
        omega_max: Some(281.0),
        noise_level: 0.05,
        seed: 11,
        ..Default::default()
    };
    let rom = forward_to_rom(&m, n, Extraction::Ratfit, &settings).unwrap();
    let g = spectrally_matched_grid(n, 1.0).unwrap();
    let z = impedance_from_rom(&rom, &g).unwrap();
    let zeta_err = relative_error(|t| z.eval(t), |t| m.zeta(t), 1.0, 6000, 1);
    let basis = eigenbasis(&z, 1.0, n, DEFAULT_FINE_CELLS).unwrap();
    let inv = loss_direct(&rom, &g, &basis, 0.1).unwrap();
    let loss_err = relative_error(|t| inv.loss_est.eval(t), |t| m.loss(t), 1.0, 6000, 2);
    let bounded = inv
        .loss_est
        .y
        .iter()
        .all(|v| v.is_finite() && v.abs() < 10.0);
    let pass = zeta_err <= 0.1 && loss_err <= 0.3 && bounded;
    report(
        11,
        pass,
        format!("impedance L1 err {zeta_err:.4} (tol 0.10), loss L2 err {loss_err:.4} at reg 0.1 (tol 0.30)"),
    );
    assert!(pass);
}
