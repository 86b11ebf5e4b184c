//! Acceptance suite: one PASS/FAIL line per criterion, tolerances pinned below.
//! Exits non-zero when any criterion fails.

use std::f64::consts::PI;
use std::process::Command;
use std::time::{Duration, Instant};

use chiral_ring::linalg::sandwich;
use chiral_ring::model::omega_d_bar;
use chiral_ring::observables::optimal_drive_frequency;
use chiral_ring::operators::{build_h_sigma, chiral_state, ground_state};
use chiral_ring::rates::{
    dissipative_jumps, lorentzian_dos, pump_matrix_element, pump_rate_analytic, pump_rates_full, pump_rates_with,
    transition_strengths,
};
use chiral_ring::spectrum::{analytic_spectrum, diagonalize};
use chiral_ring::steadystate::{full_liouvillian, stationary_distribution, steady_state_nullspace, total_rates};
use chiral_ring::sweep::{analytic_sweep, compare_sweeps, run_sweep, solve_point, Solver, SweepResult, SweepSpec};
use chiral_ring::{DeviceParams, DriveParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ZERO_LINE_TOL: f64 = 1e-6;
const ZERO_LINE_BUDGET: Duration = Duration::from_secs(60);
const MAGNITUDE_BRACKET: (f64, f64) = (0.3, 1.0);
const SWEEP_BUDGET: Duration = Duration::from_secs(300);
const TRACKING_FRACTION: f64 = 0.9;
const RATE_TOL_LOOSE: (f64, f64) = (0.05, 0.10);
const RATE_TOL_TIGHT: (f64, f64) = (0.01, 0.02);
const SOLVER_POP_TOL: f64 = 1e-3;
const SYMMETRY_TOL_J0: f64 = 1e-8;
const SYMMETRY_POINTS: usize = 24;
const SPECTRUM_TOL: f64 = 1e-12;
const TRACE_TOL: f64 = 1e-10;
const HERMITICITY_TOL: f64 = 1e-10;
const MIN_EIGENVALUE: f64 = -1e-8;
const RESIDUAL_TOL: f64 = 1e-9;
const SIGN_AGREEMENT: f64 = 0.9;
const PROJECTION_TOL: f64 = 1e-12;
const END_TO_END_BUDGET: Duration = Duration::from_secs(600);

struct Outcome {
    id: &'static str,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn outcome(id: &'static str, name: &'static str, pass: bool, detail: String) -> Outcome {
    Outcome { id, name, pass, detail }
}

/// Distance of φ from the nearest multiple of π/N.
fn zero_line_distance(phi: f64, n: usize) -> f64 {
    let step = PI / n as f64;
    let r = phi.rem_euclid(step);
    r.min(step - r)
}

fn max_abs(xs: impl IntoIterator<Item = f64>) -> f64 {
    xs.into_iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn c1_zero_lines(sweep: &SweepResult, elapsed: Duration) -> Outcome {
    let device = &sweep.metadata.device;
    let scale = device.current_scale();
    let mut worst = 0.0_f64;
    let mut lines = 0;
    for (i, &phi) in sweep.phi.iter().enumerate() {
        if zero_line_distance(phi, device.n_sites) < 1e-9 {
            lines += 1;
            for j in 0..sweep.omega_d.len() {
                worst = worst.max(sweep.current(i, j).map_or(f64::INFINITY, f64::abs) / scale);
            }
        }
    }
    let pass = lines >= 2 * device.n_sites && worst < ZERO_LINE_TOL && elapsed < ZERO_LINE_BUDGET;
    outcome(
        "C1",
        "zero-current lines",
        pass,
        format!(
            "max |I|/(2J0/N) on {lines} rows phi = n*pi/N is {worst:.3e} (tol < {ZERO_LINE_TOL:e}); sweep {:.2} s (budget {} s)",
            elapsed.as_secs_f64(),
            ZERO_LINE_BUDGET.as_secs()
        ),
    )
}

fn c2_magnitude(sweep: &SweepResult, elapsed: Duration) -> Outcome {
    let scale = sweep.metadata.device.current_scale();
    let peak = max_abs(sweep.cells.iter().filter_map(|c| c.current()));
    let peak_si = max_abs(sweep.cells.iter().filter_map(|c| c.point().map(|p| p.current_si)));
    let ratio = peak / scale;
    let pass = (MAGNITUDE_BRACKET.0..=MAGNITUDE_BRACKET.1).contains(&ratio) && elapsed < SWEEP_BUDGET;
    outcome(
        "C2",
        "current magnitude",
        pass,
        format!(
            "max |I|/(2J0/N) = {ratio:.4} (bracket [{}, {}]), {peak_si:.3e} excitations/s; sweep {:.2} s (budget {} s)",
            MAGNITUDE_BRACKET.0,
            MAGNITUDE_BRACKET.1,
            elapsed.as_secs_f64(),
            SWEEP_BUDGET.as_secs()
        ),
    )
}

fn c3_tracking(sweep: &SweepResult) -> Outcome {
    let device = &sweep.metadata.device;
    let n = device.n_sites;
    let step = sweep.omega_d[1] - sweep.omega_d[0];
    let tol = device.kappa.max(step);
    let (mut hits, mut total) = (0usize, 0usize);
    let mut worst = 0.0_f64;
    for (i, &phi) in sweep.phi.iter().enumerate() {
        if zero_line_distance(phi, n) < 1e-9 {
            continue;
        }
        for k in 0..n {
            let mut best = (f64::NEG_INFINITY, 0.0);
            for (j, &w) in sweep.omega_d.iter().enumerate() {
                if let Some(p) = sweep.cell(i, j).point() {
                    if p.populations.n_k[k] > best.0 {
                        best = (p.populations.n_k[k], w);
                    }
                }
            }
            let dev = (best.1 - optimal_drive_frequency(k, phi, device, sweep.metadata.eps_d)).abs();
            worst = worst.max(dev);
            total += 1;
            if dev < tol {
                hits += 1;
            }
        }
    }
    let fraction = hits as f64 / total as f64;
    outcome(
        "C3",
        "optimal-frequency tracking",
        fraction >= TRACKING_FRACTION,
        format!(
            "{hits}/{total} (k, phi) maxima within max(kappa, step) = {tol:.2e} of omega_d^opt, fraction {fraction:.4} (need >= {TRACKING_FRACTION}); worst offset {:.3} steps",
            worst / step
        ),
    )
}

/// Worst relative deviation of the exact 0̃ → k̃ transition strength from Λ²,
/// and of the rates themselves, over k at their own resonances.
fn rate_deviation(device: &DeviceParams, eps_d: f64, phi: f64) -> (f64, f64) {
    let mut strength_dev = 0.0_f64;
    let mut rate_dev = 0.0_f64;
    for k in 0..device.n_sites {
        let omega_d = optimal_drive_frequency(k, phi, device, eps_d);
        let drive = DriveParams::new(omega_d, phi, eps_d);
        let eig = diagonalize(&build_h_sigma(device, &drive).unwrap()).unwrap();
        let full = pump_rates_full(&eig, device, &drive).unwrap();
        let g = eig.best_overlap(&ground_state(device.n_sites));
        let e = eig.best_overlap(&chiral_state(k, device).unwrap());
        let rate_full = full.get(g, e);
        let rate_analytic = pump_rate_analytic(k, device, &drive).unwrap();
        let en = eig.energies();
        let dos_full = lorentzian_dos(omega_d + en[g] - en[e], device.omega_c, device.kappa).unwrap();
        let spec = analytic_spectrum(device, &drive).unwrap();
        let dos_analytic = lorentzian_dos(omega_d + spec.tilde_e0 - spec.tilde_e_k[k], device.omega_c, device.kappa).unwrap();
        let strength_full = rate_full / (2.0 * PI * dos_full);
        let strength_analytic = rate_analytic / (2.0 * PI * dos_analytic);
        debug_assert!((strength_analytic / pump_matrix_element(device, &drive).unwrap() - 1.0).abs() < 1e-12);
        strength_dev = strength_dev.max((strength_full / strength_analytic - 1.0).abs());
        rate_dev = rate_dev.max((rate_full / rate_analytic - 1.0).abs());
    }
    (strength_dev, rate_dev)
}

fn c4_rate_formula() -> Outcome {
    let device = DeviceParams::default();
    let phi = PI / 2.0;
    let (loose, loose_rate) = rate_deviation(&device, RATE_TOL_LOOSE.0, phi);
    let (tight, tight_rate) = rate_deviation(&device, RATE_TOL_TIGHT.0, phi);
    let pass = loose < RATE_TOL_LOOSE.1 && tight < RATE_TOL_TIGHT.1;
    outcome(
        "C4",
        "rate-formula equivalence",
        pass,
        format!(
            "|strength/Lambda^2 - 1| = {loose:.4} at eps_d = {} (tol < {}), {tight:.4} at eps_d = {} (tol < {}); pointwise rate deviation {loose_rate:.3} / {tight_rate:.3}",
            RATE_TOL_LOOSE.0, RATE_TOL_LOOSE.1, RATE_TOL_TIGHT.0, RATE_TOL_TIGHT.1
        ),
    )
}

fn subgrid(device: &DeviceParams, eps_d: f64) -> Vec<DriveParams> {
    let bar = omega_d_bar(device, eps_d);
    let j0 = device.j0;
    let mut out = Vec::new();
    for phi in [0.0, PI / 3.0, PI / 2.0, PI, 1.5 * PI] {
        for dw in [-j0, -0.5 * j0, 0.0, 0.5 * j0, j0] {
            out.push(DriveParams::new(bar + dw, phi, eps_d));
        }
    }
    // on-resonance points for every k at φ = π/2
    for k in 0..device.n_sites {
        out.push(DriveParams::new(optimal_drive_frequency(k, PI / 2.0, device, eps_d), PI / 2.0, eps_d));
    }
    out
}

/// (max population difference, max null-space residual, null-space state checks pass)
fn solver_cross_check(device: &DeviceParams, eps_d: f64) -> (f64, f64, bool) {
    let jumps = dissipative_jumps(device).unwrap();
    let mut worst = 0.0_f64;
    let mut residual = 0.0_f64;
    let mut valid = true;
    for drive in subgrid(device, eps_d) {
        let eig = diagonalize(&build_h_sigma(device, &drive).unwrap()).unwrap();
        let strengths = transition_strengths(&eig);
        let pump = pump_rates_with(&eig, &strengths, device, &drive).unwrap();
        let p = stationary_distribution(&total_rates(&pump, &strengths, device).unwrap()).unwrap();
        let l = full_liouvillian(&eig, &jumps, &pump).unwrap();
        let rho = steady_state_nullspace(&l).unwrap();
        let q = rho.eigenbasis_populations(&eig);
        worst = worst.max(max_abs(p.iter().zip(&q).map(|(a, b)| a - b)));
        residual = residual.max(l.residual(&rho));
        let c = rho.checks();
        valid &= c.trace_error < TRACE_TOL && c.hermiticity_error < HERMITICITY_TOL && c.min_eigenvalue > MIN_EIGENVALUE;
    }
    (worst, residual, valid)
}

fn c5_solvers(device: &DeviceParams, eps_d: f64) -> Outcome {
    let (worst, _, _) = solver_cross_check(device, eps_d);
    outcome(
        "C5",
        "solver cross-validation",
        worst < SOLVER_POP_TOL,
        format!(
            "max |p_nullspace - p_rates| = {worst:.3e} on 5x5 subgrid + {} resonances (tol < {SOLVER_POP_TOL:e})",
            device.n_sites
        ),
    )
}

fn sorted_energies(device: &DeviceParams, drive: &DriveParams) -> Vec<f64> {
    let eig = diagonalize(&build_h_sigma(device, drive).unwrap()).unwrap();
    let mut e = eig.energies().to_vec();
    e.sort_by(f64::total_cmp);
    e
}

fn c6_symmetry(device: &DeviceParams, eps_d: f64) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let bar = omega_d_bar(device, eps_d);
    let shift = 2.0 * PI / device.n_sites as f64;
    let (mut odd, mut periodic, mut spec_shift, mut spec_flip) = (0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64);
    for _ in 0..SYMMETRY_POINTS {
        let w = bar + rng.gen_range(-4.0..4.0) * device.j0;
        let phi = rng.gen_range(0.0..2.0 * PI);
        let current = |p: f64| solve_point(device, &DriveParams::new(w, p, eps_d), Solver::Rates).unwrap().current_natural;
        let base = current(phi);
        odd = odd.max((current(-phi) + base).abs());
        periodic = periodic.max((current(phi + shift) - base).abs());
        let e = sorted_energies(device, &DriveParams::new(w, phi, eps_d));
        let e_shift = sorted_energies(device, &DriveParams::new(w, phi + shift, eps_d));
        let e_flip = sorted_energies(device, &DriveParams::new(w, -phi, eps_d));
        spec_shift = spec_shift.max(max_abs(e.iter().zip(&e_shift).map(|(a, b)| a - b)));
        spec_flip = spec_flip.max(max_abs(e.iter().zip(&e_flip).map(|(a, b)| a - b)));
    }
    let tol = SYMMETRY_TOL_J0 * device.j0;
    let pass = odd < tol && periodic < tol && spec_shift < SPECTRUM_TOL && spec_flip < SPECTRUM_TOL;
    outcome(
        "C6",
        "symmetry suite",
        pass,
        format!(
            "{SYMMETRY_POINTS} points: |I(-phi)+I(phi)| = {:.2e} J0, |I(phi+2pi/N)-I(phi)| = {:.2e} J0 (tol < {SYMMETRY_TOL_J0:e} J0); spectrum shift {spec_shift:.2e}, flip {spec_flip:.2e} (tol < {SPECTRUM_TOL:e})",
            odd / device.j0,
            periodic / device.j0
        ),
    )
}

fn c7_validity(sweep: &SweepResult) -> Outcome {
    let (mut trace, mut herm, mut min_eig, mut failed) = (0.0_f64, 0.0_f64, f64::INFINITY, 0usize);
    for cell in &sweep.cells {
        match cell.point() {
            Some(p) => {
                trace = trace.max(p.diagnostics.trace_error);
                herm = herm.max(p.diagnostics.hermiticity_error);
                min_eig = min_eig.min(p.diagnostics.min_eigenvalue);
            }
            None => failed += 1,
        }
    }
    let device = &sweep.metadata.device;
    let (_, residual, null_valid) = solver_cross_check(device, sweep.metadata.eps_d);
    let pass = failed == 0
        && trace < TRACE_TOL
        && herm < HERMITICITY_TOL
        && min_eig > MIN_EIGENVALUE
        && residual < RESIDUAL_TOL
        && null_valid;
    outcome(
        "C7",
        "state validity",
        pass,
        format!(
            "{} cells, {failed} failed: trace {trace:.2e} (< {TRACE_TOL:e}), hermiticity {herm:.2e} (< {HERMITICITY_TOL:e}), min eigenvalue {min_eig:.2e} (> {MIN_EIGENVALUE:e}); null-space residual {residual:.2e} (< {RESIDUAL_TOL:e}), null-space states valid: {null_valid}",
            sweep.cells.len()
        ),
    )
}

fn c8_structure(rates: &SweepResult, spec: &SweepSpec) -> Outcome {
    let analytic = analytic_sweep(spec).unwrap();
    let report = compare_sweeps(&analytic, rates, None).unwrap();
    let largest = report.clusters.first().map_or(0, |c| c.cells.len());
    outcome(
        "C8",
        "analytic-vs-numeric structure",
        report.agreement > SIGN_AGREEMENT,
        format!(
            "sign agreement {:.4} over {} cells above {:.2e} (need > {SIGN_AGREEMENT}); {} disagreement clusters, largest {largest} cells",
            report.agreement,
            report.compared,
            report.floor,
            report.clusters.len()
        ),
    )
}

fn c9_projection() -> Outcome {
    let mut worst = 0.0_f64;
    for n_sites in 3..=5 {
        let device = DeviceParams {
            n_sites,
            ..DeviceParams::default()
        };
        let jumps = dissipative_jumps(&device).unwrap();
        let vac = ground_state(n_sites);
        let states: Vec<_> = (0..n_sites).map(|n| chiral_state(n, &device).unwrap()).collect();
        let rate = |a: &chiral_ring::operators::StateVector, b: &chiral_ring::operators::StateVector| -> f64 {
            jumps
                .iter()
                .map(|j| sandwich(a.amplitudes(), &j.lindblad(), b.amplitudes()).norm_sqr())
                .sum()
        };
        for (n, k) in states.iter().enumerate() {
            worst = worst.max((rate(&vac, k) / device.gamma - 1.0).abs());
            for (m, q) in states.iter().enumerate() {
                if m != n {
                    let expect = 2.0 * device.gamma_phi / n_sites as f64;
                    worst = worst.max((rate(q, k) / expect - 1.0).abs());
                }
            }
        }
    }
    outcome(
        "C9",
        "dissipator projection",
        worst < PROJECTION_TOL,
        format!("N = 3..5: max relative deviation from gamma and 2 gamma_phi/N is {worst:.2e} (tol < {PROJECTION_TOL:e})"),
    )
}

fn c10_end_to_end() -> Outcome {
    let dir = tempfile::TempDir::new().unwrap();
    let bin = env!("CARGO_BIN_EXE_chiral-ring");
    let start = Instant::now();
    let mut outputs = Vec::new();
    for name in ["first.csv", "second.csv"] {
        let status = Command::new(bin)
            .current_dir(dir.path())
            .args(["sweep", "--out", name, "--solver", "rates"])
            .output()
            .unwrap();
        if !status.status.success() {
            return outcome("C10", "full-figure reproduction", false, format!("sweep exited {:?}", status.status.code()));
        }
        outputs.push(std::fs::read(dir.path().join(name)).unwrap());
    }
    let script = Command::new(bin)
        .current_dir(dir.path())
        .args(["plot-script", "first.csv", "--out", "plot.py"])
        .output()
        .unwrap()
        .status;
    let elapsed = start.elapsed();
    let text = String::from_utf8_lossy(&outputs[0]);
    let rows = text.lines().count() - 1;
    let header = text.lines().next().unwrap_or("");
    let has_maps = header.contains("current_natural") && (0..3).all(|k| header.contains(&format!("n_k{k}")));
    let identical = outputs[0] == outputs[1];
    let pass = rows == 101 * 121 && has_maps && identical && script.success() && elapsed < END_TO_END_BUDGET;
    outcome(
        "C10",
        "full-figure reproduction",
        pass,
        format!(
            "{rows} rows (want {}), current and n_k columns: {has_maps}, byte-identical rerun: {identical}, plot script: {}; {:.2} s end to end (budget {} s)",
            101 * 121,
            script.success(),
            elapsed.as_secs_f64(),
            END_TO_END_BUDGET.as_secs()
        ),
    )
}

fn main() {
    let spec = SweepSpec::default();
    let start = Instant::now();
    let sweep = run_sweep(&spec).expect("default sweep");
    let elapsed = start.elapsed();
    let device = spec.device.clone();

    let outcomes = vec![
        c1_zero_lines(&sweep, elapsed),
        c2_magnitude(&sweep, elapsed),
        c3_tracking(&sweep),
        c4_rate_formula(),
        c5_solvers(&device, spec.eps_d),
        c6_symmetry(&device, spec.eps_d),
        c7_validity(&sweep),
        c8_structure(&sweep, &spec),
        c9_projection(),
        c10_end_to_end(),
    ];
    println!();
    for o in &outcomes {
        println!("{} {:<4} {}: {}", if o.pass { "PASS" } else { "FAIL" }, o.id, o.name, o.detail);
    }
    let failed = outcomes.iter().filter(|o| !o.pass).count();
    println!("\nacceptance: {} passed, {failed} failed", outcomes.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
