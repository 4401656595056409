//! Solver-side resolution diagnostics, no training involved. For candidate
//! input spectra this prints:
//!   delta = relative difference between the native coarse solve and the
//!           fine solve restricted to the coarse grid (coarse-target noise);
//!   tau   = fraction of the fine solution's energy above the training
//!           Nyquist (unresolvable tail).
//! The resolution scenario needs delta comparable to the model error and
//! tau between roughly 1x and 2.4x the squared learnable error.
//! Run: cargo run -p stresslab-core --example resdiag

use stresslab_core::grid::rel_l2_error;
use stresslab_core::interp::interpolate;
use stresslab_core::problems::{
    fine_grid, interpolate_instance, ns_forcing, sample_instance, solve_targets, train_grid,
    PdeFamily, Regimes, SampleVariant,
};
use stresslab_core::seeds;
use stresslab_core::spectrum::error_energy_fraction_above;
use stresslab_core::grid::{Field, ValueKind};

fn zero_like(f: &Field) -> Field {
    Field::zeros(f.grid().clone(), f.channels(), ValueKind::Real)
}

fn main() {
    let n_inst = 12;

    println!("skip0 ---");
    for alpha in []as[f64;0] {
        let mut regimes = Regimes::default();
        regimes.nls.ic_alpha = alpha;
        report(PdeFamily::Nls, &regimes, n_inst, &format!("alpha {alpha}"));
    }

    println!("--- nls: max_mode x amplitude at alpha 0.1 ---");
    for mm in [63usize] {
        for amp in [2.0, 2.4, 2.8] {
            let mut regimes = Regimes::default();
            regimes.nls.ic_alpha = 0.1;
            regimes.nls.ic_amplitude = amp;
            regimes.nls.ic_max_mode = mm; // band edge
            report(PdeFamily::Nls, &regimes, n_inst, &format!("mm {mm} amp {amp}"));
        }
    }

    println!("--- nls: true delta/tau by solver_dt at alpha 0.1 amp 2.4 mm 63 ---");
    for divisor in [128.0f64, 256.0, 512.0] {
        let mut regimes = Regimes::default();
        regimes.nls.ic_alpha = 0.1;
        regimes.nls.ic_amplitude = 2.4;
        regimes.nls.ic_max_mode = 63;
        regimes.nls.solver_dt = 0.25 / divisor;
        report(PdeFamily::Nls, &regimes, n_inst, &format!("dt T/{divisor}"));
    }

    println!("--- ns: frozen default regime ---");
    {
        let regimes = Regimes::default();
        report(PdeFamily::NavierStokes, &regimes, 6, "ns default");
    }
}

/// Relative difference between solves at dt and dt/2 on the same grid:
/// the pure time-truncation component of the coarse-target noise.
fn dt_report(regimes: &Regimes, halved: &Regimes, n_inst: usize, label: &str) {
    let family = PdeFamily::Nls;
    let mut rng = seeds::rng_from(&[9999, family.index()]);
    let mut diff = 0.0;
    for _ in 0..n_inst {
        let inst = sample_instance(family, regimes, &SampleVariant::InDist, None, &mut rng).unwrap();
        let a = solve_targets(family, regimes, &inst, &[1]).unwrap().remove(0);
        let b = solve_targets(family, halved, &inst, &[1]).unwrap().remove(0);
        diff += rel_l2_error(&a, &b).unwrap() / n_inst as f64;
    }
    println!("{label:18} dt-halving diff = {diff:.5}");
}

fn report(family: PdeFamily, regimes: &Regimes, n_inst: usize, label: &str) {
    let coarse = train_grid(family, regimes).unwrap();
    let fine = fine_grid(family, regimes).unwrap();
    let nyq = coarse.sizes()[0] as f64 / 2.0 * 2.0 * std::f64::consts::PI / coarse.lengths()[0];

    let mut rng = seeds::rng_from(&[9999, family.index()]);
    let forcing = if family == PdeFamily::NavierStokes {
        Some(ns_forcing(regimes, &mut rng).unwrap())
    } else {
        None
    };

    let mut delta = 0.0;
    let mut tau = 0.0;
    for _ in 0..n_inst {
        let inst = sample_instance(family, regimes, &SampleVariant::InDist, forcing.as_ref(), &mut rng)
            .unwrap();
        let t_coarse = solve_targets(family, regimes, &inst, &[1])
            .unwrap()
            .remove(0);
        let fi = interpolate_instance(&inst, regimes, &fine).unwrap();
        let t_fine = solve_targets(family, regimes, &fi, &[1]).unwrap().remove(0);

        let restricted = interpolate(&t_fine, &coarse).unwrap();
        delta += rel_l2_error(&t_coarse, &restricted).unwrap() / n_inst as f64;
        // Energy fraction of the fine truth above the coarse Nyquist: the
        // "error" of predicting zero, restricted to high modes.
        tau += error_energy_fraction_above(&zero_like(&t_fine), &t_fine, nyq).unwrap()
            * (1.0 / n_inst as f64);
    }
    println!(
        "{label:18} delta = {delta:.4}  tau(energy frac above nyq) = {:.5}",
        tau
    );
}
