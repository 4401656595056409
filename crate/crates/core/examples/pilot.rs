//! End-to-end rehearsal for one family at reduced scale. Trains a model,
//! then reports every stress signal the campaign will be judged on, plus
//! the spectral decomposition of the resolution scenario:
//!   E_base, D_res, frac_above (error energy above the train Nyquist),
//!   b = below-band fine error^2 / E_base^2, a = same for above-band,
//!   delta (coarse-solve noise vs restricted fine truth), tau (truth tail).
//! Run: cargo run -p stresslab-core --example pilot -- nls 400 100 [alpha] [amp]

use stresslab_core::fno::forward;
use stresslab_core::grid::{rel_l2_error, Field, ValueKind};
use stresslab_core::interp::interpolate;
use stresslab_core::problems::{
    assemble_input, encoding_for, fine_grid, interpolate_instance, ns_forcing, primary_input,
    rollout_reencode, sample_instance, solve_targets, train_grid, with_primary_input, PdeFamily,
    Regimes, SampleVariant,
};
use stresslab_core::sampler::perturb_input;
use stresslab_core::seeds;
use stresslab_core::spectrum::error_energy_fraction_above;
use stresslab_core::trainer::{train, Dataset, TrainConfig};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let family = match args.get(1).map(String::as_str) {
        Some("ns") => PdeFamily::NavierStokes,
        Some("nls") | None => PdeFamily::Nls,
        Some(other) => panic!("unknown family {other}"),
    };
    let n_train: usize = args.get(2).map_or(100, |s| s.parse().unwrap());
    let epochs: usize = args.get(3).map_or(40, |s| s.parse().unwrap());

    let mut regimes = Regimes::default();
    if let Some(alpha) = args.get(4) {
        let alpha: f64 = alpha.parse().unwrap();
        match family {
            PdeFamily::Nls => regimes.nls.ic_alpha = alpha,
            PdeFamily::NavierStokes => regimes.ns.ic_alpha = alpha,
            _ => unreachable!(),
        }
    }
    if let Some(amp) = args.get(5) {
        let amp: f64 = amp.parse().unwrap();
        match family {
            PdeFamily::Nls => regimes.nls.ic_amplitude = amp,
            PdeFamily::NavierStokes => regimes.ns.ic_amplitude = amp,
            _ => unreachable!(),
        }
    }
    if let Some(mm) = args.get(8) {
        let mm: usize = mm.parse().unwrap();
        match family {
            PdeFamily::Nls => regimes.nls.ic_max_mode = mm,
            PdeFamily::NavierStokes => regimes.ns.ic_max_mode = mm,
            _ => unreachable!(),
        }
    }
    if let Some(h) = args.get(9) {
        let h: f64 = h.parse().unwrap();
        match family {
            PdeFamily::Nls => regimes.nls.horizon = h,
            PdeFamily::NavierStokes => regimes.ns.horizon = h,
            _ => unreachable!(),
        }
    }
    run(family, &regimes, n_train, epochs);
}

fn run(family: PdeFamily, regimes: &Regimes, n_train: usize, epochs: usize) {
    let tag = family.tag();
    let enc = encoding_for(family, regimes);
    let coarse = train_grid(family, regimes).unwrap();
    let fine = fine_grid(family, regimes).unwrap();
    let nyq = coarse.sizes()[0] as f64 / 2.0 * 2.0 * std::f64::consts::PI / coarse.lengths()[0];
    let fno = regimes.fno_config(family).clone();

    let mut rng = seeds::rng_from(&[777, family.index()]);
    let forcing = (family == PdeFamily::NavierStokes)
        .then(|| ns_forcing(regimes, &mut rng).unwrap());

    let gen = |rng: &mut _, variant: &SampleVariant| {
        let inst = sample_instance(family, regimes, variant, forcing.as_ref(), rng).unwrap();
        let target = solve_targets(family, regimes, &inst, &[1]).unwrap().remove(0);
        let input = assemble_input(&inst, &enc, &coarse).unwrap();
        (inst, input, target)
    };

    let t0 = std::time::Instant::now();
    let mut inputs = Vec::new();
    let mut targets = Vec::new();
    for _ in 0..n_train {
        let (_, x, y) = gen(&mut rng, &SampleVariant::InDist);
        inputs.push(x);
        targets.push(y);
    }
    println!("[{tag}] generated {n_train} samples in {:.0} s", t0.elapsed().as_secs_f64());

    let args: Vec<String> = std::env::args().collect();
    let lr: f64 = args.get(6).map_or(1e-3, |s| s.parse().unwrap());
    let patience: usize = args.get(7).map_or(20, |s| s.parse().unwrap());
    let data = Dataset::new(inputs, targets).unwrap();
    let cfg = TrainConfig {
        max_epochs: epochs,
        learning_rate: lr,
        patience,
        ..TrainConfig::default()
    };
    let t0 = std::time::Instant::now();
    let (params, report) = train(&fno, &cfg, &data, 42, &[777, family.index(), 3]).unwrap();
    println!(
        "[{tag}] trained {} epochs in {:.0} s, best val {:.4} (epoch {}), final train {:.4}",
        report.epochs_run,
        t0.elapsed().as_secs_f64(),
        report.best_val_loss,
        report.best_epoch,
        report.train_history.last().copied().unwrap_or(f64::NAN)
    );

    // Baseline on fresh instances.
    let n_eval = 16;
    let mut e_base = 0.0;
    let mut eval_insts = Vec::new();
    for _ in 0..n_eval {
        let (inst, x, y) = gen(&mut rng, &SampleVariant::InDist);
        let pred = forward(&params, &x).unwrap();
        e_base += rel_l2_error(&pred, &y).unwrap() / n_eval as f64;
        eval_insts.push(inst);
    }
    println!("[{tag}] E_base = {e_base:.4}");

    // Resolution doubling: interpolate inputs, re-solve truth natively fine.
    let mut e_fine = 0.0;
    let mut below = 0.0; // mean squared rel error below/above the train Nyquist
    let mut above = 0.0;
    let mut delta = 0.0;
    let mut tau = 0.0;
    for inst in &eval_insts {
        let fi = interpolate_instance(inst, regimes, &fine).unwrap();
        let x = assemble_input(&fi, &enc, &fine).unwrap();
        let t = solve_targets(family, regimes, &fi, &[1]).unwrap().remove(0);
        let y = forward(&params, &x).unwrap();
        let e = rel_l2_error(&y, &t).unwrap();
        let frac = error_energy_fraction_above(&y, &t, nyq).unwrap();
        e_fine += e / n_eval as f64;
        above += e * e * frac / n_eval as f64;
        below += e * e * (1.0 - frac) / n_eval as f64;

        let t_coarse = solve_targets(family, regimes, inst, &[1]).unwrap().remove(0);
        let restricted = interpolate(&t, &coarse).unwrap();
        delta += rel_l2_error(&t_coarse, &restricted).unwrap() / n_eval as f64;
        let zero = Field::zeros(t.grid().clone(), t.channels(), ValueKind::Real);
        tau += error_energy_fraction_above(&zero, &t, nyq).unwrap() / n_eval as f64;
    }
    let frac = above / (above + below);
    println!(
        "[{tag}] resolution: D = {:.3}, frac_above = {:.1}%  (b = {:.2}, a = {:.2}, delta = {:.4}, tau = {:.5})",
        e_fine / e_base,
        100.0 * frac,
        below / (e_base * e_base),
        above / (e_base * e_base),
        delta,
        tau
    );

    // Parameter shift: worst setting over the stress grid (literal values).
    let shifts: Vec<f64> = match family {
        PdeFamily::Nls => [1.5, 2.0, 2.5]
            .iter()
            .map(|f| f * regimes.nls.kappa_hi)
            .collect(),
        PdeFamily::NavierStokes => [-0.25, -0.5]
            .iter()
            .map(|e| regimes.ns.nu * 10f64.powf(*e))
            .collect(),
        _ => vec![],
    };
    let mut worst: f64 = 0.0;
    for &s in &shifts {
        let mut e = 0.0;
        for _ in 0..10 {
            let (_, x, y) = gen(&mut rng, &SampleVariant::ParamShift(s));
            let pred = forward(&params, &x).unwrap();
            e += rel_l2_error(&pred, &y).unwrap() / 10.0;
        }
        worst = worst.max(e / e_base);
    }
    println!("[{tag}] param shift: worst D = {worst:.3}");

    // Perturbation: mean ratio of perturbed to unperturbed error.
    let mut ratio = 0.0;
    let n_pert = 8;
    for i in 0..n_pert {
        let (inst, x, y) = gen(&mut rng, &SampleVariant::InDist);
        let e0 = rel_l2_error(&forward(&params, &x).unwrap(), &y).unwrap();
        let mut rng_p = seeds::rng_from(&[778, family.index(), i as u64]);
        for _ in 0..4 {
            let base = primary_input(&inst, &coarse).unwrap();
            let noisy = perturb_input(&base, 0.02, &mut rng_p).unwrap();
            let pi = with_primary_input(&inst, noisy).unwrap();
            let xt = assemble_input(&pi, &enc, &coarse).unwrap();
            let tt = solve_targets(family, regimes, &pi, &[1]).unwrap().remove(0);
            let e = rel_l2_error(&forward(&params, &xt).unwrap(), &tt).unwrap();
            ratio += e / e0 / (n_pert as f64 * 4.0);
        }
    }
    println!("[{tag}] perturbation: mean ratio = {ratio:.3}");

    // Rollout: feed outputs back one horizon at a time, compare at 1/2/3/5.
    let report_at = [1usize, 2, 3, 5];
    let all_steps: Vec<usize> = (1..=5).collect();
    let mut errs = vec![0.0; report_at.len()];
    for _ in 0..10 {
        let (inst, x, _) = gen(&mut rng, &SampleVariant::InDist);
        let truths = solve_targets(family, regimes, &inst, &all_steps).unwrap();
        let mut state = x;
        for (step, truth) in truths.iter().enumerate() {
            let y = forward(&params, &state).unwrap();
            if let Some(slot) = report_at.iter().position(|&h| h == step + 1) {
                errs[slot] += rel_l2_error(&y, truth).unwrap() / 10.0;
            }
            if step + 1 < truths.len() {
                state = rollout_reencode(&inst, &enc, &y).unwrap();
            }
        }
    }
    let d_roll = errs.iter().cloned().fold(0.0f64, f64::max) / errs[0];
    println!(
        "[{tag}] rollout errors 1/2/3/5: {:.3} {:.3} {:.3} {:.3} -> D = {d_roll:.3}",
        errs[0], errs[1], errs[2], errs[3]
    );
}
