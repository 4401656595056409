//! Rough per-family cost measurements used to budget campaign epochs.
//! Run: cargo run -p stresslab-core --example profile

use std::time::Instant;

use stresslab_core::problems::{
    assemble_input, encoding_for, fine_grid, ns_forcing, sample_instance, solve_targets,
    train_grid, PdeFamily, Regimes, SampleVariant, ALL_FAMILIES,
};
use stresslab_core::seeds;
use stresslab_core::trainer::{train, Dataset, TrainConfig};
use stresslab_core::{fno, interp};

fn main() {
    let regimes = Regimes::default();
    regimes.validate().unwrap();

    for family in ALL_FAMILIES {
        let enc = encoding_for(family, &regimes);
        let grid = train_grid(family, &regimes).unwrap();
        let mut rng = seeds::rng_from(&[7777, family.index()]);
        let forcing = if family == PdeFamily::NavierStokes {
            Some(ns_forcing(&regimes, &mut rng).unwrap())
        } else {
            None
        };

        // Instance generation cost (sample + solve).
        let t0 = Instant::now();
        let n_gen = 8;
        let mut inputs = Vec::new();
        let mut targets = Vec::new();
        for _ in 0..n_gen {
            let inst = sample_instance(
                family,
                &regimes,
                &SampleVariant::InDist,
                forcing.as_ref(),
                &mut rng,
            )
            .unwrap();
            let y = solve_targets(family, &regimes, &inst, &[1]).unwrap();
            let x = assemble_input(&inst, &enc, &grid).unwrap();
            inputs.push(x);
            targets.push(y.into_iter().next().unwrap());
        }
        let gen_each = t0.elapsed().as_secs_f64() / n_gen as f64;

        // Duplicate up to 32 samples for a representative epoch timing.
        while inputs.len() < 32 {
            let i = inputs.len() % n_gen;
            inputs.push(inputs[i].clone());
            targets.push(targets[i].clone());
        }
        let data = Dataset::new(inputs.clone(), targets.clone()).unwrap();

        let mut tc = TrainConfig::default();
        tc.max_epochs = 2;
        tc.patience = 100;
        let t1 = Instant::now();
        let (params, _) = train(regimes.fno_config(family), &tc, &data, 1, &[7778]).unwrap();
        let per_epoch_32 = t1.elapsed().as_secs_f64() / 2.0;

        // Forward cost at the training grid and, where applicable, the
        // doubled grid (resolution scenario).
        let t2 = Instant::now();
        for _ in 0..8 {
            fno::forward(&params, &inputs[0]).unwrap();
        }
        let fwd = t2.elapsed().as_secs_f64() / 8.0;

        let fine_fwd = if matches!(
            family,
            PdeFamily::Nls | PdeFamily::Poisson | PdeFamily::NavierStokes | PdeFamily::BlackScholes
        ) {
            let fg = fine_grid(family, &regimes).unwrap();
            let fine_x = interp::interpolate(&inputs[0], &fg).unwrap();
            let t3 = Instant::now();
            for _ in 0..4 {
                fno::forward(&params, &fine_x).unwrap();
            }
            t3.elapsed().as_secs_f64() / 4.0
        } else {
            0.0
        };

        // Extrapolate one epoch at n_train = 400 (360 train samples).
        let epoch_400 = per_epoch_32 * 360.0 / 32.0;
        println!(
            "{:8} gen {:7.3} s/inst | epoch(360) {:7.2} s | fwd {:6.4} s | fine fwd {:6.4} s | gen424 {:6.1} s",
            family.tag(),
            gen_each,
            epoch_400,
            fwd,
            fine_fwd,
            gen_each * 424.0
        );
    }
}
