mod common;

use jointcon::experiments::builtin_scenario;
use jointcon::metrics::estimate_mi;
use jointcon::model::noise_var_from_snr;
use jointcon::optimizer::{evaluate, optimize, project_constraints, random_init};
use jointcon::precoders::{build_linear_constellation, mmse_encoder};
use jointcon::{MessageSpace, NoiseConvention, PowerConstraint, SeedStreams, Stream};

#[test]
fn estimator_is_unbiased_against_quadrature() {
    let sigma2 = noise_var_from_snr(6.0, 1.0);
    let (x, chan) = common::scalar_bpsk(sigma2);
    let space = MessageSpace::binary(1).unwrap();
    let streams = SeedStreams::new(50);
    let estimates: Vec<_> = (0..50)
        .map(|i| {
            let mut rng = streams.rng(Stream::Evaluation, &[i]);
            estimate_mi(&x, &chan, &space, 0, 2000, NoiseConvention::Paper, &mut rng).unwrap()
        })
        .collect();
    let mean = estimates.iter().map(|e| e.raw_mi).sum::<f64>() / 50.0;
    let pooled = estimates.iter().map(|e| e.stderr.powi(2)).sum::<f64>().sqrt() / 50.0;
    let oracle = common::bpsk_mi_quadrature(sigma2);
    assert!((mean - oracle).abs() < 3.0 * pooled, "mean {mean} oracle {oracle} pooled se {pooled}");
}

#[test]
fn quadrature_oracle_reference_value() {
    // BPSK over real AWGN at unit SNR
    assert!((common::bpsk_mi_quadrature(1.0) - 0.4859).abs() < 1e-3);
    assert!(common::bpsk_mi_quadrature(1e-3) > 1.0 - 1e-12);
}

#[test]
fn mi_is_nonincreasing_in_noise() {
    let spec = builtin_scenario("scenario1").unwrap();
    let space = spec.message_space().unwrap();
    let base = spec.realize(&SeedStreams::new(0)).unwrap();
    let x = build_linear_constellation(&mmse_encoder(&base).unwrap(), &space, &spec.power).unwrap();
    let streams = SeedStreams::new(3);
    let mut previous: Option<Vec<(f64, f64)>> = None;
    for snr in [15.0, 10.0, 6.0, 3.0, 0.0, -5.0] {
        let v = noise_var_from_snr(snr, 1.0);
        let chan = base.with_noise_var(vec![v, v]).unwrap();
        let mi = evaluate(&x, &chan, &space, 20_000, NoiseConvention::Paper, &streams).unwrap();
        let cur: Vec<(f64, f64)> = mi.iter().map(|m| (m.mi, m.stderr)).collect();
        if let Some(prev) = &previous {
            for (p, c) in prev.iter().zip(&cur) {
                assert!(c.0 <= p.0 + 2.0 * p.1.max(c.1), "snr {snr}: {c:?} after {p:?}");
            }
        }
        previous = Some(cur);
    }
}

#[test]
fn optimization_makes_progress_on_scenario1() {
    let spec = builtin_scenario("scenario1").unwrap();
    let space = spec.message_space().unwrap();
    let chan = spec.realize(&SeedStreams::new(0)).unwrap();
    let eval = SeedStreams::new(999);
    let max_loss = |x: &jointcon::Constellation| {
        evaluate(x, &chan, &space, 20_000, spec.opt.convention, &eval)
            .unwrap()
            .iter()
            .map(|m| 1.0 - m.raw_mi)
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let improved = (0..20)
        .filter(|&s| {
            let run = optimize(&chan, &space, &spec.power, &spec.opt, &SeedStreams::new(s)).unwrap();
            max_loss(&run.final_constellation) < max_loss(&run.initial_constellation)
        })
        .count();
    assert!(improved >= 19, "improved in {improved}/20 seeds");
}

#[test]
fn projection_is_idempotent_without_clipping() {
    let pc = PowerConstraint::new(1.0, 4.0).unwrap();
    let space = MessageSpace::binary(3).unwrap();
    for seed in 0..50 {
        let mut rng = SeedStreams::new(seed).rng(Stream::Init, &[]);
        let once = random_init(&space, 4, &pc, false, &mut rng).unwrap();
        let twice = project_constraints(&once, &pc).unwrap();
        if once.peak_antenna_power() < pc.peak_antenna_power {
            assert_eq!(once, twice);
        }
    }
}
