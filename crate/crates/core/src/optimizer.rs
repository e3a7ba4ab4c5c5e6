//! Projected stochastic gradient descent on the MAX-MIN cross-entropy.
//!
//! Each iteration draws N joint messages and fresh noise for every user, computes
//! each user's batch loss, takes the gradient of the largest one with respect to
//! the real and imaginary parts of every constellation point, applies one Adam
//! step and projects the result back into the power constraints.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{estimate_mi, LossReport, MiEstimate, UserDetector, CHUNK, LLR_CAP};
use crate::model::{
    draw_messages, draw_noise, ChannelSet, Constellation, MessageSpace, NoiseConvention,
    ObservationBatch, PowerConstraint,
};
use crate::rng::{SeedStreams, Stream};

/// Uniformly rescales to mean power P_m, then clips every antenna component whose
/// squared magnitude exceeds P_c back onto the disc of radius √P_c, keeping its phase.
///
/// Clipping runs after normalization, so the mean power can end below P_m.
pub fn project_constraints(
    constellation: &Constellation,
    pc: &PowerConstraint,
) -> Result<Constellation> {
    let mean = constellation.mean_power();
    if mean == 0.0 {
        return Err(Error::ZeroConstellation);
    }
    let mut out = constellation.clone();
    let scale = (pc.mean_power / mean).sqrt();
    if (scale - 1.0).abs() > 2.0 * f64::EPSILON {
        out.as_mut_slice().iter_mut().for_each(|z| *z *= scale);
    }
    let cap = pc.peak_antenna_power.sqrt();
    for z in out.as_mut_slice() {
        if z.norm_sqr() > pc.peak_antenna_power {
            *z *= cap / z.norm();
        }
    }
    Ok(out)
}

/// Random constellation: every component i.i.d. CN(0, 1), or N(0, 1) with zero
/// imaginary part when `real_valued`, then projected.
pub fn random_init<G: Rng + ?Sized>(
    space: &MessageSpace,
    antennas: usize,
    pc: &PowerConstraint,
    real_valued: bool,
    rng: &mut G,
) -> Result<Constellation> {
    let n = space.total() * antennas;
    let points = (0..n)
        .map(|_| {
            if real_valued {
                Complex64::new(rng.sample(StandardNormal), 0.0)
            } else {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
            }
        })
        .collect();
    project_constraints(&Constellation::new(antennas, points)?, pc)
}

/// Real parameterization: (re, im) of every component, point-major.
pub fn to_params(constellation: &Constellation) -> Vec<f64> {
    constellation
        .as_slice()
        .iter()
        .flat_map(|z| [z.re, z.im])
        .collect()
}

pub fn from_params(antennas: usize, params: &[f64]) -> Result<Constellation> {
    let points = params
        .chunks_exact(2)
        .map(|p| Complex64::new(p[0], p[1]))
        .collect();
    Constellation::new(antennas, points)
}

/// Messages and noise held fixed while a loss and its gradient are evaluated.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingDraws {
    pub messages: Vec<usize>,
    /// One N×R noise block per user.
    pub noise: Vec<Vec<Complex64>>,
}

impl TrainingDraws {
    pub fn draw<G: Rng + ?Sized, H: Rng>(
        chan: &ChannelSet,
        space: &MessageSpace,
        n: usize,
        convention: NoiseConvention,
        message_rng: &mut G,
        noise_rngs: &mut [H],
    ) -> Self {
        let messages = draw_messages(space, n, message_rng);
        let noise = noise_rngs
            .iter_mut()
            .enumerate()
            .map(|(k, rng)| draw_noise(chan, k, n, convention, rng))
            .collect();
        Self { messages, noise }
    }

    pub fn batch(&self, constellation: &Constellation, chan: &ChannelSet, user: usize) -> ObservationBatch {
        ObservationBatch::from_noise(
            constellation,
            chan,
            user,
            self.messages.clone(),
            &self.noise[user],
        )
    }
}

/// Batch loss of one user under fixed draws and its gradient with respect to
/// the real parameterization (see [`to_params`]).
///
/// The gradient flows both through the reference points inside the likelihood
/// sums and through the transmitted point inside each observation.
pub fn user_loss_gradient(
    constellation: &Constellation,
    chan: &ChannelSet,
    space: &MessageSpace,
    user: usize,
    draws: &TrainingDraws,
    convention: NoiseConvention,
) -> Result<(f64, Vec<f64>)> {
    let det = UserDetector::new(constellation, chan, space, user, convention)?;
    let rx = chan.rx();
    let p = det.num_points();
    let n = draws.messages.len();
    if n == 0 {
        return Err(Error::validation("n_samples", "empty batch"));
    }
    let noise = &draws.noise[user];
    let scale = det.scale();

    // Per chunk: (loss sum, gradient w.r.t. the received points ζ_kᴴx_j).
    let partials: Vec<(f64, Vec<Complex64>)> = draws
        .messages
        .par_chunks(CHUNK)
        .zip(noise.par_chunks(CHUNK * rx))
        .map(|(msgs, nu)| {
            let mut grad = vec![Complex64::new(0.0, 0.0); p * rx];
            let mut d = vec![0.0; p];
            let mut y = vec![Complex64::new(0.0, 0.0); rx];
            let mut loss = 0.0;
            for (i, &m) in msgs.iter().enumerate() {
                for r in 0..rx {
                    y[r] = det.projected(m)[r] + nu[i * rx + r];
                }
                det.distances_into(&y, &mut d);
                let symbol = space.symbol(m, user);
                let shift = d.iter().copied().fold(f64::INFINITY, f64::min);
                let (mut za, mut zb) = (0.0, 0.0);
                for (j, &dj) in d.iter().enumerate() {
                    let e = (shift - dj).exp();
                    if det.symbol_of(j) == symbol {
                        za += e;
                    } else {
                        zb += e;
                    }
                }
                let llr = za.ln() - zb.ln();
                let clamped = llr.clamp(-LLR_CAP, LLR_CAP);
                loss += crate::metrics::loss_from_llr0(clamped);
                if clamped != llr {
                    continue;
                }
                // dL/dllr = −σ(−llr)/ln2
                let g_llr = -crate::metrics::posterior(-llr) / std::f64::consts::LN_2;
                let mut sent = vec![Complex64::new(0.0, 0.0); rx];
                for (j, &dj) in d.iter().enumerate() {
                    let e = (shift - dj).exp();
                    let c = if det.symbol_of(j) == symbol {
                        -g_llr * e / za
                    } else {
                        g_llr * e / zb
                    };
                    if c == 0.0 {
                        continue;
                    }
                    let s = det.projected(j);
                    for r in 0..rx {
                        let e_jr = (y[r] - s[r]) * (2.0 * scale * c);
                        grad[j * rx + r] -= e_jr;
                        sent[r] += e_jr;
                    }
                }
                for r in 0..rx {
                    grad[m * rx + r] += sent[r];
                }
            }
            (loss, grad)
        })
        .collect();

    let mut loss = 0.0;
    let mut grad_s = vec![Complex64::new(0.0, 0.0); p * rx];
    for (l, g) in &partials {
        loss += l;
        for (a, b) in grad_s.iter_mut().zip(g) {
            *a += b;
        }
    }
    let inv_n = 1.0 / n as f64;
    let zeta = chan.zeta(user);
    let t = chan.antennas();
    let mut params = vec![0.0; 2 * p * t];
    for j in 0..p {
        for ti in 0..t {
            let g: Complex64 = (0..rx)
                .map(|r| zeta[(ti, r)] * grad_s[j * rx + r])
                .sum::<Complex64>()
                * inv_n;
            params[2 * (j * t + ti)] = g.re;
            params[2 * (j * t + ti) + 1] = g.im;
        }
    }
    Ok((loss * inv_n, params))
}

/// Every user's batch loss under fixed draws and the gradient of the largest one
/// (lowest user index on ties).
pub fn loss_and_gradient(
    constellation: &Constellation,
    chan: &ChannelSet,
    space: &MessageSpace,
    draws: &TrainingDraws,
    convention: NoiseConvention,
) -> Result<(LossReport, Vec<f64>)> {
    if draws.noise.len() != space.users() {
        return Err(Error::validation("draws", "one noise block per user required"));
    }
    let losses = (0..space.users())
        .map(|k| {
            let det = UserDetector::new(constellation, chan, space, k, convention)?;
            let losses = det.sample_losses(space, &draws.batch(constellation, chan, k));
            let mut acc = 0.0;
            for l in &losses {
                acc += l;
            }
            Ok(acc / losses.len() as f64)
        })
        .collect::<Result<Vec<_>>>()?;
    let report = LossReport::from_losses(losses, Some(space));
    let (_, grad) = user_loss_gradient(
        constellation,
        chan,
        space,
        report.argmax_user,
        draws,
        convention,
    )?;
    Ok((report, grad))
}

/// Adam moments and hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub step_count: u64,
    pub eta: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(len: usize, eta: f64) -> Self {
        Self {
            first_moment: vec![0.0; len],
            second_moment: vec![0.0; len],
            step_count: 0,
            eta,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    /// One bias-corrected Adam update of `params` in place.
    pub fn update(&mut self, params: &mut [f64], grad: &[f64]) {
        assert_eq!(params.len(), grad.len());
        assert_eq!(params.len(), self.first_moment.len());
        self.step_count += 1;
        let t = self.step_count as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for (((p, g), m), v) in params
            .iter_mut()
            .zip(grad)
            .zip(&mut self.first_moment)
            .zip(&mut self.second_moment)
        {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= self.eta * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

/// Pure form of [`AdamState::update`] on a constellation; the result is not projected.
pub fn adam_step(
    state: &AdamState,
    constellation: &Constellation,
    grad: &[f64],
) -> Result<(AdamState, Constellation)> {
    let mut next = state.clone();
    let mut params = to_params(constellation);
    if params.len() != grad.len() || params.len() != state.first_moment.len() {
        return Err(Error::validation("gradient", "shape does not match the constellation"));
    }
    next.update(&mut params, grad);
    Ok((next, from_params(constellation.antennas(), &params)?))
}

/// Stop when the best max-loss has not improved by `min_improvement` bits over `window` iterations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Plateau {
    pub window: usize,
    pub min_improvement: f64,
}

impl Default for Plateau {
    fn default() -> Self {
        Self {
            window: 20,
            min_improvement: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizationConfig {
    pub eta: f64,
    pub n_samples: usize,
    pub max_iterations: usize,
    pub plateau: Option<Plateau>,
    pub restarts: usize,
    pub n_eval: usize,
    /// Keep every imaginary part at zero (real-channel scenarios).
    pub real_valued: bool,
    pub convention: NoiseConvention,
}

impl Default for OptimizationConfig {
    fn default() -> Self {
        Self {
            eta: 0.1,
            n_samples: 10_000,
            max_iterations: 100,
            plateau: None,
            restarts: 1,
            n_eval: 100_000,
            real_valued: false,
            convention: NoiseConvention::Paper,
        }
    }
}

impl OptimizationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::validation("eta", "must be positive"));
        }
        if self.n_samples == 0 {
            return Err(Error::validation("n_samples", "must be at least 1"));
        }
        if self.max_iterations == 0 {
            return Err(Error::validation("iterations", "must be at least 1"));
        }
        if self.restarts == 0 {
            return Err(Error::validation("restarts", "must be at least 1"));
        }
        if self.n_eval < crate::metrics::MIN_EVAL_SAMPLES {
            return Err(Error::validation(
                "n_eval",
                format!("must be at least {}", crate::metrics::MIN_EVAL_SAMPLES),
            ));
        }
        if let Some(p) = &self.plateau {
            if p.window == 0 {
                return Err(Error::validation("plateau.window", "must be at least 1"));
            }
        }
        Ok(())
    }
}

/// Training loss of one iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub max_loss: f64,
    pub argmax_user: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub initial_constellation: Constellation,
    pub final_constellation: Constellation,
    pub loss_history: Vec<IterationRecord>,
    pub per_user_mi: Vec<MiEstimate>,
    pub config: OptimizationConfig,
    pub seed: u64,
    /// Index of the restart this result came from.
    pub restart: usize,
    /// min_k MI of every restart, in restart order.
    pub restart_min_mi: Vec<f64>,
}

impl RunResult {
    pub fn min_mi(&self) -> f64 {
        self.per_user_mi.iter().map(|m| m.mi).fold(f64::INFINITY, f64::min)
    }

    pub fn mean_mi(&self) -> f64 {
        self.per_user_mi.iter().map(|m| m.mi).sum::<f64>() / self.per_user_mi.len() as f64
    }

    pub fn convention(&self) -> NoiseConvention {
        self.config.convention
    }
}

/// MI of every user on the evaluation streams of `eval`.
pub fn evaluate(
    constellation: &Constellation,
    chan: &ChannelSet,
    space: &MessageSpace,
    n_eval: usize,
    convention: NoiseConvention,
    eval: &SeedStreams,
) -> Result<Vec<MiEstimate>> {
    (0..space.users())
        .map(|k| {
            let mut rng = eval.rng(Stream::Evaluation, &[k as u64]);
            estimate_mi(constellation, chan, space, k, n_eval, convention, &mut rng)
        })
        .collect()
}

fn validate_problem(chan: &ChannelSet, space: &MessageSpace, pc: &PowerConstraint) -> Result<()> {
    pc.validate()?;
    if chan.users() != space.users() {
        return Err(Error::validation(
            "channels",
            format!("{} channels for {} users", chan.users(), space.users()),
        ));
    }
    Ok(())
}

fn run_once(
    chan: &ChannelSet,
    space: &MessageSpace,
    pc: &PowerConstraint,
    cfg: &OptimizationConfig,
    train: &SeedStreams,
    eval: &SeedStreams,
    observer: &mut dyn FnMut(&IterationRecord, &Constellation),
) -> Result<RunResult> {
    let antennas = chan.antennas();
    let mut init_rng = train.rng(Stream::Init, &[]);
    let initial = random_init(space, antennas, pc, cfg.real_valued, &mut init_rng)?;
    let mut message_rng = train.rng(Stream::Messages, &[]);
    let mut noise_rngs: Vec<_> = (0..space.users())
        .map(|k| train.rng(Stream::Noise, &[k as u64]))
        .collect();

    let mut params = to_params(&initial);
    let mut current = initial.clone();
    let mut adam = AdamState::new(params.len(), cfg.eta);
    let mut history = Vec::with_capacity(cfg.max_iterations);
    let mut best = f64::INFINITY;
    let mut best_at = 0usize;

    for iteration in 0..cfg.max_iterations {
        let draws = TrainingDraws::draw(
            chan,
            space,
            cfg.n_samples,
            cfg.convention,
            &mut message_rng,
            &mut noise_rngs,
        );
        let (report, mut grad) = loss_and_gradient(&current, chan, space, &draws, cfg.convention)?;
        if cfg.real_valued {
            grad.iter_mut().skip(1).step_by(2).for_each(|g| *g = 0.0);
        }
        adam.update(&mut params, &grad);
        current = project_constraints(&from_params(antennas, &params)?, pc)?;
        params = to_params(&current);

        let record = IterationRecord {
            iteration,
            max_loss: report.max_loss,
            argmax_user: report.argmax_user,
        };
        observer(&record, &current);
        history.push(record);

        if let Some(plateau) = &cfg.plateau {
            if report.max_loss < best - plateau.min_improvement {
                best = report.max_loss;
                best_at = iteration;
            } else if iteration - best_at >= plateau.window {
                break;
            }
        }
    }

    let per_user_mi = evaluate(&current, chan, space, cfg.n_eval, cfg.convention, eval)?;
    let min = per_user_mi.iter().map(|m| m.mi).fold(f64::INFINITY, f64::min);
    Ok(RunResult {
        initial_constellation: initial,
        final_constellation: current,
        loss_history: history,
        per_user_mi,
        config: cfg.clone(),
        seed: train.seed(),
        restart: 0,
        restart_min_mi: vec![min],
    })
}

/// One run of the projected SGD loop.
pub fn optimize(
    chan: &ChannelSet,
    space: &MessageSpace,
    pc: &PowerConstraint,
    cfg: &OptimizationConfig,
    streams: &SeedStreams,
) -> Result<RunResult> {
    optimize_observed(chan, space, pc, cfg, streams, &mut |_, _| {})
}

/// [`optimize`] with a callback invoked after every projected update.
pub fn optimize_observed(
    chan: &ChannelSet,
    space: &MessageSpace,
    pc: &PowerConstraint,
    cfg: &OptimizationConfig,
    streams: &SeedStreams,
    observer: &mut dyn FnMut(&IterationRecord, &Constellation),
) -> Result<RunResult> {
    cfg.validate()?;
    validate_problem(chan, space, pc)?;
    run_once(chan, space, pc, cfg, streams, streams, observer)
}

/// Runs `cfg.restarts` independent optimizations and keeps the one with the
/// highest min_k MI. Restart 0 uses `streams` directly, so a single restart is
/// identical to [`optimize`]; every restart is evaluated on the evaluation
/// streams of `streams`.
pub fn optimize_with_restarts(
    chan: &ChannelSet,
    space: &MessageSpace,
    pc: &PowerConstraint,
    cfg: &OptimizationConfig,
    streams: &SeedStreams,
) -> Result<RunResult> {
    cfg.validate()?;
    validate_problem(chan, space, pc)?;
    let runs: Vec<RunResult> = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| {
            let train = if r == 0 {
                *streams
            } else {
                streams.child(&[r as u64])
            };
            run_once(chan, space, pc, cfg, &train, streams, &mut |_, _| {}).map(|mut run| {
                run.restart = r;
                run
            })
        })
        .collect::<Result<_>>()?;
    let restart_min_mi: Vec<f64> = runs.iter().map(RunResult::min_mi).collect();
    let best = runs
        .into_iter()
        .reduce(|a, b| if b.min_mi() > a.min_mi() { b } else { a })
        .expect("restarts >= 1");
    Ok(RunResult {
        restart_min_mi,
        ..best
    })
}
