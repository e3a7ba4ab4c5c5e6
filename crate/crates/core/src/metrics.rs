//! Soft detection metrics for one user: Gaussian distances to every
//! constellation point, log-likelihood ratios, the per-sample and batch
//! cross-entropy losses, and the Monte Carlo mutual-information estimate.
//!
//! All losses are in bits. The log-likelihood ratio of a symbol is
//!
//! ```text
//! llr0(w | y) = ln Σ_{x ∈ X_k(w)} e^{-d(x)} − ln Σ_{x ∉ X_k(w)} e^{-d(x)}
//! ```
//!
//! evaluated with log-sum-exp, and the per-sample loss is
//! `−log2 σ(llr0) = log2(1 + e^{−llr0})`.

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    draw_messages, simulate_observations, ChannelSet, Constellation, MessageSpace,
    NoiseConvention, ObservationBatch,
};

/// |llr0| is clamped here; e^{-745} already underflows in double precision.
pub const LLR_CAP: f64 = 745.0;

/// Lower clamp of [`posterior`].
pub const POSTERIOR_FLOOR: f64 = 1e-300;

/// Minimum evaluation batch accepted by [`estimate_mi`].
pub const MIN_EVAL_SAMPLES: usize = 1000;

/// Samples per parallel work unit. Fixed so reductions do not depend on the thread count.
pub(crate) const CHUNK: usize = 512;

/// ln Σ e^{a_i}; `-inf` for an empty or all `-inf` input.
#[inline]
pub fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// ln(1 + e^x) without overflow.
#[inline]
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Logistic sigmoid, floored at [`POSTERIOR_FLOOR`].
pub fn posterior(llr0: f64) -> f64 {
    let p = if llr0 >= 0.0 {
        1.0 / (1.0 + (-llr0).exp())
    } else {
        let e = llr0.exp();
        e / (1.0 + e)
    };
    p.clamp(POSTERIOR_FLOOR, 1.0)
}

/// −log2 σ(llr0), in bits.
#[inline]
pub fn loss_from_llr0(llr0: f64) -> f64 {
    softplus(-llr0) / std::f64::consts::LN_2
}

/// Precomputed view of a constellation as seen by one user: the noiseless
/// received points ζ_kᴴ·x, their symbol for this user and the distance scale.
#[derive(Debug, Clone)]
pub struct UserDetector {
    user: usize,
    alphabet: usize,
    rx: usize,
    projected: Vec<Complex64>,
    symbols: Vec<usize>,
    scale: f64,
}

impl UserDetector {
    pub fn new(
        constellation: &Constellation,
        chan: &ChannelSet,
        space: &MessageSpace,
        user: usize,
        convention: NoiseConvention,
    ) -> Result<Self> {
        chan.check_constellation(constellation)?;
        constellation.check_space(space)?;
        if user >= space.users() || user >= chan.users() {
            return Err(Error::validation("user", format!("no user {user}")));
        }
        if space.users() != chan.users() {
            return Err(Error::validation(
                "channels",
                format!("{} channels for {} users", chan.users(), space.users()),
            ));
        }
        Ok(Self {
            user,
            alphabet: space.sizes()[user],
            rx: chan.rx(),
            projected: chan.project_all(user, constellation),
            symbols: (0..space.total()).map(|i| space.symbol(i, user)).collect(),
            scale: 1.0 / convention.distance_denominator(chan.noise_var()[user]),
        })
    }

    pub fn user(&self) -> usize {
        self.user
    }

    pub fn num_points(&self) -> usize {
        self.symbols.len()
    }

    pub fn symbol_of(&self, point: usize) -> usize {
        self.symbols[point]
    }

    pub fn projected(&self, point: usize) -> &[Complex64] {
        &self.projected[point * self.rx..(point + 1) * self.rx]
    }

    /// 1 / (distance denominator).
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn distances_into(&self, y: &[Complex64], out: &mut [f64]) {
        for (j, d) in out.iter_mut().enumerate() {
            let s = self.projected(j);
            *d = y
                .iter()
                .zip(s)
                .map(|(a, b)| (a - b).norm_sqr())
                .sum::<f64>()
                * self.scale;
        }
    }

    fn check_symbol(&self, symbol: usize) -> Result<()> {
        if symbol >= self.alphabet {
            return Err(Error::EmptyHypothesisSet {
                user: self.user,
                symbol,
            });
        }
        Ok(())
    }

    /// llr0 from precomputed distances, clamped to ±[`LLR_CAP`].
    pub fn llr0_from_distances(&self, d: &[f64], symbol: usize) -> f64 {
        // shifting by the global minimum keeps at least one exponent at 0
        let shift = d.iter().copied().fold(f64::INFINITY, f64::min);
        let shift = if shift.is_finite() { shift } else { 0.0 };
        let agree = d
            .iter()
            .zip(&self.symbols)
            .filter(|(_, &s)| s == symbol)
            .map(|(&v, _)| shift - v);
        let disagree = d
            .iter()
            .zip(&self.symbols)
            .filter(|(_, &s)| s != symbol)
            .map(|(&v, _)| shift - v);
        let llr = log_sum_exp(agree) - log_sum_exp(disagree);
        if llr.is_nan() {
            0.0
        } else {
            llr.clamp(-LLR_CAP, LLR_CAP)
        }
    }

    pub fn llr0(&self, y: &[Complex64], symbol: usize) -> Result<f64> {
        self.check_symbol(symbol)?;
        let mut d = vec![0.0; self.num_points()];
        self.distances_into(y, &mut d);
        Ok(self.llr0_from_distances(&d, symbol))
    }

    /// Per-sample loss with caller-provided scratch for distances.
    #[inline]
    pub fn sample_loss_with(&self, y: &[Complex64], symbol: usize, scratch: &mut [f64]) -> f64 {
        self.distances_into(y, scratch);
        loss_from_llr0(self.llr0_from_distances(scratch, symbol))
    }

    pub fn sample_loss(&self, y: &[Complex64], symbol: usize) -> Result<f64> {
        self.check_symbol(symbol)?;
        let mut d = vec![0.0; self.num_points()];
        Ok(self.sample_loss_with(y, symbol, &mut d))
    }

    /// Per-sample losses of a batch in sample order.
    pub fn sample_losses(&self, space: &MessageSpace, batch: &ObservationBatch) -> Vec<f64> {
        let rx = self.rx;
        let p = self.num_points();
        batch
            .messages
            .par_chunks(CHUNK)
            .zip(batch.y.par_chunks(CHUNK * rx))
            .flat_map_iter(|(msgs, ys)| {
                let mut scratch = vec![0.0; p];
                msgs.iter()
                    .enumerate()
                    .map(|(n, &m)| {
                        let symbol = space.symbol(m, self.user);
                        self.sample_loss_with(&ys[n * rx..(n + 1) * rx], symbol, &mut scratch)
                    })
                    .collect::<Vec<_>>()
            })
            .collect()
    }
}

/// Distances ‖y − ζ_kᴴx‖² / denominator to every point, in joint-message order.
pub fn distances(
    constellation: &Constellation,
    chan: &ChannelSet,
    space: &MessageSpace,
    user: usize,
    y: &[Complex64],
    convention: NoiseConvention,
) -> Result<Vec<f64>> {
    let det = UserDetector::new(constellation, chan, space, user, convention)?;
    let mut d = vec![0.0; det.num_points()];
    det.distances_into(y, &mut d);
    Ok(d)
}

/// MAP log-ratio of `symbol` for `user` given observation `y`.
pub fn llr0(
    constellation: &Constellation,
    chan: &ChannelSet,
    space: &MessageSpace,
    user: usize,
    symbol: usize,
    y: &[Complex64],
    convention: NoiseConvention,
) -> Result<f64> {
    UserDetector::new(constellation, chan, space, user, convention)?.llr0(y, symbol)
}

/// Log-likelihood ratio of `symbol` built from per-symbol likelihoods.
///
/// Each symbol's likelihood is the uniform mixture over the joint messages that
/// carry it; the ratio is against the summed likelihood of all competing
/// symbols. Under uniform joint inputs this coincides with [`llr0`].
pub fn llr(
    constellation: &Constellation,
    chan: &ChannelSet,
    space: &MessageSpace,
    user: usize,
    symbol: usize,
    y: &[Complex64],
    convention: NoiseConvention,
) -> Result<f64> {
    let det = UserDetector::new(constellation, chan, space, user, convention)?;
    det.check_symbol(symbol)?;
    let mut d = vec![0.0; det.num_points()];
    det.distances_into(y, &mut d);
    let shift = d.iter().copied().fold(f64::INFINITY, f64::min);
    let shift = if shift.is_finite() { shift } else { 0.0 };
    let alphabet = space.sizes()[user];
    // log of the per-symbol sums of e^{-d}; each symbol covers total/alphabet messages
    let per_symbol: Vec<f64> = (0..alphabet)
        .map(|w| {
            log_sum_exp(
                d.iter()
                    .enumerate()
                    .filter(|(j, _)| det.symbol_of(*j) == w)
                    .map(|(_, &v)| shift - v),
            )
        })
        .collect();
    let competing = log_sum_exp(
        per_symbol
            .iter()
            .enumerate()
            .filter(|(w, _)| *w != symbol)
            .map(|(_, &v)| v),
    );
    let value = per_symbol[symbol] - competing;
    Ok(if value.is_nan() {
        0.0
    } else {
        value.clamp(-LLR_CAP, LLR_CAP)
    })
}

/// −log2 P(true_symbol | y), in bits.
pub fn sample_loss(
    constellation: &Constellation,
    chan: &ChannelSet,
    space: &MessageSpace,
    user: usize,
    true_symbol: usize,
    y: &[Complex64],
    convention: NoiseConvention,
) -> Result<f64> {
    UserDetector::new(constellation, chan, space, user, convention)?.sample_loss(y, true_symbol)
}

fn check_batch(batch: &ObservationBatch, total: usize) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::validation("batch", "empty observation batch"));
    }
    if batch.y.len() != batch.len() * batch.rx {
        return Err(Error::validation("batch", "observation length mismatch"));
    }
    if batch.messages.iter().any(|&m| m >= total) {
        return Err(Error::validation("batch", "message index out of range"));
    }
    Ok(())
}

/// Sequential left-to-right sum divided by N.
fn mean(values: &[f64]) -> f64 {
    let mut acc = 0.0;
    for &v in values {
        acc += v;
    }
    acc / values.len() as f64
}

/// Cross-entropy of the batch: mean per-sample loss, in bits.
pub fn batch_loss(
    constellation: &Constellation,
    chan: &ChannelSet,
    space: &MessageSpace,
    batch: &ObservationBatch,
    convention: NoiseConvention,
) -> Result<f64> {
    check_batch(batch, space.total())?;
    let det = UserDetector::new(constellation, chan, space, batch.user, convention)?;
    Ok(mean(&det.sample_losses(space, batch)))
}

/// Monte Carlo mutual information for one user.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MiEstimate {
    /// Clamped to `[0, log2 |W_k|]`.
    pub mi: f64,
    pub stderr: f64,
    /// Value before clamping.
    pub raw_mi: f64,
}

/// Draws `n_eval` uniform joint messages and their observations from `rng`
/// (messages first, then noise) and returns `log2|W_k| − batch_loss`.
#[allow(clippy::too_many_arguments)]
pub fn estimate_mi<G: Rng + ?Sized>(
    constellation: &Constellation,
    chan: &ChannelSet,
    space: &MessageSpace,
    user: usize,
    n_eval: usize,
    convention: NoiseConvention,
    rng: &mut G,
) -> Result<MiEstimate> {
    if n_eval < MIN_EVAL_SAMPLES {
        return Err(Error::validation(
            "n_eval",
            format!("{n_eval} evaluation samples, need at least {MIN_EVAL_SAMPLES}"),
        ));
    }
    let det = UserDetector::new(constellation, chan, space, user, convention)?;
    let messages = draw_messages(space, n_eval, rng);
    let batch = simulate_observations(constellation, chan, user, messages, convention, rng)?;
    let losses = det.sample_losses(space, &batch);
    let loss = mean(&losses);
    let var = losses.iter().map(|l| (l - loss).powi(2)).sum::<f64>() / (n_eval - 1) as f64;
    let entropy = space.entropy_bits(user);
    let raw_mi = entropy - loss;
    Ok(MiEstimate {
        mi: raw_mi.clamp(0.0, entropy),
        stderr: (var / n_eval as f64).sqrt(),
        raw_mi,
    })
}

/// Per-user losses and their maximum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub per_user_loss: Vec<f64>,
    pub max_loss: f64,
    /// Lowest index among tied maxima.
    pub argmax_user: usize,
    pub per_user_mi: Option<Vec<f64>>,
}

impl LossReport {
    pub fn from_losses(per_user_loss: Vec<f64>, space: Option<&MessageSpace>) -> Self {
        let (argmax_user, max_loss) = per_user_loss.iter().copied().enumerate().fold(
            (0, f64::NEG_INFINITY),
            |(bi, bv), (i, v)| if v > bv { (i, v) } else { (bi, bv) },
        );
        let per_user_mi = space.map(|s| {
            per_user_loss
                .iter()
                .enumerate()
                .map(|(k, l)| s.entropy_bits(k) - l)
                .collect()
        });
        Self {
            per_user_loss,
            max_loss,
            argmax_user,
            per_user_mi,
        }
    }
}

/// Batch losses of every user (one batch each, in user order) and their maximum.
pub fn loss_report(
    constellation: &Constellation,
    chan: &ChannelSet,
    space: &MessageSpace,
    batches: &[ObservationBatch],
    convention: NoiseConvention,
) -> Result<LossReport> {
    if batches.len() != space.users() {
        return Err(Error::validation(
            "batches",
            format!("{} batches for {} users", batches.len(), space.users()),
        ));
    }
    let losses = batches
        .iter()
        .enumerate()
        .map(|(k, b)| {
            if b.user != k {
                return Err(Error::validation("batches", "batches must be in user order"));
            }
            batch_loss(constellation, chan, space, b, convention)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LossReport::from_losses(losses, Some(space)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{SeedStreams, Stream};
    use nalgebra::DMatrix;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    /// T=1, K=1, points {+1 ↦ 0, −1 ↦ 1}, ζ=1.
    fn scalar_bpsk(noise_var: f64) -> (Constellation, ChannelSet, MessageSpace) {
        (
            Constellation::new(1, vec![c(1.0), c(-1.0)]).unwrap(),
            ChannelSet::from_normalized(vec![DMatrix::from_element(1, 1, c(1.0))], vec![noise_var])
                .unwrap(),
            MessageSpace::binary(1).unwrap(),
        )
    }

    /// Two users, two antennas, random complex points and channels.
    fn random_instance(seed: u64) -> (Constellation, ChannelSet, MessageSpace) {
        use rand_distr::StandardNormal;
        let mut rng = SeedStreams::new(seed).rng(Stream::Init, &[]);
        let mut g = || Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
        let x = Constellation::new(2, (0..8).map(|_| g()).collect()).unwrap();
        let h: Vec<_> = (0..2).map(|_| DMatrix::from_fn(2, 1, |_, _| g())).collect();
        let chan = ChannelSet::from_snr(&h, &[3.0, 7.0], 1.0).unwrap();
        (x, chan, MessageSpace::binary(2).unwrap())
    }

    const PAPER: NoiseConvention = NoiseConvention::Paper;

    #[test]
    fn distance_examples() {
        let (x, chan, space) = scalar_bpsk(1.0);
        let d = distances(&x, &chan, &space, 0, &[c(0.0)], PAPER).unwrap();
        assert_eq!(d, vec![0.5, 0.5]);
        let d = distances(&x, &chan, &space, 0, &[c(1.0)], PAPER).unwrap();
        assert_eq!(d[0], 0.0);
        let d = distances(&x, &chan, &space, 0, &[c(0.0)], NoiseConvention::Circular).unwrap();
        assert_eq!(d, vec![1.0, 1.0]);
        let (_, chan3, _) = scalar_bpsk(3.0);
        let y = [Complex64::new(0.3, -0.7)];
        let d1 = distances(&x, &chan, &space, 0, &y, PAPER).unwrap();
        let d3 = distances(&x, &chan3, &space, 0, &y, PAPER).unwrap();
        for (a, b) in d1.iter().zip(&d3) {
            assert!((a / 3.0 - b).abs() < 1e-15);
        }
    }

    #[test]
    fn llr0_examples() {
        let (x, chan, space) = scalar_bpsk(1.0);
        assert_eq!(llr0(&x, &chan, &space, 0, 0, &[c(0.0)], PAPER).unwrap(), 0.0);
        let v = llr0(&x, &chan, &space, 0, 0, &[c(1.0)], PAPER).unwrap();
        assert!((v - 2.0).abs() < 1e-14);
        assert!(matches!(
            llr0(&x, &chan, &space, 0, 2, &[c(1.0)], PAPER),
            Err(Error::EmptyHypothesisSet { .. })
        ));
    }

    #[test]
    fn llr0_shift_invariant_and_stable() {
        let (x, chan, space) = random_instance(3);
        let det = UserDetector::new(&x, &chan, &space, 1, PAPER).unwrap();
        let base = [0.3, 1.7, 2.2, 0.9];
        for shift in [0.0, 10.0, 1e3, 1e6] {
            let d: Vec<f64> = base.iter().map(|v| v + shift).collect();
            let a = det.llr0_from_distances(&base, 0);
            let b = det.llr0_from_distances(&d, 0);
            assert!((a - b).abs() < 1e-9 * (1.0 + shift / 1e3), "shift {shift}");
        }
        let far = [1e6, 2e6, 3e6, 5.0];
        assert!(det.llr0_from_distances(&far, 0).is_finite());
        assert!(det.llr0_from_distances(&far, 1).is_finite());
    }

    #[test]
    fn llr0_antisymmetric_and_posteriors_sum_to_one() {
        for seed in 0..20 {
            let (x, chan, space) = random_instance(seed);
            let y = [Complex64::new(seed as f64 * 0.1 - 1.0, 0.4)];
            for user in 0..2 {
                let a = llr0(&x, &chan, &space, user, 0, &y, PAPER).unwrap();
                let b = llr0(&x, &chan, &space, user, 1, &y, PAPER).unwrap();
                assert_eq!(a, -b);
                assert!((posterior(a) + posterior(b) - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn llr_matches_llr0_binary_and_quaternary() {
        for seed in 0..10 {
            let (x, chan, space) = random_instance(seed);
            let y = [Complex64::new(0.2, -0.1 * seed as f64)];
            for user in 0..2 {
                for w in 0..2 {
                    let a = llr(&x, &chan, &space, user, w, &y, PAPER).unwrap();
                    let b = llr0(&x, &chan, &space, user, w, &y, PAPER).unwrap();
                    assert!((a - b).abs() < 1e-12);
                }
            }
        }
        // four equal points: uniform posterior
        let x = Constellation::new(1, vec![c(1.0); 4]).unwrap();
        let chan =
            ChannelSet::from_normalized(vec![DMatrix::from_element(1, 1, c(1.0))], vec![1.0]).unwrap();
        let space = MessageSpace::new(vec![4]).unwrap();
        let v = llr(&x, &chan, &space, 0, 2, &[c(0.3)], PAPER).unwrap();
        assert!((v + 3f64.ln()).abs() < 1e-14);
        assert!((llr0(&x, &chan, &space, 0, 2, &[c(0.3)], PAPER).unwrap() - v).abs() < 1e-14);
    }

    #[test]
    fn llr_saturates_at_cap() {
        let (x, chan, space) = scalar_bpsk(1e-300);
        let v = llr(&x, &chan, &space, 0, 0, &[c(1.0)], PAPER).unwrap();
        assert_eq!(v, LLR_CAP);
        assert_eq!(llr0(&x, &chan, &space, 0, 1, &[c(1.0)], PAPER).unwrap(), -LLR_CAP);
    }

    #[test]
    fn posterior_examples() {
        assert_eq!(posterior(0.0), 0.5);
        assert!((posterior(LLR_CAP) - 1.0).abs() < 1e-15);
        assert!((posterior(2.0) - 0.880797).abs() < 1e-6);
        assert_eq!(posterior(-LLR_CAP), POSTERIOR_FLOOR);
    }

    #[test]
    fn sample_loss_examples() {
        assert_eq!(loss_from_llr0(0.0), 1.0);
        assert!(loss_from_llr0(LLR_CAP) < 1e-300);
        assert!((loss_from_llr0(2.0) - 0.183_118_412).abs() < 1e-9);
        assert!((loss_from_llr0(2.0) + posterior(2.0).log2()).abs() < 1e-15);
        let (x, chan, space) = scalar_bpsk(1.0);
        let l = sample_loss(&x, &chan, &space, 0, 0, &[c(1.0)], PAPER).unwrap();
        assert!((l - loss_from_llr0(2.0)).abs() < 1e-15);
    }

    #[test]
    fn batch_loss_examples() {
        let (x, chan, space) = scalar_bpsk(1.0);
        let batch = ObservationBatch {
            user: 0,
            messages: vec![0, 1, 1, 0],
            y: vec![c(0.0); 4],
            rx: 1,
        };
        assert_eq!(batch_loss(&x, &chan, &space, &batch, PAPER).unwrap(), 1.0);
        let one = ObservationBatch {
            user: 0,
            messages: vec![1],
            y: vec![c(0.4)],
            rx: 1,
        };
        let expect = sample_loss(&x, &chan, &space, 0, 1, &[c(0.4)], PAPER).unwrap();
        assert_eq!(batch_loss(&x, &chan, &space, &one, PAPER).unwrap(), expect);

        let (x, chan, space) = scalar_bpsk(1e-6);
        let mut rng = SeedStreams::new(1).rng(Stream::Evaluation, &[]);
        let msgs = draw_messages(&space, 2000, &mut rng);
        let b = simulate_observations(&x, &chan, 0, msgs, PAPER, &mut rng).unwrap();
        assert!(batch_loss(&x, &chan, &space, &b, PAPER).unwrap() < 1e-6);

        let empty = ObservationBatch { user: 0, messages: vec![], y: vec![], rx: 1 };
        assert!(batch_loss(&x, &chan, &space, &empty, PAPER).is_err());
    }

    #[test]
    fn batch_loss_independent_of_thread_count() {
        let (x, chan, space) = random_instance(5);
        let mut rng = SeedStreams::new(5).rng(Stream::Evaluation, &[]);
        let msgs = draw_messages(&space, 5000, &mut rng);
        let b = simulate_observations(&x, &chan, 1, msgs, PAPER, &mut rng).unwrap();
        let parallel = batch_loss(&x, &chan, &space, &b, PAPER).unwrap();
        let single = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| batch_loss(&x, &chan, &space, &b, PAPER).unwrap());
        assert_eq!(parallel.to_bits(), single.to_bits());
    }

    #[test]
    fn estimate_mi_limits() {
        let (x, chan, space) = scalar_bpsk(1e-6);
        let mut rng = SeedStreams::new(2).rng(Stream::Evaluation, &[]);
        let est = estimate_mi(&x, &chan, &space, 0, 10_000, PAPER, &mut rng).unwrap();
        assert!(est.mi >= 0.999);
        let (x, chan, space) = scalar_bpsk(1e6);
        let est = estimate_mi(&x, &chan, &space, 0, 10_000, PAPER, &mut rng).unwrap();
        assert!(est.mi <= 0.01 && est.mi >= 0.0);
        assert!(estimate_mi(&x, &chan, &space, 0, 999, PAPER, &mut rng).is_err());
    }

    #[test]
    fn loss_report_examples() {
        let (x, chan, space) = scalar_bpsk(1.0);
        let batch = ObservationBatch { user: 0, messages: vec![0, 1], y: vec![c(0.2), c(-0.5)], rx: 1 };
        let r = loss_report(&x, &chan, &space, &[batch], PAPER).unwrap();
        assert_eq!(r.max_loss, r.per_user_loss[0]);
        assert_eq!(r.argmax_user, 0);
        let mi = r.per_user_mi.unwrap();
        assert_eq!(mi[0], 1.0 - r.per_user_loss[0]);

        let tied = LossReport::from_losses(vec![0.4, 0.7, 0.7], None);
        assert_eq!(tied.argmax_user, 1);
        let same = LossReport::from_losses(vec![0.5, 0.5], None);
        assert_eq!(same.argmax_user, 0);
    }
}
