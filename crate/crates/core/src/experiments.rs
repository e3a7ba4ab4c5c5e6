//! Scenario definitions and experiment orchestration: the two real-channel
//! two-user scenarios and the random complex-channel SNR sweep.

use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::MiEstimate;
use crate::model::{ChannelSet, Constellation, MessageSpace, PowerConstraint};
use crate::optimizer::{evaluate, optimize_with_restarts, OptimizationConfig, RunResult};
use crate::precoders::{build_linear_constellation, encoder, PrecoderKind};
use crate::rng::{SeedStreams, Stream};

/// A transmit scheme compared in a scenario or sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncoderKind {
    Mmse,
    #[serde(rename = "zf")]
    ZeroForcing,
    Matched,
    #[serde(rename = "maxmin")]
    MaxMin,
}

impl EncoderKind {
    pub const ALL: [EncoderKind; 4] = [
        EncoderKind::Mmse,
        EncoderKind::ZeroForcing,
        EncoderKind::Matched,
        EncoderKind::MaxMin,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EncoderKind::Mmse => "mmse",
            EncoderKind::ZeroForcing => "zf",
            EncoderKind::Matched => "matched",
            EncoderKind::MaxMin => "maxmin",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            EncoderKind::Mmse => "MMSE",
            EncoderKind::ZeroForcing => "ZF",
            EncoderKind::Matched => "Matched",
            EncoderKind::MaxMin => "MAX-MIN",
        }
    }

    pub fn precoder(self) -> Option<PrecoderKind> {
        match self {
            EncoderKind::Mmse => Some(PrecoderKind::Mmse),
            EncoderKind::ZeroForcing => Some(PrecoderKind::ZeroForcing),
            EncoderKind::Matched => Some(PrecoderKind::Matched),
            EncoderKind::MaxMin => None,
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.name() == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ChannelSource {
    /// One T×R matrix per user; normalized on use.
    Explicit(Vec<DMatrix<Complex64>>),
    /// Entries i.i.d. CN(0, 1), normalized, drawn once per experiment.
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SnrSpec {
    PerUser(Vec<f64>),
    /// Per-user SNR drawn once from Normal(mean, jitter_std).
    Jitter { mean: f64, jitter_std: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub name: String,
    pub antennas: usize,
    pub users: usize,
    pub rx: usize,
    pub alphabet: Vec<usize>,
    pub channels: ChannelSource,
    pub snr: SnrSpec,
    pub power: PowerConstraint,
    /// Also carries the evaluation size, the noise convention and the restart count.
    pub opt: OptimizationConfig,
    pub encoders: Vec<EncoderKind>,
    pub seed: u64,
}

fn real_column(values: &[f64]) -> DMatrix<Complex64> {
    DMatrix::from_iterator(values.len(), 1, values.iter().map(|&v| Complex64::new(v, 0.0)))
}

/// The two-antenna, two-user real-channel scenarios at 6 and 8 dB.
pub fn builtin_scenario(name: &str) -> Result<ScenarioSpec> {
    let diagonal = real_column(&[FRAC_1_SQRT_2, FRAC_1_SQRT_2]);
    let channels = match name {
        "scenario1" => vec![real_column(&[1.0, 0.0]), diagonal],
        "scenario2" => vec![diagonal.clone(), diagonal],
        _ => return Err(Error::UnknownScenario(name.to_string())),
    };
    Ok(ScenarioSpec {
        name: name.to_string(),
        antennas: 2,
        users: 2,
        rx: 1,
        alphabet: vec![2, 2],
        channels: ChannelSource::Explicit(channels),
        snr: SnrSpec::PerUser(vec![6.0, 8.0]),
        power: PowerConstraint::default(),
        opt: OptimizationConfig {
            real_valued: true,
            ..OptimizationConfig::default()
        },
        encoders: EncoderKind::ALL.to_vec(),
        seed: 0,
    })
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        if self.antennas == 0 || self.users == 0 || self.rx == 0 {
            return Err(Error::validation("T/K/R", "must all be at least 1"));
        }
        if self.alphabet.len() != self.users {
            return Err(Error::validation(
                "alphabet",
                format!("{} sizes for {} users", self.alphabet.len(), self.users),
            ));
        }
        MessageSpace::new(self.alphabet.clone())?;
        if let ChannelSource::Explicit(h) = &self.channels {
            if h.len() != self.users {
                return Err(Error::validation(
                    "channels",
                    format!("{} channels for {} users", h.len(), self.users),
                ));
            }
            for (k, m) in h.iter().enumerate() {
                if m.shape() != (self.antennas, self.rx) {
                    return Err(Error::validation(
                        "channels",
                        format!(
                            "user {k} channel is {}x{}, expected {}x{}",
                            m.nrows(),
                            m.ncols(),
                            self.antennas,
                            self.rx
                        ),
                    ));
                }
            }
        }
        match &self.snr {
            SnrSpec::PerUser(v) => {
                if v.len() != self.users {
                    return Err(Error::validation(
                        "snr",
                        format!("{} values for {} users", v.len(), self.users),
                    ));
                }
                if v.iter().any(|s| !s.is_finite()) {
                    return Err(Error::validation("snr", "values must be finite"));
                }
            }
            SnrSpec::Jitter { mean, jitter_std } => {
                if !mean.is_finite() || !(*jitter_std >= 0.0 && jitter_std.is_finite()) {
                    return Err(Error::validation("snr", "mean must be finite, jitter_std >= 0"));
                }
            }
        }
        if self.encoders.is_empty() {
            return Err(Error::validation("encoders", "at least one encoder required"));
        }
        self.power.validate()?;
        self.opt.validate()
    }

    pub fn message_space(&self) -> Result<MessageSpace> {
        MessageSpace::new(self.alphabet.clone())
    }

    /// Channel matrices and per-user SNRs for this spec, drawing whatever is random.
    pub fn realize(&self, streams: &SeedStreams) -> Result<ChannelSet> {
        let h = match &self.channels {
            ChannelSource::Explicit(h) => h.clone(),
            ChannelSource::Random => {
                draw_channels(self.users, self.antennas, self.rx, &mut streams.rng(Stream::Channel, &[]))
            }
        };
        let snr = draw_snr(&self.snr, self.users, &mut streams.rng(Stream::Snr, &[]))?;
        ChannelSet::from_snr(&h, &snr, self.power.mean_power)
    }
}

/// `users` channel matrices with i.i.d. CN(0, 1) entries.
pub fn draw_channels<G: Rng + ?Sized>(
    users: usize,
    antennas: usize,
    rx: usize,
    rng: &mut G,
) -> Vec<DMatrix<Complex64>> {
    (0..users)
        .map(|_| {
            DMatrix::from_fn(antennas, rx, |_, _| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex64::new(re, im) * FRAC_1_SQRT_2
            })
        })
        .collect()
}

pub fn draw_snr<G: Rng + ?Sized>(spec: &SnrSpec, users: usize, rng: &mut G) -> Result<Vec<f64>> {
    match spec {
        SnrSpec::PerUser(v) => Ok(v.clone()),
        SnrSpec::Jitter { mean, jitter_std } => {
            let dist = Normal::new(*mean, *jitter_std)
                .map_err(|e| Error::validation("snr", e.to_string()))?;
            Ok((0..users).map(|_| rng.sample(dist)).collect())
        }
    }
}

/// Evaluated constellation of one encoder.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluated {
    pub constellation: Constellation,
    pub mi: Vec<MiEstimate>,
}

impl Evaluated {
    pub fn min_mi(&self) -> f64 {
        self.mi.iter().map(|m| m.mi).fold(f64::INFINITY, f64::min)
    }

    pub fn mean_mi(&self) -> f64 {
        self.mi.iter().map(|m| m.mi).sum::<f64>() / self.mi.len() as f64
    }
}

/// Outcome for one encoder; `Unavailable` carries the error code (e.g. `RankDeficient`).
#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Available(Evaluated),
    Unavailable(String),
}

impl Outcome {
    pub fn available(&self) -> Option<&Evaluated> {
        match self {
            Outcome::Available(e) => Some(e),
            Outcome::Unavailable(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioRow {
    pub encoder: EncoderKind,
    pub outcome: Outcome,
}

#[derive(Debug, Clone)]
pub struct ScenarioTable {
    pub name: String,
    pub space: MessageSpace,
    pub channels: ChannelSet,
    pub rows: Vec<ScenarioRow>,
    /// The MAX-MIN optimization, when requested.
    pub run: Option<RunResult>,
}

impl ScenarioTable {
    pub fn row(&self, encoder: EncoderKind) -> Option<&ScenarioRow> {
        self.rows.iter().find(|r| r.encoder == encoder)
    }
}

/// Builds and evaluates one linear encoder; a rank-deficient ZF becomes `Unavailable`.
pub fn evaluate_linear(
    kind: PrecoderKind,
    chan: &ChannelSet,
    space: &MessageSpace,
    pc: &PowerConstraint,
    opt: &OptimizationConfig,
    eval: &SeedStreams,
) -> Result<Outcome> {
    let enc = match encoder(kind, chan) {
        Ok(enc) => enc,
        Err(e @ Error::RankDeficient { .. }) => return Ok(Outcome::Unavailable(e.code().into())),
        Err(e) => return Err(e),
    };
    let constellation = build_linear_constellation(&enc, space, pc)?;
    let mi = evaluate(&constellation, chan, space, opt.n_eval, opt.convention, eval)?;
    Ok(Outcome::Available(Evaluated { constellation, mi }))
}

fn run_cell(
    encoders: &[EncoderKind],
    chan: &ChannelSet,
    space: &MessageSpace,
    pc: &PowerConstraint,
    opt: &OptimizationConfig,
    streams: &SeedStreams,
) -> Result<(Vec<ScenarioRow>, Option<RunResult>)> {
    let mut rows = Vec::with_capacity(encoders.len());
    let mut run = None;
    for &enc in encoders {
        let outcome = match enc.precoder() {
            Some(kind) => evaluate_linear(kind, chan, space, pc, opt, streams)?,
            None => {
                let result = optimize_with_restarts(chan, space, pc, opt, streams)?;
                let outcome = Outcome::Available(Evaluated {
                    constellation: result.final_constellation.clone(),
                    mi: result.per_user_mi.clone(),
                });
                run = Some(result);
                outcome
            }
        };
        rows.push(ScenarioRow {
            encoder: enc,
            outcome,
        });
    }
    Ok((rows, run))
}

/// Evaluates every requested encoder of a scenario on one shared evaluation stream.
pub fn run_scenario(spec: &ScenarioSpec, streams: &SeedStreams) -> Result<ScenarioTable> {
    spec.validate()?;
    let space = spec.message_space()?;
    let chan = spec.realize(streams)?;
    let (rows, run) = run_cell(&spec.encoders, &chan, &space, &spec.power, &spec.opt, streams)?;
    Ok(ScenarioTable {
        name: spec.name.clone(),
        space,
        channels: chan,
        rows,
        run,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub antennas: usize,
    pub users: usize,
    pub snr_grid: Vec<f64>,
    pub experiments: usize,
    pub jitter_std: f64,
    pub power: PowerConstraint,
    /// `opt.restarts` constellations are optimized per cell.
    pub opt: OptimizationConfig,
    pub encoders: Vec<EncoderKind>,
}

impl SweepConfig {
    /// K=10 users, T=4 antennas, SNR −5..15 dB in 2 dB steps, 20 experiments, 10 restarts.
    pub fn paper_scale() -> Self {
        Self {
            antennas: 4,
            users: 10,
            snr_grid: (0..=10).map(|i| -5.0 + 2.0 * i as f64).collect(),
            experiments: 20,
            jitter_std: 1.0,
            power: PowerConstraint::default(),
            opt: OptimizationConfig {
                restarts: 10,
                n_eval: 20_000,
                ..OptimizationConfig::default()
            },
            encoders: EncoderKind::ALL.to_vec(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.snr_grid.is_empty() || self.snr_grid.iter().any(|s| !s.is_finite()) {
            return Err(Error::validation("snr", "grid must be nonempty and finite"));
        }
        if self.experiments == 0 {
            return Err(Error::validation("experiments", "must be at least 1"));
        }
        if self.antennas == 0 || self.users == 0 {
            return Err(Error::validation("T/K", "must be at least 1"));
        }
        if self.encoders.is_empty() {
            return Err(Error::validation("encoders", "at least one encoder required"));
        }
        self.power.validate()?;
        self.opt.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub experiment: usize,
    pub snr_db: f64,
    /// Per-user SNRs actually used in this cell.
    pub user_snr_db: Vec<f64>,
    pub encoder: EncoderKind,
    pub mi: Option<Vec<MiEstimate>>,
    pub note: Option<String>,
}

impl SweepCell {
    pub fn min_mi(&self) -> Option<f64> {
        self.mi
            .as_ref()
            .map(|v| v.iter().map(|m| m.mi).fold(f64::INFINITY, f64::min))
    }

    pub fn mean_mi(&self) -> Option<f64> {
        self.mi
            .as_ref()
            .map(|v| v.iter().map(|m| m.mi).sum::<f64>() / v.len() as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub snr_db: f64,
    pub encoder: EncoderKind,
    pub mean_min_mi: f64,
    pub mean_mean_mi: f64,
    /// Experiments with an available result.
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub cells: Vec<SweepCell>,
    pub aggregate: Vec<AggregateRow>,
    /// min-MI of every restart of every cell, keyed by (experiment, snr index).
    pub restart_min_mi: Vec<((usize, usize), Vec<f64>)>,
}

/// Averages min-MI and mean-MI over experiments per (snr, encoder), skipping unavailable cells.
pub fn aggregate(cells: &[SweepCell], snr_grid: &[f64], encoders: &[EncoderKind]) -> Vec<AggregateRow> {
    let mut rows = Vec::new();
    for &snr in snr_grid {
        for &enc in encoders {
            let picked: Vec<(f64, f64)> = cells
                .iter()
                .filter(|c| c.snr_db == snr && c.encoder == enc)
                .filter_map(|c| Some((c.min_mi()?, c.mean_mi()?)))
                .collect();
            let count = picked.len();
            let (mean_min_mi, mean_mean_mi) = if count == 0 {
                (f64::NAN, f64::NAN)
            } else {
                (
                    picked.iter().map(|p| p.0).sum::<f64>() / count as f64,
                    picked.iter().map(|p| p.1).sum::<f64>() / count as f64,
                )
            };
            rows.push(AggregateRow {
                snr_db: snr,
                encoder: enc,
                mean_min_mi,
                mean_mean_mi,
                count,
            });
        }
    }
    rows
}

/// The complex-channel sweep. Channels are drawn once per experiment; per-user SNRs
/// are drawn once per (experiment, SNR point) and shared by every encoder; every
/// encoder of a cell is evaluated on the cell's evaluation streams.
pub fn run_sweep(cfg: &SweepConfig, streams: &SeedStreams) -> Result<SweepResult> {
    cfg.validate()?;
    let space = MessageSpace::binary(cfg.users)?;
    let jobs: Vec<(usize, usize)> = (0..cfg.experiments)
        .flat_map(|e| (0..cfg.snr_grid.len()).map(move |i| (e, i)))
        .collect();
    let channels: Vec<Vec<DMatrix<Complex64>>> = (0..cfg.experiments)
        .map(|e| {
            let mut rng = streams.child(&[e as u64]).rng(Stream::Channel, &[]);
            draw_channels(cfg.users, cfg.antennas, 1, &mut rng)
        })
        .collect();

    let results: Vec<(Vec<SweepCell>, ((usize, usize), Vec<f64>))> = jobs
        .par_iter()
        .map(|&(e, i)| {
            let snr = cfg.snr_grid[i];
            let exp_streams = streams.child(&[e as u64]);
            let cell_streams = exp_streams.child(&[i as u64]);
            let jitter = SnrSpec::Jitter {
                mean: snr,
                jitter_std: cfg.jitter_std,
            };
            let user_snr = draw_snr(&jitter, cfg.users, &mut exp_streams.rng(Stream::Snr, &[i as u64]))?;
            let chan = ChannelSet::from_snr(&channels[e], &user_snr, cfg.power.mean_power)?;
            let (rows, run) = run_cell(&cfg.encoders, &chan, &space, &cfg.power, &cfg.opt, &cell_streams)?;
            let cells = rows
                .into_iter()
                .map(|row| {
                    let (mi, note) = match row.outcome {
                        Outcome::Available(ev) => (Some(ev.mi), None),
                        Outcome::Unavailable(why) => (None, Some(why)),
                    };
                    SweepCell {
                        experiment: e,
                        snr_db: snr,
                        user_snr_db: user_snr.clone(),
                        encoder: row.encoder,
                        mi,
                        note,
                    }
                })
                .collect();
            let restarts = run.map(|r| r.restart_min_mi).unwrap_or_default();
            Ok((cells, ((e, i), restarts)))
        })
        .collect::<Result<_>>()?;

    let mut cells = Vec::new();
    let mut restart_min_mi = Vec::new();
    for (c, r) in results {
        cells.extend(c);
        restart_min_mi.push(r);
    }
    let aggregate = aggregate(&cells, &cfg.snr_grid, &cfg.encoders);
    Ok(SweepResult {
        cells,
        aggregate,
        restart_min_mi,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_scenarios() {
        let s1 = builtin_scenario("scenario1").unwrap();
        let ChannelSource::Explicit(h) = &s1.channels else { panic!() };
        assert_eq!(h[1][(0, 0)].re, FRAC_1_SQRT_2);
        assert_eq!(h[1][(1, 0)].re, FRAC_1_SQRT_2);
        assert_eq!(s1.power.peak_antenna_power, 4.0);
        assert_eq!(s1.power.mean_power, 1.0);
        assert_eq!(s1.opt.eta, 0.1);
        assert_eq!(s1.opt.n_samples, 10_000);
        assert_eq!(s1.opt.max_iterations, 100);
        assert_eq!(s1.snr, SnrSpec::PerUser(vec![6.0, 8.0]));

        let s2 = builtin_scenario("scenario2").unwrap();
        let ChannelSource::Explicit(h) = &s2.channels else { panic!() };
        assert_eq!(h[0], h[1]);
        assert!(matches!(builtin_scenario("scenario3"), Err(Error::UnknownScenario(_))));
    }

    #[test]
    fn realized_noise_follows_snr() {
        let s1 = builtin_scenario("scenario1").unwrap();
        let chan = s1.realize(&SeedStreams::new(0)).unwrap();
        assert!((chan.noise_var()[0] - 0.251189).abs() < 1e-6);
        assert!((chan.noise_var()[1] - 0.158489).abs() < 1e-6);
    }

    #[test]
    fn validation_names_the_field() {
        let mut s = builtin_scenario("scenario1").unwrap();
        s.channels = ChannelSource::Explicit(vec![DMatrix::zeros(3, 1), DMatrix::zeros(3, 1)]);
        match s.validate() {
            Err(Error::Validation { field, .. }) => assert_eq!(field, "channels"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn scenario2_zf_unavailable() {
        let mut s = builtin_scenario("scenario2").unwrap();
        s.encoders = vec![EncoderKind::ZeroForcing, EncoderKind::Matched];
        s.opt.n_eval = 2000;
        let t = run_scenario(&s, &SeedStreams::new(0)).unwrap();
        assert_eq!(
            t.row(EncoderKind::ZeroForcing).unwrap().outcome,
            Outcome::Unavailable("RankDeficient".into())
        );
        assert!(t.row(EncoderKind::Matched).unwrap().outcome.available().is_some());
    }

    #[test]
    fn degenerate_sweep_has_complete_row() {
        let cfg = SweepConfig {
            antennas: 2,
            users: 2,
            snr_grid: vec![5.0],
            experiments: 1,
            jitter_std: 1.0,
            power: PowerConstraint::default(),
            opt: OptimizationConfig {
                n_samples: 100,
                max_iterations: 3,
                n_eval: 1000,
                ..Default::default()
            },
            encoders: EncoderKind::ALL.to_vec(),
        };
        let r = run_sweep(&cfg, &SeedStreams::new(1)).unwrap();
        assert_eq!(r.cells.len(), 4);
        assert_eq!(r.aggregate.len(), 4);
        for c in &r.cells {
            if let (Some(lo), Some(mean)) = (c.min_mi(), c.mean_mi()) {
                assert!(0.0 <= lo && lo <= mean && mean <= 1.0);
            }
        }
        assert_eq!(r.cells[0].user_snr_db, r.cells[3].user_snr_db);
    }
}
