//! TOML scenario files.
//!
//! ```toml
//! name = "scenario1"
//! T = 2
//! K = 2
//! R = 1
//! channels = [[[[1.0, 0.0]], [[0.0, 0.0]]], [[[0.7071, 0.0]], [[0.7071, 0.0]]]]
//! snr = [6.0, 8.0]
//! ```
//!
//! `channels[k][t][r]` is `[re, im]`, or the string `"random"`. `snr` is a per-user
//! list or `{ mean = .., jitter_std = .. }`.

use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::{ChannelSource, EncoderKind, ScenarioSpec, SnrSpec};
use crate::model::{NoiseConvention, PowerConstraint};
use crate::optimizer::{OptimizationConfig, Plateau};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum RawChannels {
    Keyword(String),
    Explicit(Vec<Vec<Vec<[f64; 2]>>>),
}

fn default_one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    #[serde(rename = "T")]
    antennas: usize,
    #[serde(rename = "K")]
    users: usize,
    #[serde(rename = "R", default = "default_one")]
    rx: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    alphabet: Option<Vec<usize>>,
    #[serde(rename = "P_m", default, skip_serializing_if = "Option::is_none")]
    mean_power: Option<f64>,
    #[serde(rename = "P_c", default, skip_serializing_if = "Option::is_none")]
    peak_antenna_power: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    n_samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    iterations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    n_eval: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    restarts: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    convention: Option<NoiseConvention>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    real_valued: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    encoders: Option<Vec<EncoderKind>>,
    channels: RawChannels,
    snr: SnrSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    plateau: Option<Plateau>,
}

fn channels_from_raw(raw: &RawChannels, antennas: usize, users: usize, rx: usize) -> Result<ChannelSource> {
    match raw {
        RawChannels::Keyword(k) if k == "random" => Ok(ChannelSource::Random),
        RawChannels::Keyword(k) => Err(Error::validation(
            "channels",
            format!("expected \"random\" or a matrix list, got \"{k}\""),
        )),
        RawChannels::Explicit(list) => {
            if list.len() != users {
                return Err(Error::validation(
                    "channels",
                    format!("{} matrices for K = {users}", list.len()),
                ));
            }
            let mut out = Vec::with_capacity(users);
            for (k, rows) in list.iter().enumerate() {
                if rows.len() != antennas || rows.iter().any(|r| r.len() != rx) {
                    return Err(Error::validation(
                        "channels",
                        format!("matrix of user {k} is not {antennas}x{rx}"),
                    ));
                }
                if rows.iter().flatten().flatten().any(|v| !v.is_finite()) {
                    return Err(Error::validation("channels", format!("matrix of user {k} is not finite")));
                }
                out.push(DMatrix::from_fn(antennas, rx, |t, r| {
                    Complex64::new(rows[t][r][0], rows[t][r][1])
                }));
            }
            Ok(ChannelSource::Explicit(out))
        }
    }
}

fn channels_to_raw(source: &ChannelSource) -> RawChannels {
    match source {
        ChannelSource::Random => RawChannels::Keyword("random".into()),
        ChannelSource::Explicit(list) => RawChannels::Explicit(
            list.iter()
                .map(|m| {
                    (0..m.nrows())
                        .map(|t| (0..m.ncols()).map(|r| [m[(t, r)].re, m[(t, r)].im]).collect())
                        .collect()
                })
                .collect(),
        ),
    }
}

fn spec_from_raw(raw: RawConfig, default_name: &str) -> Result<ScenarioSpec> {
    let channels = channels_from_raw(&raw.channels, raw.antennas, raw.users, raw.rx)?;
    // real channels default to real constellations, matching the plottable 2-D case
    let real_channels = match &channels {
        ChannelSource::Explicit(list) => list.iter().all(|m| m.iter().all(|z| z.im == 0.0)),
        ChannelSource::Random => false,
    };
    let defaults = OptimizationConfig::default();
    let spec = ScenarioSpec {
        name: raw.name.unwrap_or_else(|| default_name.to_string()),
        antennas: raw.antennas,
        users: raw.users,
        rx: raw.rx,
        alphabet: raw.alphabet.unwrap_or_else(|| vec![2; raw.users]),
        channels,
        snr: raw.snr,
        power: PowerConstraint {
            mean_power: raw.mean_power.unwrap_or(1.0),
            peak_antenna_power: raw.peak_antenna_power.unwrap_or(4.0),
        },
        opt: OptimizationConfig {
            eta: raw.eta.unwrap_or(defaults.eta),
            n_samples: raw.n_samples.unwrap_or(defaults.n_samples),
            max_iterations: raw.iterations.unwrap_or(defaults.max_iterations),
            plateau: raw.plateau,
            restarts: raw.restarts.unwrap_or(defaults.restarts),
            n_eval: raw.n_eval.unwrap_or(defaults.n_eval),
            real_valued: raw.real_valued.unwrap_or(real_channels),
            convention: raw.convention.unwrap_or_default(),
        },
        encoders: raw.encoders.unwrap_or_else(|| EncoderKind::ALL.to_vec()),
        seed: raw.seed.unwrap_or(0),
    };
    spec.validate()?;
    Ok(spec)
}

/// Parses a scenario document; `origin` names the source in error messages and
/// supplies the default scenario name.
pub fn parse_config(text: &str, origin: &Path) -> Result<ScenarioSpec> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Parse {
        path: origin.to_path_buf(),
        message: e.to_string(),
    })?;
    let stem = origin
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("scenario");
    spec_from_raw(raw, stem)
}

pub fn load_config(path: impl AsRef<Path>) -> Result<ScenarioSpec> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text, path)
}

/// Writes every field explicitly, so the document reloads to an equal spec.
pub fn to_toml(spec: &ScenarioSpec) -> Result<String> {
    let raw = RawConfig {
        name: Some(spec.name.clone()),
        antennas: spec.antennas,
        users: spec.users,
        rx: spec.rx,
        alphabet: Some(spec.alphabet.clone()),
        mean_power: Some(spec.power.mean_power),
        peak_antenna_power: Some(spec.power.peak_antenna_power),
        eta: Some(spec.opt.eta),
        n_samples: Some(spec.opt.n_samples),
        iterations: Some(spec.opt.max_iterations),
        n_eval: Some(spec.opt.n_eval),
        restarts: Some(spec.opt.restarts),
        seed: Some(spec.seed),
        convention: Some(spec.opt.convention),
        real_valued: Some(spec.opt.real_valued),
        encoders: Some(spec.encoders.clone()),
        channels: channels_to_raw(&spec.channels),
        snr: spec.snr.clone(),
        plateau: spec.opt.plateau,
    };
    toml::to_string(&raw).map_err(|e| Error::validation("config", e.to_string()))
}
