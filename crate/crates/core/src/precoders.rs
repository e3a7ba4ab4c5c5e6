//! Multi-user linear precoding baselines: BPSK mapping followed by a matched,
//! zero-forcing or MMSE encoding matrix, projected into the power constraints.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ChannelSet, Constellation, MessageSpace, PowerConstraint};
use crate::optimizer::project_constraints;

/// Gram matrices with a larger condition number are treated as singular.
pub const MAX_CONDITION_NUMBER: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrecoderKind {
    Matched,
    #[serde(rename = "zf")]
    ZeroForcing,
    Mmse,
}

impl PrecoderKind {
    pub fn name(self) -> &'static str {
        match self {
            PrecoderKind::Matched => "matched",
            PrecoderKind::ZeroForcing => "zf",
            PrecoderKind::Mmse => "mmse",
        }
    }
}

/// T×(K·R) encoding matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodingMatrix {
    pub matrix: DMatrix<Complex64>,
    pub kind: PrecoderKind,
}

/// BPSK symbol of every joint message: row `i` holds one ±1 entry per user
/// (symbol 0 → +1, symbol 1 → −1).
pub fn bpsk_map(space: &MessageSpace) -> Result<Vec<Vec<f64>>> {
    if let Some((user, &size)) = space.sizes().iter().enumerate().find(|(_, &s)| s != 2) {
        return Err(Error::UnsupportedAlphabet { user, size });
    }
    Ok((0..space.total())
        .map(|i| {
            space
                .digits(i)
                .into_iter()
                .map(|d| if d == 0 { 1.0 } else { -1.0 })
                .collect()
        })
        .collect())
}

fn condition_number(gram: &DMatrix<Complex64>) -> f64 {
    let sv = gram.clone().svd(false, false).singular_values;
    let max = sv.max();
    let min = sv.min();
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

fn checked_inverse(gram: DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    let condition = condition_number(&gram);
    if !(condition <= MAX_CONDITION_NUMBER) {
        return Err(Error::RankDeficient { condition });
    }
    gram.try_inverse()
        .ok_or(Error::RankDeficient { condition })
}

/// M = ζ.
pub fn matched_encoder(chan: &ChannelSet) -> EncodingMatrix {
    EncodingMatrix {
        matrix: chan.stacked(),
        kind: PrecoderKind::Matched,
    }
}

/// Moore–Penrose pseudo-inverse of ζᴴ.
///
/// With at most as many streams as antennas this is ζ·(ζᴴζ)⁻¹ and ζᴴM = I.
/// With more streams than antennas ζᴴζ is always singular; the pseudo-inverse is
/// then (ζζᴴ)⁻¹·ζ, which only partially cancels interference. Either Gram matrix
/// must have condition number at most [`MAX_CONDITION_NUMBER`].
pub fn zf_encoder(chan: &ChannelSet) -> Result<EncodingMatrix> {
    let zeta = chan.stacked();
    let zeta_h = zeta.adjoint();
    let matrix = if zeta.ncols() <= zeta.nrows() {
        &zeta * checked_inverse(&zeta_h * &zeta)?
    } else {
        checked_inverse(&zeta * &zeta_h)? * &zeta
    };
    Ok(EncodingMatrix {
        matrix,
        kind: PrecoderKind::ZeroForcing,
    })
}

/// M = ζ·(ζᴴζ + Σ)⁻¹ with Σ = diag(σ_k²), each user's variance repeated over its R streams.
pub fn mmse_encoder(chan: &ChannelSet) -> Result<EncodingMatrix> {
    let zeta = chan.stacked();
    let rx = chan.rx();
    let mut gram = zeta.adjoint() * &zeta;
    for (k, &v) in chan.noise_var().iter().enumerate() {
        for r in 0..rx {
            gram[(k * rx + r, k * rx + r)] += Complex64::new(v, 0.0);
        }
    }
    let inv = gram
        .try_inverse()
        .ok_or(Error::SingularRegularizedMatrix)?;
    Ok(EncodingMatrix {
        matrix: zeta * inv,
        kind: PrecoderKind::Mmse,
    })
}

pub fn encoder(kind: PrecoderKind, chan: &ChannelSet) -> Result<EncodingMatrix> {
    match kind {
        PrecoderKind::Matched => Ok(matched_encoder(chan)),
        PrecoderKind::ZeroForcing => zf_encoder(chan),
        PrecoderKind::Mmse => mmse_encoder(chan),
    }
}

/// X(w) = M·φ_map(w) for every joint message, without projection.
///
/// Each user's BPSK symbol drives all of that user's R stream columns.
pub fn linear_points(enc: &EncodingMatrix, space: &MessageSpace) -> Result<Constellation> {
    let users = space.users();
    let cols = enc.matrix.ncols();
    if users == 0 || cols % users != 0 {
        return Err(Error::validation(
            "encoder",
            format!("{cols} encoder columns for {users} users"),
        ));
    }
    let rx = cols / users;
    let table = bpsk_map(space)?;
    let antennas = enc.matrix.nrows();
    let mut points = Vec::with_capacity(space.total() * antennas);
    for symbols in &table {
        for t in 0..antennas {
            let v: Complex64 = (0..cols)
                .map(|c| enc.matrix[(t, c)] * symbols[c / rx])
                .sum();
            points.push(v);
        }
    }
    Constellation::new(antennas, points)
}

/// Linear constellation projected into the power constraints.
pub fn build_linear_constellation(
    enc: &EncodingMatrix,
    space: &MessageSpace,
    pc: &PowerConstraint,
) -> Result<Constellation> {
    project_constraints(&linear_points(enc, space)?, pc)
}
