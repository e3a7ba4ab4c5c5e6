//! Domain types for the broadcast channel: joint message space, constellations,
//! normalized channels, power constraints and simulated observations.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the unit Frobenius norm of a normalized channel.
pub const UNIT_NORM_TOL: f64 = 1e-12;

/// Per-user alphabets and the mixed-radix enumeration of joint messages.
///
/// Joint message `i` is written in mixed radix with user 0 as the most
/// significant digit, so for sizes `[2, 3]` index 5 is `(1, 2)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct MessageSpace {
    sizes: Vec<usize>,
    strides: Vec<usize>,
    total: usize,
}

impl TryFrom<Vec<usize>> for MessageSpace {
    type Error = Error;
    fn try_from(sizes: Vec<usize>) -> Result<Self> {
        MessageSpace::new(sizes)
    }
}

impl From<MessageSpace> for Vec<usize> {
    fn from(space: MessageSpace) -> Self {
        space.sizes
    }
}

impl MessageSpace {
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if sizes.is_empty() {
            return Err(Error::validation("alphabet", "at least one user is required"));
        }
        if let Some((k, &s)) = sizes.iter().enumerate().find(|(_, &s)| s < 2) {
            return Err(Error::validation(
                "alphabet",
                format!("user {k} has alphabet size {s}, need at least 2"),
            ));
        }
        let mut strides = vec![1usize; sizes.len()];
        let mut total = 1usize;
        for k in (0..sizes.len()).rev() {
            strides[k] = total;
            total = total
                .checked_mul(sizes[k])
                .ok_or_else(|| Error::validation("alphabet", "joint message space overflows"))?;
        }
        Ok(Self {
            sizes,
            strides,
            total,
        })
    }

    /// `users` binary alphabets.
    pub fn binary(users: usize) -> Result<Self> {
        Self::new(vec![2; users])
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn users(&self) -> usize {
        self.sizes.len()
    }

    pub fn total(&self) -> usize {
        self.total
    }

    /// Symbol carried for `user` by joint message `index`.
    #[inline]
    pub fn symbol(&self, index: usize, user: usize) -> usize {
        (index / self.strides[user]) % self.sizes[user]
    }

    pub fn digits(&self, index: usize) -> Vec<usize> {
        (0..self.users()).map(|k| self.symbol(index, k)).collect()
    }

    /// Inverse of [`MessageSpace::digits`]; `None` if a digit is out of range.
    pub fn index_of(&self, digits: &[usize]) -> Option<usize> {
        if digits.len() != self.users() {
            return None;
        }
        digits
            .iter()
            .zip(&self.sizes)
            .zip(&self.strides)
            .try_fold(0usize, |acc, ((&d, &s), &st)| (d < s).then_some(acc + d * st))
    }

    /// Entropy of user `user`'s uniform input, in bits.
    pub fn entropy_bits(&self, user: usize) -> f64 {
        (self.sizes[user] as f64).log2()
    }

    /// Label of a joint message, most significant user first (`"01"` for
    /// user 0 sending 0 and user 1 sending 1). Digits are dot-separated when
    /// any alphabet has more than ten symbols.
    pub fn label(&self, index: usize) -> String {
        let digits = self.digits(index);
        if self.sizes.iter().all(|&s| s <= 10) {
            digits.iter().map(|d| d.to_string()).collect()
        } else {
            digits
                .iter()
                .map(|d| d.to_string())
                .collect::<Vec<_>>()
                .join(".")
        }
    }

    /// Parses a label produced by [`MessageSpace::label`].
    pub fn parse_label(&self, label: &str) -> Option<usize> {
        let digits: Option<Vec<usize>> = if label.contains('.') {
            label.split('.').map(|d| d.parse().ok()).collect()
        } else {
            label
                .chars()
                .map(|c| c.to_digit(10).map(|d| d as usize))
                .collect()
        };
        self.index_of(&digits?)
    }
}

/// Every joint message as a tuple of per-user symbols, in index order.
pub fn enumerate_joint_messages(space: &MessageSpace) -> Vec<Vec<usize>> {
    (0..space.total()).map(|i| space.digits(i)).collect()
}

/// One complex transmit vector of length `antennas` per joint message, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    antennas: usize,
    points: Vec<Complex64>,
}

impl Constellation {
    pub fn new(antennas: usize, points: Vec<Complex64>) -> Result<Self> {
        if antennas == 0 || points.is_empty() || points.len() % antennas != 0 {
            return Err(Error::validation(
                "constellation",
                format!(
                    "{} values do not form points of dimension {antennas}",
                    points.len()
                ),
            ));
        }
        if points.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::validation("constellation", "non-finite component"));
        }
        Ok(Self { antennas, points })
    }

    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let antennas = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != antennas) {
            return Err(Error::validation("constellation", "ragged rows"));
        }
        Self::new(antennas, rows.concat())
    }

    pub fn zeros(num_points: usize, antennas: usize) -> Self {
        Self {
            antennas,
            points: vec![Complex64::new(0.0, 0.0); num_points * antennas],
        }
    }

    pub fn antennas(&self) -> usize {
        self.antennas
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.antennas
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, index: usize) -> &[Complex64] {
        &self.points[index * self.antennas..(index + 1) * self.antennas]
    }

    pub fn point_mut(&mut self, index: usize) -> &mut [Complex64] {
        let t = self.antennas;
        &mut self.points[index * t..(index + 1) * t]
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.points
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.points
    }

    /// Average over points of the squared Euclidean norm.
    pub fn mean_power(&self) -> f64 {
        self.points.iter().map(|z| z.norm_sqr()).sum::<f64>() / self.len() as f64
    }

    /// Largest squared magnitude over every point and antenna.
    pub fn peak_antenna_power(&self) -> f64 {
        self.points.iter().map(|z| z.norm_sqr()).fold(0.0, f64::max)
    }

    /// True when every imaginary part is within `tol` of zero.
    pub fn is_real(&self, tol: f64) -> bool {
        self.points.iter().all(|z| z.im.abs() <= tol)
    }

    pub fn satisfies(&self, pc: &PowerConstraint, rel_tol: f64) -> bool {
        self.mean_power() <= pc.mean_power * (1.0 + rel_tol)
            && self.peak_antenna_power() <= pc.peak_antenna_power * (1.0 + rel_tol)
    }

    /// Checks the point count against a message space.
    pub fn check_space(&self, space: &MessageSpace) -> Result<()> {
        if self.len() != space.total() {
            return Err(Error::validation(
                "constellation",
                format!(
                    "{} points for a message space of {}",
                    self.len(),
                    space.total()
                ),
            ));
        }
        Ok(())
    }
}

/// Noise and likelihood convention.
///
/// `Paper`: each real dimension of the noise has variance σ_k² and distances are
/// ‖y − ζᴴx‖² / (2σ_k²). `Circular`: the complex noise has total variance σ_k²
/// (σ_k²/2 per real dimension) and distances are ‖y − ζᴴx‖² / σ_k². Both pair
/// the noise law with its own Gaussian likelihood.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseConvention {
    #[default]
    Paper,
    Circular,
}

impl NoiseConvention {
    /// Standard deviation of each real dimension of the noise.
    pub fn noise_std_per_dim(self, noise_var: f64) -> f64 {
        match self {
            NoiseConvention::Paper => noise_var.sqrt(),
            NoiseConvention::Circular => (0.5 * noise_var).sqrt(),
        }
    }

    /// Denominator of the distance kernel.
    pub fn distance_denominator(self, noise_var: f64) -> f64 {
        match self {
            NoiseConvention::Paper => 2.0 * noise_var,
            NoiseConvention::Circular => noise_var,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            NoiseConvention::Paper => "paper",
            NoiseConvention::Circular => "circular",
        }
    }
}

/// Splits a channel matrix into its squared Frobenius norm and the unit-norm direction.
pub fn normalize_channel(h: &DMatrix<Complex64>) -> Result<(f64, DMatrix<Complex64>)> {
    let g: f64 = h.iter().map(|z| z.norm_sqr()).sum();
    if g == 0.0 || !g.is_finite() {
        return Err(Error::ZeroChannel { user: 0 });
    }
    Ok((g, h.map(|z| z / g.sqrt())))
}

/// σ_k² such that `snr_db = 10·log10(mean_power / σ_k²)`.
pub fn noise_var_from_snr(snr_db: f64, mean_power: f64) -> f64 {
    mean_power / 10f64.powf(snr_db / 10.0)
}

/// Per-user normalized channels ζ_k (T×R), gains g_k and noise variances σ_k².
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    zeta: Vec<DMatrix<Complex64>>,
    gain: Vec<f64>,
    noise_var: Vec<f64>,
    antennas: usize,
    rx: usize,
}

impl ChannelSet {
    /// Builds from already normalized channels; gains are set to 1.
    pub fn from_normalized(zeta: Vec<DMatrix<Complex64>>, noise_var: Vec<f64>) -> Result<Self> {
        let gain = vec![1.0; zeta.len()];
        Self::from_parts(zeta, gain, noise_var)
    }

    pub fn from_parts(
        zeta: Vec<DMatrix<Complex64>>,
        gain: Vec<f64>,
        noise_var: Vec<f64>,
    ) -> Result<Self> {
        let first = zeta
            .first()
            .ok_or_else(|| Error::validation("channels", "no users"))?;
        let (antennas, rx) = first.shape();
        if antennas == 0 || rx == 0 {
            return Err(Error::validation("channels", "empty channel matrix"));
        }
        if zeta.len() != noise_var.len() || zeta.len() != gain.len() {
            return Err(Error::validation(
                "noise_var",
                format!("{} channels but {} noise variances", zeta.len(), noise_var.len()),
            ));
        }
        for (k, z) in zeta.iter().enumerate() {
            if z.shape() != (antennas, rx) {
                return Err(Error::validation(
                    "channels",
                    format!("user {k} channel is {:?}, expected ({antennas}, {rx})", z.shape()),
                ));
            }
            let norm: f64 = z.iter().map(|c| c.norm_sqr()).sum();
            if (norm - 1.0).abs() > UNIT_NORM_TOL {
                return Err(Error::validation(
                    "channels",
                    format!("user {k} channel has squared norm {norm}, expected 1"),
                ));
            }
        }
        if let Some(k) = noise_var.iter().position(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::validation(
                "noise_var",
                format!("user {k} noise variance must be positive and finite"),
            ));
        }
        Ok(Self {
            zeta,
            gain,
            noise_var,
            antennas,
            rx,
        })
    }

    /// Normalizes raw channels `H_k` and sets σ_k² = σ² / g_k.
    pub fn from_raw(h: &[DMatrix<Complex64>], sigma2: f64) -> Result<Self> {
        let mut zeta = Vec::with_capacity(h.len());
        let mut gain = Vec::with_capacity(h.len());
        for (k, hk) in h.iter().enumerate() {
            let (g, z) = normalize_channel(hk).map_err(|_| Error::ZeroChannel { user: k })?;
            gain.push(g);
            zeta.push(z);
        }
        let noise_var = gain.iter().map(|g| sigma2 / g).collect();
        Self::from_parts(zeta, gain, noise_var)
    }

    /// Normalizes raw channel directions and takes σ_k² from per-user SNRs in dB.
    pub fn from_snr(h: &[DMatrix<Complex64>], snr_db: &[f64], mean_power: f64) -> Result<Self> {
        if h.len() != snr_db.len() {
            return Err(Error::validation(
                "snr",
                format!("{} SNR values for {} users", snr_db.len(), h.len()),
            ));
        }
        let mut zeta = Vec::with_capacity(h.len());
        let mut gain = Vec::with_capacity(h.len());
        for (k, hk) in h.iter().enumerate() {
            let (g, z) = normalize_channel(hk).map_err(|_| Error::ZeroChannel { user: k })?;
            gain.push(g);
            zeta.push(z);
        }
        let noise_var = snr_db
            .iter()
            .map(|&s| noise_var_from_snr(s, mean_power))
            .collect();
        Self::from_parts(zeta, gain, noise_var)
    }

    pub fn users(&self) -> usize {
        self.zeta.len()
    }

    pub fn antennas(&self) -> usize {
        self.antennas
    }

    pub fn rx(&self) -> usize {
        self.rx
    }

    pub fn zeta(&self, user: usize) -> &DMatrix<Complex64> {
        &self.zeta[user]
    }

    pub fn gain(&self) -> &[f64] {
        &self.gain
    }

    pub fn noise_var(&self) -> &[f64] {
        &self.noise_var
    }

    /// Same channels with different noise variances.
    pub fn with_noise_var(&self, noise_var: Vec<f64>) -> Result<Self> {
        Self::from_parts(self.zeta.clone(), self.gain.clone(), noise_var)
    }

    /// Column concatenation ζ = [ζ_1 … ζ_K], of shape T×(K·R).
    pub fn stacked(&self) -> DMatrix<Complex64> {
        let mut m = DMatrix::zeros(self.antennas, self.users() * self.rx);
        for (k, z) in self.zeta.iter().enumerate() {
            m.columns_mut(k * self.rx, self.rx).copy_from(z);
        }
        m
    }

    /// ζ_kᴴ·x written into `out` (length R).
    #[inline]
    pub fn project_into(&self, user: usize, x: &[Complex64], out: &mut [Complex64]) {
        let z = &self.zeta[user];
        for (r, o) in out.iter_mut().enumerate() {
            *o = z
                .column(r)
                .iter()
                .zip(x)
                .map(|(zt, xt)| zt.conj() * xt)
                .sum();
        }
    }

    /// ζ_kᴴ·x for every constellation point, flattened (points × R).
    pub fn project_all(&self, user: usize, constellation: &Constellation) -> Vec<Complex64> {
        let r = self.rx;
        let mut out = vec![Complex64::new(0.0, 0.0); constellation.len() * r];
        for (j, chunk) in out.chunks_mut(r).enumerate() {
            self.project_into(user, constellation.point(j), chunk);
        }
        out
    }

    pub fn check_constellation(&self, constellation: &Constellation) -> Result<()> {
        if constellation.antennas() != self.antennas {
            return Err(Error::validation(
                "constellation",
                format!(
                    "points have {} antennas, channels have {}",
                    constellation.antennas(),
                    self.antennas
                ),
            ));
        }
        Ok(())
    }
}

/// Mean-power budget P_m and per-antenna cap P_c.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerConstraint {
    pub mean_power: f64,
    pub peak_antenna_power: f64,
}

impl Default for PowerConstraint {
    fn default() -> Self {
        Self {
            mean_power: 1.0,
            peak_antenna_power: 4.0,
        }
    }
}

impl PowerConstraint {
    pub fn new(mean_power: f64, peak_antenna_power: f64) -> Result<Self> {
        let pc = Self {
            mean_power,
            peak_antenna_power,
        };
        pc.validate()?;
        Ok(pc)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mean_power > 0.0 && self.mean_power.is_finite()) {
            return Err(Error::validation("P_m", "must be positive and finite"));
        }
        if !(self.peak_antenna_power > 0.0 && self.peak_antenna_power.is_finite()) {
            return Err(Error::validation("P_c", "must be positive and finite"));
        }
        if self.peak_antenna_power < self.mean_power {
            return Err(Error::validation("P_c", "must not be smaller than P_m"));
        }
        Ok(())
    }
}

/// N noisy observations of one user, with the joint messages that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationBatch {
    pub user: usize,
    pub messages: Vec<usize>,
    /// Row-major N×R.
    pub y: Vec<Complex64>,
    pub rx: usize,
}

impl ObservationBatch {
    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    pub fn observation(&self, n: usize) -> &[Complex64] {
        &self.y[n * self.rx..(n + 1) * self.rx]
    }

    /// y^n = ζ_kᴴ X(w^n) + ν^n for given noise realizations (N×R, row-major).
    pub fn from_noise(
        constellation: &Constellation,
        chan: &ChannelSet,
        user: usize,
        messages: Vec<usize>,
        noise: &[Complex64],
    ) -> Self {
        let rx = chan.rx();
        debug_assert_eq!(noise.len(), messages.len() * rx);
        let projected = chan.project_all(user, constellation);
        let y = messages
            .iter()
            .enumerate()
            .flat_map(|(n, &m)| (0..rx).map(move |r| (n, m, r)))
            .map(|(n, m, r)| projected[m * rx + r] + noise[n * rx + r])
            .collect();
        Self {
            user,
            messages,
            y,
            rx,
        }
    }
}

/// `n` joint-message indices drawn uniformly.
pub fn draw_messages<G: Rng + ?Sized>(space: &MessageSpace, n: usize, rng: &mut G) -> Vec<usize> {
    (0..n).map(|_| rng.random_range(0..space.total())).collect()
}

/// `n` noise vectors for `user` (N×R, row-major) under `convention`.
pub fn draw_noise<G: Rng + ?Sized>(
    chan: &ChannelSet,
    user: usize,
    n: usize,
    convention: NoiseConvention,
    rng: &mut G,
) -> Vec<Complex64> {
    let std = convention.noise_std_per_dim(chan.noise_var()[user]);
    (0..n * chan.rx())
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(std * re, std * im)
        })
        .collect()
}

/// Simulates what `user` observes for each of `messages`.
pub fn simulate_observations<G: Rng + ?Sized>(
    constellation: &Constellation,
    chan: &ChannelSet,
    user: usize,
    messages: Vec<usize>,
    convention: NoiseConvention,
    rng: &mut G,
) -> Result<ObservationBatch> {
    chan.check_constellation(constellation)?;
    if user >= chan.users() {
        return Err(Error::validation("user", format!("no user {user}")));
    }
    if let Some(&m) = messages.iter().find(|&&m| m >= constellation.len()) {
        return Err(Error::validation("messages", format!("index {m} out of range")));
    }
    let noise = draw_noise(chan, user, messages.len(), convention, rng);
    Ok(ObservationBatch::from_noise(
        constellation,
        chan,
        user,
        messages,
        &noise,
    ))
}
