//! CSV, JSON and SVG artifacts.
//!
//! Floating-point values are written with 17 significant digits so that they
//! parse back to the identical `f64`. Every file is written to a temporary
//! sibling and renamed into place.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use num_complex::Complex64;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::experiments::EncoderKind;
use crate::metrics::MiEstimate;
use crate::model::{ChannelSet, Constellation, MessageSpace};
use crate::optimizer::IterationRecord;

/// Marker written in place of a number that does not exist (e.g. ZF on a rank-deficient channel).
pub const UNAVAILABLE: &str = "NA";

pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        UNAVAILABLE.to_string()
    } else {
        format!("{x:.16e}")
    }
}

fn tmp_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(format!(".tmp{}", std::process::id()));
    path.with_file_name(name)
}

/// Writes `bytes` to `path` through a temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let tmp = tmp_path(path);
    let mut f = std::fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    drop(f);
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn csv_string(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let wrap = |e: csv::Error| Error::validation("csv", e.to_string());
    w.write_record(header).map_err(wrap)?;
    for row in rows {
        w.write_record(&row).map_err(wrap)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::validation("csv", e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Long format: one row per (joint message, antenna).
pub fn constellation_csv(constellation: &Constellation, space: &MessageSpace) -> Result<String> {
    constellation.check_space(space)?;
    let rows = (0..constellation.len()).flat_map(|w| {
        constellation.point(w).iter().enumerate().map(move |(t, z)| {
            vec![space.label(w), t.to_string(), fmt_num(z.re), fmt_num(z.im)]
        })
    });
    csv_string(&["w", "antenna", "re", "im"], rows.collect::<Vec<_>>())
}

/// Wide format: one row per joint message.
pub fn constellation_wide_csv(constellation: &Constellation, space: &MessageSpace) -> Result<String> {
    constellation.check_space(space)?;
    let mut header = vec!["w".to_string()];
    for t in 0..constellation.antennas() {
        header.push(format!("re{t}"));
        header.push(format!("im{t}"));
    }
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = (0..constellation.len()).map(|w| {
        let mut row = vec![space.label(w)];
        for z in constellation.point(w) {
            row.push(fmt_num(z.re));
            row.push(fmt_num(z.im));
        }
        row
    });
    csv_string(&header, rows.collect::<Vec<_>>())
}

/// Reads the long format back. The message space is inferred from the labels.
pub fn read_constellation_csv(path: &Path) -> Result<(Constellation, MessageSpace)> {
    let parse_err = |message: String| Error::Parse {
        path: path.to_path_buf(),
        message,
    };
    let mut reader = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => parse_err(format!("{other:?}")),
    })?;
    let headers = reader.headers().map_err(|e| parse_err(e.to_string()))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["w", "antenna", "re", "im"] {
        return Err(parse_err("expected header w,antenna,re,im".into()));
    }
    let mut entries: Vec<(Vec<usize>, usize, Complex64)> = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| parse_err(e.to_string()))?;
        let label = &rec[0];
        let digits: Option<Vec<usize>> = if label.contains('.') {
            label.split('.').map(|d| d.parse().ok()).collect()
        } else {
            label.chars().map(|c| c.to_digit(10).map(|d| d as usize)).collect()
        };
        let digits = digits.ok_or_else(|| parse_err(format!("bad message label `{label}`")))?;
        let num = |s: &str| s.parse::<f64>().map_err(|_| parse_err(format!("bad number `{s}`")));
        let antenna: usize = rec[1].parse().map_err(|_| parse_err(format!("bad antenna `{}`", &rec[1])))?;
        entries.push((digits, antenna, Complex64::new(num(&rec[2])?, num(&rec[3])?)));
    }
    let users = entries.first().map(|e| e.0.len()).ok_or_else(|| parse_err("no rows".into()))?;
    if entries.iter().any(|e| e.0.len() != users) {
        return Err(parse_err("labels of different lengths".into()));
    }
    let sizes: Vec<usize> = (0..users)
        .map(|k| entries.iter().map(|e| e.0[k]).max().unwrap_or(0) + 1)
        .collect();
    let space = MessageSpace::new(sizes).map_err(|e| parse_err(e.to_string()))?;
    let antennas = entries.iter().map(|e| e.1).max().unwrap_or(0) + 1;
    if entries.len() != space.total() * antennas {
        return Err(parse_err(format!(
            "{} rows, expected {} messages x {antennas} antennas",
            entries.len(),
            space.total()
        )));
    }
    let mut points = vec![Complex64::new(f64::NAN, f64::NAN); entries.len()];
    for (digits, t, z) in entries {
        let w = space.index_of(&digits).ok_or_else(|| parse_err("label out of range".into()))?;
        points[w * antennas + t] = z;
    }
    if points.iter().any(|z| z.re.is_nan()) {
        return Err(parse_err("duplicate (w, antenna) rows".into()));
    }
    Ok((Constellation::new(antennas, points)?, space))
}

/// One line of `mi.csv`. `experiment` and `snr_db` are empty for single runs.
#[derive(Debug, Clone, PartialEq)]
pub struct MiRow {
    pub experiment: Option<usize>,
    pub snr_db: Option<f64>,
    pub encoder: EncoderKind,
    pub user: usize,
    pub mi: Option<MiEstimate>,
}

pub fn mi_rows(
    experiment: Option<usize>,
    snr_db: Option<f64>,
    encoder: EncoderKind,
    users: usize,
    mi: Option<&[MiEstimate]>,
) -> Vec<MiRow> {
    (0..users)
        .map(|k| MiRow {
            experiment,
            snr_db,
            encoder,
            user: k,
            mi: mi.map(|m| m[k]),
        })
        .collect()
}

pub fn mi_csv(rows: &[MiRow]) -> Result<String> {
    csv_string(
        &["experiment", "snr_db", "encoder", "user", "mi", "stderr"],
        rows.iter().map(|r| {
            vec![
                r.experiment.map(|e| e.to_string()).unwrap_or_default(),
                r.snr_db.map(fmt_num).unwrap_or_default(),
                r.encoder.name().to_string(),
                r.user.to_string(),
                r.mi.map(|m| fmt_num(m.mi)).unwrap_or_else(|| UNAVAILABLE.into()),
                r.mi.map(|m| fmt_num(m.stderr)).unwrap_or_else(|| UNAVAILABLE.into()),
            ]
        })
        .collect::<Vec<_>>(),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub snr_db: Option<f64>,
    pub encoder: EncoderKind,
    pub min_mi: f64,
    pub mean_mi: f64,
}

impl SummaryRow {
    /// min and mean over the users of one constellation; NaN when unavailable.
    pub fn from_mi(snr_db: Option<f64>, encoder: EncoderKind, mi: Option<&[MiEstimate]>) -> Self {
        let (min_mi, mean_mi) = match mi {
            Some(m) => (
                m.iter().map(|e| e.mi).fold(f64::INFINITY, f64::min),
                m.iter().map(|e| e.mi).sum::<f64>() / m.len() as f64,
            ),
            None => (f64::NAN, f64::NAN),
        };
        Self {
            snr_db,
            encoder,
            min_mi,
            mean_mi,
        }
    }
}

pub fn summary_csv(rows: &[SummaryRow]) -> Result<String> {
    csv_string(
        &["snr_db", "encoder", "min_mi", "mean_mi"],
        rows.iter()
            .map(|r| {
                vec![
                    r.snr_db.map(fmt_num).unwrap_or_default(),
                    r.encoder.name().to_string(),
                    fmt_num(r.min_mi),
                    fmt_num(r.mean_mi),
                ]
            })
            .collect::<Vec<_>>(),
    )
}

pub fn loss_history_csv(history: &[IterationRecord]) -> Result<String> {
    csv_string(
        &["iteration", "max_loss", "argmax_user"],
        history
            .iter()
            .map(|r| vec![r.iteration.to_string(), fmt_num(r.max_loss), r.argmax_user.to_string()])
            .collect::<Vec<_>>(),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputEntry {
    pub file: String,
    pub sha256: String,
}

/// Reproduction record written next to the CSV files.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    /// sha256 of command, config and seed; identical for identical invocations.
    pub run_id: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub convention: String,
    pub threads: usize,
    pub config: serde_json::Value,
    pub created_unix: u64,
    pub outputs: Vec<OutputEntry>,
}

pub fn run_id(command: &str, config: &serde_json::Value, seed: u64) -> String {
    let mut h = Sha256::new();
    h.update(command.as_bytes());
    h.update([0]);
    h.update(config.to_string().as_bytes());
    h.update([0]);
    h.update(seed.to_le_bytes());
    hex::encode(h.finalize())
}

/// Collects named files for one command and writes them plus `manifest.json`.
#[derive(Debug)]
pub struct ResultWriter {
    dir: PathBuf,
    files: Vec<(String, Vec<u8>)>,
}

impl ResultWriter {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self {
            dir: dir.into(),
            files: Vec::new(),
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn add(&mut self, name: impl Into<String>, contents: impl Into<Vec<u8>>) {
        self.files.push((name.into(), contents.into()));
    }

    pub fn finish(
        self,
        command: &str,
        config: serde_json::Value,
        seed: u64,
        convention: &str,
    ) -> Result<RunManifest> {
        let mut outputs = Vec::with_capacity(self.files.len());
        for (name, bytes) in &self.files {
            write_atomic(&self.dir.join(name), bytes)?;
            outputs.push(OutputEntry {
                file: name.clone(),
                sha256: hex::encode(Sha256::digest(bytes)),
            });
        }
        let manifest = RunManifest {
            run_id: run_id(command, &config, seed),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            seed,
            convention: convention.to_string(),
            threads: rayon::current_num_threads(),
            config,
            created_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            outputs,
        };
        let json = serde_json::to_string_pretty(&manifest)
            .map_err(|e| Error::validation("manifest", e.to_string()))?;
        write_atomic(&self.dir.join("manifest.json"), json.as_bytes())?;
        Ok(manifest)
    }
}

/// Scatter plot of a real two-antenna constellation with the user channel directions.
pub fn svg_string(
    constellation: &Constellation,
    space: &MessageSpace,
    chan: Option<&ChannelSet>,
) -> Result<String> {
    if constellation.antennas() != 2 {
        return Err(Error::Unplottable(format!(
            "{} antennas, only 2 can be drawn",
            constellation.antennas()
        )));
    }
    if !constellation.is_real(1e-9) {
        return Err(Error::Unplottable("points have nonzero imaginary parts".into()));
    }
    constellation.check_space(space)?;
    if let Some(c) = chan {
        if c.antennas() != 2 {
            return Err(Error::Unplottable("channel is not two-antenna".into()));
        }
    }
    let extent = constellation
        .as_slice()
        .iter()
        .map(|z| z.re.abs())
        .fold(1.0f64, f64::max)
        * 1.2;
    let size = 400.0;
    let half = size / 2.0;
    let px = |v: f64| half + v / extent * (half - 20.0);
    let py = |v: f64| half - v / extent * (half - 20.0);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">"#
    );
    let _ = writeln!(
        s,
        r#"<defs><marker id="arrow" markerWidth="8" markerHeight="8" refX="6" refY="3" orient="auto"><path d="M0,0 L6,3 L0,6 z"/></marker></defs>"#
    );
    let _ = writeln!(s, r#"<line x1="0" y1="{half}" x2="{size}" y2="{half}" stroke="lightgray"/>"#);
    let _ = writeln!(s, r#"<line x1="{half}" y1="0" x2="{half}" y2="{size}" stroke="lightgray"/>"#);
    if let Some(c) = chan {
        for k in 0..c.users() {
            let z = c.zeta(k);
            let (a, b) = (z[(0, 0)].re, z[(1, 0)].re);
            let _ = writeln!(
                s,
                r#"<line class="channel" x1="{half}" y1="{half}" x2="{:.3}" y2="{:.3}" stroke="gray" marker-end="url(#arrow)"/>"#,
                px(a * extent * 0.8),
                py(b * extent * 0.8)
            );
            let _ = writeln!(
                s,
                r#"<text x="{:.3}" y="{:.3}" font-size="12" fill="gray">user {}</text>"#,
                px(a * extent * 0.85),
                py(b * extent * 0.85),
                k + 1
            );
        }
    }
    for w in 0..constellation.len() {
        let p = constellation.point(w);
        let (x, y) = (px(p[0].re), py(p[1].re));
        let _ = writeln!(s, r#"<circle class="point" cx="{x:.3}" cy="{y:.3}" r="4"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{:.3}" y="{:.3}" font-size="12">{}</text>"#,
            x + 6.0,
            y - 6.0,
            space.label(w)
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn export_svg(
    constellation: &Constellation,
    space: &MessageSpace,
    chan: Option<&ChannelSet>,
    path: &Path,
) -> Result<()> {
    write_atomic(path, svg_string(constellation, space, chan)?.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn square() -> Constellation {
        Constellation::new(2, vec![c(1.0), c(0.0), c(0.0), c(1.0), c(0.0), c(-1.0), c(-1.0), c(0.0)]).unwrap()
    }

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, std::f64::consts::PI] {
            assert_eq!(fmt_num(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(fmt_num(0.5), "5.0000000000000000e-1");
    }

    #[test]
    fn constellation_rows() {
        let space = MessageSpace::binary(2).unwrap();
        let text = constellation_csv(&square(), &space).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "w,antenna,re,im");
        assert_eq!(lines.len(), 1 + 4 * 2);
        assert!(lines[3].starts_with("01,0,"));
        let wide = constellation_wide_csv(&square(), &space).unwrap();
        assert_eq!(wide.lines().count(), 1 + 4);
    }

    #[test]
    fn csv_read_back() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        let space = MessageSpace::new(vec![3, 2]).unwrap();
        let x = Constellation::new(
            1,
            (0..6).map(|i| Complex64::new(i as f64 / 7.0, -(i as f64) / 3.0)).collect(),
        )
        .unwrap();
        write_atomic(&path, constellation_csv(&x, &space).unwrap().as_bytes()).unwrap();
        let (y, s) = read_constellation_csv(&path).unwrap();
        assert_eq!(y, x);
        assert_eq!(s, space);
    }

    #[test]
    fn unavailable_marker() {
        let rows = mi_rows(None, None, EncoderKind::ZeroForcing, 2, None);
        let text = mi_csv(&rows).unwrap();
        assert_eq!(text.lines().nth(1).unwrap(), ",,zf,0,NA,NA");
        let s = SummaryRow::from_mi(None, EncoderKind::ZeroForcing, None);
        assert!(summary_csv(&[s]).unwrap().contains(",zf,NA,NA"));
    }

    #[test]
    fn summary_is_rowwise_min() {
        let mi = [
            MiEstimate { mi: 0.4, stderr: 0.01, raw_mi: 0.4 },
            MiEstimate { mi: 0.7, stderr: 0.01, raw_mi: 0.7 },
        ];
        let s = SummaryRow::from_mi(Some(6.0), EncoderKind::Mmse, Some(&mi));
        assert_eq!(s.min_mi, 0.4);
        assert!((s.mean_mi - 0.55).abs() < 1e-15);
    }

    #[test]
    fn manifest_lists_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let mut w = ResultWriter::new(dir.path());
        w.add("a.csv", "x\n1\n");
        let m = w.finish("optimize", serde_json::json!({"eta": 0.1}), 7, "paper").unwrap();
        assert_eq!(m.outputs.len(), 1);
        assert!(dir.path().join("a.csv").exists());
        assert!(dir.path().join("manifest.json").exists());
        assert_eq!(m.run_id, run_id("optimize", &serde_json::json!({"eta": 0.1}), 7));
        let leftovers = std::fs::read_dir(dir.path())
            .unwrap()
            .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().contains(".tmp"))
            .count();
        assert_eq!(leftovers, 0);
    }

    #[test]
    fn svg_guards_and_labels() {
        let space = MessageSpace::binary(2).unwrap();
        let text = svg_string(&square(), &space, None).unwrap();
        assert_eq!(text.matches("class=\"point\"").count(), 4);
        for label in ["00", "01", "10", "11"] {
            assert!(text.contains(&format!(">{label}<")));
        }
        let wide = Constellation::zeros(4, 4);
        assert!(matches!(svg_string(&wide, &space, None), Err(Error::Unplottable(_))));
        let mut cplx = square();
        cplx.point_mut(0)[0] = Complex64::new(1.0, 0.1);
        assert!(matches!(svg_string(&cplx, &space, None), Err(Error::Unplottable(_))));
    }
}
