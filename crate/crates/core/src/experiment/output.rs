//! Plot-ready CSV for histograms and lag curves.
//!
//! One header line `<x-name>,<diagnostic>:<regime>:<variant>` followed by
//! `x,value` rows written with round-trip precision.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CurveKind {
    Pdf,
    Acf,
    Ccf,
    Kcf,
}

impl CurveKind {
    pub const ALL: [CurveKind; 4] = [CurveKind::Pdf, CurveKind::Acf, CurveKind::Ccf, CurveKind::Kcf];

    pub fn name(self) -> &'static str {
        match self {
            CurveKind::Pdf => "pdf",
            CurveKind::Acf => "acf",
            CurveKind::Ccf => "ccf",
            CurveKind::Kcf => "kcf",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            CurveKind::Pdf => "PDF",
            CurveKind::Acf => "autocorrelation",
            CurveKind::Ccf => "cross-correlation",
            CurveKind::Kcf => "energy autocorrelation K(s)",
        }
    }

    fn x_name(self) -> &'static str {
        match self {
            CurveKind::Pdf => "bin_center",
            _ => "lag",
        }
    }

    fn from_name(name: &str) -> Option<Self> {
        CurveKind::ALL.into_iter().find(|k| k.name() == name)
    }
}

/// A curve read back from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveFile {
    pub kind: CurveKind,
    pub regime: String,
    pub variant: String,
    pub x: Vec<f64>,
    pub values: Vec<f64>,
}

pub fn write_curve_csv(path: &Path, kind: CurveKind, regime: &str, variant: &str, x: &[f64], values: &[f64]) -> Result<()> {
    if x.len() != values.len() {
        return Err(Error::GridMismatch(format!("{} grid points for {} values", x.len(), values.len())));
    }
    let mut out = format!("{},{}:{regime}:{variant}\n", kind.x_name(), kind.name());
    for (a, v) in x.iter().zip(values) {
        let _ = writeln!(out, "{a:?},{v:?}");
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_curve_csv(path: &Path) -> Result<CurveFile> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let bad = |m: &str| Error::format(path, m.to_string());
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| bad("empty file"))?;
    let (_, label) = header.split_once(',').ok_or_else(|| bad("malformed header"))?;
    let mut parts = label.splitn(3, ':');
    let kind = parts.next().and_then(CurveKind::from_name).ok_or_else(|| bad("unknown diagnostic"))?;
    let regime = parts.next().ok_or_else(|| bad("header lacks regime"))?.to_string();
    let variant = parts.next().ok_or_else(|| bad("header lacks variant"))?.to_string();
    let (mut x, mut values) = (Vec::new(), Vec::new());
    for line in lines.filter(|l| !l.trim().is_empty()) {
        let (a, v) = line.split_once(',').ok_or_else(|| bad("row needs two columns"))?;
        x.push(a.trim().parse().map_err(|_| bad("unparsable number"))?);
        values.push(v.trim().parse().map_err(|_| bad("unparsable number"))?);
    }
    Ok(CurveFile {
        kind,
        regime,
        variant,
        x,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        let x = vec![0.0, 0.05, 0.1];
        let v = vec![1.0, 0.1 + 0.2, -1.0 / 3.0];
        write_curve_csv(&path, CurveKind::Ccf, "lambda0.3_fx6_fy8", "zero-order", &x, &v).unwrap();
        let back = read_curve_csv(&path).unwrap();
        assert_eq!(back.kind, CurveKind::Ccf);
        assert_eq!(back.regime, "lambda0.3_fx6_fy8");
        assert_eq!(back.variant, "zero-order");
        assert_eq!(back.x, x);
        assert_eq!(back.values, v);
    }

    #[test]
    fn rejects_length_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let err = write_curve_csv(&dir.path().join("c.csv"), CurveKind::Pdf, "r", "full", &[0.0], &[]).unwrap_err();
        assert!(matches!(err, Error::GridMismatch(_)));
    }
}
