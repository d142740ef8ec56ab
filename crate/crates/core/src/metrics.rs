//! Rate-distortion evaluation: PSNR, bits per point and Bjøntegaard delta
//! rate over cubic fits of `log10(bpp)` against PSNR.

use std::collections::HashMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pc_io::{Coord, PointCloud};

/// 8-bit attribute peak.
pub const PEAK_8BIT: f64 = 255.0;
/// Points required on each rate-distortion curve.
pub const MIN_RD_POINTS: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Psnr {
    Finite(f64),
    /// Zero mean squared error.
    Lossless,
}

impl Psnr {
    pub fn from_mse(mse: f64, peak: f64) -> Psnr {
        if mse == 0.0 {
            Psnr::Lossless
        } else {
            Psnr::Finite(10.0 * (peak * peak / mse).log10())
        }
    }

    /// `f64::INFINITY` for [`Psnr::Lossless`].
    pub fn db(self) -> f64 {
        match self {
            Psnr::Finite(v) => v,
            Psnr::Lossless => f64::INFINITY,
        }
    }

    pub fn is_lossless(self) -> bool {
        self == Psnr::Lossless
    }
}

impl fmt::Display for Psnr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Psnr::Finite(v) => write!(f, "{v:.4}"),
            Psnr::Lossless => f.write_str("inf"),
        }
    }
}

fn check_peak(peak: f64) -> Result<()> {
    if peak.is_finite() && peak > 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("PSNR peak {peak} must be positive")))
    }
}

pub fn mse(reference: &[f64], test: &[f64]) -> Result<f64> {
    if reference.len() != test.len() {
        return Err(Error::Shape(format!("{} reference values, {} test values", reference.len(), test.len())));
    }
    if reference.is_empty() {
        return Err(Error::Shape("PSNR of zero points".into()));
    }
    let total: f64 = reference.iter().zip(test).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(total / reference.len() as f64)
}

/// Index-aligned PSNR of one channel.
pub fn psnr(reference: &[f64], test: &[f64], peak: f64) -> Result<Psnr> {
    check_peak(peak)?;
    Ok(Psnr::from_mse(mse(reference, test)?, peak))
}

/// Per-channel PSNR of two clouds with identical geometry.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CloudPsnr {
    pub mse: [f64; 3],
    pub y: Psnr,
    pub u: Psnr,
    pub v: Psnr,
    /// PSNR of the 6:1:1-weighted mean squared error. A convenience figure.
    pub yuv_611: Psnr,
}

/// Matches points by exact coordinate, then compares attributes.
pub fn cloud_psnr(reference: &PointCloud, test: &PointCloud, peak: f64) -> Result<CloudPsnr> {
    check_peak(peak)?;
    if !reference.has_attributes() || !test.has_attributes() {
        return Err(Error::InvalidCloud("PSNR needs attributes on both clouds".into()));
    }
    if reference.len() != test.len() {
        return Err(Error::Shape(format!("{} reference points, {} test points", reference.len(), test.len())));
    }
    if reference.is_empty() {
        return Err(Error::Shape("PSNR of zero points".into()));
    }
    let index: HashMap<Coord, usize> = test.coords().iter().enumerate().map(|(i, &c)| (c, i)).collect();
    let mut sums = [0.0; 3];
    for (c, a) in reference.coords().iter().zip(reference.attrs()) {
        let Some(&j) = index.get(c) else {
            return Err(Error::Shape(format!("reference point {c:?} missing from the test cloud")));
        };
        let b = test.attrs()[j];
        for ch in 0..3 {
            sums[ch] += (a[ch] - b[ch]) * (a[ch] - b[ch]);
        }
    }
    let n = reference.len() as f64;
    let mse = sums.map(|s| s / n);
    let weighted = (6.0 * mse[0] + mse[1] + mse[2]) / 8.0;
    Ok(CloudPsnr {
        mse,
        y: Psnr::from_mse(mse[0], peak),
        u: Psnr::from_mse(mse[1], peak),
        v: Psnr::from_mse(mse[2], peak),
        yuv_611: Psnr::from_mse(weighted, peak),
    })
}

pub fn bpp(total_bits: u64, point_count: u64) -> Result<f64> {
    if point_count == 0 {
        return Err(Error::Shape("bits per point of zero points".into()));
    }
    Ok(total_bits as f64 / point_count as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RdPoint {
    pub bpp: f64,
    pub psnr: f64,
}

impl RdPoint {
    pub fn new(bpp: f64, psnr: f64) -> Result<Self> {
        if !(bpp.is_finite() && bpp > 0.0) {
            return Err(Error::Config(format!("rate {bpp} bpp must be positive")));
        }
        if !psnr.is_finite() {
            return Err(Error::Config(format!("PSNR {psnr} cannot enter a curve fit")));
        }
        Ok(Self { bpp, psnr })
    }
}

/// At least four points with strictly increasing rate.
#[derive(Clone, Debug, PartialEq)]
pub struct RdCurve {
    points: Vec<RdPoint>,
}

impl RdCurve {
    /// Sorts by rate; rejects repeated rates.
    pub fn new(mut points: Vec<RdPoint>) -> Result<Self> {
        for p in &points {
            RdPoint::new(p.bpp, p.psnr)?;
        }
        if points.len() < MIN_RD_POINTS {
            return Err(Error::Config(format!(
                "rate-distortion curve has {} points, need {MIN_RD_POINTS}",
                points.len()
            )));
        }
        points.sort_by(|a, b| a.bpp.total_cmp(&b.bpp));
        if points.windows(2).any(|w| w[0].bpp == w[1].bpp) {
            return Err(Error::Config("rate-distortion curve repeats a rate".into()));
        }
        Ok(Self { points })
    }

    pub fn from_pairs(pairs: &[(f64, f64)]) -> Result<Self> {
        Self::new(pairs.iter().map(|&(bpp, psnr)| RdPoint { bpp, psnr }).collect())
    }

    pub fn points(&self) -> &[RdPoint] {
        &self.points
    }

    pub fn psnr_range(&self) -> (f64, f64) {
        let lo = self.points.iter().map(|p| p.psnr).fold(f64::INFINITY, f64::min);
        let hi = self.points.iter().map(|p| p.psnr).fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }

    /// Every rate multiplied by `factor`.
    pub fn scale_rates(&self, factor: f64) -> Result<Self> {
        Self::new(self.points.iter().map(|p| RdPoint { bpp: p.bpp * factor, psnr: p.psnr }).collect())
    }
}

/// Reads `bpp,psnr` rows.
pub fn read_rd_csv_from<R: Read>(reader: R) -> Result<RdCurve> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers().map_err(|e| Error::Csv(e.to_string()))?.clone();
    if header.len() != 2 || &header[0] != "bpp" || &header[1] != "psnr" {
        return Err(Error::Csv(format!(
            "expected header `bpp,psnr`, found `{}`",
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut points = Vec::new();
    for row in rdr.deserialize::<RdPoint>() {
        points.push(row.map_err(|e| Error::Csv(e.to_string()))?);
    }
    RdCurve::new(points)
}

pub fn read_rd_csv(path: impl AsRef<Path>) -> Result<RdCurve> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_rd_csv_from(file)
}

pub fn write_rd_csv_to<W: Write>(curve: &RdCurve, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for p in curve.points() {
        w.serialize(p).map_err(|e| Error::Csv(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::Csv(e.to_string()))
}

pub fn write_rd_csv(curve: &RdCurve, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_rd_csv_to(curve, file)
}

/// Least-squares cubic in a centred, scaled variable `t = (x − shift) / scale`.
#[derive(Clone, Copy, Debug)]
struct Cubic {
    coeffs: [f64; 4],
    shift: f64,
    scale: f64,
}

impl Cubic {
    fn fit(xs: &[f64], ys: &[f64]) -> Result<Self> {
        let n = xs.len() as f64;
        let shift = xs.iter().sum::<f64>() / n;
        let scale = xs.iter().map(|x| (x - shift).abs()).fold(0.0, f64::max);
        if scale == 0.0 {
            return Err(Error::Numeric("all PSNR values are equal".into()));
        }
        let mut a = [[0.0; 5]; 4];
        for (&x, &y) in xs.iter().zip(ys) {
            let t = (x - shift) / scale;
            let pow = [1.0, t, t * t, t * t * t];
            for r in 0..4 {
                for c in 0..4 {
                    a[r][c] += pow[r] * pow[c];
                }
                a[r][4] += pow[r] * y;
            }
        }
        let coeffs = solve4(a)?;
        Ok(Self { coeffs, shift, scale })
    }

    /// Antiderivative in `t`, evaluated at `x`.
    fn primitive(&self, x: f64) -> f64 {
        let t = (x - self.shift) / self.scale;
        let c = self.coeffs;
        t * (c[0] + t * (c[1] / 2.0 + t * (c[2] / 3.0 + t * c[3] / 4.0)))
    }

    fn integral(&self, lo: f64, hi: f64) -> f64 {
        (self.primitive(hi) - self.primitive(lo)) * self.scale
    }
}

/// Gaussian elimination with partial pivoting on an augmented 4×5 system.
fn solve4(mut a: [[f64; 5]; 4]) -> Result<[f64; 4]> {
    for col in 0..4 {
        let pivot = (col..4).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        if a[pivot][col].abs() < 1e-12 {
            return Err(Error::Numeric("singular cubic fit; need four distinct PSNR values".into()));
        }
        a.swap(col, pivot);
        for r in col + 1..4 {
            let f = a[r][col] / a[col][col];
            for c in col..5 {
                a[r][c] -= f * a[col][c];
            }
        }
    }
    let mut x = [0.0; 4];
    for r in (0..4).rev() {
        let s: f64 = (r + 1..4).map(|c| a[r][c] * x[c]).sum();
        x[r] = (a[r][4] - s) / a[r][r];
    }
    Ok(x)
}

fn log_rate_fit(curve: &RdCurve) -> Result<Cubic> {
    let xs: Vec<f64> = curve.points().iter().map(|p| p.psnr).collect();
    let ys: Vec<f64> = curve.points().iter().map(|p| p.bpp.log10()).collect();
    Cubic::fit(&xs, &ys)
}

/// Average rate difference of `test` against `anchor` at equal PSNR, in
/// percent. Negative means `test` needs fewer bits.
pub fn bd_rate(anchor: &RdCurve, test: &RdCurve) -> Result<f64> {
    let (a_lo, a_hi) = anchor.psnr_range();
    let (t_lo, t_hi) = test.psnr_range();
    let (lo, hi) = (a_lo.max(t_lo), a_hi.min(t_hi));
    if !(hi > lo) {
        return Err(Error::Numeric(format!("PSNR ranges [{a_lo}, {a_hi}] and [{t_lo}, {t_hi}] do not overlap")));
    }
    let fa = log_rate_fit(anchor)?;
    let ft = log_rate_fit(test)?;
    let delta = (ft.integral(lo, hi) - fa.integral(lo, hi)) / (hi - lo);
    Ok((10f64.powf(delta) - 1.0) * 100.0)
}

/// `(6·Y + U + V) / 8` of per-channel BD-rates. A convenience figure.
pub fn weighted_bd_rate(per_channel: [f64; 3]) -> f64 {
    (6.0 * per_channel[0] + per_channel[1] + per_channel[2]) / 8.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn anchor() -> RdCurve {
        RdCurve::from_pairs(&[(0.12, 28.4), (0.31, 31.9), (0.74, 35.2), (1.63, 38.1)]).unwrap()
    }

    /// Lagrange interpolation through four points, integrated with composite
    /// Simpson; exact for cubics up to rounding.
    fn oracle_bd_rate(a: &RdCurve, t: &RdCurve) -> f64 {
        fn lagrange(pts: &[(f64, f64)], x: f64) -> f64 {
            let mut total = 0.0;
            for (i, &(xi, yi)) in pts.iter().enumerate() {
                let mut term = yi;
                for (j, &(xj, _)) in pts.iter().enumerate() {
                    if i != j {
                        term *= (x - xj) / (xi - xj);
                    }
                }
                total += term;
            }
            total
        }
        let pa: Vec<(f64, f64)> = a.points().iter().map(|p| (p.psnr, p.bpp.log10())).collect();
        let pt: Vec<(f64, f64)> = t.points().iter().map(|p| (p.psnr, p.bpp.log10())).collect();
        let lo = a.psnr_range().0.max(t.psnr_range().0);
        let hi = a.psnr_range().1.min(t.psnr_range().1);
        let n = 2000;
        let h = (hi - lo) / n as f64;
        let mut s = 0.0;
        for k in 0..=n {
            let x = lo + k as f64 * h;
            let w = if k == 0 || k == n {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            };
            s += w * (lagrange(&pt, x) - lagrange(&pa, x));
        }
        let avg = s * h / 3.0 / (hi - lo);
        (10f64.powf(avg) - 1.0) * 100.0
    }

    #[test]
    fn psnr_of_unit_mse() {
        let p = psnr(&[0.0, 0.0], &[1.0, -1.0], PEAK_8BIT).unwrap();
        assert!((p.db() - 20.0 * 255f64.log10()).abs() < 1e-12);
        assert!((p.db() - 48.1308).abs() < 1e-3);
    }

    #[test]
    fn psnr_sentinels() {
        let same = psnr(&[3.0, 4.0], &[3.0, 4.0], PEAK_8BIT).unwrap();
        assert_eq!(same, Psnr::Lossless);
        assert_eq!(same.to_string(), "inf");
        let full = psnr(&[0.0; 3], &[255.0; 3], PEAK_8BIT).unwrap();
        assert!(full.db().abs() < 1e-12);
        assert!(psnr(&[], &[], PEAK_8BIT).is_err());
        assert!(psnr(&[1.0], &[1.0, 2.0], PEAK_8BIT).is_err());
        assert!(psnr(&[1.0], &[1.0], 0.0).is_err());
    }

    #[test]
    fn cloud_psnr_matches_by_coordinate() {
        let a =
            PointCloud::new(vec![[0, 0, 0], [1, 0, 0]], vec![[10.0, 128.0, 128.0], [20.0, 128.0, 128.0]], 2).unwrap();
        let b =
            PointCloud::new(vec![[1, 0, 0], [0, 0, 0]], vec![[21.0, 128.0, 128.0], [9.0, 128.0, 130.0]], 2).unwrap();
        let r = cloud_psnr(&a, &b, PEAK_8BIT).unwrap();
        assert_eq!(r.mse, [1.0, 0.0, 2.0]);
        assert!((r.y.db() - 48.1308).abs() < 1e-3);
        assert!(r.u.is_lossless());
        let c = PointCloud::new(vec![[1, 1, 0], [0, 0, 0]], vec![[0.0; 3]; 2], 2).unwrap();
        assert!(cloud_psnr(&a, &c, PEAK_8BIT).is_err());
        assert!(cloud_psnr(&a, &a, PEAK_8BIT).unwrap().yuv_611.is_lossless());
    }

    #[test]
    fn bits_per_point() {
        assert_eq!(bpp(1000, 1000).unwrap(), 1.0);
        assert_eq!(bpp(0, 7).unwrap(), 0.0);
        assert!(bpp(8, 0).is_err());
    }

    #[test]
    fn curve_validation() {
        assert!(RdCurve::from_pairs(&[(1.0, 30.0), (2.0, 31.0), (3.0, 32.0)]).is_err());
        assert!(RdCurve::from_pairs(&[(1.0, 30.0), (1.0, 31.0), (3.0, 32.0), (4.0, 33.0)]).is_err());
        assert!(RdCurve::from_pairs(&[(0.0, 30.0), (1.0, 31.0), (3.0, 32.0), (4.0, 33.0)]).is_err());
        let c = RdCurve::from_pairs(&[(4.0, 33.0), (1.0, 30.0), (3.0, 32.0), (2.0, 31.0)]).unwrap();
        assert_eq!(c.points()[0].bpp, 1.0);
    }

    #[test]
    fn bd_rate_identity_and_halving() {
        let a = anchor();
        assert!(bd_rate(&a, &a).unwrap().abs() < 1e-9);
        let half = a.scale_rates(0.5).unwrap();
        assert!((bd_rate(&a, &half).unwrap() + 50.0).abs() < 1e-6);
        assert!((bd_rate(&half, &a).unwrap() - 100.0).abs() < 1e-6);
    }

    #[test]
    fn bd_rate_matches_oracle() {
        let a = anchor();
        let t = RdCurve::from_pairs(&[(0.10, 28.9), (0.27, 32.6), (0.61, 35.5), (1.40, 38.9)]).unwrap();
        let ours = bd_rate(&a, &t).unwrap();
        let oracle = oracle_bd_rate(&a, &t);
        assert!(ours < 0.0);
        assert!(((ours - oracle) / oracle).abs() < 1e-4, "{ours} vs {oracle}");
    }

    #[test]
    fn bd_rate_errors() {
        let a = anchor();
        let far = RdCurve::from_pairs(&[(1.0, 50.0), (2.0, 52.0), (3.0, 54.0), (4.0, 56.0)]).unwrap();
        assert!(matches!(bd_rate(&a, &far), Err(Error::Numeric(_))));
    }

    #[test]
    fn csv_round_trip() {
        let mut buf = Vec::new();
        write_rd_csv_to(&anchor(), &mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("bpp,psnr\n"));
        assert_eq!(read_rd_csv_from(&buf[..]).unwrap(), anchor());
        assert!(matches!(read_rd_csv_from(&b"rate,db\n1,2\n"[..]), Err(Error::Csv(_))));
        assert!(matches!(read_rd_csv_from(&b"bpp,psnr\n1,x\n"[..]), Err(Error::Csv(_))));
    }

    fn monotone_curve() -> impl Strategy<Value = RdCurve> {
        (0.05f64..0.5, prop::collection::vec(1.3f64..2.5, 4), 25.0f64..30.0, prop::collection::vec(1.0f64..4.0, 4))
            .prop_map(|(r0, ratios, p0, steps)| {
                let mut pts = Vec::new();
                let (mut r, mut p) = (r0, p0);
                for i in 0..4 {
                    pts.push((r, p));
                    r *= ratios[i];
                    p += steps[i];
                }
                RdCurve::from_pairs(&pts).unwrap()
            })
    }

    proptest! {
        #[test]
        fn shift_exactness(c in monotone_curve(), s in 0.2f64..5.0) {
            let shifted = c.scale_rates(s).unwrap();
            prop_assert!((bd_rate(&shifted, &c).unwrap() - (1.0 / s - 1.0) * 100.0).abs() < 1e-6);
        }

        #[test]
        fn antisymmetry(a in monotone_curve(), b in monotone_curve()) {
            if let (Ok(ab), Ok(ba)) = (bd_rate(&a, &b), bd_rate(&b, &a)) {
                prop_assert!(((1.0 + ab / 100.0) * (1.0 + ba / 100.0) - 1.0).abs() < 1e-3);
            }
        }

        #[test]
        fn psnr_decreases_with_mse(m in 1e-6f64..1e4, k in 1.0001f64..10.0) {
            prop_assert!(Psnr::from_mse(m * k, PEAK_8BIT).db() < Psnr::from_mse(m, PEAK_8BIT).db());
        }
    }
}
