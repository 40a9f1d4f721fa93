//! Alignment and pairwise statistics over aligned channels.

use chrono::Duration;
use serde::{Deserialize, Serialize};

use super::series::AlignedSeries;
use super::IngestError;

/// Brings two series onto a common grid at the coarser resolution.
///
/// The finer series is averaged over each coarse bin, ignoring missing
/// samples. Bins that are entirely missing stay missing. Only bins that
/// overlap both inputs are kept.
pub fn align(a: &AlignedSeries, b: &AlignedSeries) -> Result<(AlignedSeries, AlignedSeries), IngestError> {
    let (fine, coarse, swapped) = if a.resolution_s() <= b.resolution_s() {
        (a, b, false)
    } else {
        (b, a, true)
    };
    let res = coarse.resolution_s();
    if res % fine.resolution_s() != 0 {
        return Err(IngestError::GridMismatch(format!(
            "resolution {} s is not a multiple of {} s",
            res,
            fine.resolution_s()
        )));
    }
    let step = Duration::seconds(res as i64);
    if fine.resolution_s() == res && (fine.start() - coarse.start()).num_seconds() % res as i64 != 0 {
        return Err(IngestError::GridMismatch(format!(
            "grids of {} and {} are out of phase",
            a.name(),
            b.name()
        )));
    }

    // Coarse bins k with [t_k, t_k + res) intersecting the fine span.
    let keep: Vec<usize> = (0..coarse.len())
        .filter(|&k| {
            let t = coarse.timestamp(k);
            t < fine.end() && t + step > fine.start()
        })
        .collect();
    let (Some(&k0), Some(&k1)) = (keep.first(), keep.last()) else {
        return Err(IngestError::EmptyOverlap);
    };
    let anchor = coarse.timestamp(k0);
    let bins = k1 - k0 + 1;
    let coarse_out = AlignedSeries::new(
        coarse.name(),
        coarse.unit(),
        anchor,
        res,
        coarse.values()[k0..=k1].to_vec(),
    )?;
    let fine_out = fine.rebin(anchor, res, bins)?;
    Ok(if swapped {
        (coarse_out, fine_out)
    } else {
        (fine_out, coarse_out)
    })
}

fn paired(a: &[Option<f64>], b: &[Option<f64>]) -> Vec<(f64, f64)> {
    a.iter().zip(b).filter_map(|(x, y)| Some(((*x)?, (*y)?))).collect()
}

fn check_grid(a: &AlignedSeries, b: &AlignedSeries) -> Result<(), IngestError> {
    if a.same_grid(b) {
        Ok(())
    } else {
        Err(IngestError::GridMismatch(format!(
            "{} and {} are not on the same grid; align them first",
            a.name(),
            b.name()
        )))
    }
}

/// Sample Pearson coefficient over pairwise-present samples.
pub fn pearson(a: &AlignedSeries, b: &AlignedSeries) -> Result<f64, IngestError> {
    check_grid(a, b)?;
    pearson_values(a.values(), b.values()).map_err(|e| match e {
        IngestError::ZeroVariance(_) => IngestError::ZeroVariance(format!("{} / {}", a.name(), b.name())),
        e => e,
    })
}

pub fn pearson_values(a: &[Option<f64>], b: &[Option<f64>]) -> Result<f64, IngestError> {
    let pairs = paired(a, b);
    if pairs.len() < 2 {
        return Err(IngestError::TooFewSamples {
            needed: 2,
            found: pairs.len(),
        });
    }
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for &(x, y) in &pairs {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(IngestError::ZeroVariance("pearson".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Ordinary least-squares line `y = slope * x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn linear_fit(x: &[Option<f64>], y: &[Option<f64>]) -> Result<LinearFit, IngestError> {
    let pairs = paired(x, y);
    if pairs.len() < 2 {
        return Err(IngestError::TooFewSamples {
            needed: 2,
            found: pairs.len(),
        });
    }
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pairs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pairs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(IngestError::ZeroVariance("linear fit regressor".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = pairs.iter().map(|p| (p.1 - my).powi(2)).sum();
    let ss_res: f64 = pairs.iter().map(|p| (p.1 - slope * p.0 - intercept).powi(2)).sum();
    let r_squared = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Ok(LinearFit {
        slope,
        intercept,
        r_squared,
    })
}

/// Histogram density estimate; integrates to one over `edges`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Density {
    pub edges: Vec<f64>,
    pub density: Vec<f64>,
}

/// Sturges-rule histogram normalised to unit area.
pub fn histogram_density(values: &[Option<f64>]) -> Result<Density, IngestError> {
    let xs: Vec<f64> = values.iter().flatten().copied().collect();
    if xs.is_empty() {
        return Err(IngestError::TooFewSamples { needed: 1, found: 0 });
    }
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let bins = ((xs.len() as f64).log2().ceil() as usize + 1).max(1);
    let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, hi + 0.5) };
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for x in &xs {
        let k = (((x - lo) / width) as usize).min(bins - 1);
        counts[k] += 1;
    }
    let n = xs.len() as f64;
    Ok(Density {
        edges: (0..=bins).map(|i| lo + width * i as f64).collect(),
        density: counts.iter().map(|&c| c as f64 / (n * width)).collect(),
    })
}

/// Regression of channel `row` (y) on channel `col` (x), `row > col`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairFit {
    pub row: usize,
    pub col: usize,
    pub fit: LinearFit,
}

/// Scatter-matrix summary as data: densities on the diagonal, linear fits
/// below it and Pearson coefficients above it (stored as a full symmetric
/// matrix).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub labels: Vec<String>,
    pub pearson: Vec<Vec<f64>>,
    pub fits: Vec<PairFit>,
    pub densities: Vec<Density>,
}

impl CorrelationReport {
    pub fn coefficient(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.labels.iter().position(|l| l == a)?;
        let j = self.labels.iter().position(|l| l == b)?;
        Some(self.pearson[i][j])
    }
}

pub fn bivariate_report(channels: &[AlignedSeries]) -> Result<CorrelationReport, IngestError> {
    if channels.len() < 2 {
        return Err(IngestError::TooFewChannels {
            needed: 2,
            found: channels.len(),
        });
    }
    let n = channels.len();
    let mut pearson_m = vec![vec![0.0; n]; n];
    let mut fits = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        pearson_m[i][i] = 1.0;
        for j in 0..i {
            let r = pearson(&channels[i], &channels[j])?;
            pearson_m[i][j] = r;
            pearson_m[j][i] = r;
            fits.push(PairFit {
                row: i,
                col: j,
                fit: linear_fit(channels[j].values(), channels[i].values())?,
            });
        }
    }
    let densities = channels
        .iter()
        .map(|c| histogram_density(c.values()))
        .collect::<Result<_, _>>()?;
    Ok(CorrelationReport {
        labels: channels.iter().map(|c| c.name().to_string()).collect(),
        pearson: pearson_m,
        fits,
        densities,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::Unit;
    use chrono::{DateTime, TimeZone, Utc};

    fn t0() -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2017, 8, 21, 18, 0, 0).unwrap()
    }

    fn series(name: &str, res: u32, v: Vec<Option<f64>>) -> AlignedSeries {
        AlignedSeries::new(name, Unit::Dimensionless, t0(), res, v).unwrap()
    }

    #[test]
    fn minute_vs_hour() {
        let fine = series("fine", 60, (0..60).map(|i| Some(i as f64)).collect());
        let coarse = series("coarse", 3600, vec![Some(7.0)]);
        let (f, c) = align(&fine, &coarse).unwrap();
        assert_eq!(f.len(), 1);
        assert_eq!(c.len(), 1);
        assert_eq!(f.resolution_s(), 3600);
        assert!((f.get(0).unwrap() - 29.5).abs() < 1e-12);
        assert_eq!(c.get(0), Some(7.0));
        // argument order is preserved
        let (c2, f2) = align(&coarse, &fine).unwrap();
        assert_eq!(c2.name(), "coarse");
        assert_eq!(f2.name(), "fine");
    }

    #[test]
    fn identical_series_unchanged() {
        let a = series("a", 60, vec![Some(1.0), None, Some(3.0)]);
        let (x, y) = align(&a, &a).unwrap();
        assert_eq!(x, a);
        assert_eq!(y, a);
    }

    #[test]
    fn all_missing_bin_stays_missing() {
        let mut v: Vec<Option<f64>> = vec![None; 60];
        v.extend((0..60).map(|_| Some(2.0)));
        let fine = series("fine", 60, v);
        let coarse = series("coarse", 3600, vec![Some(1.0), Some(1.0)]);
        let (f, _) = align(&fine, &coarse).unwrap();
        assert_eq!(f.values(), &[None, Some(2.0)]);
    }

    #[test]
    fn disjoint_ranges() {
        let a = series("a", 60, vec![Some(1.0)]);
        let b = AlignedSeries::new("b", Unit::Dimensionless, t0() + Duration::hours(5), 60, vec![Some(1.0)]).unwrap();
        assert!(matches!(align(&a, &b), Err(IngestError::EmptyOverlap)));
    }

    #[test]
    fn pearson_perfect() {
        let a: Vec<Option<f64>> = (0..20).map(|i| Some((i as f64).sin())).collect();
        let b: Vec<Option<f64>> = a.iter().map(|x| x.map(|x| 2.0 * x + 1.0)).collect();
        let c: Vec<Option<f64>> = a.iter().map(|x| x.map(|x| -x)).collect();
        assert!((pearson_values(&a, &b).unwrap() - 1.0).abs() < 1e-12);
        assert!((pearson_values(&a, &c).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn pearson_zero_variance() {
        let a = vec![Some(1.0), Some(1.0), Some(1.0)];
        let b = vec![Some(1.0), Some(2.0), Some(3.0)];
        assert!(matches!(pearson_values(&a, &b), Err(IngestError::ZeroVariance(_))));
    }

    #[test]
    fn pearson_uses_pairwise_deletion() {
        let a = vec![Some(1.0), None, Some(3.0), Some(4.0)];
        let b = vec![Some(2.0), Some(100.0), Some(6.0), None];
        assert!((pearson_values(&a, &b).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn planted_line() {
        let x: Vec<Option<f64>> = (0..30).map(|i| Some(i as f64 * 0.37 - 2.0)).collect();
        let y: Vec<Option<f64>> = x.iter().map(|v| v.map(|x| 3.0 * x + 2.0)).collect();
        let f = linear_fit(&x, &y).unwrap();
        assert!((f.slope - 3.0).abs() < 1e-9);
        assert!((f.intercept - 2.0).abs() < 1e-9);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn density_integrates_to_one() {
        let v: Vec<Option<f64>> = (0..100).map(|i| Some(((i * 37) % 101) as f64)).collect();
        let d = histogram_density(&v).unwrap();
        let area: f64 = d
            .density
            .iter()
            .zip(d.edges.windows(2))
            .map(|(p, e)| p * (e[1] - e[0]))
            .sum();
        assert!((area - 1.0).abs() < 1e-12);
    }

    #[test]
    fn six_channels_fifteen_pairs() {
        let chans: Vec<AlignedSeries> = (0..6)
            .map(|k| {
                series(
                    &format!("c{k}"),
                    60,
                    (0..50)
                        .map(|i| Some(((i * (k + 3)) as f64 * 0.7).sin() + i as f64 * 0.01 * k as f64))
                        .collect(),
                )
            })
            .collect();
        let rep = bivariate_report(&chans).unwrap();
        assert_eq!(rep.fits.len(), 15);
        assert_eq!(rep.densities.len(), 6);
        for i in 0..6 {
            assert_eq!(rep.pearson[i][i], 1.0);
            for j in 0..6 {
                assert_eq!(rep.pearson[i][j], rep.pearson[j][i]);
                assert!(rep.pearson[i][j].abs() <= 1.0);
            }
        }
        assert!(rep.fits.iter().all(|f| f.row > f.col));
    }

    #[test]
    fn report_needs_two_channels() {
        let a = series("a", 60, vec![Some(1.0), Some(2.0)]);
        assert!(matches!(
            bivariate_report(&[a]),
            Err(IngestError::TooFewChannels { .. })
        ));
    }
}
