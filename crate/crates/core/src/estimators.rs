//! Point estimates and histograms from retained chain output.

use std::fmt::Write as _;
use std::path::Path;

use crate::distributions::GgdClassParams;
use crate::error::{Error, Result};
use crate::gibbs::{ChainOutput, ChainTraces, PosteriorAccumulators};
use crate::grid::{write_atomic, ImageGrid, LabelField};
use crate::metrics::best_permutation;

/// Marginal MAP labels and the number of pixels where the mode was tied
/// (resolved towards the smallest class).
pub fn map_labels(acc: &PosteriorAccumulators) -> Result<(LabelField, usize)> {
    if acc.is_empty() {
        return Err(Error::degenerate("no retained iterations"));
    }
    let (rows, cols) = acc.dims();
    let k = acc.k_classes();
    let mut ties = 0;
    let classes = (0..acc.len())
        .map(|n| {
            let mut best = 0;
            let mut tied = false;
            for c in 1..k {
                let (cc, cb) = (acc.class_count(n, c), acc.class_count(n, best));
                if cc > cb {
                    best = c;
                    tied = false;
                } else if cc == cb {
                    tied = true;
                }
            }
            ties += tied as usize;
            best
        })
        .collect();
    Ok((LabelField::new(rows, cols, k, classes)?, ties))
}

/// Per-pixel posterior mean of `x_n` over retained iterations with
/// `z_n = ẑ_n`.
///
/// A pixel whose MAP class was never visited is an error unless `lenient`,
/// in which case it takes the unconditioned mean; such pixels are returned.
pub fn mmse_reflectivity(
    acc: &PosteriorAccumulators,
    z_hat: &LabelField,
    lenient: bool,
) -> Result<(ImageGrid, Vec<usize>)> {
    if acc.is_empty() {
        return Err(Error::degenerate("no retained iterations"));
    }
    if z_hat.dims() != acc.dims() || z_hat.k_classes() != acc.k_classes() {
        return Err(Error::invalid(
            "label estimate does not match the accumulators",
        ));
    }
    let mut fallback = Vec::new();
    let data = (0..acc.len())
        .map(|n| {
            let k = z_hat.class(n);
            let c = acc.class_count(n, k);
            if c > 0 {
                acc.class_sum(n, k) / c as f64
            } else {
                fallback.push(n);
                acc.mean(n)
            }
        })
        .collect();
    if !fallback.is_empty() && !lenient {
        let shown: Vec<String> = fallback.iter().take(10).map(|p| p.to_string()).collect();
        return Err(Error::degenerate(format!(
            "{} pixels never visited their MAP class (first: {})",
            fallback.len(),
            shown.join(", ")
        )));
    }
    let (rows, cols) = acc.dims();
    Ok((ImageGrid::new(rows, cols, data)?, fallback))
}

/// Sample mean and `(n − 1)`-normalized standard deviation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarSummary {
    pub mean: f64,
    pub std: f64,
}

impl ScalarSummary {
    pub fn of(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::degenerate("empty trace"));
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Ok(Self { mean, std })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarEstimates {
    pub sigma2: ScalarSummary,
    pub shape: Vec<ScalarSummary>,
    pub scale: Vec<ScalarSummary>,
}

impl ScalarEstimates {
    /// MMSE class parameters.
    pub fn classes(&self) -> Result<Vec<GgdClassParams>> {
        self.shape
            .iter()
            .zip(&self.scale)
            .map(|(s, g)| GgdClassParams::new(s.mean, g.mean))
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("variable,mean,std\n");
        writeln!(
            s,
            "sigma2,{:.10e},{:.10e}",
            self.sigma2.mean, self.sigma2.std
        )
        .unwrap();
        for (k, v) in self.shape.iter().enumerate() {
            writeln!(s, "xi_{},{:.10e},{:.10e}", k + 1, v.mean, v.std).unwrap();
        }
        for (k, v) in self.scale.iter().enumerate() {
            writeln!(s, "gamma_{},{:.10e},{:.10e}", k + 1, v.mean, v.std).unwrap();
        }
        s
    }
}

/// MMSE scalar estimates pooled over the retained part of every trace.
pub fn mmse_scalars(traces: &[&ChainTraces]) -> Result<ScalarEstimates> {
    let first = traces
        .first()
        .ok_or_else(|| Error::degenerate("no traces"))?;
    let k = first.k_classes;
    let pool = |get: &dyn Fn(&ChainTraces) -> &[f64]| -> Result<ScalarSummary> {
        let v: Vec<f64> = traces
            .iter()
            .flat_map(|t| t.retained(get(t)).iter().copied())
            .collect();
        ScalarSummary::of(&v)
    };
    Ok(ScalarEstimates {
        sigma2: pool(&|t| &t.sigma2)?,
        shape: (0..k)
            .map(|c| pool(&|t| &t.shape[c]))
            .collect::<Result<_>>()?,
        scale: (0..k)
            .map(|c| pool(&|t| &t.scale[c]))
            .collect::<Result<_>>()?,
    })
}

/// Equal-width histogram over `[min, max]` of the data; the top edge is
/// included in the last bin.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("bin_lo,bin_hi,count\n");
        for (i, c) in self.counts.iter().enumerate() {
            writeln!(s, "{:.10e},{:.10e},{c}", self.edges[i], self.edges[i + 1]).unwrap();
        }
        s
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path.as_ref(), self.to_csv().as_bytes())
    }

    /// Index of the fullest bin (first on ties).
    pub fn mode_bin(&self) -> usize {
        let mut best = 0;
        for (i, &c) in self.counts.iter().enumerate() {
            if c > self.counts[best] {
                best = i;
            }
        }
        best
    }

    /// Bin holding `v`, clamped to the histogram range.
    pub fn bin_of(&self, v: f64) -> usize {
        let n = self.counts.len();
        let (lo, hi) = (self.edges[0], self.edges[n]);
        if hi <= lo {
            return 0;
        }
        (((v - lo) / (hi - lo) * n as f64).floor().max(0.0) as usize).min(n - 1)
    }
}

pub fn histogram(trace: &[f64], n_bins: usize) -> Result<Histogram> {
    if n_bins == 0 {
        return Err(Error::invalid("histogram needs at least one bin"));
    }
    if trace.is_empty() {
        return Err(Error::degenerate("empty trace"));
    }
    let lo = trace.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = trace.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = (hi - lo) / n_bins as f64;
    let edges: Vec<f64> = (0..=n_bins)
        .map(|i| {
            if i == n_bins {
                hi
            } else {
                lo + width * i as f64
            }
        })
        .collect();
    let mut h = Histogram {
        edges,
        counts: vec![0; n_bins],
    };
    for &v in trace {
        let b = h.bin_of(v);
        h.counts[b] += 1;
    }
    Ok(h)
}

/// Relabels chains `1..` so that their MAP labels best agree with chain 0.
/// Returns the permutation applied to each chain (identity for chain 0).
pub fn align_chains(outputs: &mut [ChainOutput]) -> Result<Vec<Vec<usize>>> {
    let Some(first) = outputs.first() else {
        return Ok(Vec::new());
    };
    let (reference, _) = map_labels(&first.accumulators)?;
    let k = reference.k_classes();
    let mut perms = vec![(0..k).collect::<Vec<_>>()];
    for out in outputs.iter_mut().skip(1) {
        let (z, _) = map_labels(&out.accumulators)?;
        let (perm, _) = best_permutation(&reference, &z)?;
        out.accumulators = out.accumulators.permuted(&perm);
        out.traces = out.traces.permuted(&perm);
        perms.push(perm);
    }
    Ok(perms)
}

/// Everything reported for a finished run.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorEstimates {
    pub x_hat: ImageGrid,
    pub z_hat: LabelField,
    pub scalars: ScalarEstimates,
    pub map_ties: usize,
    pub fallback_pixels: Vec<usize>,
}

/// Combines already aligned chains into point estimates.
pub fn estimate(outputs: &[ChainOutput], lenient: bool) -> Result<PosteriorEstimates> {
    let first = outputs
        .first()
        .ok_or_else(|| Error::degenerate("no chains"))?;
    let mut acc = first.accumulators.clone();
    for o in &outputs[1..] {
        acc.merge(&o.accumulators)?;
    }
    let (z_hat, map_ties) = map_labels(&acc)?;
    let (x_hat, fallback_pixels) = mmse_reflectivity(&acc, &z_hat, lenient)?;
    let traces: Vec<&ChainTraces> = outputs.iter().map(|o| &o.traces).collect();
    Ok(PosteriorEstimates {
        x_hat,
        z_hat,
        scalars: mmse_scalars(&traces)?,
        map_ties,
        fallback_pixels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn acc_from(draws: &[(&[f64], &[usize])], k: usize) -> PosteriorAccumulators {
        let n = draws[0].0.len();
        let mut a = PosteriorAccumulators::new(1, n, k);
        for (x, z) in draws {
            a.record(
                &ImageGrid::new(1, n, x.to_vec()).unwrap(),
                &LabelField::new(1, n, k, z.to_vec()).unwrap(),
            );
        }
        a
    }

    #[test]
    fn map_label_cases() {
        let mut draws: Vec<(&[f64], &[usize])> = vec![(&[0.0, 0.0], &[0, 0]); 10];
        for d in draws.iter_mut().take(5) {
            d.1 = &[0, 1];
        }
        let (z, ties) = map_labels(&acc_from(&draws, 2)).unwrap();
        assert_eq!(z.labels(), vec![1, 1]);
        assert_eq!(ties, 1);
        assert!(map_labels(&PosteriorAccumulators::new(1, 2, 2)).is_err());
    }

    #[test]
    fn conditional_mean_cases() {
        let a = acc_from(&[(&[1.0, 5.0], &[0, 0]), (&[3.0, 7.0], &[0, 1])], 2);
        let z = LabelField::new(1, 2, 2, vec![0, 1]).unwrap();
        let (x, fb) = mmse_reflectivity(&a, &z, false).unwrap();
        assert_eq!(x.as_slice(), &[2.0, 7.0]);
        assert!(fb.is_empty());

        let z = LabelField::new(1, 2, 2, vec![1, 0]).unwrap();
        assert!(mmse_reflectivity(&a, &z, false).is_err());
        let (x, fb) = mmse_reflectivity(&a, &z, true).unwrap();
        assert_eq!(fb, vec![0]);
        assert_eq!(x.as_slice(), &[2.0, 5.0]);
    }

    #[test]
    fn single_class_equals_running_mean() {
        let draws: Vec<Vec<f64>> = (0..7)
            .map(|i| vec![i as f64 * 0.3, -(i as f64).sqrt()])
            .collect();
        let z = [0usize, 0];
        let d: Vec<(&[f64], &[usize])> = draws.iter().map(|v| (v.as_slice(), &z[..])).collect();
        let a = acc_from(&d, 1);
        let (zh, _) = map_labels(&a).unwrap();
        let (x, _) = mmse_reflectivity(&a, &zh, false).unwrap();
        for n in 0..2 {
            let m = draws.iter().map(|v| v[n]).sum::<f64>() / 7.0;
            assert!((x.as_slice()[n] - m).abs() < 1e-12);
        }
    }

    #[test]
    fn estimates_invariant_under_class_permutation() {
        let a = acc_from(
            &[
                (&[1.0, 5.0, 2.0], &[0, 2, 1]),
                (&[3.0, 7.0, 1.0], &[0, 1, 1]),
            ],
            3,
        );
        let (z, _) = map_labels(&a).unwrap();
        let (x, _) = mmse_reflectivity(&a, &z, false).unwrap();
        let perm = [2, 0, 1];
        let ap = a.permuted(&perm);
        let zp = z.permuted(&perm);
        assert_eq!(mmse_reflectivity(&ap, &zp, false).unwrap().0, x);
    }

    #[test]
    fn scalar_summaries() {
        let s = ScalarSummary::of(&[4.0; 5]).unwrap();
        assert_eq!((s.mean, s.std), (4.0, 0.0));
        let s = ScalarSummary::of(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!((s.mean, s.std), (2.0, 1.0));
        assert!(ScalarSummary::of(&[]).is_err());

        let mut t = ChainTraces::new(1, 2);
        t.sigma2 = vec![100.0, 100.0, 1.0, 2.0, 3.0];
        t.shape = vec![vec![0.0, 0.0, 1.0, 1.0, 1.0]];
        t.scale = vec![vec![9.0; 5]];
        let e = mmse_scalars(&[&t]).unwrap();
        assert_eq!((e.sigma2.mean, e.sigma2.std), (2.0, 1.0));
        assert_eq!(e.shape[0].mean, 1.0);
        assert!(e.to_csv().starts_with("variable,mean,std\nsigma2,"));
    }

    #[test]
    fn histogram_cases() {
        let h = histogram(&[2.5; 7], 4).unwrap();
        assert_eq!(h.counts.iter().filter(|&&c| c > 0).count(), 1);
        assert_eq!(h.counts.iter().sum::<u64>(), 7);

        let v: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let h = histogram(&v, 10).unwrap();
        assert_eq!(h.counts, vec![10; 10]);
        assert_eq!(h.edges.len(), 11);
        assert_eq!(h.edges[10], 99.0);
        assert!(histogram(&[], 3).is_err());
        assert!(histogram(&v, 0).is_err());
        let csv = h.to_csv();
        assert_eq!(csv.lines().count(), 11);
        assert!(csv.starts_with("bin_lo,bin_hi,count\n"));
    }
}
