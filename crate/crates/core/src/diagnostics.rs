//! Potential scale reduction factor over parallel chains.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::gibbs::ChainTraces;

/// Convergence threshold on the PSRF.
pub const PSRF_THRESHOLD: f64 = 1.2;

/// `(M−1)/M + (C+1)/(C·M) · B/W` for `C` chains of `M` draws each, with
/// `B = M/(C−1) Σ_c (v̄ − v̄_c)²` and `W` the mean within-chain variance.
pub fn psrf(chains: &[&[f64]]) -> Result<f64> {
    let c = chains.len();
    if c < 2 {
        return Err(Error::invalid("PSRF needs at least two chains"));
    }
    let m = chains[0].len();
    if m < 2 {
        return Err(Error::invalid("PSRF needs at least two draws per chain"));
    }
    if chains.iter().any(|ch| ch.len() != m) {
        return Err(Error::invalid("PSRF chains must have equal length"));
    }
    let (cf, mf) = (c as f64, m as f64);
    let means: Vec<f64> = chains
        .iter()
        .map(|ch| ch.iter().sum::<f64>() / mf)
        .collect();
    let grand = means.iter().sum::<f64>() / cf;
    let b = mf / (cf - 1.0) * means.iter().map(|v| (grand - v) * (grand - v)).sum::<f64>();
    let w = chains
        .iter()
        .zip(&means)
        .map(|(ch, mu)| ch.iter().map(|v| (mu - v) * (mu - v)).sum::<f64>() / (mf - 1.0))
        .sum::<f64>()
        / cf;
    if !(w > 0.0) {
        return Err(Error::degenerate("within-chain variance is zero"));
    }
    Ok((mf - 1.0) / mf + (cf + 1.0) / (cf * mf) * b / w)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsrfRow {
    pub variable: String,
    /// `None` when the traces are degenerate (constant within every chain).
    pub psrf: Option<f64>,
}

impl PsrfRow {
    pub fn passes(&self) -> bool {
        self.psrf.is_some_and(|v| v < PSRF_THRESHOLD)
    }
}

/// PSRF of the noise variance, every class shape and scale, and `U(x)`,
/// over the retained part of each chain. Chains must share class labels.
pub fn psrf_report(traces: &[&ChainTraces]) -> Result<Vec<PsrfRow>> {
    let first = traces.first().ok_or_else(|| Error::invalid("no chains"))?;
    let k = first.k_classes;
    let row = |name: String, get: &dyn Fn(&ChainTraces) -> &[f64]| -> Result<PsrfRow> {
        let ch: Vec<&[f64]> = traces.iter().map(|t| t.retained(get(t))).collect();
        match psrf(&ch) {
            Ok(v) => Ok(PsrfRow {
                variable: name,
                psrf: Some(v),
            }),
            Err(Error::Degenerate(_)) => Ok(PsrfRow {
                variable: name,
                psrf: None,
            }),
            Err(e) => Err(e),
        }
    };
    let mut rows = vec![row("sigma2".into(), &|t| &t.sigma2)?];
    for c in 0..k {
        rows.push(row(format!("xi_{}", c + 1), &|t| &t.shape[c])?);
    }
    for c in 0..k {
        rows.push(row(format!("gamma_{}", c + 1), &|t| &t.scale[c])?);
    }
    rows.push(row("potential".into(), &|t| &t.potential)?);
    Ok(rows)
}

/// `variable,psrf,pass` lines; degenerate rows print `nan` and fail.
pub fn psrf_csv(rows: &[PsrfRow]) -> String {
    let mut s = String::from("variable,psrf,pass\n");
    for r in rows {
        let v = r.psrf.map_or("nan".to_string(), |v| format!("{v:.6}"));
        writeln!(
            s,
            "{},{},{}",
            r.variable,
            v,
            if r.passes() { "pass" } else { "fail" }
        )
        .unwrap();
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{standard_normal, RngStream};
    use proptest::prelude::*;

    #[test]
    fn hand_example() {
        let v = psrf(&[&[0.0, 2.0], &[10.0, 12.0]]).unwrap();
        assert!((v - 38.0).abs() < 1e-12, "{v}");
    }

    #[test]
    fn identical_chains_give_floor() {
        let a = [1.0, 3.0, 2.0, 5.0];
        let v = psrf(&[&a, &a, &a]).unwrap();
        assert!((v - 0.75).abs() < 1e-15);
    }

    #[test]
    fn iid_chains_near_one() {
        let mut rng = RngStream::new(1, 0);
        let chains: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..10_000).map(|_| standard_normal(&mut rng)).collect())
            .collect();
        let refs: Vec<&[f64]> = chains.iter().map(|c| c.as_slice()).collect();
        let v = psrf(&refs).unwrap();
        assert!(v > 0.99 && v < 1.05, "{v}");
    }

    #[test]
    fn invalid_inputs() {
        assert!(psrf(&[&[1.0, 2.0]]).is_err());
        assert!(psrf(&[&[1.0], &[2.0]]).is_err());
        assert!(psrf(&[&[1.0, 2.0], &[1.0, 2.0, 3.0]]).is_err());
        assert!(matches!(
            psrf(&[&[1.0, 1.0], &[2.0, 2.0]]),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn report_rows() {
        let mut t = ChainTraces::new(2, 1);
        t.sigma2 = vec![9.0, 1.0, 2.0, 3.0];
        t.shape = vec![vec![1.0, 1.0, 2.0, 1.5], vec![0.5; 4]];
        t.scale = vec![vec![1.0, 2.0, 3.0, 4.0], vec![2.0, 1.0, 2.0, 3.0]];
        t.potential = vec![5.0, 6.0, 7.0, 5.0];
        let rows = psrf_report(&[&t, &t]).unwrap();
        let names: Vec<&str> = rows.iter().map(|r| r.variable.as_str()).collect();
        assert_eq!(
            names,
            ["sigma2", "xi_1", "xi_2", "gamma_1", "gamma_2", "potential"]
        );
        assert!(rows[0].passes());
        assert_eq!(rows[2].psrf, None);
        assert!(!rows[2].passes());
        let csv = psrf_csv(&rows);
        assert!(csv.contains("xi_2,nan,fail"));
    }

    proptest! {
        #[test]
        fn affine_invariance_and_floor(
            v in proptest::collection::vec(-10.0f64..10.0, 12),
            a in prop_oneof![-5.0f64..-0.1, 0.1f64..5.0],
            b in -10.0f64..10.0,
        ) {
            let c: Vec<&[f64]> = v.chunks(4).collect();
            let Ok(base) = psrf(&c) else { return Ok(()); };
            prop_assert!(base >= 0.75 - 1e-12);
            let t: Vec<Vec<f64>> = c.iter().map(|ch| ch.iter().map(|x| a * x + b).collect()).collect();
            let tr: Vec<&[f64]> = t.iter().map(|x| x.as_slice()).collect();
            let after = psrf(&tr).unwrap();
            prop_assert!((base - after).abs() < 1e-8 * base.max(1.0));
        }
    }
}
