use serde::Serialize;

use super::aggregate::SexTotals;
use crate::error::{Result, SrbError};

const CONTINUITY: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JackknifeEstimate {
    pub log_se: f64,
    /// Number of leave-one-out replicates that needed the 0.5 continuity correction.
    pub corrections: usize,
}

/// Delete-one-cluster jackknife standard error of the log sex ratio.
///
/// Pseudo-values `v_i = k log r - (k - 1) log r_(-i)`; the result is
/// `sqrt(sum (v_i - mean v)^2 / (k (k - 1)))`. Empty clusters are ignored.
pub fn jackknife_log_se(clusters: &[SexTotals]) -> Result<JackknifeEstimate> {
    let clusters: Vec<SexTotals> = clusters
        .iter()
        .copied()
        .filter(|c| c.male + c.female > 0.0)
        .collect();
    let usable = clusters.iter().filter(|c| c.female > 0.0).count();
    if usable < 2 {
        return Err(SrbError::TooFewClusters { usable });
    }

    let mut total = SexTotals::default();
    for c in &clusters {
        total.add(*c);
    }
    if !(total.male > 0.0) {
        return Err(SrbError::Invalid(
            "jackknife needs at least one male birth".into(),
        ));
    }
    let log_r = (total.male / total.female).ln();
    let k = clusters.len() as f64;

    let mut corrections = 0;
    let pseudo: Vec<f64> = clusters
        .iter()
        .map(|c| {
            let mut male = total.male - c.male;
            let mut female = total.female - c.female;
            if !(male > 0.0 && female > 0.0) {
                male = male.max(0.0) + CONTINUITY;
                female = female.max(0.0) + CONTINUITY;
                corrections += 1;
            }
            k * log_r - (k - 1.0) * (male / female).ln()
        })
        .collect();

    let mean = pseudo.iter().sum::<f64>() / k;
    let ss: f64 = pseudo.iter().map(|v| (v - mean).powi(2)).sum();
    Ok(JackknifeEstimate {
        log_se: (ss / (k * (k - 1.0))).sqrt(),
        corrections,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Leave-one-out by explicit enumeration of the reduced samples.
    fn brute_force(clusters: &[SexTotals]) -> f64 {
        let k = clusters.len();
        let full: f64 = {
            let m: f64 = clusters.iter().map(|c| c.male).sum();
            let f: f64 = clusters.iter().map(|c| c.female).sum();
            (m / f).ln()
        };
        let loo: Vec<f64> = (0..k)
            .map(|skip| {
                let kept: Vec<&SexTotals> = clusters
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| *i != skip)
                    .map(|(_, c)| c)
                    .collect();
                let m: f64 = kept.iter().map(|c| c.male).sum();
                let f: f64 = kept.iter().map(|c| c.female).sum();
                (m / f).ln()
            })
            .collect();
        let kf = k as f64;
        let pv: Vec<f64> = loo.iter().map(|l| kf * full - (kf - 1.0) * l).collect();
        let mean = pv.iter().sum::<f64>() / kf;
        (pv.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (kf * (kf - 1.0))).sqrt()
    }

    #[test]
    fn identical_clusters_have_zero_se() {
        let c = vec![SexTotals::new(10.0, 9.0); 5];
        assert!(jackknife_log_se(&c).unwrap().log_se.abs() < 1e-12);
    }

    #[test]
    fn two_cluster_hand_example() {
        let c = [SexTotals::new(10.0, 10.0), SexTotals::new(20.0, 10.0)];
        let se = jackknife_log_se(&c).unwrap().log_se;
        assert!((se - brute_force(&c)).abs() < 1e-15);
        // log r_(-A) = ln 2, log r_(-B) = 0, so the pseudo-values differ by ln 2.
        assert!((se - std::f64::consts::LN_2 / 2.0).abs() < 1e-12);
    }

    #[test]
    fn too_few_clusters() {
        let err = jackknife_log_se(&[SexTotals::new(3.0, 2.0), SexTotals::new(1.0, 0.0)]);
        assert!(matches!(err, Err(SrbError::TooFewClusters { usable: 1 })));
    }

    #[test]
    fn continuity_correction_counted() {
        // Dropping the only male-bearing cluster leaves zero males.
        let c = [
            SexTotals::new(4.0, 2.0),
            SexTotals::new(0.0, 3.0),
            SexTotals::new(0.0, 1.0),
        ];
        let est = jackknife_log_se(&c).unwrap();
        assert_eq!(est.corrections, 1);
        assert!(est.log_se.is_finite() && est.log_se > 0.0);
    }

    #[test]
    fn srs_of_single_births_close_to_delta_method() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = 1.05 / 2.05;
        let clusters: Vec<SexTotals> = (0..200)
            .map(|_| {
                if rng.random::<f64>() < p {
                    SexTotals::new(1.0, 0.0)
                } else {
                    SexTotals::new(0.0, 1.0)
                }
            })
            .collect();
        let m: f64 = clusters.iter().map(|c| c.male).sum();
        let r = m / (200.0 - m);
        let delta = ((1.0 + r).powi(2) / (200.0 * r)).sqrt();
        let se = jackknife_log_se(&clusters).unwrap().log_se;
        assert!((se / delta - 1.0).abs() < 0.10, "se {se} delta {delta}");
    }

    proptest::proptest! {
        #[test]
        fn permutation_invariant(
            cells in proptest::collection::vec((0u32..40, 1u32..40), 2..30),
            seed in 0u64..1000,
        ) {
            use rand::seq::SliceRandom;
            let clusters: Vec<SexTotals> = cells
                .iter()
                .map(|(m, f)| SexTotals::new(*m as f64, *f as f64))
                .collect();
            let mut shuffled = clusters.clone();
            shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let a = jackknife_log_se(&clusters);
            let b = jackknife_log_se(&shuffled);
            match (a, b) {
                (Ok(a), Ok(b)) => proptest::prop_assert!((a.log_se - b.log_se).abs() <= 1e-12 * (1.0 + a.log_se)),
                (Err(_), Err(_)) => {}
                _ => proptest::prop_assert!(false, "inconsistent outcome"),
            }
        }
    }
}
