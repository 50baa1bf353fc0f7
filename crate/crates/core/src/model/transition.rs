use serde::{Deserialize, Serialize};

/// Shape of one region's sex ratio transition: onset year, the lengths of the
/// increase, stagnation and convergence phases, and the maximum inflation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionParams {
    pub gamma: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub xi: f64,
}

/// Sampler coordinates: `[gamma, ln lambda1, ln lambda2, ln lambda3, ln xi]`.
pub type Unconstrained = [f64; 5];

impl TransitionParams {
    pub fn is_valid(&self) -> bool {
        self.gamma.is_finite()
            && [self.lambda1, self.lambda2, self.lambda3, self.xi]
                .iter()
                .all(|v| *v > 0.0 && v.is_finite())
    }

    pub fn to_unconstrained(&self) -> Unconstrained {
        [
            self.gamma,
            self.lambda1.ln(),
            self.lambda2.ln(),
            self.lambda3.ln(),
            self.xi.ln(),
        ]
    }

    pub fn from_unconstrained(u: &Unconstrained) -> Self {
        TransitionParams {
            gamma: u[0],
            lambda1: u[1].exp(),
            lambda2: u[2].exp(),
            lambda3: u[3].exp(),
            xi: u[4].exp(),
        }
    }

    /// Positive shape parameters in hierarchy order (lambda1, lambda2, lambda3, xi).
    pub fn shapes(&self) -> [f64; 4] {
        [self.lambda1, self.lambda2, self.lambda3, self.xi]
    }

    /// Year after which the transition is over.
    pub fn end_year(&self) -> f64 {
        self.gamma + self.lambda1 + self.lambda2 + self.lambda3
    }
}

/// Trapezoid inflation at year `t`: zero before onset, linear rise over
/// `lambda1`, plateau at `xi` for `lambda2`, linear fall over `lambda3`.
pub fn trapezoid_alpha(t: f64, tp: &TransitionParams) -> f64 {
    let s = t - tp.gamma;
    let rise_end = tp.lambda1;
    let plateau_end = rise_end + tp.lambda2;
    let fall_end = plateau_end + tp.lambda3;
    let ramp = if s <= 0.0 || s >= fall_end {
        0.0
    } else if s < rise_end {
        s / tp.lambda1
    } else if s <= plateau_end {
        1.0
    } else {
        1.0 - (s - plateau_end) / tp.lambda3
    };
    tp.xi * ramp.clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tp() -> TransitionParams {
        TransitionParams {
            gamma: 2001.0,
            lambda1: 10.0,
            lambda2: 5.0,
            lambda3: 10.0,
            xi: 0.06,
        }
    }

    #[test]
    fn hand_values() {
        let p = tp();
        assert_eq!(trapezoid_alpha(p.gamma - 5.0, &p), 0.0);
        assert_eq!(trapezoid_alpha(p.gamma + p.lambda1, &p), 0.06);
        assert!((trapezoid_alpha(2006.0, &p) - 0.03).abs() < 1e-15);
        assert!((trapezoid_alpha(2021.0, &p) - 0.03).abs() < 1e-15);
        assert_eq!(trapezoid_alpha(2026.0, &p), 0.0);
        assert_eq!(trapezoid_alpha(2030.0, &p), 0.0);
    }

    #[test]
    fn unconstrained_round_trip() {
        let p = tp();
        let q = TransitionParams::from_unconstrained(&p.to_unconstrained());
        assert!((q.lambda1 - p.lambda1).abs() < 1e-12 && (q.xi - p.xi).abs() < 1e-15);
        assert_eq!(q.gamma, p.gamma);
    }

    proptest::proptest! {
        #[test]
        fn nonnegative_bounded_and_zero_outside(
            gamma in 1950.0f64..2050.0, l1 in 0.1f64..40.0, l2 in 0.1f64..40.0,
            l3 in 0.1f64..40.0, xi in 1e-4f64..0.3, t in 1900.0f64..2200.0,
        ) {
            let p = TransitionParams { gamma, lambda1: l1, lambda2: l2, lambda3: l3, xi };
            let a = trapezoid_alpha(t, &p);
            proptest::prop_assert!(a >= 0.0 && a <= xi);
            if t <= gamma || t >= p.end_year() {
                proptest::prop_assert_eq!(a, 0.0);
            }
        }
    }
}
