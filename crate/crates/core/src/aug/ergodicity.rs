use super::AugError;

/// Constants entering the uniform-ergodicity bound of the augmentation chain.
///
/// `f` and `q` must be bounded above and below by positive constants over the
/// sample space and parameter space. `rejection_floor` (`r`) and
/// `acceptance_floor` (`R`) are the minima of `1 - f(x,θ)/{M Z(θ)}` and
/// `Z(θ)/M`. Whether the first minimum ranges over `x` alone or over `(x, θ)`
/// jointly is left to the caller; minimizing jointly is the conservative
/// choice and the one used by the bundled toy models.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErgodicityInputs {
    pub f_lower: f64,
    pub f_upper: f64,
    pub q_lower: f64,
    pub q_upper: f64,
    pub rejection_floor: f64,
    pub acceptance_floor: f64,
    pub observations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixingBound {
    /// `β = b_q r / B_q`.
    pub beta: f64,
    /// Minorization constant `δ = {b_f / (B_f (β + 1/R))}ⁿ`.
    pub delta: f64,
    /// `ln δ`, finite even when `δ` underflows.
    pub log_delta: f64,
    /// Upper bound on the geometric mixing rate, `1 - δ`.
    pub rho_bound: f64,
}

impl ErgodicityInputs {
    fn validate(&self) -> Result<(), AugError> {
        let bad = |msg: &str| Err(AugError::Ergodicity(msg.to_string()));
        if !(self.f_lower > 0.0 && self.f_lower <= self.f_upper && self.f_upper.is_finite()) {
            return bad("need 0 < b_f <= B_f < inf");
        }
        if !(self.q_lower > 0.0 && self.q_lower <= self.q_upper && self.q_upper.is_finite()) {
            return bad("need 0 < b_q <= B_q < inf");
        }
        if !(self.rejection_floor > 0.0 && self.rejection_floor <= 1.0) {
            return bad("need r in (0, 1]");
        }
        if !(self.acceptance_floor > 0.0 && self.acceptance_floor <= 1.0) {
            return bad("need R in (0, 1]");
        }
        if self.observations == 0 {
            return bad("need at least one observation");
        }
        Ok(())
    }
}

pub fn theorem1_bound(inputs: &ErgodicityInputs) -> Result<MixingBound, AugError> {
    inputs.validate()?;
    let beta = inputs.q_lower * inputs.rejection_floor / inputs.q_upper;
    let per_obs = inputs.f_lower / (inputs.f_upper * (beta + 1.0 / inputs.acceptance_floor));
    let log_delta = inputs.observations as f64 * per_obs.ln();
    if !(log_delta <= 0.0) {
        return Err(AugError::Ergodicity(format!(
            "minorization constant exceeds one (ln delta = {log_delta})"
        )));
    }
    let delta = log_delta.exp();
    Ok(MixingBound {
        beta,
        delta,
        log_delta,
        rho_bound: -log_delta.exp_m1(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat(n: usize) -> ErgodicityInputs {
        ErgodicityInputs {
            f_lower: 1.0,
            f_upper: 1.0,
            q_lower: 0.5,
            q_upper: 0.5,
            rejection_floor: 1.0,
            acceptance_floor: 1.0,
            observations: n,
        }
    }

    #[test]
    fn flat_single_observation() {
        let b = theorem1_bound(&flat(1)).unwrap();
        assert_eq!(b.beta, 1.0);
        assert_eq!(b.delta, 0.5);
        assert_eq!(b.rho_bound, 0.5);
    }

    #[test]
    fn power_law_in_observations() {
        let b = theorem1_bound(&flat(10)).unwrap();
        assert!((b.delta - 2f64.powi(-10)).abs() < 1e-16);
        assert!((b.rho_bound - (1.0 - 2f64.powi(-10))).abs() < 1e-15);
    }

    #[test]
    fn two_atom_hand_derived() {
        // f ∈ {1, 2}, q = 1/2, M = 4, Z = 3.
        let inputs = ErgodicityInputs {
            f_lower: 1.0,
            f_upper: 2.0,
            q_lower: 0.5,
            q_upper: 0.5,
            rejection_floor: 1.0 - 2.0 / 12.0,
            acceptance_floor: 0.75,
            observations: 3,
        };
        let b = theorem1_bound(&inputs).unwrap();
        assert!((b.beta - 5.0 / 6.0).abs() < 1e-15);
        let per: f64 = 1.0 / (2.0 * (5.0 / 6.0 + 4.0 / 3.0));
        assert!((b.delta - per.powi(3)).abs() < 1e-15);
    }

    #[test]
    fn invalid_inputs() {
        let mut i = flat(1);
        i.f_lower = 2.0;
        assert!(theorem1_bound(&i).is_err());
        let mut i = flat(1);
        i.acceptance_floor = 0.0;
        assert!(theorem1_bound(&i).is_err());
        let mut i = flat(0);
        i.observations = 0;
        assert!(theorem1_bound(&i).is_err());
        // r = R = 1 with b_q > B_q pushes delta above one.
        let mut i = flat(1);
        i.q_upper = 0.25;
        assert!(theorem1_bound(&i).is_err());
    }

    #[test]
    fn monotone_in_inputs() {
        let base = ErgodicityInputs {
            f_lower: 1.0,
            f_upper: 2.0,
            q_lower: 0.4,
            q_upper: 0.6,
            rejection_floor: 0.8,
            acceptance_floor: 0.7,
            observations: 2,
        };
        let d = |i: &ErgodicityInputs| theorem1_bound(i).unwrap().delta;
        for n in 1..20 {
            let a = ErgodicityInputs {
                observations: n,
                ..base
            };
            let b = ErgodicityInputs {
                observations: n + 1,
                ..base
            };
            assert!(d(&b) < d(&a));
        }
        for k in 0..20 {
            let hi = 2.0 + k as f64 * 0.25;
            let a = ErgodicityInputs { f_upper: hi, ..base };
            let b = ErgodicityInputs {
                f_upper: hi + 0.25,
                ..base
            };
            assert!(d(&b) < d(&a));
            let lo = 0.2 + k as f64 * 0.04;
            let a = ErgodicityInputs { f_lower: lo, ..base };
            let b = ErgodicityInputs {
                f_lower: lo + 0.04,
                ..base
            };
            assert!(d(&b) > d(&a));
        }
    }
}
