//! Exact fixed-point arithmetic for bid weights and payments. Weights are
//! `floor(10^precision * valuation / sqrt(bundle_size))`; payments round the
//! other way, `ceil(w * sqrt(winner_size))`, which keeps a winner's payment
//! at or below its scaled valuation. Everything is integer square roots, no
//! floating point.

use num_bigint::BigUint;
use num_traits::One;

/// Largest `w` with `w^2 * bundle_size <= (10^precision * valuation)^2`.
pub fn scaled_weight(valuation: u64, bundle_size: u64, precision: u32) -> BigUint {
    let scaled = BigUint::from(valuation) * BigUint::from(10u32).pow(precision);
    let target = &scaled * &scaled;
    let size = BigUint::from(bundle_size);
    let mut w = (&target / &size).sqrt();
    while (&w + 1u32).pow(2) * &size <= target {
        w += 1u32;
    }
    while &w * &w * &size > target {
        w -= 1u32;
    }
    w
}

/// Smallest `s` with `s^2 >= w^2 * winner_size`, i.e. `ceil(w * sqrt(size))`.
pub fn critical_payment(weight_scaled: &BigUint, winner_size: u64) -> BigUint {
    let target = weight_scaled * weight_scaled * BigUint::from(winner_size);
    let s = target.sqrt();
    if &s * &s < target {
        s + BigUint::one()
    } else {
        s
    }
}

/// Renders a scaled amount as a decimal string, e.g. `(800, 2)` -> `"8.00"`.
pub fn format_scaled(value: &BigUint, precision: u32) -> String {
    if precision == 0 {
        return value.to_string();
    }
    let ten = BigUint::from(10u32).pow(precision);
    let whole = value / &ten;
    let frac = value % &ten;
    format!("{whole}.{frac:0width$}", width = precision as usize)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weight_examples() {
        // floor(100 * 10 / sqrt(2)) = 707
        assert_eq!(scaled_weight(10, 2, 2), BigUint::from(707u32));
        assert_eq!(scaled_weight(8, 2, 2), BigUint::from(565u32));
        assert_eq!(scaled_weight(5, 2, 2), BigUint::from(353u32));
        // Perfect square size: exact division.
        assert_eq!(scaled_weight(12, 4, 2), BigUint::from(600u32));
        assert_eq!(scaled_weight(7, 1, 0), BigUint::from(7u32));
    }

    #[test]
    fn payment_examples() {
        // ceil(565 * sqrt(2)) = 800, i.e. 8.00 at two decimal places.
        assert_eq!(critical_payment(&BigUint::from(565u32), 2), BigUint::from(800u32));
        // Exact case stays exact.
        assert_eq!(critical_payment(&BigUint::from(600u32), 4), BigUint::from(1200u32));
        assert_eq!(critical_payment(&BigUint::from(0u32), 3), BigUint::from(0u32));
    }

    #[test]
    fn payment_never_exceeds_scaled_valuation() {
        // For any w_j <= w_i = scaled_weight(v_i, s_i):
        // ceil(w_j * sqrt(s_i)) <= 10^p * v_i.
        for v in 1u64..40 {
            for s in 2u64..6 {
                let w_i = scaled_weight(v, s, 2);
                let cap = BigUint::from(v) * BigUint::from(100u32);
                assert!(critical_payment(&w_i, s) <= cap, "v={v} s={s}");
            }
        }
    }

    #[test]
    fn formatting() {
        assert_eq!(format_scaled(&BigUint::from(800u32), 2), "8.00");
        assert_eq!(format_scaled(&BigUint::from(7u32), 2), "0.07");
        assert_eq!(format_scaled(&BigUint::from(0u32), 2), "0.00");
        assert_eq!(format_scaled(&BigUint::from(353u32), 0), "353");
        assert_eq!(format_scaled(&BigUint::from(1200u32), 3), "1.200");
    }
}
