//! Range-based daily volatility from open/high/low/close prices.

use crate::error::{Error, Result};

/// Floor applied before taking logs of a variance proxy.
pub const VARIANCE_FLOOR: f64 = 1e-12;

/// One day of (log-)prices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ohlc {
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
}

impl Ohlc {
    pub fn validate(&self) -> Result<()> {
        let Ohlc { open, high, low, close } = *self;
        if [open, high, low, close].iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidOhlc("non-finite price".into()));
        }
        if !(low <= open.min(close) && open.max(close) <= high) {
            return Err(Error::InvalidOhlc(format!(
                "expected low <= open, close <= high, got O={open} H={high} L={low} C={close}"
            )));
        }
        Ok(())
    }
}

/// Garman–Klass variance proxy
/// `0.511 (H-L)² - 0.019 [(C-O)(H+L-2O) - 2(H-O)(L-O)] - 0.383 (C-O)²`.
pub fn garman_klass(bar: &Ohlc) -> Result<f64> {
    bar.validate()?;
    let Ohlc { open, high, low, close } = *bar;
    let hl = high - low;
    let co = close - open;
    Ok(0.511 * hl * hl - 0.019 * (co * (high + low - 2.0 * open) - 2.0 * (high - open) * (low - open)) - 0.383 * co * co)
}

/// `log σ = ½ log σ²` after flooring `σ²` at [`VARIANCE_FLOOR`].
pub fn log_volatility(variance: f64) -> f64 {
    0.5 * variance.max(VARIANCE_FLOOR).ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_range_day() {
        let bar = Ohlc { open: 1.0, high: 1.0, low: 1.0, close: 1.0 };
        assert_eq!(garman_klass(&bar).unwrap(), 0.0);
        assert_eq!(log_volatility(0.0), 0.5 * VARIANCE_FLOOR.ln());
    }

    #[test]
    fn symmetric_range_value() {
        let bar = Ohlc { open: 0.0, high: 0.02, low: -0.02, close: 0.0 };
        // 0.511 * 0.04^2 - 0.019 * (0 - 2 * 0.02 * -0.02)
        let expected = 0.511 * 0.0016 - 0.019 * 0.0008;
        assert!((garman_klass(&bar).unwrap() - expected).abs() < 1e-18);
        assert!((expected - 8.024e-4).abs() < 1e-15);
    }

    #[test]
    fn log_round_trip() {
        let v = 3.7e-4;
        assert!(((2.0 * log_volatility(v)).exp() - v).abs() < 1e-18);
    }

    #[test]
    fn shift_invariance() {
        let bar = Ohlc { open: 0.01, high: 0.05, low: -0.03, close: 0.02 };
        let shifted = Ohlc { open: 5.01, high: 5.05, low: 4.97, close: 5.02 };
        assert!((garman_klass(&bar).unwrap() - garman_klass(&shifted).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn bad_ordering_rejected() {
        let bar = Ohlc { open: 0.0, high: -0.01, low: -0.02, close: 0.0 };
        assert!(matches!(garman_klass(&bar), Err(Error::InvalidOhlc(_))));
    }
}
