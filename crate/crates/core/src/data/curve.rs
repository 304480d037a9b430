use super::DataError;

/// Idealised turbine power curve of a whole farm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TurbineCurve {
    pub cut_in: f64,
    pub rated: f64,
    pub cut_out: f64,
    pub capacity: f64,
}

impl TurbineCurve {
    pub fn new(cut_in: f64, rated: f64, cut_out: f64, capacity: f64) -> Result<Self, DataError> {
        if !(0.0 < cut_in && cut_in < rated && rated < cut_out) {
            return Err(DataError::Curve(format!(
                "need 0 < cut_in < rated < cut_out, got {cut_in}/{rated}/{cut_out}"
            )));
        }
        if capacity <= 0.0 {
            return Err(DataError::Curve(format!("capacity must be positive, got {capacity}")));
        }
        Ok(Self {
            cut_in,
            rated,
            cut_out,
            capacity,
        })
    }

    /// 33 × EN70-1500 turbines.
    pub fn wf1() -> Self {
        Self::new(4.0, 11.6, 25.0, 49.5).unwrap()
    }

    /// 24 × V80-2000 turbines.
    pub fn wf2() -> Self {
        Self::new(3.5, 14.5, 25.0, 48.0).unwrap()
    }

    /// 24 × G90 turbines.
    pub fn wf3() -> Self {
        Self::new(3.0, 11.0, 21.0, 48.0).unwrap()
    }
}

/// Farm output in MW at hub wind speed `speed` (m/s): zero outside
/// `[cut_in, cut_out)`, cubic ramp up to `rated`, flat at capacity above.
pub fn power_curve(curve: &TurbineCurve, speed: f64) -> Result<f64, DataError> {
    if speed < 0.0 || speed.is_nan() {
        return Err(DataError::NegativeSpeed(speed));
    }
    Ok(if speed < curve.cut_in || speed >= curve.cut_out {
        0.0
    } else if speed < curve.rated {
        let ci3 = curve.cut_in.powi(3);
        curve.capacity * (speed.powi(3) - ci3) / (curve.rated.powi(3) - ci3)
    } else {
        curve.capacity
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn below_cut_in_and_past_cut_out_is_zero() {
        assert_eq!(power_curve(&TurbineCurve::wf3(), 2.0).unwrap(), 0.0);
        let c = TurbineCurve::wf1();
        assert_eq!(power_curve(&c, 26.0).unwrap(), 0.0);
        assert_eq!(power_curve(&c, 25.0).unwrap(), 0.0);
    }

    #[test]
    fn rated_speed_gives_capacity() {
        for c in [TurbineCurve::wf1(), TurbineCurve::wf2(), TurbineCurve::wf3()] {
            assert_eq!(power_curve(&c, c.rated).unwrap(), c.capacity);
            assert_eq!(power_curve(&c, c.cut_in).unwrap(), 0.0);
        }
    }

    #[test]
    fn ramp_is_monotone() {
        let c = TurbineCurve::wf2();
        let mut prev = 0.0;
        for i in 0..=200 {
            let p = power_curve(&c, i as f64 * 0.1).unwrap();
            assert!(p >= prev && p <= c.capacity);
            prev = p;
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(power_curve(&TurbineCurve::wf1(), -0.1).is_err());
        assert!(TurbineCurve::new(5.0, 4.0, 25.0, 10.0).is_err());
        assert!(TurbineCurve::new(3.0, 12.0, 25.0, 0.0).is_err());
    }
}
