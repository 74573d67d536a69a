//! Scalar abstraction for closed-form kernel evaluation.

use num_traits::{Float, FloatConst, FromPrimitive};
use std::fmt::Debug;

pub trait Real: Float + FloatConst + FromPrimitive + Debug + Send + Sync + 'static {
    fn c(v: f64) -> Self {
        Self::from_f64(v).expect("representable constant")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Gamma function via Lanczos, sufficient for the half-integer arguments used here.
pub fn gamma<T: Real>(x: T) -> T {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    let half = T::c(0.5);
    if x < half {
        return T::PI() / ((T::PI() * x).sin() * gamma(T::one() - x));
    }
    let x = x - T::one();
    let mut a = T::c(COEF[0]);
    let t = x + T::c(G) + half;
    for (i, c) in COEF.iter().enumerate().skip(1) {
        a = a + T::c(*c) / (x + T::c(i as f64));
    }
    (T::c(2.0) * T::PI()).sqrt() * t.powf(x + half) * (-t).exp() * a
}
