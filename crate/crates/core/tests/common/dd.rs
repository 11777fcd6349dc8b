//! Double-double arithmetic (about 32 significant digits).

use std::ops::{Add, Div, Mul, Neg, Sub};

use authorlm::optim::FdValue;

use super::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

const LN2: Dd = Dd {
    hi: std::f64::consts::LN_2,
    lo: 2.319_046_813_846_299_6e-17,
};

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

impl Dd {
    fn norm(hi: f64, lo: f64) -> Dd {
        let (hi, lo) = quick_two_sum(hi, lo);
        Dd { hi, lo }
    }

    fn scale(self, f: f64) -> Dd {
        Dd {
            hi: self.hi * f,
            lo: self.lo * f,
        }
    }
}

impl Add for Dd {
    type Output = Dd;
    fn add(self, y: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, y.hi);
        let (t, f) = two_sum(self.lo, y.lo);
        let (s, e) = quick_two_sum(s, e + t);
        Dd::norm(s, e + f)
    }
}

impl Neg for Dd {
    type Output = Dd;
    fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Sub for Dd {
    type Output = Dd;
    fn sub(self, y: Dd) -> Dd {
        self + (-y)
    }
}

impl Mul for Dd {
    type Output = Dd;
    fn mul(self, y: Dd) -> Dd {
        let p = self.hi * y.hi;
        let e = self.hi.mul_add(y.hi, -p);
        Dd::norm(p, e + (self.hi * y.lo + self.lo * y.hi))
    }
}

impl Div for Dd {
    type Output = Dd;
    fn div(self, y: Dd) -> Dd {
        let q1 = self.hi / y.hi;
        let r = self - y * Dd::of(q1);
        let q2 = r.hi / y.hi;
        let r = r - y * Dd::of(q2);
        let q3 = r.hi / y.hi;
        Dd::norm(q1, q2) + Dd::of(q3)
    }
}

impl Scalar for Dd {
    fn of(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    fn exp(self) -> Self {
        let k = (self.hi / LN2.hi).round();
        let r = (self - LN2 * Dd::of(k)).scale(1.0 / 1024.0);
        let mut sum = Dd::of(1.0);
        let mut term = Dd::of(1.0);
        for n in 1..=24 {
            term = term * r / Dd::of(n as f64);
            sum = sum + term;
        }
        for _ in 0..10 {
            sum = sum * sum;
        }
        sum.scale(2f64.powi(k as i32))
    }

    fn ln(self) -> Self {
        let mut y = Dd::of(self.hi.ln());
        for _ in 0..2 {
            y = y + self * (-y).exp() - Dd::of(1.0);
        }
        y
    }

    fn to_f64(self) -> f64 {
        self.hi + self.lo
    }
}

impl FdValue for Dd {
    fn fd_sub(&self, other: &Self) -> f64 {
        (*self - *other).to_f64()
    }
}
