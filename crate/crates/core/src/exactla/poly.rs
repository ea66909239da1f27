//! Univariate polynomials over ℚ and ℤ and the rational function field ℚ(s).
//! Coefficient lists are stored lowest degree first and kept trimmed.

use crate::rational::Rat;
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QPoly {
    coeffs: Vec<Rat>,
}

impl QPoly {
    pub fn new(mut coeffs: Vec<Rat>) -> Self {
        while coeffs.last().is_some_and(|c| c.is_zero()) {
            coeffs.pop();
        }
        QPoly { coeffs }
    }

    pub fn zero() -> Self {
        QPoly { coeffs: Vec::new() }
    }

    pub fn one() -> Self {
        QPoly::constant(Rat::one())
    }

    pub fn constant(c: Rat) -> Self {
        QPoly::new(vec![c])
    }

    /// The indeterminate s.
    pub fn x() -> Self {
        QPoly::new(vec![Rat::zero(), Rat::one()])
    }

    /// x^n with coefficient c.
    pub fn monomial(c: Rat, n: usize) -> Self {
        let mut coeffs = vec![Rat::zero(); n + 1];
        coeffs[n] = c;
        QPoly::new(coeffs)
    }

    pub fn coeffs(&self) -> &[Rat] {
        &self.coeffs
    }

    pub fn coeff(&self, i: usize) -> Rat {
        self.coeffs.get(i).cloned().unwrap_or_else(Rat::zero)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// None for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn leading(&self) -> Option<&Rat> {
        self.coeffs.last()
    }

    pub fn add(&self, other: &QPoly) -> QPoly {
        let n = self.coeffs.len().max(other.coeffs.len());
        let coeffs = (0..n).map(|i| self.coeff(i) + other.coeff(i)).collect();
        QPoly::new(coeffs)
    }

    pub fn sub(&self, other: &QPoly) -> QPoly {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> QPoly {
        QPoly::new(self.coeffs.iter().map(|c| -c.clone()).collect())
    }

    pub fn mul(&self, other: &QPoly) -> QPoly {
        if self.is_zero() || other.is_zero() {
            return QPoly::zero();
        }
        let mut coeffs = vec![Rat::zero(); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate() {
                coeffs[i + j] += a * b;
            }
        }
        QPoly::new(coeffs)
    }

    pub fn scale(&self, k: &Rat) -> QPoly {
        QPoly::new(self.coeffs.iter().map(|c| c * k).collect())
    }

    pub fn eval(&self, x: &Rat) -> Rat {
        let mut acc = Rat::zero();
        for c in self.coeffs.iter().rev() {
            acc = acc * x + c;
        }
        acc
    }

    /// Euclidean division; panics on zero divisor.
    pub fn div_rem(&self, div: &QPoly) -> (QPoly, QPoly) {
        assert!(!div.is_zero(), "polynomial division by zero");
        let dd = div.degree().unwrap();
        let lead = div.leading().unwrap().clone();
        let mut rem = self.clone();
        let mut quo = vec![Rat::zero(); self.coeffs.len().saturating_sub(dd)];
        while let Some(rd) = rem.degree() {
            if rd < dd {
                break;
            }
            let factor = rem.leading().unwrap() / &lead;
            quo[rd - dd] = factor.clone();
            let shifted = QPoly::monomial(factor, rd - dd).mul(div);
            rem = rem.sub(&shifted);
        }
        (QPoly::new(quo), rem)
    }

    pub fn monic(&self) -> QPoly {
        match self.leading() {
            None => QPoly::zero(),
            Some(l) => self.scale(&(Rat::one() / l)),
        }
    }

    /// Monic gcd via a primitive polynomial remainder sequence over ℤ,
    /// which keeps intermediate coefficients small.
    pub fn gcd(&self, other: &QPoly) -> QPoly {
        if self.is_zero() {
            return other.monic();
        }
        if other.is_zero() {
            return self.monic();
        }
        let mut a = ZPoly::from_qpoly(self).primitive();
        let mut b = ZPoly::from_qpoly(other).primitive();
        if a.degree() < b.degree() {
            std::mem::swap(&mut a, &mut b);
        }
        loop {
            if b.is_zero() {
                return a.to_qpoly().monic();
            }
            let r = a.pseudo_rem(&b).primitive();
            a = b;
            b = r;
        }
    }
}

impl fmt::Display for QPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self
            .coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(i, c)| match i {
                0 => format!("{c}"),
                1 => format!("{c}*s"),
                _ => format!("{c}*s^{i}"),
            })
            .collect();
        write!(f, "{}", parts.join(" + "))
    }
}

/// Integer polynomials; the entry domain for fraction-free elimination
/// over ℚ(s) after denominators are cleared.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ZPoly {
    coeffs: Vec<BigInt>,
}

impl ZPoly {
    pub fn new(mut coeffs: Vec<BigInt>) -> Self {
        while coeffs.last().is_some_and(|c| c.is_zero()) {
            coeffs.pop();
        }
        ZPoly { coeffs }
    }

    pub fn zero() -> Self {
        ZPoly { coeffs: Vec::new() }
    }

    pub fn one() -> Self {
        ZPoly::new(vec![BigInt::one()])
    }

    pub fn coeffs(&self) -> &[BigInt] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn degree(&self) -> isize {
        self.coeffs.len() as isize - 1
    }

    /// Clears denominators: x * lcm(denoms) as an integer polynomial.
    pub fn from_qpoly(p: &QPoly) -> ZPoly {
        let mut lcm = BigInt::one();
        for c in p.coeffs() {
            lcm = lcm.lcm(c.denom());
        }
        ZPoly::new(
            p.coeffs()
                .iter()
                .map(|c| c.numer() * (&lcm / c.denom()))
                .collect(),
        )
    }

    pub fn to_qpoly(&self) -> QPoly {
        QPoly::new(
            self.coeffs
                .iter()
                .map(|c| Rat::from_integer(c.clone()))
                .collect(),
        )
    }

    pub fn content(&self) -> BigInt {
        let mut g = BigInt::zero();
        for c in &self.coeffs {
            g = g.gcd(c);
        }
        g
    }

    pub fn primitive(&self) -> ZPoly {
        let c = self.content();
        if c.is_zero() || c.is_one() {
            return self.clone();
        }
        ZPoly::new(self.coeffs.iter().map(|x| x / &c).collect())
    }

    pub fn mul(&self, other: &ZPoly) -> ZPoly {
        if self.is_zero() || other.is_zero() {
            return ZPoly::zero();
        }
        let mut coeffs = vec![BigInt::zero(); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate() {
                coeffs[i + j] += a * b;
            }
        }
        ZPoly::new(coeffs)
    }

    pub fn sub(&self, other: &ZPoly) -> ZPoly {
        let n = self.coeffs.len().max(other.coeffs.len());
        let get = |v: &Vec<BigInt>, i: usize| v.get(i).cloned().unwrap_or_else(BigInt::zero);
        ZPoly::new(
            (0..n)
                .map(|i| get(&self.coeffs, i) - get(&other.coeffs, i))
                .collect(),
        )
    }

    /// Remainder of lc(b)^(da-db+1) * a divided by b; exact over ℤ.
    pub fn pseudo_rem(&self, b: &ZPoly) -> ZPoly {
        assert!(!b.is_zero());
        let db = b.degree();
        let lead = b.coeffs.last().unwrap().clone();
        let mut r = self.clone();
        while !r.is_zero() && r.degree() >= db {
            let dr = r.degree();
            let shift = (dr - db) as usize;
            let factor = r.coeffs.last().unwrap().clone();
            let mut scaled: Vec<BigInt> =
                r.coeffs.iter().map(|c| c * &lead).collect();
            for (i, c) in b.coeffs.iter().enumerate() {
                scaled[i + shift] -= c * &factor;
            }
            r = ZPoly::new(scaled);
        }
        r
    }

    /// Exact division; panics if the division is not exact (this would
    /// indicate a Bareiss invariant violation).
    pub fn exact_div(&self, div: &ZPoly) -> ZPoly {
        if self.is_zero() {
            return ZPoly::zero();
        }
        assert!(!div.is_zero(), "exact_div by zero polynomial");
        let dd = div.degree();
        let lead = div.coeffs.last().unwrap();
        let mut rem = self.coeffs.clone();
        let mut quo = vec![BigInt::zero(); self.coeffs.len() - div.coeffs.len() + 1];
        for qd in (0..quo.len()).rev() {
            let top = rem[qd + dd as usize].clone();
            if top.is_zero() {
                continue;
            }
            let (f, r) = top.div_rem(lead);
            assert!(r.is_zero(), "non-exact polynomial division");
            for (i, c) in div.coeffs.iter().enumerate() {
                rem[qd + i] -= c * &f;
            }
            quo[qd] = f;
        }
        assert!(rem.iter().all(|c| c.is_zero()), "non-exact polynomial division");
        ZPoly::new(quo)
    }

    pub fn bit_size(&self) -> u64 {
        self.coeffs.iter().map(|c| c.bits() + 1).sum()
    }
}

/// Element of ℚ(s): numerator/denominator in lowest terms, denominator monic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RatFunc {
    num: QPoly,
    den: QPoly,
}

impl RatFunc {
    pub fn new(num: QPoly, den: QPoly) -> Self {
        assert!(!den.is_zero(), "zero denominator");
        if num.is_zero() {
            return RatFunc { num: QPoly::zero(), den: QPoly::one() };
        }
        let g = num.gcd(&den);
        let (num, r1) = num.div_rem(&g);
        debug_assert!(r1.is_zero());
        let (den, r2) = den.div_rem(&g);
        debug_assert!(r2.is_zero());
        let lead = den.leading().unwrap().clone();
        RatFunc {
            num: num.scale(&(Rat::one() / &lead)),
            den: den.scale(&(Rat::one() / &lead)),
        }
    }

    pub fn from_poly(p: QPoly) -> Self {
        RatFunc { num: p, den: QPoly::one() }
    }

    pub fn constant(c: Rat) -> Self {
        RatFunc::from_poly(QPoly::constant(c))
    }

    pub fn zero() -> Self {
        RatFunc::from_poly(QPoly::zero())
    }

    pub fn one() -> Self {
        RatFunc::from_poly(QPoly::one())
    }

    pub fn num(&self) -> &QPoly {
        &self.num
    }

    pub fn den(&self) -> &QPoly {
        &self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn add(&self, other: &RatFunc) -> RatFunc {
        RatFunc::new(
            self.num.mul(&other.den).add(&other.num.mul(&self.den)),
            self.den.mul(&other.den),
        )
    }

    pub fn sub(&self, other: &RatFunc) -> RatFunc {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> RatFunc {
        RatFunc { num: self.num.neg(), den: self.den.clone() }
    }

    pub fn mul(&self, other: &RatFunc) -> RatFunc {
        RatFunc::new(self.num.mul(&other.num), self.den.mul(&other.den))
    }

    pub fn inv(&self) -> RatFunc {
        assert!(!self.is_zero(), "inverting zero rational function");
        RatFunc::new(self.den.clone(), self.num.clone())
    }

    pub fn div(&self, other: &RatFunc) -> RatFunc {
        self.mul(&other.inv())
    }

    /// Evaluation at a rational point; None if the denominator vanishes.
    pub fn eval(&self, x: &Rat) -> Option<Rat> {
        let d = self.den.eval(x);
        if d.is_zero() {
            None
        } else {
            Some(self.num.eval(x) / d)
        }
    }

    /// Power series coefficients a_0..a_k of num/den (den(0) must be nonzero).
    pub fn series_coeffs(&self, k: usize) -> Vec<Rat> {
        let d0 = self.den.coeff(0);
        assert!(!d0.is_zero(), "series expansion needs den(0) != 0");
        let mut out = Vec::with_capacity(k + 1);
        for j in 0..=k {
            let mut v = self.num.coeff(j);
            for i in 1..=j {
                let di = self.den.coeff(i);
                if !di.is_zero() {
                    v -= di * &out[j - i];
                }
            }
            out.push(v / &d0);
        }
        out
    }
}

impl fmt::Display for RatFunc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == QPoly::one() {
            write!(f, "{}", self.num)
        } else {
            write!(f, "({}) / ({})", self.num, self.den)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{rat, rat_int};

    fn p(cs: &[i64]) -> QPoly {
        QPoly::new(cs.iter().map(|&c| rat_int(c)).collect())
    }

    #[test]
    fn divrem_and_gcd() {
        let a = p(&[-1, 0, 1]); // s^2 - 1
        let b = p(&[1, 1]); // s + 1
        let (q, r) = a.div_rem(&b);
        assert!(r.is_zero());
        assert_eq!(q, p(&[-1, 1]));
        assert_eq!(a.gcd(&b), b.monic());
        let c = p(&[2, 2]); // 2s + 2 -> gcd still monic s+1
        assert_eq!(a.gcd(&c), p(&[1, 1]));
    }

    #[test]
    fn ratfunc_field_ops() {
        let f = RatFunc::new(p(&[0, 1]), p(&[1, 1])); // s/(s+1)
        let g = f.inv();
        assert_eq!(f.mul(&g), RatFunc::one());
        assert_eq!(f.sub(&f), RatFunc::zero());
        assert_eq!(f.eval(&rat_int(1)).unwrap(), rat(1, 2));
        assert_eq!(RatFunc::new(p(&[1]), p(&[0, 1])).eval(&rat_int(0)), None);
    }

    #[test]
    fn zpoly_exact_division() {
        let a = ZPoly::from_qpoly(&p(&[2, 3, 1])); // (s+1)(s+2)
        let b = ZPoly::from_qpoly(&p(&[1, 1]));
        assert_eq!(a.exact_div(&b), ZPoly::from_qpoly(&p(&[2, 1])));
    }

    #[test]
    fn series_expansion() {
        // 1/(1 - x - x^2): Fibonacci numbers
        let f = RatFunc::new(QPoly::one(), p(&[1, -1, -1]));
        let coeffs = f.series_coeffs(7);
        let fib: Vec<Rat> = [1, 1, 2, 3, 5, 8, 13, 21].iter().map(|&n| rat_int(n)).collect();
        assert_eq!(coeffs, fib);
    }
}
