//! Exact scalars: arbitrary-precision rationals, Gaussian rationals and
//! rational plane vectors, plus the `a/b+c/d i` string encoding used by
//! the JSON reports and the SURF format.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};
use std::str::FromStr;

/// Exact rational scalar.
pub type Rat = BigRational;

/// Rational from an integer.
pub fn rat_int(n: i64) -> Rat {
    BigRational::from_integer(BigInt::from(n))
}

/// Rational from numerator and denominator.
pub fn rat(n: i64, d: i64) -> Rat {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// Parse "p/q" or "p" into a rational.
pub fn parse_rat(s: &str) -> Result<Rat, String> {
    let s = s.trim();
    match s.split_once('/') {
        Some((n, d)) => {
            let n = BigInt::from_str(n.trim()).map_err(|e| format!("bad numerator {s:?}: {e}"))?;
            let d = BigInt::from_str(d.trim()).map_err(|e| format!("bad denominator {s:?}: {e}"))?;
            if d.is_zero() {
                return Err(format!("zero denominator in {s:?}"));
            }
            Ok(BigRational::new(n, d))
        }
        None => {
            let n = BigInt::from_str(s).map_err(|e| format!("bad rational {s:?}: {e}"))?;
            Ok(BigRational::from_integer(n))
        }
    }
}

/// x reduced into [0, m) for a positive modulus m.
pub fn rat_mod(x: &Rat, m: &Rat) -> Rat {
    debug_assert!(m.is_positive());
    x - m * (x / m).floor()
}

/// Format a rational as "p/q", or "p" when the denominator is 1.
pub fn fmt_rat(q: &Rat) -> String {
    if q.denom().is_one() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

/// Gaussian rational a + b·i.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct QQi {
    pub re: Rat,
    pub im: Rat,
}

impl QQi {
    pub fn new(re: Rat, im: Rat) -> Self {
        QQi { re, im }
    }

    pub fn zero() -> Self {
        QQi { re: Rat::zero(), im: Rat::zero() }
    }

    pub fn one() -> Self {
        QQi { re: Rat::one(), im: Rat::zero() }
    }

    pub fn i() -> Self {
        QQi { re: Rat::zero(), im: Rat::one() }
    }

    pub fn from_rat(r: Rat) -> Self {
        QQi { re: r, im: Rat::zero() }
    }

    pub fn from_int(n: i64) -> Self {
        QQi::from_rat(rat_int(n))
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn is_real(&self) -> bool {
        self.im.is_zero()
    }

    pub fn conj(&self) -> Self {
        QQi { re: self.re.clone(), im: -self.im.clone() }
    }

    /// |z|² = a² + b², a rational.
    pub fn norm_sq(&self) -> Rat {
        &self.re * &self.re + &self.im * &self.im
    }

    pub fn inv(&self) -> Option<Self> {
        if self.is_zero() {
            return None;
        }
        let n = self.norm_sq();
        Some(QQi { re: &self.re / &n, im: -&self.im / &n })
    }

    /// Multiplication by i (rotation by 90°).
    pub fn times_i(&self) -> Self {
        QQi { re: -self.im.clone(), im: self.re.clone() }
    }

    pub fn scale(&self, r: &Rat) -> Self {
        QQi { re: &self.re * r, im: &self.im * r }
    }
}

impl Add for QQi {
    type Output = QQi;
    fn add(self, rhs: QQi) -> QQi {
        QQi { re: self.re + rhs.re, im: self.im + rhs.im }
    }
}

impl<'a> Add<&'a QQi> for QQi {
    type Output = QQi;
    fn add(self, rhs: &QQi) -> QQi {
        QQi { re: self.re + &rhs.re, im: self.im + &rhs.im }
    }
}

impl AddAssign<&QQi> for QQi {
    fn add_assign(&mut self, rhs: &QQi) {
        self.re += &rhs.re;
        self.im += &rhs.im;
    }
}

impl Sub for QQi {
    type Output = QQi;
    fn sub(self, rhs: QQi) -> QQi {
        QQi { re: self.re - rhs.re, im: self.im - rhs.im }
    }
}

impl<'a> Sub<&'a QQi> for QQi {
    type Output = QQi;
    fn sub(self, rhs: &QQi) -> QQi {
        QQi { re: self.re - &rhs.re, im: self.im - &rhs.im }
    }
}

impl SubAssign<&QQi> for QQi {
    fn sub_assign(&mut self, rhs: &QQi) {
        self.re -= &rhs.re;
        self.im -= &rhs.im;
    }
}

impl Mul for QQi {
    type Output = QQi;
    fn mul(self, rhs: QQi) -> QQi {
        &self * &rhs
    }
}

impl<'a, 'b> Mul<&'b QQi> for &'a QQi {
    type Output = QQi;
    fn mul(self, rhs: &QQi) -> QQi {
        QQi {
            re: &self.re * &rhs.re - &self.im * &rhs.im,
            im: &self.re * &rhs.im + &self.im * &rhs.re,
        }
    }
}

impl MulAssign<&QQi> for QQi {
    fn mul_assign(&mut self, rhs: &QQi) {
        *self = &*self * rhs;
    }
}

impl Div for QQi {
    type Output = QQi;
    fn div(self, rhs: QQi) -> QQi {
        &self * &rhs.inv().expect("division by zero")
    }
}

impl Neg for QQi {
    type Output = QQi;
    fn neg(self) -> QQi {
        QQi { re: -self.re, im: -self.im }
    }
}

impl fmt::Debug for QQi {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", fmt_qqi(self))
    }
}

impl fmt::Display for QQi {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", fmt_qqi(self))
    }
}

/// Format "a/b+c/d i" with the sign of the imaginary part folded into the
/// separator, e.g. "1/2-3/4 i". Zero is "0".
pub fn fmt_qqi(z: &QQi) -> String {
    if z.im.is_zero() {
        return fmt_rat(&z.re);
    }
    let sep = if z.im.is_negative() { "-" } else { "+" };
    format!("{}{}{} i", fmt_rat(&z.re), sep, fmt_rat(&z.im.abs()))
}

/// Parse the output of [`fmt_qqi`]: "a/b", "a/b+c/d i" or "a/b-c/d i".
/// Also accepts a bare "c/d i" imaginary part.
pub fn parse_qqi(s: &str) -> Result<QQi, String> {
    let s = s.trim();
    let body = match s.strip_suffix('i') {
        Some(b) => b.trim_end(),
        None => return Ok(QQi::from_rat(parse_rat(s)?)),
    };
    // Split at the last '+' or '-' that is not a leading sign and not part
    // of "/-" (negative numerator after a slash never occurs in our output,
    // but tolerate it on input).
    let bytes = body.as_bytes();
    let mut split_at = None;
    for idx in (1..bytes.len()).rev() {
        let c = bytes[idx] as char;
        if (c == '+' || c == '-') && bytes[idx - 1] as char != '/' && bytes[idx - 1] as char != 'e' {
            split_at = Some(idx);
            break;
        }
    }
    match split_at {
        Some(idx) => {
            let re = parse_rat(&body[..idx])?;
            let sign = if bytes[idx] as char == '-' { -Rat::one() } else { Rat::one() };
            let im_str = body[idx + 1..].trim();
            let im = if im_str.is_empty() { Rat::one() } else { parse_rat(im_str)? };
            Ok(QQi::new(re, sign * im))
        }
        None => {
            let im_str = body.trim();
            let im = if im_str.is_empty() || im_str == "+" {
                Rat::one()
            } else if im_str == "-" {
                -Rat::one()
            } else {
                parse_rat(im_str)?
            };
            Ok(QQi::new(Rat::zero(), im))
        }
    }
}

/// Rational vector in the plane. Doubles as a translation and a holonomy.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Vec2Q {
    pub x: Rat,
    pub y: Rat,
}

impl Vec2Q {
    pub fn new(x: Rat, y: Rat) -> Self {
        Vec2Q { x, y }
    }

    pub fn zero() -> Self {
        Vec2Q { x: Rat::zero(), y: Rat::zero() }
    }

    pub fn from_ints(x: i64, y: i64) -> Self {
        Vec2Q { x: rat_int(x), y: rat_int(y) }
    }

    pub fn is_zero(&self) -> bool {
        self.x.is_zero() && self.y.is_zero()
    }

    /// Signed area of the parallelogram spanned by self and other.
    pub fn cross(&self, other: &Vec2Q) -> Rat {
        &self.x * &other.y - &self.y * &other.x
    }

    pub fn dot(&self, other: &Vec2Q) -> Rat {
        &self.x * &other.x + &self.y * &other.y
    }

    pub fn scale(&self, r: &Rat) -> Self {
        Vec2Q { x: &self.x * r, y: &self.y * r }
    }

    /// The same displacement as a Gaussian rational x + y·i.
    pub fn to_qqi(&self) -> QQi {
        QQi { re: self.x.clone(), im: self.y.clone() }
    }

    pub fn from_qqi(z: &QQi) -> Self {
        Vec2Q { x: z.re.clone(), y: z.im.clone() }
    }

    /// Divide out the gcd of the (integer-cleared) coordinates so that the
    /// result is the primitive integer vector in the same direction.
    pub fn primitive(&self) -> Vec2Q {
        use num_integer::Integer;
        if self.is_zero() {
            return self.clone();
        }
        let lcm = self.x.denom().lcm(self.y.denom());
        let xi = self.x.numer() * (&lcm / self.x.denom());
        let yi = self.y.numer() * (&lcm / self.y.denom());
        let g = xi.gcd(&yi);
        Vec2Q {
            x: BigRational::from_integer(xi / &g),
            y: BigRational::from_integer(yi / &g),
        }
    }
}

impl Add for Vec2Q {
    type Output = Vec2Q;
    fn add(self, rhs: Vec2Q) -> Vec2Q {
        Vec2Q { x: self.x + rhs.x, y: self.y + rhs.y }
    }
}

impl<'a> Add<&'a Vec2Q> for Vec2Q {
    type Output = Vec2Q;
    fn add(self, rhs: &Vec2Q) -> Vec2Q {
        Vec2Q { x: self.x + &rhs.x, y: self.y + &rhs.y }
    }
}

impl AddAssign<&Vec2Q> for Vec2Q {
    fn add_assign(&mut self, rhs: &Vec2Q) {
        self.x += &rhs.x;
        self.y += &rhs.y;
    }
}

impl Sub for Vec2Q {
    type Output = Vec2Q;
    fn sub(self, rhs: Vec2Q) -> Vec2Q {
        Vec2Q { x: self.x - rhs.x, y: self.y - rhs.y }
    }
}

impl<'a> Sub<&'a Vec2Q> for Vec2Q {
    type Output = Vec2Q;
    fn sub(self, rhs: &Vec2Q) -> Vec2Q {
        Vec2Q { x: self.x - &rhs.x, y: self.y - &rhs.y }
    }
}

impl Neg for Vec2Q {
    type Output = Vec2Q;
    fn neg(self) -> Vec2Q {
        Vec2Q { x: -self.x, y: -self.y }
    }
}

impl fmt::Debug for Vec2Q {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", fmt_rat(&self.x), fmt_rat(&self.y))
    }
}

impl fmt::Display for Vec2Q {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", fmt_rat(&self.x), fmt_rat(&self.y))
    }
}
