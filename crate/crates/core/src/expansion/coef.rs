use std::collections::BTreeMap;
use std::fmt;

/// Monomial `a^a c^c s^s` in the model constants, `s = 1 / sigma^2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Mono {
    pub a: u8,
    pub c: u8,
    pub s: i8,
}

impl Mono {
    pub const ONE: Mono = Mono { a: 0, c: 0, s: 0 };

    pub fn new(a: u8, c: u8, s: i8) -> Self {
        Self { a, c, s }
    }

    fn mul(self, o: Mono) -> Mono {
        Mono {
            a: self.a + o.a,
            c: self.c + o.c,
            s: self.s + o.s,
        }
    }

    fn eval(self, a: f64, c: f64, sigma: f64) -> f64 {
        a.powi(self.a as i32) * c.powi(self.c as i32) * sigma.powi(-2 * self.s as i32)
    }
}

/// Polynomial coefficient in `(a, c, 1/sigma^2)` with real weights.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Coef(BTreeMap<Mono, f64>);

impl Coef {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(w: f64) -> Self {
        Self::term(w, Mono::ONE)
    }

    pub fn term(w: f64, m: Mono) -> Self {
        let mut c = Self::zero();
        c.add_term(m, w);
        c
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Mono, &f64)> {
        self.0.iter()
    }

    fn add_term(&mut self, m: Mono, w: f64) {
        let e = self.0.entry(m).or_insert(0.0);
        *e += w;
        if *e == 0.0 {
            self.0.remove(&m);
        }
    }

    pub fn add_assign(&mut self, o: &Coef) {
        for (&m, &w) in &o.0 {
            self.add_term(m, w);
        }
    }

    pub fn scaled(&self, w: f64, m: Mono) -> Coef {
        let mut out = Coef::zero();
        if w == 0.0 {
            return out;
        }
        for (&k, &v) in &self.0 {
            out.add_term(k.mul(m), v * w);
        }
        out
    }

    pub fn mul(&self, o: &Coef) -> Coef {
        let mut out = Coef::zero();
        for (&m1, &w1) in &self.0 {
            for (&m2, &w2) in &o.0 {
                out.add_term(m1.mul(m2), w1 * w2);
            }
        }
        out
    }

    pub fn eval(&self, a: f64, c: f64, sigma: f64) -> f64 {
        self.0.iter().map(|(m, w)| w * m.eval(a, c, sigma)).sum()
    }
}

fn fmt_weight(w: f64) -> String {
    if w.fract() == 0.0 && w.abs() < 1e15 {
        format!("{}", w as i64)
    } else {
        format!("{w}")
    }
}

impl fmt::Display for Mono {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        for (name, e) in [
            ("a", self.a as i32),
            ("c", self.c as i32),
            ("s", self.s as i32),
        ] {
            match e {
                0 => {}
                1 => parts.push(name.to_string()),
                _ => parts.push(format!("{name}^{e}")),
            }
        }
        f.write_str(&parts.join(" "))
    }
}

impl fmt::Display for Coef {
    /// Signed sum such as `+3 c s - a`; `s` stands for `1/sigma^2`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("0");
        }
        let mut first = true;
        for (m, &w) in &self.0 {
            let sign = if w < 0.0 { "-" } else { "+" };
            if !first {
                f.write_str(" ")?;
            }
            first = false;
            let mag = w.abs();
            let mono = m.to_string();
            match (mono.is_empty(), mag == 1.0) {
                (true, _) => write!(f, "{sign}{}", fmt_weight(mag))?,
                (false, true) => write!(f, "{sign}{mono}")?,
                (false, false) => write!(f, "{sign}{} {mono}", fmt_weight(mag))?,
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arithmetic_and_display() {
        let mut x = Coef::term(3.0, Mono::new(0, 1, 1));
        x.add_assign(&Coef::term(-1.0, Mono::new(1, 0, 0)));
        assert_eq!(x.to_string(), "+3 c s -a");
        let y = x.scaled(-2.0, Mono::new(0, 1, 0));
        assert_eq!(y.to_string(), "-6 c^2 s +2 a c");
        let z = x.mul(&Coef::constant(0.0));
        assert!(z.is_zero());
        assert!((x.eval(-0.4, 1.0, 0.5) - (0.4 + 12.0)).abs() < 1e-12);
    }

    #[test]
    fn cancellation_removes_terms() {
        let mut x = Coef::term(2.0, Mono::new(0, 2, 1));
        x.add_assign(&Coef::term(-2.0, Mono::new(0, 2, 1)));
        assert!(x.is_zero());
    }
}
