//! Truncated trigonometric series used for initial data.
//!
//! Text form: terms joined by `+`, each `sin:f[:a[:p]]`, `cos:f[:a[:p]]` or
//! `const:c` (a bare number is also a constant). A `sin` term is
//! `a * sin(2 pi f x + p)`. Multi-component data is written `q=...;rho=...`.

use crate::error::{Error, Result};
use serde::Serialize;
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Wave {
    Sin,
    Cos,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrigTerm {
    pub wave: Wave,
    pub freq: u32,
    pub amp: f64,
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct TrigSeries {
    pub constant: f64,
    pub terms: Vec<TrigTerm>,
}

impl TrigSeries {
    pub fn constant(c: f64) -> Self {
        Self { constant: c, terms: vec![] }
    }

    pub fn sin(freq: u32, amp: f64) -> Self {
        Self {
            constant: 0.0,
            terms: vec![TrigTerm { wave: Wave::Sin, freq, amp, phase: 0.0 }],
        }
    }

    pub fn cos(freq: u32, amp: f64) -> Self {
        Self {
            constant: 0.0,
            terms: vec![TrigTerm { wave: Wave::Cos, freq, amp, phase: 0.0 }],
        }
    }

    pub fn plus(mut self, other: &TrigSeries) -> Self {
        self.constant += other.constant;
        self.terms.extend_from_slice(&other.terms);
        self
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut s = TrigSeries::default();
        let text = text.trim();
        if text.is_empty() {
            return Err(Error::Config("empty trig series".into()));
        }
        for raw in text.split('+') {
            let term = raw.trim();
            if term.is_empty() {
                return Err(Error::Config(format!("empty term in series '{text}'")));
            }
            let parts: Vec<&str> = term.split(':').map(str::trim).collect();
            let num = |p: &str, what: &str| -> Result<f64> {
                p.parse::<f64>()
                    .map_err(|_| Error::Config(format!("bad {what} '{p}' in term '{term}'")))
            };
            match parts[0] {
                "sin" | "cos" => {
                    if parts.len() < 2 || parts.len() > 4 {
                        return Err(Error::Config(format!("term '{term}' needs kind:freq[:amp[:phase]]")));
                    }
                    let freq: u32 = parts[1]
                        .parse()
                        .map_err(|_| Error::Config(format!("frequency must be a non-negative integer in '{term}'")))?;
                    let amp = if parts.len() > 2 { num(parts[2], "amplitude")? } else { 1.0 };
                    let phase = if parts.len() > 3 { num(parts[3], "phase")? } else { 0.0 };
                    let wave = if parts[0] == "sin" { Wave::Sin } else { Wave::Cos };
                    s.terms.push(TrigTerm { wave, freq, amp, phase });
                }
                "const" => {
                    if parts.len() != 2 {
                        return Err(Error::Config(format!("term '{term}' must be const:c")));
                    }
                    s.constant += num(parts[1], "constant")?;
                }
                _ if parts.len() == 1 => s.constant += num(parts[0], "constant")?,
                other => return Err(Error::Config(format!("unknown series kind '{other}'"))),
            }
        }
        Ok(s)
    }

    fn arg(t: &TrigTerm, x: f64) -> f64 {
        2.0 * PI * t.freq as f64 * x + t.phase
    }

    pub fn eval(&self, x: f64) -> f64 {
        let mut v = self.constant;
        for t in &self.terms {
            let a = Self::arg(t, x);
            v += t.amp
                * match t.wave {
                    Wave::Sin => a.sin(),
                    Wave::Cos => a.cos(),
                };
        }
        v
    }

    pub fn derivative(&self, x: f64) -> f64 {
        let mut v = 0.0;
        for t in &self.terms {
            let a = Self::arg(t, x);
            let k = 2.0 * PI * t.freq as f64;
            v += t.amp
                * k
                * match t.wave {
                    Wave::Sin => a.cos(),
                    Wave::Cos => -a.sin(),
                };
        }
        v
    }

    pub fn second_derivative(&self, x: f64) -> f64 {
        let mut v = 0.0;
        for t in &self.terms {
            let a = Self::arg(t, x);
            let k = 2.0 * PI * t.freq as f64;
            v -= t.amp
                * k
                * k
                * match t.wave {
                    Wave::Sin => a.sin(),
                    Wave::Cos => a.cos(),
                };
        }
        v
    }

    /// Exact spatial mean over the unit period.
    pub fn mean(&self) -> f64 {
        let mut m = self.constant;
        for t in &self.terms {
            if t.freq == 0 {
                m += t.amp
                    * match t.wave {
                        Wave::Sin => t.phase.sin(),
                        Wave::Cos => t.phase.cos(),
                    };
            }
        }
        m
    }

    /// Periodic antiderivative (zero-frequency parts must vanish).
    pub fn antiderivative(&self, x: f64) -> Result<f64> {
        if self.mean().abs() > 1e-14 {
            return Err(Error::Precondition(format!(
                "series has mean {:.3e}; a periodic potential needs zero mean",
                self.mean()
            )));
        }
        let mut v = 0.0;
        for t in &self.terms {
            if t.freq == 0 {
                continue;
            }
            let a = Self::arg(t, x);
            let k = 2.0 * PI * t.freq as f64;
            v += t.amp / k
                * match t.wave {
                    Wave::Sin => -a.cos(),
                    Wave::Cos => a.sin(),
                };
        }
        Ok(v)
    }

    pub fn sample(&self, xs: &[f64]) -> Vec<f64> {
        xs.iter().map(|&x| self.eval(x)).collect()
    }

    /// Sup bound `|c| + sum |a|`.
    pub fn sup_bound(&self) -> f64 {
        self.constant.abs() + self.terms.iter().map(|t| t.amp.abs()).sum::<f64>()
    }

    pub fn derivative_bound(&self) -> f64 {
        self.terms
            .iter()
            .map(|t| t.amp.abs() * 2.0 * PI * t.freq as f64)
            .sum()
    }
}

/// Named per-component series, e.g. `q=sin:1:0.1;rho=const:1+cos:1:0.5`.
pub fn parse_components(text: &str) -> Result<Vec<(String, TrigSeries)>> {
    let mut out = Vec::new();
    for part in text.split(';') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        match part.split_once('=') {
            Some((name, series)) => out.push((name.trim().to_string(), TrigSeries::parse(series)?)),
            None => out.push((String::new(), TrigSeries::parse(part)?)),
        }
    }
    if out.is_empty() {
        return Err(Error::Config("empty initial-data specification".into()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_evaluates() {
        let s = TrigSeries::parse("sin:1").unwrap();
        assert!((s.eval(0.25) - 1.0).abs() < 1e-15);
        let s = TrigSeries::parse("const:1 + cos:2:0.5:0.1").unwrap();
        let x = 0.3;
        let expect = 1.0 + 0.5 * (4.0 * PI * x + 0.1).cos();
        assert!((s.eval(x) - expect).abs() < 1e-15);
        assert!(TrigSeries::parse("tan:1").is_err());
        assert!(TrigSeries::parse("sin:x").is_err());
    }

    #[test]
    fn antiderivative_differentiates_back() {
        let s = TrigSeries::parse("sin:1+cos:3:0.2:0.4").unwrap();
        let h = 1e-5;
        for &x in &[0.0, 0.17, 0.5, 0.93] {
            let fd = (s.antiderivative(x + h).unwrap() - s.antiderivative(x - h).unwrap()) / (2.0 * h);
            assert!((fd - s.eval(x)).abs() < 1e-8);
            let fd2 = (s.eval(x + h) - s.eval(x - h)) / (2.0 * h);
            assert!((fd2 - s.derivative(x)).abs() < 1e-7);
        }
        assert!(TrigSeries::parse("const:1").unwrap().antiderivative(0.2).is_err());
    }

    #[test]
    fn components() {
        let c = parse_components("q=0;rho=const:1+sin:1:0.1").unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c[0].0, "q");
        assert!((c[1].1.eval(0.25) - 1.1).abs() < 1e-15);
        let single = parse_components("sin:1").unwrap();
        assert_eq!(single[0].0, "");
    }
}
