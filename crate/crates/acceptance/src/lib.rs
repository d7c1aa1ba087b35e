//! Reporting for the acceptance run.

use std::fmt;

/// Result of one acceptance criterion.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub id: u32,
    pub title: &'static str,
    pub pass: bool,
    pub detail: String,
}

impl Outcome {
    pub fn new(id: u32, title: &'static str, checks: Vec<Check>) -> Self {
        let pass = checks.iter().all(|c| c.pass);
        let detail = checks.iter().map(Check::to_string).collect::<Vec<_>>().join("; ");
        Outcome { id, title, pass, detail }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.pass { "PASS" } else { "FAIL" };
        write!(f, "[{tag}] C{:02} {}: {}", self.id, self.title, self.detail)
    }
}

/// One measured quantity against its pinned tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub label: String,
    pub measured: f64,
    pub bound: String,
    pub pass: bool,
}

impl Check {
    /// `measured < limit`.
    pub fn below(label: impl Into<String>, measured: f64, limit: f64) -> Self {
        Check {
            label: label.into(),
            measured,
            bound: format!("< {limit:e}"),
            pass: measured < limit,
        }
    }

    /// `measured <= limit`.
    pub fn at_most(label: impl Into<String>, measured: f64, limit: f64) -> Self {
        Check {
            label: label.into(),
            measured,
            bound: format!("<= {limit}"),
            pass: measured <= limit,
        }
    }

    /// `|measured − center| <= width`.
    pub fn within(label: impl Into<String>, measured: f64, center: f64, width: f64) -> Self {
        Check {
            label: label.into(),
            measured,
            bound: format!("in {center} ± {width}"),
            pass: (measured - center).abs() <= width,
        }
    }

    /// Boolean property, reported as 1 or 0.
    pub fn holds(label: impl Into<String>, ok: bool) -> Self {
        Check {
            label: label.into(),
            measured: if ok { 1.0 } else { 0.0 },
            bound: "= 1".into(),
            pass: ok,
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} = {:.6e} ({})", self.label, self.measured, self.bound)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn outcome_requires_every_check() {
        let o = Outcome::new(1, "x", vec![Check::below("a", 1.0, 2.0), Check::within("b", 3.0, 0.0, 1.0)]);
        assert!(!o.pass);
        assert!(o.to_string().starts_with("[FAIL] C01 x: a = "));
        assert!(Check::at_most("c", 1.05, 1.05).pass);
        assert!(!Check::below("c", 1.0, 1.0).pass);
    }
}
