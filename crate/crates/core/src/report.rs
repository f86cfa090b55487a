//! Outcome of symbol-class, Bernstein and ellipticity verifications, and its
//! CSV form.

use std::io::Write;

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportKind {
    LambdaClass,
    Bernstein,
    SymbolClass,
    Ellipticity,
    Remainder,
    Sigma,
    Budget,
}

impl ReportKind {
    pub fn name(self) -> &'static str {
        match self {
            ReportKind::LambdaClass => "lambda-class",
            ReportKind::Bernstein => "bernstein",
            ReportKind::SymbolClass => "symbol-class",
            ReportKind::Ellipticity => "ellipticity",
            ReportKind::Remainder => "composition-remainder",
            ReportKind::Sigma => "sigma-fit",
            ReportKind::Budget => "feller-budget",
        }
    }
}

/// Phase-space point where an entry attains its worst value.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Location {
    pub x: Vec<f64>,
    pub xi: Vec<f64>,
}

/// One row: a multi-index pair `(alpha, beta)` and its fitted constant.
///
/// For Bernstein reports `alpha = [k]` is the derivative order and
/// `constant` the smallest value of `(-1)^(k-1) f^(k)` seen.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassEntry {
    pub alpha: Vec<usize>,
    pub beta: Vec<usize>,
    pub constant: f64,
    pub coarse_constant: f64,
    pub location: Location,
    pub finite: bool,
    pub stable: bool,
    pub pass: bool,
}

impl ClassEntry {
    pub fn abs_alpha(&self) -> usize {
        self.alpha.iter().sum()
    }

    pub fn abs_beta(&self) -> usize {
        self.beta.iter().sum()
    }

    /// Relative growth of the fitted constant under refinement.
    pub fn growth(&self) -> f64 {
        if self.coarse_constant == 0.0 {
            if self.constant == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            self.constant / self.coarse_constant - 1.0
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassReport {
    pub kind: ReportKind,
    pub subject: String,
    pub claimed_order: Option<f64>,
    pub epsilon: f64,
    pub entries: Vec<ClassEntry>,
    pub pass: bool,
    pub refinement_stable: bool,
    pub tau0: Option<f64>,
    pub tau1: Option<f64>,
    pub sigma: Option<f64>,
    /// Range of the sampled variable the fit is valid on.
    pub window: Option<(f64, f64)>,
}

impl ClassReport {
    pub fn new(kind: ReportKind, subject: impl Into<String>) -> Self {
        ClassReport {
            kind,
            subject: subject.into(),
            claimed_order: None,
            epsilon: 0.0,
            entries: Vec::new(),
            pass: true,
            refinement_stable: true,
            tau0: None,
            tau1: None,
            sigma: None,
            window: None,
        }
    }

    /// Recompute the aggregate flags from the entries.
    pub fn finalize(mut self) -> Self {
        self.refinement_stable = self.entries.iter().all(|e| e.stable);
        self.pass = self.entries.iter().all(|e| e.pass);
        self
    }

    pub fn entry(&self, alpha: &[usize], beta: &[usize]) -> Option<&ClassEntry> {
        self.entries
            .iter()
            .find(|e| e.alpha == alpha && e.beta == beta)
    }

    pub fn first_failure(&self) -> Option<&ClassEntry> {
        self.entries.iter().find(|e| !e.pass)
    }

    /// `tau1 + tau0 + sigma (2 + tau1)` when all three are known.
    pub fn budget(&self) -> Option<f64> {
        match (self.tau0, self.tau1, self.sigma) {
            (Some(t0), Some(t1), Some(s)) => Some(feller_budget(t0, t1, s)),
            _ => None,
        }
    }

    pub const CSV_HEADER: [&'static str; 17] = [
        "kind",
        "alpha",
        "beta",
        "abs_alpha",
        "claimed_order",
        "epsilon",
        "constant",
        "coarse_constant",
        "growth",
        "location_x",
        "location_xi",
        "finite",
        "stable",
        "pass",
        "tau0",
        "tau1",
        "sigma",
    ];

    /// One row per multi-index, plus a trailing summary row with the budget.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<&str> = Self::CSV_HEADER.to_vec();
        header.push("budget");
        w.write_record(&header)?;
        let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
        for e in &self.entries {
            w.write_record([
                self.kind.name().to_string(),
                join_usize(&e.alpha),
                join_usize(&e.beta),
                e.abs_alpha().to_string(),
                opt(self.claimed_order),
                fmt_f64(self.epsilon),
                fmt_f64(e.constant),
                fmt_f64(e.coarse_constant),
                fmt_f64(e.growth()),
                join_f64(&e.location.x),
                join_f64(&e.location.xi),
                e.finite.to_string(),
                e.stable.to_string(),
                verdict(e.pass).to_string(),
                opt(self.tau0),
                opt(self.tau1),
                opt(self.sigma),
                String::new(),
            ])?;
        }
        w.write_record([
            format!("{}-summary", self.kind.name()),
            String::new(),
            String::new(),
            String::new(),
            opt(self.claimed_order),
            fmt_f64(self.epsilon),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            self.refinement_stable.to_string(),
            verdict(self.pass).to_string(),
            opt(self.tau0),
            opt(self.tau1),
            opt(self.sigma),
            opt(self.budget()),
        ])?;
        w.flush()?;
        Ok(())
    }
}

/// Generation budget `tau1 + tau0 + sigma (2 + tau1)`; must stay below one.
pub fn feller_budget(tau0: f64, tau1: f64, sigma: f64) -> f64 {
    tau1 + tau0 + sigma * (2.0 + tau1)
}

pub fn verdict(pass: bool) -> &'static str {
    if pass {
        "pass"
    } else {
        "fail"
    }
}

pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:.12e}")
}

pub(crate) fn join_f64(v: &[f64]) -> String {
    v.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(";")
}

fn join_usize(v: &[usize]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_has_one_row_per_entry_plus_summary() {
        let mut r = ClassReport::new(ReportKind::SymbolClass, "test");
        r.claimed_order = Some(2.0);
        r.tau0 = Some(0.0);
        r.tau1 = Some(0.25);
        r.sigma = Some(0.0);
        r.entries.push(ClassEntry {
            alpha: vec![1],
            beta: vec![0],
            constant: 2.0,
            coarse_constant: 1.9,
            location: Location {
                x: vec![0.0],
                xi: vec![3.0],
            },
            finite: true,
            stable: true,
            pass: true,
        });
        let r = r.finalize();
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("symbol-class,1,0,1,"));
        assert!(lines[2].ends_with(",pass,0.000000000000e0,2.500000000000e-1,0.000000000000e0,2.500000000000e-1"));
    }

    #[test]
    fn budget_formula() {
        assert_eq!(feller_budget(0.1, 0.2, 0.1), 0.2 + 0.1 + 0.1 * 2.2);
    }
}
