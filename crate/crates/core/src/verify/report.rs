use std::fmt;

/// Outcome of one exact or statistical check. Passes iff `statistic <= threshold`.
#[derive(Debug, Clone, PartialEq)]
pub struct TestReport {
    pub name: String,
    pub statistic: f64,
    pub threshold: f64,
    pub passed: bool,
    pub sample_size: u64,
    pub seed: Option<u64>,
    pub notes: String,
}

impl TestReport {
    pub fn new(name: impl Into<String>, statistic: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            statistic,
            threshold,
            passed: statistic <= threshold,
            sample_size: 0,
            seed: None,
            notes: String::new(),
        }
    }

    /// A check that holds vacuously (nothing to compare).
    pub fn vacuous(name: impl Into<String>, notes: impl Into<String>) -> Self {
        Self::new(name, 0.0, 0.0).with_note(notes)
    }

    pub fn with_samples(mut self, n: u64, seed: u64) -> Self {
        self.sample_size = n;
        self.seed = Some(seed);
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        let note = note.into();
        if !note.is_empty() {
            if !self.notes.is_empty() {
                self.notes.push_str("; ");
            }
            self.notes.push_str(&note);
        }
        self
    }

    /// Combines several reports: passes iff all pass; the statistic is the
    /// largest ratio `statistic / threshold` (or the largest statistic when
    /// thresholds are zero).
    pub fn all(name: impl Into<String>, parts: &[TestReport]) -> Self {
        let passed = parts.iter().all(|r| r.passed);
        let worst = parts
            .iter()
            .map(|r| {
                if r.threshold > 0.0 {
                    r.statistic / r.threshold
                } else {
                    r.statistic
                }
            })
            .fold(0.0, f64::max);
        let failing: Vec<String> = parts
            .iter()
            .filter(|r| !r.passed)
            .map(|r| {
                let mut s = format!("{} {:.4e} > {:.4e}", r.name, r.statistic, r.threshold);
                if !r.notes.is_empty() {
                    s.push_str(&format!(" [{}]", r.notes));
                }
                s
            })
            .collect();
        let mut rep = Self::new(name, worst, 1.0);
        rep.passed = passed;
        rep.sample_size = parts.iter().map(|r| r.sample_size).max().unwrap_or(0);
        rep.seed = parts.iter().find_map(|r| r.seed);
        if !failing.is_empty() {
            rep = rep.with_note(format!("failing: {}", failing.join(", ")));
        }
        rep
    }

    pub fn csv_header() -> &'static str {
        "name,statistic,threshold,passed,sample_size,seed,notes"
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{:e},{:e},{},{},{},\"{}\"",
            self.name,
            self.statistic,
            self.threshold,
            self.passed,
            self.sample_size,
            self.seed.map(|s| s.to_string()).unwrap_or_default(),
            self.notes.replace('"', "'")
        )
    }
}

impl fmt::Display for TestReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} statistic={:.6e} threshold={:.6e}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.statistic,
            self.threshold
        )?;
        if self.sample_size > 0 {
            write!(f, " n={}", self.sample_size)?;
        }
        if let Some(s) = self.seed {
            write!(f, " seed={s}")?;
        }
        if !self.notes.is_empty() {
            write!(f, " ({})", self.notes)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pass_iff_statistic_within_threshold() {
        assert!(TestReport::new("a", 0.1, 0.1).passed);
        assert!(!TestReport::new("a", 0.2, 0.1).passed);
        assert!(!TestReport::new("a", f64::NAN, 0.1).passed);
        let all = TestReport::all(
            "b",
            &[
                TestReport::new("x", 0.0, 1.0),
                TestReport::new("y", 2.0, 1.0),
            ],
        );
        assert!(!all.passed);
        assert!(all.notes.contains('y'));
    }
}
