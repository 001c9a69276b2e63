//! Shared reporting types for inequality and invariant checks.

/// Outcome of checking a two-sided inequality `left <= right` up to a slack.
///
/// `label` names the check that produced the report (e.g. "uncertainty",
/// "duhamel", "groenwall"), so reports from different modules can be
/// aggregated without losing their origin.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub label: String,
    pub left: f64,
    pub right: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl BoundReport {
    /// Build a report for `left <= right + tolerance`.
    pub fn check(label: &str, left: f64, right: f64, tolerance: f64) -> Self {
        BoundReport {
            label: label.to_string(),
            left,
            right,
            tolerance,
            pass: left <= right + tolerance,
        }
    }

    /// Slack remaining before the bound is violated (negative on failure).
    pub fn margin(&self) -> f64 {
        self.right + self.tolerance - self.left
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn check_passes_within_slack() {
        let r = BoundReport::check("demo", 1.0 + 1e-12, 1.0, 1e-10);
        assert!(r.pass);
        assert!(r.margin() > 0.0);
    }

    #[test]
    fn check_fails_beyond_slack() {
        let r = BoundReport::check("demo", 1.0 + 1e-8, 1.0, 1e-10);
        assert!(!r.pass);
        assert!(r.margin() < 0.0);
    }
}
