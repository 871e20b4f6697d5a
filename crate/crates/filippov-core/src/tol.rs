//! Numerical tolerances used across the crate.
//!
//! Every threshold lives here so analyses are reproducible and overridable
//! in one place. CLI layers may override individual fields from the
//! environment (`FILIPPOV_TOL_*`); overrides outside `[1e-14, 1e-2]` are
//! rejected.

use serde::{Deserialize, Serialize};

/// Lower bound accepted for any tolerance override.
pub const TOL_OVERRIDE_MIN: f64 = 1e-14;
/// Upper bound accepted for any tolerance override.
pub const TOL_OVERRIDE_MAX: f64 = 1e-2;

/// Tolerance bundle threaded through analysis, integration and classification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Membership of the switching curve: |f(p)| below this counts as on-curve.
    pub on_sigma: f64,
    /// Lie-derivative zero test (tangency detection).
    pub tan: f64,
    /// Root isolation refinement width.
    pub root: f64,
    /// |f| at a located flow event.
    pub event: f64,
    /// Local integration error per unit time.
    pub flow: f64,
    /// Sliding speed below which an asymptotic approach is declared.
    pub speed: f64,
    /// Signature / cycle re-hit comparison in the curve parameter.
    pub cycle: f64,
    /// State deduplication distance for branch enumeration.
    pub dedup: f64,
    /// Snap distance (in the curve parameter) from a located event to a breakpoint.
    pub snap: f64,
    /// |f| bound for a tangential (grazing) contact to count as touching `Sigma`.
    pub graze: f64,
    /// Recurrence ball radius for probe witnesses.
    pub rec: f64,
    /// Minimum enclosed area for a constructed region.
    pub area: f64,
    /// Maximum contact order probed before reporting possible infinite-order contact.
    pub max_order: u32,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            on_sigma: 1e-9,
            tan: 1e-9,
            root: 1e-10,
            event: 1e-11,
            flow: 1e-10,
            speed: 1e-9,
            cycle: 1e-6,
            dedup: 1e-6,
            snap: 1e-8,
            graze: 1e-8,
            rec: 1e-3,
            area: 1e-6,
            max_order: 8,
        }
    }
}

impl Tolerances {
    /// All float tolerances halved; `max_order` unchanged. Used by the
    /// robustness check that verdicts do not depend on the exact thresholds.
    pub fn halved(&self) -> Self {
        Self {
            on_sigma: self.on_sigma / 2.0,
            tan: self.tan / 2.0,
            root: self.root / 2.0,
            event: self.event / 2.0,
            flow: self.flow / 2.0,
            speed: self.speed / 2.0,
            cycle: self.cycle / 2.0,
            dedup: self.dedup / 2.0,
            snap: self.snap / 2.0,
            graze: self.graze / 2.0,
            rec: self.rec / 2.0,
            area: self.area / 2.0,
            max_order: self.max_order,
        }
    }

    /// Apply one named override. Returns `false` for unknown names or
    /// out-of-range values.
    pub fn set_by_name(&mut self, name: &str, value: f64) -> bool {
        if !(TOL_OVERRIDE_MIN..=TOL_OVERRIDE_MAX).contains(&value) {
            return false;
        }
        let slot = match name {
            "on_sigma" => &mut self.on_sigma,
            "tan" => &mut self.tan,
            "root" => &mut self.root,
            "event" => &mut self.event,
            "flow" => &mut self.flow,
            "speed" => &mut self.speed,
            "cycle" => &mut self.cycle,
            "dedup" => &mut self.dedup,
            "snap" => &mut self.snap,
            "graze" => &mut self.graze,
            "rec" => &mut self.rec,
            "area" => &mut self.area,
            _ => return false,
        };
        *slot = value;
        true
    }

    /// Read `FILIPPOV_TOL_<NAME>` overrides from the environment.
    pub fn with_env_overrides(mut self) -> Self {
        for (key, val) in std::env::vars() {
            if let Some(name) = key.strip_prefix("FILIPPOV_TOL_") {
                if let Ok(v) = val.parse::<f64>() {
                    self.set_by_name(&name.to_ascii_lowercase(), v);
                }
            }
        }
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn override_rejects_out_of_range() {
        let mut t = Tolerances::default();
        assert!(!t.set_by_name("event", 1.0));
        assert!(!t.set_by_name("event", 1e-15));
        assert!(t.set_by_name("event", 1e-10));
        assert_eq!(t.event, 1e-10);
    }

    #[test]
    fn override_rejects_unknown_name() {
        let mut t = Tolerances::default();
        assert!(!t.set_by_name("max_order", 1e-3));
        assert!(!t.set_by_name("bogus", 1e-3));
    }
}
