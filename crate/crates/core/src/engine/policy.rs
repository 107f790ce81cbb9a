//! Slowing policies: rules that delay or suppress the activation of sleeping
//! particles. Under shared randomness every policy here can only shrink the
//! visited set relative to the unmodified process.

use serde::{Deserialize, Serialize};

use crate::error::{FrogError, Result};

/// Which sites may activate under [`ActivationPolicy::SiteRestricted`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SitePredicate {
    /// Every coordinate even.
    EvenCoords,
    /// Coordinate on `axis` (1-based) at least `min`.
    HalfSpace { axis: usize, min: i64 },
    /// An explicit list of sites.
    Sites { sites: Vec<Vec<i64>> },
}

impl SitePredicate {
    pub fn allows(&self, site: &[i64]) -> bool {
        match self {
            SitePredicate::EvenCoords => site.iter().all(|c| c % 2 == 0),
            SitePredicate::HalfSpace { axis, min } => site.get(axis - 1).is_some_and(|c| c >= min),
            SitePredicate::Sites { sites } => sites.iter().any(|s| s == site),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ActivationPolicy {
    /// The standard model: activate on first visit.
    #[default]
    Null,
    /// A site first visited in `(t_{n-1}, t_n]` activates at `t_n`. Visits
    /// after the last grid time activate immediately.
    DelayedGrid { times: Vec<f64> },
    /// Only sites satisfying the predicate activate.
    SiteRestricted { allowed: SitePredicate },
    /// At instant `at`, every sleeping particle on a site whose first
    /// coordinate is below `threshold` is removed.
    LeftRemoval {
        threshold: i64,
        #[serde(default)]
        at: f64,
    },
    /// Only the first visited site of each hyperplane `{x : x_axis = k}`
    /// activates. Projected on `axis`, the process is then a one-dimensional
    /// frog model driven by the projected waiting law.
    FirstInHyperplane { axis: usize },
    Composite { policies: Vec<ActivationPolicy> },
}

/// Facts about the run that a policy may consult when a site is first visited.
pub struct VisitContext<'a> {
    pub site: &'a [i64],
    pub time: f64,
    /// Whether some other site on the same hyperplane of each axis was
    /// already visited; indexed by 0-based axis.
    pub hyperplane_seen: &'a [bool],
}

impl ActivationPolicy {
    pub fn validate(&self, dim: usize) -> Result<()> {
        match self {
            ActivationPolicy::Null => Ok(()),
            ActivationPolicy::DelayedGrid { times } => {
                if times.is_empty() {
                    return Err(FrogError::invalid("times", "delay grid must not be empty"));
                }
                if times.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
                    return Err(FrogError::invalid("times", "grid times must be positive and finite"));
                }
                if times.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(FrogError::invalid("times", "grid times must be strictly increasing"));
                }
                Ok(())
            }
            ActivationPolicy::SiteRestricted { allowed } => match allowed {
                SitePredicate::HalfSpace { axis, .. } if *axis == 0 || *axis > dim => {
                    Err(FrogError::AxisOutOfRange { axis: *axis, dim })
                }
                SitePredicate::Sites { sites } if sites.iter().any(|s| s.len() != dim) => {
                    Err(FrogError::invalid("sites", format!("every site must have {dim} coordinates")))
                }
                _ => Ok(()),
            },
            ActivationPolicy::LeftRemoval { at, .. } => {
                if at.is_finite() && *at >= 0.0 {
                    Ok(())
                } else {
                    Err(FrogError::invalid("at", "removal instant must be finite and nonnegative"))
                }
            }
            ActivationPolicy::FirstInHyperplane { axis } => {
                if *axis == 0 || *axis > dim {
                    Err(FrogError::AxisOutOfRange { axis: *axis, dim })
                } else {
                    Ok(())
                }
            }
            ActivationPolicy::Composite { policies } => policies.iter().try_for_each(|p| p.validate(dim)),
        }
    }

    pub fn is_null(&self) -> bool {
        match self {
            ActivationPolicy::Null => true,
            ActivationPolicy::Composite { policies } => policies.iter().all(Self::is_null),
            _ => false,
        }
    }

    /// Activation time for a site first visited at `ctx.time`, or `None`
    /// when its sleeping particles never activate.
    pub fn activation_time(&self, ctx: &VisitContext<'_>) -> Option<f64> {
        let t = self.delayed(ctx.time);
        if self.blocks(ctx, t) {
            None
        } else {
            Some(t)
        }
    }

    fn delayed(&self, visit: f64) -> f64 {
        match self {
            ActivationPolicy::DelayedGrid { times } => {
                let i = times.partition_point(|&g| g < visit);
                times.get(i).copied().unwrap_or(visit)
            }
            ActivationPolicy::Composite { policies } => {
                policies.iter().map(|p| p.delayed(visit)).fold(visit, f64::max)
            }
            _ => visit,
        }
    }

    fn blocks(&self, ctx: &VisitContext<'_>, activation: f64) -> bool {
        match self {
            ActivationPolicy::Null | ActivationPolicy::DelayedGrid { .. } => false,
            ActivationPolicy::SiteRestricted { allowed } => !allowed.allows(ctx.site),
            ActivationPolicy::LeftRemoval { threshold, at } => ctx.site[0] < *threshold && activation >= *at,
            ActivationPolicy::FirstInHyperplane { axis } => ctx.hyperplane_seen[axis - 1],
            ActivationPolicy::Composite { policies } => policies.iter().any(|p| p.blocks(ctx, activation)),
        }
    }

    fn components(&self) -> Vec<&ActivationPolicy> {
        match self {
            ActivationPolicy::Composite { policies } => policies.iter().flat_map(|p| p.components()).collect(),
            ActivationPolicy::Null => Vec::new(),
            other => vec![other],
        }
    }

    /// Partial order used by the coupling harness: `self` is at least as
    /// restrictive as `other` when every component of `other` also appears in
    /// `self`. The null policy is the maximum.
    pub fn restricts(&self, other: &ActivationPolicy) -> Result<()> {
        let mine = self.components();
        if other.components().iter().all(|c| mine.contains(c)) {
            Ok(())
        } else {
            Err(FrogError::IncomparablePolicies(format!("{self:?} is not more restrictive than {other:?}")))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx(site: &[i64], time: f64) -> VisitContext<'_> {
        VisitContext { site, time, hyperplane_seen: &[false, false] }
    }

    #[test]
    fn null_never_delays_or_blocks() {
        let p = ActivationPolicy::Null;
        assert_eq!(p.activation_time(&ctx(&[3], 0.7)), Some(0.7));
    }

    #[test]
    fn delayed_grid_rounds_up_to_grid() {
        let p = ActivationPolicy::DelayedGrid { times: vec![1.0, 2.0, 3.0] };
        assert_eq!(p.activation_time(&ctx(&[1], 0.4)), Some(1.0));
        assert_eq!(p.activation_time(&ctx(&[1], 1.0)), Some(1.0));
        assert_eq!(p.activation_time(&ctx(&[1], 1.5)), Some(2.0));
        assert_eq!(p.activation_time(&ctx(&[1], 3.5)), Some(3.5));
    }

    #[test]
    fn composite_takes_latest_delay_and_any_block() {
        let p = ActivationPolicy::Composite {
            policies: vec![
                ActivationPolicy::DelayedGrid { times: vec![1.0, 2.0] },
                ActivationPolicy::SiteRestricted { allowed: SitePredicate::EvenCoords },
            ],
        };
        assert_eq!(p.activation_time(&ctx(&[2], 0.3)), Some(1.0));
        assert_eq!(p.activation_time(&ctx(&[1], 0.3)), None);
    }

    #[test]
    fn left_removal_only_hits_sleepers_at_its_instant() {
        let p = ActivationPolicy::LeftRemoval { threshold: 0, at: 2.0 };
        assert_eq!(p.activation_time(&ctx(&[-1], 1.0)), Some(1.0));
        assert_eq!(p.activation_time(&ctx(&[-1], 2.5)), None);
        assert_eq!(p.activation_time(&ctx(&[1], 2.5)), Some(2.5));
    }

    #[test]
    fn partial_order() {
        let grid = ActivationPolicy::DelayedGrid { times: vec![1.0] };
        let even = ActivationPolicy::SiteRestricted { allowed: SitePredicate::EvenCoords };
        let both = ActivationPolicy::Composite { policies: vec![grid.clone(), even.clone()] };
        assert!(grid.restricts(&ActivationPolicy::Null).is_ok());
        assert!(ActivationPolicy::Null.restricts(&ActivationPolicy::Null).is_ok());
        assert!(both.restricts(&grid).is_ok());
        assert!(grid.restricts(&even).is_err());
        assert!(ActivationPolicy::Null.restricts(&grid).is_err());
    }

    #[test]
    fn validation() {
        assert!(ActivationPolicy::DelayedGrid { times: vec![2.0, 1.0] }.validate(1).is_err());
        assert!(ActivationPolicy::FirstInHyperplane { axis: 3 }.validate(2).is_err());
        assert!(ActivationPolicy::FirstInHyperplane { axis: 1 }.validate(2).is_ok());
    }
}
