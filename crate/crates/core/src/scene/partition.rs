//! Floor-plan partition by straight wall-aligned lines.
//!
//! Each rule is a half-plane `a*x + b*y <= c`. A point's sign pattern over
//! all rules is looked up in an ordered decision table; the first matching
//! entry names the region.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HalfPlane {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl HalfPlane {
    pub fn x_at_most(c: f64) -> Self {
        HalfPlane { a: 1.0, b: 0.0, c }
    }

    pub fn y_at_most(c: f64) -> Self {
        HalfPlane { a: 0.0, b: 1.0, c }
    }

    pub fn holds(&self, x: f64, y: f64) -> bool {
        self.a * x + self.b * y <= self.c
    }
}

/// Required outcome of one rule inside a decision entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sign {
    /// The rule holds (`<=`).
    Inside,
    /// The rule does not hold (`>`).
    Outside,
    Any,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionEntry {
    pub pattern: Vec<Sign>,
    pub region: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionPartition {
    /// Floor-plan bounds `[min_x, min_y, max_x, max_y]`.
    pub bounds: [f64; 4],
    pub rules: Vec<HalfPlane>,
    pub table: Vec<DecisionEntry>,
    pub regions: Vec<String>,
}

/// Axis-aligned floor rectangle carrying a region label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledRect {
    pub label: String,
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl RegionPartition {
    pub fn single(label: &str, bounds: [f64; 4]) -> Result<Self> {
        let p = RegionPartition {
            bounds,
            rules: Vec::new(),
            table: vec![DecisionEntry {
                pattern: Vec::new(),
                region: 0,
            }],
            regions: vec![label.to_string()],
        };
        p.validate()?;
        Ok(p)
    }

    /// Builds the line rules and decision table for rectangles that tile
    /// their common bounding rectangle. Shared edges belong to the
    /// lower-coordinate side (`x <= c` holds on the line).
    pub fn from_rects(rects: &[LabeledRect]) -> Result<Self> {
        if rects.is_empty() {
            return Err(Error::InvalidInput(
                "partition needs at least one region".into(),
            ));
        }
        let mut bounds = [
            f64::INFINITY,
            f64::INFINITY,
            f64::NEG_INFINITY,
            f64::NEG_INFINITY,
        ];
        for r in rects {
            bounds[0] = bounds[0].min(r.min[0]);
            bounds[1] = bounds[1].min(r.min[1]);
            bounds[2] = bounds[2].max(r.max[0]);
            bounds[3] = bounds[3].max(r.max[1]);
        }
        let mut xs: Vec<f64> = Vec::new();
        let mut ys: Vec<f64> = Vec::new();
        for r in rects {
            for x in [r.min[0], r.max[0]] {
                if x > bounds[0] && x < bounds[2] && !xs.contains(&x) {
                    xs.push(x);
                }
            }
            for y in [r.min[1], r.max[1]] {
                if y > bounds[1] && y < bounds[3] && !ys.contains(&y) {
                    ys.push(y);
                }
            }
        }
        xs.sort_by(f64::total_cmp);
        ys.sort_by(f64::total_cmp);
        let rules: Vec<HalfPlane> = xs
            .iter()
            .map(|&x| HalfPlane::x_at_most(x))
            .chain(ys.iter().map(|&y| HalfPlane::y_at_most(y)))
            .collect();

        let mut regions: Vec<String> = Vec::new();
        let mut table = Vec::new();
        for r in rects {
            let region = match regions.iter().position(|l| l == &r.label) {
                Some(i) => i,
                None => {
                    regions.push(r.label.clone());
                    regions.len() - 1
                }
            };
            let sign = |c: f64, lo: f64, hi: f64| {
                if c >= hi {
                    Sign::Inside
                } else if c <= lo {
                    Sign::Outside
                } else {
                    Sign::Any
                }
            };
            let pattern = xs
                .iter()
                .map(|&x| sign(x, r.min[0], r.max[0]))
                .chain(ys.iter().map(|&y| sign(y, r.min[1], r.max[1])))
                .collect();
            table.push(DecisionEntry { pattern, region });
        }
        let p = RegionPartition {
            bounds,
            rules,
            table,
            regions,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.regions.is_empty() {
            return Err(Error::InvalidInput("partition has no regions".into()));
        }
        let [x0, y0, x1, y1] = self.bounds;
        if !(x1 > x0 && y1 > y0) {
            return Err(Error::InvalidBounds(format!(
                "degenerate partition bounds {:?}",
                self.bounds
            )));
        }
        for e in &self.table {
            if e.pattern.len() != self.rules.len() {
                return Err(Error::InvalidInput(
                    "decision entry length differs from rule count".into(),
                ));
            }
            if e.region >= self.regions.len() {
                return Err(Error::InvalidInput(format!(
                    "decision entry names region {}",
                    e.region
                )));
            }
        }
        let mut seen = std::collections::HashSet::new();
        if !self.regions.iter().all(|r| !r.is_empty() && seen.insert(r)) {
            return Err(Error::InvalidLabel(
                "region labels must be unique and non-empty".into(),
            ));
        }
        Ok(())
    }

    pub fn region_count(&self) -> usize {
        self.regions.len()
    }

    pub fn in_bounds(&self, x: f64, y: f64) -> bool {
        let [x0, y0, x1, y1] = self.bounds;
        x >= x0 && x <= x1 && y >= y0 && y <= y1
    }

    pub fn region_index(&self, x: f64, y: f64) -> Result<usize> {
        if !self.in_bounds(x, y) || !x.is_finite() || !y.is_finite() {
            return Err(Error::OutOfBounds(format!(
                "({x}, {y}) outside partition bounds {:?}",
                self.bounds
            )));
        }
        self.table
            .iter()
            .find(|e| {
                e.pattern.iter().zip(&self.rules).all(|(s, rule)| match s {
                    Sign::Any => true,
                    Sign::Inside => rule.holds(x, y),
                    Sign::Outside => !rule.holds(x, y),
                })
            })
            .map(|e| e.region)
            .ok_or_else(|| Error::OutOfBounds(format!("({x}, {y}) matches no decision entry")))
    }

    pub fn region_of(&self, x: f64, y: f64) -> Result<&str> {
        self.region_index(x, y).map(|i| self.regions[i].as_str())
    }

    /// Like [`region_index`](Self::region_index) after clamping into bounds;
    /// back-projected wall points can land a rounding error outside.
    pub fn region_index_clamped(&self, x: f64, y: f64) -> Result<usize> {
        let [x0, y0, x1, y1] = self.bounds;
        self.region_index(x.clamp(x0, x1), y.clamp(y0, y1))
    }
}
