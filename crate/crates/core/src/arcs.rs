//! Finite unions of half-open arcs on the angle circle `[0, 2π)`.

use std::f64::consts::TAU;

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Interval {
    pub start: f64,
    pub end: f64,
}

impl Interval {
    pub fn new(start: f64, end: f64) -> Self {
        Self { start, end }
    }

    pub fn len(&self) -> f64 {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        !(self.end > self.start)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.start <= x && x < self.end
    }
}

/// Sorted, pairwise disjoint, nonempty arcs within `[0, 2π)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AngleSet {
    arcs: Vec<Interval>,
    pub level: u32,
    pub lambda: f64,
}

impl AngleSet {
    pub fn full(level: u32, lambda: f64) -> Self {
        Self {
            arcs: vec![Interval::new(0.0, TAU)],
            level,
            lambda,
        }
    }

    pub fn empty(level: u32, lambda: f64) -> Self {
        Self {
            arcs: Vec::new(),
            level,
            lambda,
        }
    }

    /// Normalizes arbitrary intervals: clips to `[0, 2π)`, drops empty pieces,
    /// sorts and merges overlapping or touching arcs.
    pub fn from_intervals(level: u32, lambda: f64, intervals: impl IntoIterator<Item = Interval>) -> Self {
        Self {
            arcs: normalize(intervals),
            level,
            lambda,
        }
    }

    /// `[0, 2π)` minus the given holes. Holes may extend below `0` or above
    /// `2π`; those parts wrap around.
    pub fn from_holes(level: u32, lambda: f64, holes: impl IntoIterator<Item = Interval>) -> Self {
        let mut wrapped = Vec::new();
        for h in holes {
            if h.is_empty() {
                continue;
            }
            if h.len() >= TAU {
                wrapped.push(Interval::new(0.0, TAU));
                continue;
            }
            if h.start < 0.0 {
                wrapped.push(Interval::new(h.start + TAU, TAU));
                wrapped.push(Interval::new(0.0, h.end));
            } else if h.end > TAU {
                wrapped.push(Interval::new(h.start, TAU));
                wrapped.push(Interval::new(0.0, h.end - TAU));
            } else {
                wrapped.push(h);
            }
        }
        let removed = normalize(wrapped);
        Self {
            arcs: complement(&removed),
            level,
            lambda,
        }
    }

    pub fn arcs(&self) -> &[Interval] {
        &self.arcs
    }

    pub fn is_empty(&self) -> bool {
        self.arcs.is_empty()
    }

    pub fn measure(&self) -> f64 {
        self.arcs.iter().map(Interval::len).sum()
    }

    pub fn contains(&self, phi: f64) -> bool {
        let i = self.arcs.partition_point(|a| a.end <= phi);
        self.arcs.get(i).is_some_and(|a| a.contains(phi))
    }

    /// Linear (non-wrapping) gaps between arcs within `[0, 2π)`.
    pub fn gaps(&self) -> Vec<Interval> {
        complement(&self.arcs)
    }

    pub fn intersect(&self, other: &AngleSet) -> AngleSet {
        let mut out = Vec::new();
        let (mut i, mut j) = (0, 0);
        while i < self.arcs.len() && j < other.arcs.len() {
            let a = self.arcs[i];
            let b = other.arcs[j];
            let s = a.start.max(b.start);
            let e = a.end.min(b.end);
            if e > s {
                out.push(Interval::new(s, e));
            }
            if a.end < b.end {
                i += 1;
            } else {
                j += 1;
            }
        }
        AngleSet {
            arcs: out,
            level: self.level.max(other.level),
            lambda: self.lambda,
        }
    }

    /// Exact containment: every arc of `self` lies inside one arc of `other`.
    pub fn is_subset_of(&self, other: &AngleSet) -> bool {
        self.arcs.iter().all(|a| {
            other
                .arcs
                .iter()
                .any(|b| b.start <= a.start && a.end <= b.end)
        })
    }

    pub fn with_level(mut self, level: u32) -> Self {
        self.level = level;
        self
    }

    /// Checks the structural invariants.
    pub fn check(&self) -> Result<()> {
        for a in &self.arcs {
            if a.is_empty() || a.start < 0.0 || a.end > TAU {
                return Err(Error::InvalidArgument(format!("bad arc [{}, {})", a.start, a.end)));
            }
        }
        for w in self.arcs.windows(2) {
            if !(w[0].end < w[1].start) {
                return Err(Error::InvalidArgument("arcs overlap, touch or are unsorted".into()));
            }
        }
        Ok(())
    }

    /// `arc_start,arc_end` rows.
    pub fn to_csv(&self) -> String {
        intervals_csv(&self.arcs)
    }

    pub fn holes_csv(&self) -> String {
        intervals_csv(&self.gaps())
    }

    pub fn from_csv(level: u32, lambda: f64, text: &str) -> Result<Self> {
        let arcs = parse_intervals(text)?;
        let set = Self { arcs, level, lambda };
        set.check()?;
        Ok(set)
    }
}

pub fn intervals_csv(v: &[Interval]) -> String {
    let mut out = String::from("arc_start,arc_end\n");
    for a in v {
        out.push_str(&format!("{},{}\n", a.start, a.end));
    }
    out
}

pub fn parse_intervals(text: &str) -> Result<Vec<Interval>> {
    let mut lines = text.lines();
    match lines.next() {
        Some("arc_start,arc_end") => {}
        other => return Err(Error::Parse(format!("unexpected header {other:?}"))),
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let (a, b) = l
                .split_once(',')
                .ok_or_else(|| Error::Parse(format!("bad row {l:?}")))?;
            let p = |s: &str| s.trim().parse::<f64>().map_err(|e| Error::Parse(e.to_string()));
            Ok(Interval::new(p(a)?, p(b)?))
        })
        .collect()
}

fn normalize(intervals: impl IntoIterator<Item = Interval>) -> Vec<Interval> {
    let mut v: Vec<Interval> = intervals
        .into_iter()
        .map(|a| Interval::new(a.start.max(0.0), a.end.min(TAU)))
        .filter(|a| !a.is_empty())
        .collect();
    v.sort_by(|a, b| a.start.total_cmp(&b.start));
    let mut out: Vec<Interval> = Vec::with_capacity(v.len());
    for a in v {
        match out.last_mut() {
            Some(last) if a.start <= last.end => last.end = last.end.max(a.end),
            _ => out.push(a),
        }
    }
    out
}

fn complement(arcs: &[Interval]) -> Vec<Interval> {
    let mut out = Vec::new();
    let mut cursor = 0.0;
    for a in arcs {
        if a.start > cursor {
            out.push(Interval::new(cursor, a.start));
        }
        cursor = a.end;
    }
    if cursor < TAU {
        out.push(Interval::new(cursor, TAU));
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HoleStats {
    pub count: usize,
    /// Hole lengths, descending.
    pub lengths: Vec<f64>,
    pub removed: f64,
}

/// Holes of `set` counted on the circle: a gap touching `0` and one touching
/// `2π` form a single hole.
pub fn hole_statistics(set: &AngleSet) -> HoleStats {
    let gaps = set.gaps();
    let mut lengths: Vec<f64> = gaps.iter().map(Interval::len).collect();
    if gaps.len() >= 2 && gaps[0].start == 0.0 && gaps[gaps.len() - 1].end == TAU {
        let last = lengths.pop().expect("≥ 2 gaps");
        lengths[0] += last;
    }
    lengths.sort_by(|a, b| b.total_cmp(a));
    HoleStats {
        count: lengths.len(),
        removed: gaps.iter().map(Interval::len).sum(),
        lengths,
    }
}
