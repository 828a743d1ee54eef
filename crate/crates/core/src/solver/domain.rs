use std::fmt;

/// Finite set of integers stored as sorted, disjoint, non-adjacent closed
/// intervals.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Domain {
    ranges: Vec<(i64, i64)>,
}

impl Domain {
    pub fn empty() -> Domain {
        Domain { ranges: Vec::new() }
    }

    pub fn range(lo: i64, hi: i64) -> Domain {
        if lo > hi {
            Domain::empty()
        } else {
            Domain { ranges: vec![(lo, hi)] }
        }
    }

    pub fn singleton(v: i64) -> Domain {
        Domain { ranges: vec![(v, v)] }
    }

    pub fn from_values(values: impl IntoIterator<Item = i64>) -> Domain {
        let mut vs: Vec<i64> = values.into_iter().collect();
        vs.sort_unstable();
        vs.dedup();
        let mut ranges: Vec<(i64, i64)> = Vec::new();
        for v in vs {
            match ranges.last_mut() {
                Some((_, hi)) if hi.checked_add(1) == Some(v) => *hi = v,
                _ => ranges.push((v, v)),
            }
        }
        Domain { ranges }
    }

    fn from_ranges(mut raw: Vec<(i64, i64)>) -> Domain {
        raw.retain(|(a, b)| a <= b);
        raw.sort_unstable();
        let mut ranges: Vec<(i64, i64)> = Vec::with_capacity(raw.len());
        for (a, b) in raw {
            match ranges.last_mut() {
                Some((_, hi)) if (*hi as i128) + 1 >= a as i128 => *hi = (*hi).max(b),
                _ => ranges.push((a, b)),
            }
        }
        Domain { ranges }
    }

    pub fn ranges(&self) -> &[(i64, i64)] {
        &self.ranges
    }

    /// The `k`-th smallest value.
    pub fn nth(&self, mut k: u64) -> Option<i64> {
        for &(a, b) in &self.ranges {
            let len = (b as i128 - a as i128 + 1) as u128;
            if (k as u128) < len {
                return Some((a as i128 + k as i128) as i64);
            }
            k -= len as u64;
        }
        None
    }

    pub fn is_empty(&self) -> bool {
        self.ranges.is_empty()
    }

    pub fn min(&self) -> Option<i64> {
        self.ranges.first().map(|r| r.0)
    }

    pub fn max(&self) -> Option<i64> {
        self.ranges.last().map(|r| r.1)
    }

    /// Lower bound; callers must not ask on an empty domain.
    pub fn lb(&self) -> i64 {
        self.ranges[0].0
    }

    pub fn ub(&self) -> i64 {
        self.ranges[self.ranges.len() - 1].1
    }

    /// Number of values, saturating at `u64::MAX`.
    pub fn size(&self) -> u64 {
        self.ranges
            .iter()
            .fold(0u64, |acc, (a, b)| acc.saturating_add(((*b as i128 - *a as i128) as u64).saturating_add(1)))
    }

    pub fn fixed(&self) -> Option<i64> {
        match self.ranges.as_slice() {
            [(a, b)] if a == b => Some(*a),
            _ => None,
        }
    }

    pub fn contains(&self, v: i64) -> bool {
        match self.ranges.binary_search_by(|(a, b)| {
            if *b < v {
                std::cmp::Ordering::Less
            } else if *a > v {
                std::cmp::Ordering::Greater
            } else {
                std::cmp::Ordering::Equal
            }
        }) {
            Ok(_) => true,
            Err(_) => false,
        }
    }

    pub fn values(&self) -> impl Iterator<Item = i64> + '_ {
        self.ranges.iter().flat_map(|&(a, b)| a..=b)
    }

    pub fn intersect(&self, other: &Domain) -> Domain {
        let (mut i, mut j) = (0, 0);
        let mut out = Vec::new();
        while i < self.ranges.len() && j < other.ranges.len() {
            let (a1, b1) = self.ranges[i];
            let (a2, b2) = other.ranges[j];
            let lo = a1.max(a2);
            let hi = b1.min(b2);
            if lo <= hi {
                out.push((lo, hi));
            }
            if b1 < b2 {
                i += 1;
            } else {
                j += 1;
            }
        }
        Domain { ranges: out }
    }

    pub fn union(&self, other: &Domain) -> Domain {
        let mut all = self.ranges.clone();
        all.extend_from_slice(&other.ranges);
        Domain::from_ranges(all)
    }

    pub fn subtract(&self, other: &Domain) -> Domain {
        let mut out = Vec::new();
        let mut j = 0;
        for &(a, b) in &self.ranges {
            let mut lo = a;
            while j < other.ranges.len() && other.ranges[j].1 < lo {
                j += 1;
            }
            let mut k = j;
            let mut done = false;
            while k < other.ranges.len() && other.ranges[k].0 <= b {
                let (c, d) = other.ranges[k];
                if c > lo {
                    out.push((lo, c - 1));
                }
                if d >= b {
                    done = true;
                    break;
                }
                lo = d + 1;
                k += 1;
            }
            if !done && lo <= b {
                out.push((lo, b));
            }
        }
        Domain { ranges: out }
    }

    pub fn remove(&self, v: i64) -> Domain {
        if !self.contains(v) {
            return self.clone();
        }
        self.subtract(&Domain::singleton(v))
    }

    pub fn with_min(&self, lo: i64) -> Domain {
        match self.min() {
            Some(m) if m >= lo => self.clone(),
            _ => self.intersect(&Domain::range(lo, i64::MAX)),
        }
    }

    pub fn with_max(&self, hi: i64) -> Domain {
        match self.max() {
            Some(m) if m <= hi => self.clone(),
            _ => self.intersect(&Domain::range(i64::MIN, hi)),
        }
    }

    pub fn is_subset(&self, other: &Domain) -> bool {
        self.subtract(other).is_empty()
    }

    pub fn is_disjoint(&self, other: &Domain) -> bool {
        self.intersect(other).is_empty()
    }
}

impl fmt::Debug for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (a, b)) in self.ranges.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            if a == b {
                write!(f, "{a}")?;
            } else {
                write!(f, "{a}..{b}")?;
            }
        }
        f.write_str("}")
    }
}
