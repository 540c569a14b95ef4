//! Exact dyadic coordinates for brick meshes.
//!
//! All brick boundaries produced by bisection land on coordinates of the form
//! `num / 2^level`, measured in units of root cells along one axis. Keeping
//! those as integers makes face matching and hanging-node detection exact;
//! floating-point anchors are derived from them on demand.

/// Maximum bisection depth per axis. Keeps `num << level` inside u64.
pub const MAX_LEVEL: u32 = 48;

/// A dyadic coordinate `num / 2^level` in root-cell units, stored normalized
/// (num odd or level 0).
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct Dyadic {
    pub num: u64,
    pub level: u32,
}

impl Dyadic {
    pub fn new(num: u64, level: u32) -> Self {
        let mut d = Dyadic { num, level };
        d.normalize();
        d
    }

    fn normalize(&mut self) {
        while self.level > 0 && self.num % 2 == 0 {
            self.num /= 2;
            self.level -= 1;
        }
    }

    /// Numerator when written at the given (finer or equal) level.
    pub fn at_level(&self, level: u32) -> u64 {
        debug_assert!(level >= self.level);
        self.num << (level - self.level)
    }

    pub fn as_f64(&self) -> f64 {
        self.num as f64 / (1u64 << self.level) as f64
    }
}

impl PartialOrd for Dyadic {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Dyadic {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        let lvl = self.level.max(other.level);
        self.at_level(lvl).cmp(&other.at_level(lvl))
    }
}

/// The half-open dyadic interval `[num/2^level, (num+1)/2^level)`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct Interval {
    pub num: u64,
    pub level: u32,
}

impl Interval {
    pub fn root(index: u64) -> Self {
        Interval {
            num: index,
            level: 0,
        }
    }

    pub fn start(&self) -> Dyadic {
        Dyadic::new(self.num, self.level)
    }

    pub fn end(&self) -> Dyadic {
        Dyadic::new(self.num + 1, self.level)
    }

    /// The two halves produced by bisection.
    pub fn split(&self) -> (Interval, Interval) {
        let lvl = self.level + 1;
        (
            Interval {
                num: 2 * self.num,
                level: lvl,
            },
            Interval {
                num: 2 * self.num + 1,
                level: lvl,
            },
        )
    }

    /// Positive-measure overlap with another interval.
    pub fn overlaps(&self, other: &Interval) -> bool {
        self.start() < other.end() && other.start() < self.end()
    }

    /// Whether `other` is fully contained in `self` (as point sets).
    pub fn contains_interval(&self, other: &Interval) -> bool {
        self.start() <= other.start() && other.end() <= self.end()
    }

    pub fn contains_point(&self, p: Dyadic) -> bool {
        self.start() <= p && p < self.end()
    }

    pub fn width_f64(&self) -> f64 {
        1.0 / (1u64 << self.level) as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalization_and_order() {
        let a = Dyadic::new(4, 2); // = 1
        assert_eq!(a, Dyadic::new(1, 0));
        assert!(Dyadic::new(1, 1) < Dyadic::new(3, 2)); // 1/2 < 3/4
        assert!(Dyadic::new(1, 0) > Dyadic::new(7, 3)); // 1 > 7/8
        assert_eq!(Dyadic::new(3, 2).as_f64(), 0.75);
    }

    #[test]
    fn interval_split_and_overlap() {
        let i = Interval { num: 1, level: 0 }; // [1, 2)
        let (a, b) = i.split();
        assert_eq!(a, Interval { num: 2, level: 1 });
        assert_eq!(b, Interval { num: 3, level: 1 });
        assert!(i.contains_interval(&a) && i.contains_interval(&b));
        assert!(!a.overlaps(&b));
        assert!(a.overlaps(&i));
        assert!(i.contains_point(Dyadic::new(3, 1)));
        assert!(!i.contains_point(Dyadic::new(2, 0)));
    }
}
