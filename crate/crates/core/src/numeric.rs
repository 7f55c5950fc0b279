//! Small numerical kernels shared by the norm and measure code.

/// Correctly rounded floating-point summation (Shewchuk's partials, the same
/// algorithm as Python's `math.fsum`).
///
/// The rounded total depends only on the multiset of addends, never on their
/// order, so two measures of the same atom set computed along different
/// paths compare equal bit for bit.
#[derive(Debug, Clone, Default)]
pub struct ExactSum {
    partials: Vec<f64>,
}

impl ExactSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, mut x: f64) {
        let mut kept = 0;
        for j in 0..self.partials.len() {
            let mut y = self.partials[j];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                self.partials[kept] = lo;
                kept += 1;
            }
            x = hi;
        }
        self.partials.truncate(kept);
        self.partials.push(x);
    }

    pub fn value(&self) -> f64 {
        let p = &self.partials;
        let mut n = p.len();
        if n == 0 {
            return 0.0;
        }
        n -= 1;
        let mut hi = p[n];
        let mut lo = 0.0;
        while n > 0 {
            let x = hi;
            let y = p[n - 1];
            n -= 1;
            hi = x + y;
            let y_rounded = hi - x;
            lo = y - y_rounded;
            if lo != 0.0 {
                break;
            }
        }
        // half-even correction when the remaining partials push the
        // rounding the other way
        if n > 0 && ((lo < 0.0 && p[n - 1] < 0.0) || (lo > 0.0 && p[n - 1] > 0.0)) {
            let y = lo * 2.0;
            let x = hi + y;
            if y == x - hi {
                hi = x;
            }
        }
        hi
    }
}

impl Extend<f64> for ExactSum {
    fn extend<T: IntoIterator<Item = f64>>(&mut self, iter: T) {
        for x in iter {
            self.add(x);
        }
    }
}

pub fn exact_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut acc = ExactSum::new();
    acc.extend(values);
    acc.value()
}

/// Final bracket of a monotone bisection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bracket {
    /// Largest point known to fail the predicate.
    pub lo: f64,
    /// Smallest point known to satisfy it.
    pub hi: f64,
    pub iterations: usize,
}

impl Bracket {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Bisects a monotone predicate (`false` below the threshold, `true` above).
///
/// Requires `!pred(lo)` and `pred(hi)`. Stops once `hi - lo <= rel_tol * hi`,
/// once the midpoint is no longer representable strictly inside the bracket,
/// or after `max_iter` halvings.
pub fn bisect<P>(mut pred: P, mut lo: f64, mut hi: f64, rel_tol: f64, max_iter: usize) -> Bracket
where
    P: FnMut(f64) -> bool,
{
    let mut iterations = 0;
    while iterations < max_iter && hi - lo > rel_tol * hi.abs() {
        let mid = lo + 0.5 * (hi - lo);
        if mid <= lo || mid >= hi {
            break;
        }
        iterations += 1;
        if pred(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Bracket { lo, hi, iterations }
}
