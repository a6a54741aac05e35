//! Finite configurations, the window/annulus geometry built on a cutoff
//! sequence `b_1 < b_2 < ...`, and projections onto windows.
//!
//! Points are stored as complex numbers so that one code path serves the
//! line and the plane; one-dimensional ensembles keep `im == 0` exactly.

use std::cmp::Ordering;
use std::fmt::Write as _;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// A finite multiset of points, kept sorted by `(re, im)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Configuration {
    points: Vec<Complex64>,
}

fn cmp_point(a: &Complex64, b: &Complex64) -> Ordering {
    a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im))
}

impl Configuration {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn from_points(mut points: Vec<Complex64>) -> Self {
        points.sort_by(cmp_point);
        Self { points }
    }

    pub fn from_reals<I: IntoIterator<Item = f64>>(xs: I) -> Self {
        Self::from_points(xs.into_iter().map(|x| Complex64::new(x, 0.0)).collect())
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    /// Real parts, in sorted order.
    pub fn reals(&self) -> Vec<f64> {
        self.points.iter().map(|z| z.re).collect()
    }

    pub fn is_real(&self) -> bool {
        self.points.iter().all(|z| z.im == 0.0)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Complex64> {
        self.points.iter()
    }

    /// Multiset union.
    pub fn union(&self, other: &Configuration) -> Configuration {
        let mut pts = self.points.clone();
        pts.extend_from_slice(&other.points);
        Configuration::from_points(pts)
    }

    /// `pi_A(s)`: the points lying in `w`, multiplicities preserved.
    pub fn restrict(&self, w: &Window) -> Configuration {
        Configuration {
            points: self.points.iter().copied().filter(|z| w.contains(*z)).collect(),
        }
    }

    /// `s(A)` for the window `A`.
    pub fn count(&self, w: &Window) -> usize {
        self.points.iter().filter(|z| w.contains(**z)).count()
    }

    /// CSV rows `re,im`, no header.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for z in &self.points {
            let _ = writeln!(out, "{},{}", z.re, z.im);
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut pts = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut it = line.split(',');
            let parse = |s: Option<&str>| -> Result<f64> {
                s.ok_or_else(|| invalid(format!("line {}: expected `re,im`", lineno + 1)))?
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| invalid(format!("line {}: {e}", lineno + 1)))
            };
            let re = parse(it.next())?;
            let im = parse(it.next())?;
            if it.next().is_some() {
                return Err(invalid(format!("line {}: too many fields", lineno + 1)));
            }
            pts.push(Complex64::new(re, im));
        }
        Ok(Self::from_points(pts))
    }

    /// JSON array `[[re,im],...]`.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("finite configuration serialises")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| invalid(format!("configuration JSON: {e}")))
    }
}

impl Serialize for Configuration {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let pairs: Vec<[f64; 2]> = self.points.iter().map(|z| [z.re, z.im]).collect();
        pairs.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Configuration {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let pairs = Vec::<[f64; 2]>::deserialize(d)?;
        Ok(Configuration::from_points(
            pairs.into_iter().map(|[re, im]| Complex64::new(re, im)).collect(),
        ))
    }
}

impl FromIterator<Complex64> for Configuration {
    fn from_iter<I: IntoIterator<Item = Complex64>>(iter: I) -> Self {
        Configuration::from_points(iter.into_iter().collect())
    }
}

/// Index of a cutoff; `Infinite` stands for `b = +inf` (the `s = inf` of
/// the complement window `S_{r inf}`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Shell {
    Index(usize),
    Infinite,
}

impl Shell {
    pub fn finite(self) -> Option<usize> {
        match self {
            Shell::Index(i) => Some(i),
            Shell::Infinite => None,
        }
    }
}

impl std::fmt::Display for Shell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Shell::Index(i) => write!(f, "{i}"),
            Shell::Infinite => f.write_str("inf"),
        }
    }
}

/// Increasing cutoffs `b_r`, `r >= 1`. Index 0 is the degenerate radius
/// `b_0 = 0`, so that the ball `S_r` is the annulus `S_{0r}`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AnnulusSequence {
    /// `b_r = r`.
    #[default]
    Identity,
    /// Explicit `b_1, ..., b_R`; indices beyond `R` are rejected.
    Explicit { cutoffs: Vec<f64> },
}

impl AnnulusSequence {
    pub fn explicit(cutoffs: Vec<f64>) -> Result<Self> {
        if cutoffs.is_empty() {
            return Err(invalid("annulus sequence needs at least one cutoff"));
        }
        if !cutoffs.iter().all(|b| b.is_finite()) {
            return Err(invalid("cutoffs must be finite"));
        }
        if cutoffs[0] < 1.0 {
            return Err(invalid(format!("b_1 = {} must be >= 1", cutoffs[0])));
        }
        if cutoffs.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("cutoffs must be strictly increasing"));
        }
        Ok(AnnulusSequence::Explicit { cutoffs })
    }

    /// Largest finite index, if bounded.
    pub fn max_index(&self) -> Option<usize> {
        match self {
            AnnulusSequence::Identity => None,
            AnnulusSequence::Explicit { cutoffs } => Some(cutoffs.len()),
        }
    }

    /// `b_r`, with `b_0 = 0` and `b_inf = inf`.
    pub fn radius(&self, shell: Shell) -> Result<f64> {
        match shell {
            Shell::Infinite => Ok(f64::INFINITY),
            Shell::Index(0) => Ok(0.0),
            Shell::Index(r) => match self {
                AnnulusSequence::Identity => Ok(r as f64),
                AnnulusSequence::Explicit { cutoffs } => cutoffs
                    .get(r - 1)
                    .copied()
                    .ok_or_else(|| invalid(format!("annulus index {r} beyond the {} cutoffs", cutoffs.len()))),
            },
        }
    }

    pub fn b(&self, r: usize) -> Result<f64> {
        self.radius(Shell::Index(r))
    }

    /// `S_r = {|s| < b_r}`.
    pub fn ball(&self, r: usize) -> Result<Window> {
        Ok(Window {
            kind: WindowKind::Ball(r),
            lo: 0.0,
            hi: self.b(r)?,
        })
    }

    /// `S_{rs} = {b_r <= |s| < b_s}`; requires `r < s`.
    pub fn annulus(&self, r: usize, s: usize) -> Result<Window> {
        if r >= s {
            return Err(invalid(format!("annulus({r},{s}) requires r < s")));
        }
        Ok(Window {
            kind: WindowKind::Annulus(r, s),
            lo: self.b(r)?,
            hi: self.b(s)?,
        })
    }

    /// `S_{r inf} = S_r^c`.
    pub fn complement(&self, r: usize) -> Result<Window> {
        Ok(Window {
            kind: WindowKind::Complement(r),
            lo: self.b(r)?,
            hi: f64::INFINITY,
        })
    }

    /// Generic shell `{b_lo <= |s| < b_hi}`; `lo = 0` gives a ball and
    /// `hi = Infinite` a complement.
    pub fn shell(&self, lo: usize, hi: Shell) -> Result<Window> {
        match hi {
            Shell::Infinite => self.complement(lo),
            Shell::Index(h) if lo == 0 => self.ball(h),
            Shell::Index(h) => self.annulus(lo, h),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowKind {
    Ball(usize),
    Annulus(usize, usize),
    Complement(usize),
}

/// A window resolved against an [`AnnulusSequence`]: the half-open shell
/// `lo <= |z| < hi`. Points exactly on `b_r` belong to the annulus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub kind: WindowKind,
    pub lo: f64,
    pub hi: f64,
}

impl Window {
    pub fn contains(&self, z: Complex64) -> bool {
        let m = z.norm();
        m >= self.lo && m < self.hi
    }

    /// Inner and outer shell indices.
    pub fn shells(&self) -> (usize, Shell) {
        match self.kind {
            WindowKind::Ball(r) => (0, Shell::Index(r)),
            WindowKind::Annulus(r, s) => (r, Shell::Index(s)),
            WindowKind::Complement(r) => (r, Shell::Infinite),
        }
    }

    /// Diameter of the window as a subset of the line.
    pub fn diameter(&self) -> f64 {
        2.0 * self.hi
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn seq() -> AnnulusSequence {
        AnnulusSequence::Identity
    }

    #[test]
    fn restrict_examples() {
        let s = seq();
        assert!(Configuration::empty().restrict(&s.ball(1).unwrap()).is_empty());
        let c = Configuration::from_reals([-1.0, 0.5, 3.0]);
        assert_eq!(c.restrict(&s.ball(1).unwrap()), Configuration::from_reals([0.5]));
        let c = Configuration::from_reals([0.5, 1.5, 3.0]);
        assert_eq!(c.restrict(&s.annulus(1, 2).unwrap()), Configuration::from_reals([1.5]));
    }

    #[test]
    fn count_examples() {
        let s = seq();
        assert_eq!(Configuration::empty().count(&s.ball(1).unwrap()), 0);
        assert_eq!(Configuration::from_reals([0.2, 0.2]).count(&s.ball(1).unwrap()), 2);
        assert_eq!(Configuration::from_reals([3.0]).count(&s.complement(1).unwrap()), 1);
    }

    #[test]
    fn boundary_point_belongs_to_annulus() {
        let s = seq();
        let c = Configuration::from_reals([1.0, -2.0]);
        assert_eq!(c.count(&s.ball(1).unwrap()), 0);
        assert_eq!(c.count(&s.annulus(1, 2).unwrap()), 1);
        assert_eq!(c.count(&s.complement(2).unwrap()), 1);
    }

    #[test]
    fn explicit_sequence_validation() {
        assert!(AnnulusSequence::explicit(vec![0.5, 2.0]).is_err());
        assert!(AnnulusSequence::explicit(vec![1.0, 1.0]).is_err());
        assert!(AnnulusSequence::explicit(vec![]).is_err());
        let s = AnnulusSequence::explicit(vec![1.0, 2.5, 4.0]).unwrap();
        assert_eq!(s.b(2).unwrap(), 2.5);
        assert_eq!(s.b(0).unwrap(), 0.0);
        assert!(s.b(4).is_err());
        assert!(s.annulus(2, 2).is_err());
    }

    #[test]
    fn csv_and_json_io() {
        let c = Configuration::from_points(vec![Complex64::new(1.5, -0.25), Complex64::new(-3.0, 0.0)]);
        assert_eq!(c.to_json(), "[[-3.0,0.0],[1.5,-0.25]]");
        assert_eq!(Configuration::from_json(&c.to_json()).unwrap(), c);
        assert_eq!(c.to_csv(), "-3,0\n1.5,-0.25\n");
        assert_eq!(Configuration::from_csv(&c.to_csv()).unwrap(), c);
        assert!(Configuration::from_csv("1,2,3").is_err());
        assert!(Configuration::from_csv("abc,1").is_err());
    }

    fn arb_config() -> impl Strategy<Value = Configuration> {
        prop::collection::vec((-6.0f64..6.0, prop_oneof![Just(0.0), -3.0f64..3.0]), 0..30)
            .prop_map(|v| Configuration::from_points(v.into_iter().map(|(a, b)| Complex64::new(a, b)).collect()))
    }

    proptest! {
        #[test]
        fn ball_and_complement_partition(c in arb_config(), r in 1usize..5) {
            let s = seq();
            let inside = c.restrict(&s.ball(r).unwrap());
            let outside = c.restrict(&s.complement(r).unwrap());
            prop_assert_eq!(inside.union(&outside), c);
        }

        #[test]
        fn restrict_is_idempotent(c in arb_config(), r in 1usize..4, d in 1usize..3) {
            let s = seq();
            for w in [s.ball(r).unwrap(), s.annulus(r, r + d).unwrap(), s.complement(r).unwrap()] {
                let once = c.restrict(&w);
                prop_assert_eq!(once.restrict(&w), once.clone());
                prop_assert_eq!(c.count(&w), once.len());
            }
        }

        #[test]
        fn annulus_counts_add(c in arb_config(), r in 1usize..4, d in 1usize..3) {
            let s = seq();
            let t = r + d;
            prop_assert_eq!(
                c.count(&s.annulus(r, t).unwrap()) + c.count(&s.ball(r).unwrap()),
                c.count(&s.ball(t).unwrap())
            );
        }
    }
}
