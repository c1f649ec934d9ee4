use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{neg_plog2p, Scalar};

/// Largest frame size; subsets are encoded as `u32` bit masks.
pub const MAX_CLASSES: usize = 20;

/// Tolerance on the total mass.
const MASS_TOL: f64 = 1e-9;

/// Subset of the label frame, bit `c` set when class `c` belongs to it.
pub type FocalSet = u32;

/// Basic belief assignment over subsets of a `num_classes`-element frame.
///
/// Only focal sets (strictly positive mass) are stored. The empty set never
/// carries mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct MassFunction<F: Scalar> {
    num_classes: usize,
    masses: BTreeMap<FocalSet, F>,
}

fn check_frame(num_classes: usize) -> Result<()> {
    if num_classes == 0 || num_classes > MAX_CLASSES {
        Err(Error::InvalidMass(format!(
            "frame size {num_classes} outside 1..={MAX_CLASSES}"
        )))
    } else {
        Ok(())
    }
}

pub fn full_set(num_classes: usize) -> FocalSet {
    if num_classes >= 32 {
        u32::MAX
    } else {
        (1u32 << num_classes) - 1
    }
}

pub fn singleton(class: usize) -> FocalSet {
    1 << class
}

pub fn cardinality(set: FocalSet) -> u32 {
    set.count_ones()
}

impl<F: Scalar> MassFunction<F> {
    /// Validates and stores a mass assignment. Zero entries are dropped.
    pub fn new(num_classes: usize, entries: impl IntoIterator<Item = (FocalSet, F)>) -> Result<Self> {
        check_frame(num_classes)?;
        let full = full_set(num_classes);
        let mut masses = BTreeMap::new();
        for (set, m) in entries {
            if !m.is_finite() || m < F::zero() || m > F::one() + F::lit(MASS_TOL) {
                return Err(Error::InvalidMass(format!("mass {m} on set {set:#b}")));
            }
            if set & !full != 0 {
                return Err(Error::InvalidMass(format!(
                    "set {set:#b} outside a frame of {num_classes} classes"
                )));
            }
            if m == F::zero() {
                continue;
            }
            if set == 0 {
                return Err(Error::InvalidMass("positive mass on the empty set".into()));
            }
            let e = masses.entry(set).or_insert_with(F::zero);
            *e = *e + m;
        }
        let total: F = masses.values().copied().sum();
        if (total - F::one()).abs() > F::lit(MASS_TOL) {
            return Err(Error::InvalidMass(format!("masses sum to {total}")));
        }
        Ok(MassFunction {
            num_classes,
            masses,
        })
    }

    /// All mass on the whole frame: total ignorance.
    pub fn vacuous(num_classes: usize) -> Result<Self> {
        Self::new(num_classes, [(full_set(num_classes), F::one())])
    }

    /// All mass on one class.
    pub fn categorical(num_classes: usize, class: usize) -> Result<Self> {
        if class >= num_classes {
            return Err(Error::InvalidMass(format!("class {class} outside frame")));
        }
        Self::new(num_classes, [(singleton(class), F::one())])
    }

    /// Simple support function: `weight` on `focal`, the rest on the frame.
    pub fn simple(num_classes: usize, focal: FocalSet, weight: F) -> Result<Self> {
        let full = full_set(num_classes);
        if focal == full {
            return Self::vacuous(num_classes);
        }
        Self::new(num_classes, [(focal, weight), (full, F::one() - weight)])
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn mass(&self, set: FocalSet) -> F {
        self.masses.get(&set).copied().unwrap_or_else(F::zero)
    }

    pub fn focal_sets(&self) -> impl Iterator<Item = (FocalSet, F)> + '_ {
        self.masses.iter().map(|(&s, &m)| (s, m))
    }

    pub fn total(&self) -> F {
        self.masses.values().copied().sum()
    }

    /// Mass the conjunctive combination with `other` assigns to the empty set.
    pub fn conflict(&self, other: &Self) -> F {
        let mut k = F::zero();
        for (&a, &ma) in &self.masses {
            for (&b, &mb) in &other.masses {
                if a & b == 0 {
                    k = k + ma * mb;
                }
            }
        }
        k
    }

    /// Dempster's rule: conjunctive combination renormalized by `1 - conflict`.
    pub fn combine(&self, other: &Self) -> Result<Self> {
        if self.num_classes != other.num_classes {
            return Err(Error::InvalidMass(format!(
                "cannot combine frames of {} and {} classes",
                self.num_classes, other.num_classes
            )));
        }
        let mut out: BTreeMap<FocalSet, F> = BTreeMap::new();
        let mut conflict = F::zero();
        for (&a, &ma) in &self.masses {
            for (&b, &mb) in &other.masses {
                let prod = ma * mb;
                let inter = a & b;
                if inter == 0 {
                    conflict = conflict + prod;
                } else {
                    let e = out.entry(inter).or_insert_with(F::zero);
                    *e = *e + prod;
                }
            }
        }
        let norm = F::one() - conflict;
        if norm <= F::zero() || out.is_empty() {
            return Err(Error::TotalConflict);
        }
        for v in out.values_mut() {
            *v = *v / norm;
        }
        out.retain(|_, v| *v > F::zero());
        Ok(MassFunction {
            num_classes: self.num_classes,
            masses: out,
        })
    }

    /// Pignistic probability of each singleton: every focal mass split evenly
    /// among its members.
    pub fn betp(&self) -> Vec<F> {
        let mut p = vec![F::zero(); self.num_classes];
        for (&set, &m) in &self.masses {
            let share = m / F::lit(f64::from(cardinality(set)));
            for (c, pc) in p.iter_mut().enumerate() {
                if set >> c & 1 == 1 {
                    *pc = *pc + share;
                }
            }
        }
        p
    }

    /// Sum of the pignistic singleton probabilities over `set`.
    pub fn betp_of(&self, betp: &[F], set: FocalSet) -> F {
        betp.iter()
            .enumerate()
            .filter(|(c, _)| set >> c & 1 == 1)
            .map(|(_, &p)| p)
            .sum()
    }

    /// Non-specificity `sum_A m(A) log2 |A|`, in bits.
    pub fn nonspecificity(&self) -> F {
        self.masses
            .iter()
            .map(|(&set, &m)| m * F::lit(f64::from(cardinality(set))).log2())
            .sum()
    }

    /// Discord `-sum_A m(A) log2 BetP(A)`, in bits.
    pub fn discord(&self) -> F {
        let betp = self.betp();
        self.masses
            .iter()
            .map(|(&set, &m)| {
                let p = self.betp_of(&betp, set).min(F::one());
                if m == F::zero() || p >= F::one() {
                    F::zero()
                } else {
                    -m * p.log2()
                }
            })
            .sum()
    }

    /// Shannon entropy of the pignistic distribution, in bits.
    pub fn pignistic_entropy(&self) -> F {
        self.betp().into_iter().map(neg_plog2p).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const A: FocalSet = 0b01;
    const B: FocalSet = 0b10;
    const Y: FocalSet = 0b11;

    fn m2(entries: &[(FocalSet, f64)]) -> MassFunction<f64> {
        MassFunction::new(2, entries.iter().copied()).unwrap()
    }

    #[test]
    fn vacuous_is_neutral() {
        let v = MassFunction::<f64>::vacuous(2).unwrap();
        let m = m2(&[(A, 0.3), (B, 0.5), (Y, 0.2)]);
        assert_eq!(v.combine(&m).unwrap(), m);
    }

    #[test]
    fn categorical_agreement_is_idempotent() {
        let d = MassFunction::<f64>::categorical(3, 1).unwrap();
        assert_eq!(d.combine(&d).unwrap(), d);
    }

    #[test]
    fn two_simple_masses_hand_enumeration() {
        // products: {a}∩{b}=∅ 0.3, {a}∩Y=0.3, Y∩{b}=0.2, Y∩Y=0.2
        let m1 = m2(&[(A, 0.6), (Y, 0.4)]);
        let m2_ = m2(&[(B, 0.5), (Y, 0.5)]);
        assert!((m1.conflict(&m2_) - 0.3).abs() < 1e-15);
        let c = m1.combine(&m2_).unwrap();
        assert!((c.mass(A) - 0.3 / 0.7).abs() < 1e-12);
        assert!((c.mass(B) - 0.2 / 0.7).abs() < 1e-12);
        assert!((c.mass(Y) - 0.2 / 0.7).abs() < 1e-12);
    }

    #[test]
    fn total_conflict_is_an_error() {
        let a = MassFunction::<f64>::categorical(2, 0).unwrap();
        let b = MassFunction::<f64>::categorical(2, 1).unwrap();
        assert!(matches!(a.combine(&b), Err(Error::TotalConflict)));
        let c = MassFunction::<f64>::categorical(3, 1).unwrap();
        assert!(a.combine(&c).is_err());
    }

    #[test]
    fn betp_examples() {
        assert_eq!(m2(&[(Y, 1.0)]).betp(), vec![0.5, 0.5]);
        let p = m2(&[(A, 0.6), (Y, 0.4)]).betp();
        assert!((p[0] - 0.8).abs() < 1e-15 && (p[1] - 0.2).abs() < 1e-15);
        assert_eq!(m2(&[(A, 1.0)]).betp(), vec![1.0, 0.0]);
    }

    #[test]
    fn nonspecificity_examples() {
        let v = MassFunction::<f64>::vacuous(4).unwrap();
        assert!((v.nonspecificity() - 2.0).abs() < 1e-15);
        assert_eq!(m2(&[(A, 0.4), (B, 0.6)]).nonspecificity(), 0.0);
        assert!((m2(&[(Y, 0.5), (A, 0.5)]).nonspecificity() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn discord_examples() {
        assert_eq!(m2(&[(A, 1.0)]).discord(), 0.0);
        assert_eq!(MassFunction::<f64>::vacuous(4).unwrap().discord(), 0.0);
        assert!((m2(&[(A, 0.5), (B, 0.5)]).discord() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn validation() {
        assert!(MassFunction::<f64>::new(2, [(A, 0.5)]).is_err());
        assert!(MassFunction::<f64>::new(2, [(0, 0.5), (A, 0.5)]).is_err());
        assert!(MassFunction::<f64>::new(2, [(0b100, 1.0)]).is_err());
        assert!(MassFunction::<f64>::new(2, [(A, -0.1), (B, 1.1)]).is_err());
        assert!(MassFunction::<f64>::new(21, [(1, 1.0)]).is_err());
        let m = MassFunction::<f64>::new(2, [(A, 0.0), (B, 1.0)]).unwrap();
        assert_eq!(m.focal_sets().count(), 1);
    }

    #[test]
    fn works_in_f32() {
        let m = MassFunction::<f32>::new(2, [(A, 0.5), (B, 0.5)]).unwrap();
        assert!((m.discord() - 1.0).abs() < 1e-6);
    }
}
