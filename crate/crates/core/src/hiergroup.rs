//! The hierarchical group of order `M`: finite digit sequences mod `M` with
//! componentwise addition and the ultrametric "highest differing digit" norm.

use std::fmt;

use rand::Rng;

use crate::error::{Error, Result};

/// Hierarchical distance level (`L`, `j`, `k` in the formulas).
pub type Radius = u64;

/// A point of the hierarchical group, stored in canonical form.
///
/// `digits[i]` is the coordinate at level `i + 1`. Trailing zeros are
/// stripped, so two elements are equal iff their representations are.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct GroupElement {
    order: u32,
    digits: Vec<u32>,
}

impl GroupElement {
    pub fn new(order: u32, digits: Vec<u32>) -> Result<Self> {
        check_order(order)?;
        if let Some(&d) = digits.iter().find(|&&d| d >= order) {
            return Err(Error::InvalidParameter(format!(
                "digit {d} out of range for order {order}"
            )));
        }
        Ok(Self::canonical(order, digits))
    }

    pub fn zero(order: u32) -> Self {
        Self {
            order,
            digits: Vec::new(),
        }
    }

    fn canonical(order: u32, mut digits: Vec<u32>) -> Self {
        while digits.last() == Some(&0) {
            digits.pop();
        }
        Self { order, digits }
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn digits(&self) -> &[u32] {
        &self.digits
    }

    /// Digit at 1-based level `level`; zero beyond the stored support.
    pub fn digit(&self, level: Radius) -> u32 {
        match level.checked_sub(1) {
            Some(i) => self.digits.get(i as usize).copied().unwrap_or(0),
            None => 0,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.digits.is_empty()
    }

    /// Largest 1-based level carrying a nonzero digit, 0 for the identity.
    pub fn norm(&self) -> Radius {
        self.digits.len() as Radius
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.same_order(other)?;
        let m = self.order;
        let (long, short) = if self.digits.len() >= other.digits.len() {
            (&self.digits, &other.digits)
        } else {
            (&other.digits, &self.digits)
        };
        let mut digits = long.clone();
        for (d, s) in digits.iter_mut().zip(short) {
            *d = (*d + *s) % m;
        }
        Ok(Self::canonical(m, digits))
    }

    pub fn negate(&self) -> Self {
        let m = self.order;
        let digits = self.digits.iter().map(|&d| (m - d) % m).collect();
        Self::canonical(m, digits)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.negate())
    }

    /// Hierarchical distance `|x - y|`.
    pub fn distance(&self, other: &Self) -> Result<Radius> {
        Ok(self.sub(other)?.norm())
    }

    fn same_order(&self, other: &Self) -> Result<()> {
        if self.order != other.order {
            return Err(Error::OrderMismatch(self.order, other.order));
        }
        Ok(())
    }
}

impl fmt::Debug for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Ω{}{:?}", self.order, self.digits)
    }
}

pub(crate) fn check_order(order: u32) -> Result<()> {
    if order < 2 {
        return Err(Error::InvalidParameter(format!(
            "group order must be at least 2, got {order}"
        )));
    }
    Ok(())
}

/// `|B_L| = M^L`, or an error when it does not fit in 128 bits.
pub fn ball_size(order: u32, radius: Radius) -> Result<u128> {
    check_order(order)?;
    let exp = u32::try_from(radius).map_err(|_| Error::Overflow("ball size"))?;
    (order as u128)
        .checked_pow(exp)
        .ok_or(Error::Overflow("ball size"))
}

/// `|S_L| = (M-1) M^(L-1)` for `L >= 1`.
pub fn sphere_size(order: u32, radius: Radius) -> Result<u128> {
    if radius == 0 {
        return Err(Error::InvalidParameter(
            "sphere of radius 0 is not a shell".into(),
        ));
    }
    let inner = ball_size(order, radius - 1)?;
    inner
        .checked_mul(order as u128 - 1)
        .ok_or(Error::Overflow("sphere size"))
}

/// Uniform point at distance exactly `j` from the origin.
pub fn sample_sphere<R: Rng + ?Sized>(order: u32, j: Radius, rng: &mut R) -> Result<GroupElement> {
    check_order(order)?;
    if j == 0 {
        return Err(Error::InvalidParameter(
            "cannot sample the sphere of radius 0".into(),
        ));
    }
    let len = usize::try_from(j).map_err(|_| Error::Overflow("sphere radius"))?;
    let mut digits = Vec::with_capacity(len);
    for _ in 1..len {
        digits.push(rng.random_range(0..order));
    }
    digits.push(rng.random_range(1..order));
    Ok(GroupElement { order, digits })
}

/// Uniform point of the ball `B_radius`.
pub fn sample_ball<R: Rng + ?Sized>(order: u32, radius: Radius, rng: &mut R) -> Result<GroupElement> {
    check_order(order)?;
    let digits = (0..radius).map(|_| rng.random_range(0..order)).collect();
    Ok(GroupElement::canonical(order, digits))
}

/// Every element of `B_radius`, in lexicographic digit order (level 1 fastest).
pub fn ball_elements(order: u32, radius: Radius) -> Result<BallElements> {
    let total = ball_size(order, radius)?;
    Ok(BallElements {
        order,
        len: radius as usize,
        next: 0,
        total,
    })
}

pub struct BallElements {
    order: u32,
    len: usize,
    next: u128,
    total: u128,
}

impl Iterator for BallElements {
    type Item = GroupElement;

    fn next(&mut self) -> Option<GroupElement> {
        if self.next >= self.total {
            return None;
        }
        let mut code = self.next;
        self.next += 1;
        let m = self.order as u128;
        let mut digits = Vec::with_capacity(self.len);
        for _ in 0..self.len {
            digits.push((code % m) as u32);
            code /= m;
        }
        Some(GroupElement::canonical(self.order, digits))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = (self.total - self.next) as usize;
        (left, Some(left))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn el(m: u32, d: &[u32]) -> GroupElement {
        GroupElement::new(m, d.to_vec()).unwrap()
    }

    #[test]
    fn addition_examples() {
        assert_eq!(el(2, &[1, 0, 1]).add(&el(2, &[1, 1, 0])).unwrap(), el(2, &[0, 1, 1]));
        assert_eq!(el(3, &[2]).add(&el(3, &[2])).unwrap(), el(3, &[1]));
        let x = el(5, &[4, 0, 3]);
        assert_eq!(x.add(&GroupElement::zero(5)).unwrap(), x);
    }

    #[test]
    fn canonical_form_strips_trailing_zeros() {
        let x = el(3, &[1, 2, 0, 0]);
        assert_eq!(x.digits(), &[1, 2]);
        assert_eq!(x, el(3, &[1, 2]));
        assert!(el(4, &[0, 0]).is_zero());
        // cancellation in the top digit shrinks the support
        assert_eq!(el(3, &[1, 1]).add(&el(3, &[0, 2])).unwrap(), el(3, &[1]));
    }

    #[test]
    fn order_mismatch_and_bad_digits() {
        assert!(matches!(
            el(2, &[1]).add(&el(3, &[1])),
            Err(Error::OrderMismatch(2, 3))
        ));
        assert!(GroupElement::new(3, vec![3]).is_err());
        assert!(GroupElement::new(1, vec![]).is_err());
    }

    #[test]
    fn norm_examples() {
        assert_eq!(el(2, &[0, 0, 1]).norm(), 3);
        assert_eq!(GroupElement::zero(7).norm(), 0);
        let x = el(2, &[1, 0, 1]);
        assert_eq!(x.negate(), x);
        let y = el(2, &[1, 1]);
        assert_eq!(x.distance(&y).unwrap(), x.add(&y).unwrap().norm());
    }

    #[test]
    fn counting_formulas() {
        assert_eq!(ball_size(2, 3).unwrap(), 8);
        assert_eq!(sphere_size(2, 3).unwrap(), 4);
        assert_eq!(ball_size(3, 1).unwrap(), 3);
        assert_eq!(sphere_size(3, 1).unwrap(), 2);
        assert!(sphere_size(3, 0).is_err());
        assert!(ball_size(2, 200).is_err());
    }

    #[test]
    fn enumeration_reproduces_counts() {
        for m in [2u32, 3] {
            for big in 1..=5u64 {
                let mut by_norm = vec![0u128; big as usize + 1];
                for x in ball_elements(m, big).unwrap() {
                    by_norm[x.norm() as usize] += 1;
                }
                assert_eq!(by_norm[0], 1);
                for j in 1..=big {
                    assert_eq!(by_norm[j as usize], sphere_size(m, j).unwrap(), "M={m} j={j}");
                }
                for l in 0..=big.min(4) {
                    let inside: u128 = by_norm[..=l as usize].iter().sum();
                    assert_eq!(inside, ball_size(m, l).unwrap());
                }
            }
        }
    }

    #[test]
    fn sphere_sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            assert_eq!(sample_sphere(2, 1, &mut rng).unwrap(), el(2, &[1]));
        }
        assert!(sample_sphere(2, 0, &mut rng).is_err());
        let draws = 100_000;
        let hits = (0..draws)
            .filter(|_| sample_sphere(2, 2, &mut rng).unwrap() == el(2, &[0, 1]))
            .count() as f64;
        let sigma = (draws as f64 * 0.25).sqrt();
        assert!((hits - draws as f64 / 2.0).abs() < 4.0 * sigma, "hits={hits}");
        for j in 1..20 {
            assert_eq!(sample_sphere(5, j, &mut rng).unwrap().norm(), j);
        }
    }

    fn element(m: u32) -> impl Strategy<Value = GroupElement> {
        prop::collection::vec(0..m, 0..8).prop_map(move |d| GroupElement::new(m, d).unwrap())
    }

    fn triple() -> impl Strategy<Value = (GroupElement, GroupElement, GroupElement)> {
        (2u32..6).prop_flat_map(|m| (element(m), element(m), element(m)))
    }

    proptest! {
        #[test]
        fn ultrametric_inequality((x, y, z) in triple()) {
            let xy = x.distance(&y).unwrap();
            let xz = x.distance(&z).unwrap();
            let zy = z.distance(&y).unwrap();
            prop_assert!(xy <= xz.max(zy));
        }

        #[test]
        fn group_laws((x, y, z) in triple()) {
            let m = x.order();
            prop_assert_eq!(x.add(&y).unwrap(), y.add(&x).unwrap());
            prop_assert_eq!(
                x.add(&y).unwrap().add(&z).unwrap(),
                x.add(&y.add(&z).unwrap()).unwrap()
            );
            prop_assert_eq!(x.add(&GroupElement::zero(m)).unwrap(), x.clone());
            prop_assert!(x.add(&x.negate()).unwrap().is_zero());
            prop_assert_eq!(x.norm() == 0, x.is_zero());
        }
    }
}
