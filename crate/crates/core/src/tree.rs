//! Coordinates on the semi-infinite rooted Cayley tree.
//!
//! A vertex is the sequence of child indices leading to it from the root,
//! each index in `1..=k`. Children append a coordinate and shifts prepend
//! one, so `shift(g, ·)` maps the whole tree onto the subtree rooted at `g`.
//!
//! Regions are ordered by `(level, coords)`. Under this order the ball
//! `Λ_{n-1}` is a prefix of `Λ_n` and every level set is contiguous, which
//! keeps tensor-factor embeddings contiguous as well.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Vertex {
    coords: Vec<usize>,
}

impl Vertex {
    pub fn root() -> Self {
        Self { coords: Vec::new() }
    }

    /// Panics if any coordinate is zero; the upper bound `k` is checked by
    /// [`TreeShape::contains`].
    pub fn new(coords: Vec<usize>) -> Self {
        assert!(coords.iter().all(|&c| c >= 1), "vertex coordinates start at 1");
        Self { coords }
    }

    pub fn coords(&self) -> &[usize] {
        &self.coords
    }

    pub fn level(&self) -> usize {
        self.coords.len()
    }

    pub fn is_root(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn parent(&self) -> Option<Vertex> {
        if self.is_root() {
            return None;
        }
        Some(Vertex {
            coords: self.coords[..self.coords.len() - 1].to_vec(),
        })
    }

    pub fn child(&self, i: usize) -> Vertex {
        assert!(i >= 1);
        let mut coords = self.coords.clone();
        coords.push(i);
        Vertex { coords }
    }

    /// The vertex reached from the root by `depth` steps along child `j`.
    pub fn ray(j: usize, depth: usize) -> Vertex {
        Vertex::new(vec![j; depth])
    }
}

impl Ord for Vertex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.level()
            .cmp(&other.level())
            .then_with(|| self.coords.cmp(&other.coords))
    }
}

impl PartialOrd for Vertex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for Vertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for Vertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_root() {
            return write!(f, "(0)");
        }
        write!(f, "(")?;
        for (i, c) in self.coords.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// Concatenation `g ++ v`: the image of `v` under the shift `α_g`.
pub fn shift(g: &Vertex, v: &Vertex) -> Vertex {
    let mut coords = g.coords.clone();
    coords.extend_from_slice(&v.coords);
    Vertex { coords }
}

/// Branching order `k` and local dimension `d` (each site carries `M_d`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeShape {
    pub k: usize,
    pub d: usize,
}

impl TreeShape {
    pub fn new(k: usize, d: usize) -> Result<Self> {
        if k < 1 {
            return Err(Error::InvalidParameter(format!("branching order k={k} must be >= 1")));
        }
        if d < 2 {
            return Err(Error::InvalidParameter(format!("local dimension d={d} must be >= 2")));
        }
        Ok(Self { k, d })
    }

    pub fn contains(&self, v: &Vertex) -> bool {
        v.coords.iter().all(|&c| (1..=self.k).contains(&c))
    }

    /// `|W_n| = k^n`.
    pub fn level_size(&self, n: usize) -> usize {
        self.k.pow(n as u32)
    }

    /// `|Λ_n|`, i.e. `(k^{n+1}-1)/(k-1)` or `n+1` for the chain.
    pub fn ball_size(&self, n: usize) -> usize {
        if self.k == 1 {
            n + 1
        } else {
            (self.k.pow(n as u32 + 1) - 1) / (self.k - 1)
        }
    }

    /// Vertices of the triple block `{x} ∪ S(x)` in canonical order.
    pub fn block(&self, x: &Vertex) -> SiteSet {
        let mut v = Vec::with_capacity(self.k + 1);
        v.push(x.clone());
        v.extend(successors(x, self).iter().cloned());
        SiteSet::from_sorted_unchecked(v)
    }
}

/// An ordered set of distinct vertices, kept in canonical order.
#[derive(Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct SiteSet {
    vertices: Vec<Vertex>,
}

impl SiteSet {
    pub fn new(mut vertices: Vec<Vertex>) -> Self {
        vertices.sort();
        vertices.dedup();
        Self { vertices }
    }

    fn from_sorted_unchecked(vertices: Vec<Vertex>) -> Self {
        debug_assert!(vertices.windows(2).all(|w| w[0] < w[1]));
        Self { vertices }
    }

    pub fn singleton(v: Vertex) -> Self {
        Self { vertices: vec![v] }
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Vertex> {
        self.vertices.iter()
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn contains(&self, v: &Vertex) -> bool {
        self.vertices.binary_search(v).is_ok()
    }

    pub fn position(&self, v: &Vertex) -> Option<usize> {
        self.vertices.binary_search(v).ok()
    }

    pub fn is_subset(&self, other: &SiteSet) -> bool {
        self.vertices.iter().all(|v| other.contains(v))
    }

    pub fn is_disjoint(&self, other: &SiteSet) -> bool {
        self.vertices.iter().all(|v| !other.contains(v))
    }

    pub fn union(&self, other: &SiteSet) -> SiteSet {
        let mut v = self.vertices.clone();
        v.extend(other.vertices.iter().cloned());
        SiteSet::new(v)
    }

    pub fn difference(&self, other: &SiteSet) -> SiteSet {
        SiteSet::from_sorted_unchecked(
            self.vertices.iter().filter(|v| !other.contains(v)).cloned().collect(),
        )
    }

    pub fn intersection(&self, other: &SiteSet) -> SiteSet {
        SiteSet::from_sorted_unchecked(
            self.vertices.iter().filter(|v| other.contains(v)).cloned().collect(),
        )
    }

    /// Image under `α_g`. The shift is order preserving, so the result is
    /// already canonical and positions correspond one to one.
    pub fn shifted(&self, g: &Vertex) -> SiteSet {
        SiteSet::from_sorted_unchecked(self.vertices.iter().map(|v| shift(g, v)).collect())
    }
}

impl fmt::Debug for SiteSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.vertices.iter()).finish()
    }
}

impl<'a> IntoIterator for &'a SiteSet {
    type Item = &'a Vertex;
    type IntoIter = std::slice::Iter<'a, Vertex>;

    fn into_iter(self) -> Self::IntoIter {
        self.vertices.iter()
    }
}

/// `S(x) = {(x,1), …, (x,k)}`.
pub fn successors(v: &Vertex, shape: &TreeShape) -> SiteSet {
    SiteSet::from_sorted_unchecked((1..=shape.k).map(|i| v.child(i)).collect())
}

/// Level set `W_n`, lexicographic.
pub fn level_set(n: usize, shape: &TreeShape) -> SiteSet {
    let mut current = vec![Vertex::root()];
    for _ in 0..n {
        current = current
            .iter()
            .flat_map(|v| (1..=shape.k).map(move |i| v.child(i)))
            .collect();
    }
    SiteSet::from_sorted_unchecked(current)
}

/// Ball `Λ_n = W_0 ∪ … ∪ W_n`.
pub fn ball(n: usize, shape: &TreeShape) -> SiteSet {
    slab(0, n, shape)
}

/// `Λ_{[n,m]} = W_n ∪ … ∪ W_m`.
pub fn slab(n: usize, m: usize, shape: &TreeShape) -> SiteSet {
    let mut v = Vec::new();
    for l in n..=m {
        v.extend(level_set(l, shape).vertices);
    }
    SiteSet::from_sorted_unchecked(v)
}

pub fn site_index(v: &Vertex, region: &SiteSet) -> Result<usize> {
    region
        .position(v)
        .ok_or_else(|| Error::NotInRegion(v.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(c: &[usize]) -> Vertex {
        Vertex::new(c.to_vec())
    }

    #[test]
    fn successors_append_a_coordinate() {
        let s2 = TreeShape::new(2, 2).unwrap();
        assert_eq!(successors(&Vertex::root(), &s2).vertices(), &[v(&[1]), v(&[2])]);
        assert_eq!(
            successors(&v(&[1, 2]), &s2).vertices(),
            &[v(&[1, 2, 1]), v(&[1, 2, 2])]
        );
        let s3 = TreeShape::new(3, 2).unwrap();
        assert_eq!(
            successors(&v(&[3]), &s3).vertices(),
            &[v(&[3, 1]), v(&[3, 2]), v(&[3, 3])]
        );
    }

    #[test]
    fn ball_sizes() {
        let s = TreeShape::new(2, 2).unwrap();
        assert_eq!(ball(0, &s).vertices(), &[Vertex::root()]);
        assert_eq!(ball(2, &s).len(), 7);
        assert_eq!(ball(3, &s).len(), 15);
        for k in 1..=4 {
            let s = TreeShape::new(k, 2).unwrap();
            for n in 0..=8 {
                let b = ball(n, &s);
                assert_eq!(b.len(), s.ball_size(n), "k={k} n={n}");
                let total: usize = (0..=n).map(|l| level_set(l, &s).len()).sum();
                assert_eq!(total, b.len());
                assert_eq!(level_set(n, &s).len(), s.level_size(n));
            }
        }
    }

    #[test]
    fn shift_prepends() {
        assert_eq!(shift(&v(&[1]), &v(&[2, 2])), v(&[1, 2, 2]));
        assert_eq!(shift(&Vertex::root(), &v(&[1, 2])), v(&[1, 2]));
        assert_eq!(shift(&v(&[2, 1]), &Vertex::root()), v(&[2, 1]));
    }

    #[test]
    fn site_indices() {
        let s = TreeShape::new(2, 2).unwrap();
        let l1 = ball(1, &s);
        let l2 = ball(2, &s);
        assert_eq!(site_index(&Vertex::root(), &l1).unwrap(), 0);
        assert_eq!(site_index(&v(&[2]), &l1).unwrap(), 2);
        assert_eq!(site_index(&v(&[1, 1]), &l2).unwrap(), 3);
        assert_eq!(
            site_index(&v(&[1, 1]), &l1),
            Err(Error::NotInRegion("(1,1)".into()))
        );
    }

    #[test]
    fn parent_drops_last_coordinate() {
        assert_eq!(v(&[1, 2]).parent(), Some(v(&[1])));
        assert_eq!(Vertex::root().parent(), None);
    }

    #[test]
    fn successors_lie_on_next_level() {
        let s = TreeShape::new(3, 2).unwrap();
        for x in ball(2, &s).iter() {
            let succ = successors(x, &s);
            assert!(succ.is_disjoint(&ball(x.level(), &s)));
            assert!(succ.is_subset(&level_set(x.level() + 1, &s)));
        }
    }

    #[test]
    fn shifted_ball_lands_in_subtree() {
        let s = TreeShape::new(2, 2).unwrap();
        let g = v(&[2]);
        let img = ball(2, &s).shifted(&g);
        for (a, b) in ball(2, &s).iter().zip(img.iter()) {
            assert_eq!(b.level(), a.level() + 1);
            assert_eq!(&b.coords()[..1], g.coords());
        }
        assert_eq!(img, SiteSet::new(img.vertices().to_vec()));
    }

    #[test]
    fn shape_validation() {
        assert!(TreeShape::new(0, 2).is_err());
        assert!(TreeShape::new(2, 1).is_err());
        assert_eq!(TreeShape::new(1, 2).unwrap().ball_size(4), 5);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn vertex(k: usize, max_len: usize) -> impl Strategy<Value = Vertex> {
            prop::collection::vec(1..=k, 0..=max_len).prop_map(Vertex::new)
        }

        proptest! {
            #[test]
            fn shift_adds_levels(g in vertex(3, 5), x in vertex(3, 5)) {
                prop_assert_eq!(shift(&g, &x).level(), g.level() + x.level());
            }

            #[test]
            fn canonical_order_is_prefix_stable(k in 1usize..=4, n in 1usize..=5) {
                let s = TreeShape::new(k, 2).unwrap();
                let small = ball(n - 1, &s);
                let big = ball(n, &s);
                for x in small.iter() {
                    prop_assert_eq!(site_index(x, &small).unwrap(), site_index(x, &big).unwrap());
                }
            }
        }
    }
}
