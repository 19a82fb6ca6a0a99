//! Degree metrics, coupled-degree diagrams, co-export proximity and density.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::BipartiteNetwork;
use crate::scalar::Scalar;

/// `k_c0`, `k_p0` and their first reflections `k_c1`, `k_p1`.
/// Reflections are `None` where the zeroth-order degree is zero.
#[derive(Clone, Debug, PartialEq)]
pub struct DegreeProfile<T> {
    pub k_c0: Vec<usize>,
    pub k_p0: Vec<usize>,
    pub k_c1: Vec<Option<T>>,
    pub k_p1: Vec<Option<T>>,
}

pub fn degree_profile<T: Scalar>(net: &BipartiteNetwork) -> DegreeProfile<T> {
    let adj = net.adjacency();
    let k_c0 = adj.row_sums();
    let k_p0 = adj.col_sums();
    let mut sum_c = vec![0usize; k_c0.len()];
    let mut sum_p = vec![0usize; k_p0.len()];
    for c in 0..k_c0.len() {
        for p in adj.row_ones(c) {
            sum_c[c] += k_p0[p];
            sum_p[p] += k_c0[c];
        }
    }
    let reflect = |sums: &[usize], deg: &[usize]| -> Vec<Option<T>> {
        sums.iter()
            .zip(deg)
            .map(|(&s, &d)| (d > 0).then(|| T::from_count(s) / T::from_count(d)))
            .collect()
    };
    let k_c1 = reflect(&sum_c, &k_c0);
    let k_p1 = reflect(&sum_p, &k_p0);
    DegreeProfile { k_c0, k_p0, k_c1, k_p1 }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Country,
    Product,
}

impl Side {
    pub fn as_str(self) -> &'static str {
        match self {
            Side::Country => "country",
            Side::Product => "product",
        }
    }
}

/// `(k0, k1)` pairs with defined `k1`, sorted by `k0` (stable in index order).
pub fn diagram<T: Scalar>(net: &BipartiteNetwork, side: Side) -> Vec<(usize, T)> {
    let prof = degree_profile::<T>(net);
    diagram_from_profile(&prof, side)
}

pub fn diagram_from_profile<T: Scalar>(prof: &DegreeProfile<T>, side: Side) -> Vec<(usize, T)> {
    let (k0, k1) = match side {
        Side::Country => (&prof.k_c0, &prof.k_c1),
        Side::Product => (&prof.k_p0, &prof.k_p1),
    };
    let mut out: Vec<(usize, T)> = k0.iter().zip(k1).filter_map(|(&a, b)| b.map(|b| (a, b))).collect();
    out.sort_by_key(|&(a, _)| a);
    out
}

/// Fraction of filled cells, `edges / (N_c * N_p)`.
pub fn density<T: Scalar>(net: &BipartiteNetwork) -> Result<T> {
    let cells = net.n_countries() * net.n_products();
    if cells == 0 {
        return Err(Error::Dimension("density of a network with a zero dimension".into()));
    }
    Ok(T::from_count(net.edge_count()) / T::from_count(cells))
}

/// Co-export proximity `phi_pp' = sum_c M_cp M_cp' / max(k_p0, k_p'0)`, stored as the
/// strict upper triangle. The diagonal is not part of the matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct ProximityMatrix<T> {
    products: Vec<String>,
    ubiquity: Vec<usize>,
    upper: Vec<T>,
}

#[inline]
fn tri_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * (2 * n - i - 1) / 2 + (j - i - 1)
}

impl<T: Scalar> ProximityMatrix<T> {
    pub fn products(&self) -> &[String] {
        &self.products
    }

    pub fn len(&self) -> usize {
        self.products.len()
    }

    pub fn is_empty(&self) -> bool {
        self.products.is_empty()
    }

    /// `None` on the diagonal.
    pub fn phi(&self, a: usize, b: usize) -> Option<T> {
        let n = self.products.len();
        match a.cmp(&b) {
            std::cmp::Ordering::Equal => None,
            std::cmp::Ordering::Less => Some(self.upper[tri_index(n, a, b)]),
            std::cmp::Ordering::Greater => Some(self.upper[tri_index(n, b, a)]),
        }
    }

    /// Pair where neither product is exported by anyone; its value is 0 by convention.
    pub fn is_undefined(&self, a: usize, b: usize) -> bool {
        a != b && self.ubiquity[a] == 0 && self.ubiquity[b] == 0
    }

    pub fn undefined_pairs(&self) -> usize {
        let z = self.ubiquity.iter().filter(|&&k| k == 0).count();
        z * z.saturating_sub(1) / 2
    }

    /// Upper-triangle values, each unordered pair once, in `(0,1), (0,2), ..` order.
    pub fn upper_triangle(&self) -> &[T] {
        &self.upper
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        let n = self.products.len();
        (0..n).flat_map(move |i| (i + 1..n).map(move |j| (i, j, self.upper[tri_index(n, i, j)])))
    }
}

pub fn proximity<T: Scalar>(net: &BipartiteNetwork) -> ProximityMatrix<T> {
    let by_product = net.adjacency().transpose();
    let n = by_product.rows();
    let ubiquity: Vec<usize> = (0..n).map(|p| by_product.row_count(p)).collect();
    let rows: Vec<Vec<T>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (i + 1..n)
                .map(|j| {
                    let m = ubiquity[i].max(ubiquity[j]);
                    if m == 0 {
                        T::zero()
                    } else {
                        T::from_count(by_product.and_count(i, &by_product, j)) / T::from_count(m)
                    }
                })
                .collect()
        })
        .collect();
    ProximityMatrix { products: net.products().to_vec(), ubiquity, upper: rows.concat() }
}

/// Average ranks (1-based), ties share their mean rank.
pub fn ranks<T: Scalar>(x: &[T]) -> Vec<T> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].partial_cmp(&x[b]).expect("finite values"));
    let mut out = vec![T::zero(); x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let r = T::from_count(i + j + 2) / T::lit(2.0);
        for &k in &idx[i..=j] {
            out[k] = r;
        }
        i = j + 1;
    }
    out
}

pub fn pearson<T: Scalar>(x: &[T], y: &[T]) -> Option<T> {
    let n = T::from_count(x.len());
    let mx = x.iter().copied().sum::<T>() / n;
    let my = y.iter().copied().sum::<T>() / n;
    let (mut sxy, mut sxx, mut syy) = (T::zero(), T::zero(), T::zero());
    for (&a, &b) in x.iter().zip(y) {
        sxy = sxy + (a - mx) * (b - my);
        sxx = sxx + (a - mx) * (a - mx);
        syy = syy + (b - my) * (b - my);
    }
    let d = (sxx * syy).sqrt();
    (d > T::zero()).then(|| sxy / d)
}

/// Spearman rank correlation; `None` if either variable is constant.
pub fn spearman<T: Scalar>(x: &[T], y: &[T]) -> Option<T> {
    assert_eq!(x.len(), y.len());
    pearson(&ranks(x), &ranks(y))
}

/// Least-squares slope of `y` on `x`; `None` if `x` is constant.
pub fn ols_slope<T: Scalar>(x: &[T], y: &[T]) -> Option<T> {
    let n = T::from_count(x.len());
    let mx = x.iter().copied().sum::<T>() / n;
    let my = y.iter().copied().sum::<T>() / n;
    let (mut sxy, mut sxx) = (T::zero(), T::zero());
    for (&a, &b) in x.iter().zip(y) {
        sxy = sxy + (a - mx) * (b - my);
        sxx = sxx + (a - mx) * (a - mx);
    }
    (sxx > T::zero()).then(|| sxy / sxx)
}

/// Spearman correlation of the country-side `k_c0`-`k_c1` diagram.
pub fn diversification_ubiquity_correlation<T: Scalar>(net: &BipartiteNetwork) -> Option<T> {
    let d = diagram::<T>(net, Side::Country);
    let k0: Vec<T> = d.iter().map(|&(a, _)| T::from_count(a)).collect();
    let k1: Vec<T> = d.iter().map(|&(_, b)| b).collect();
    spearman(&k0, &k1)
}
