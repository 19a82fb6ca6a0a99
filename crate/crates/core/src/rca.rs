//! Revealed comparative advantage and the thresholded network `M_cp`.
//!
//! `RCA_cp = (X_cp / sum_p X_cp) / (sum_c X_cp / sum_cp X_cp)`. Countries with zero total
//! exports and products with zero world exports are removed first and reported.

use std::io::Write;

use ndarray::Array2;

use crate::bits::BitMatrix;
use crate::error::{Error, Result};
use crate::network::BipartiteNetwork;
use crate::scalar::Scalar;
use crate::trade::ExportTable;

#[derive(Clone, Debug, PartialEq)]
pub struct RcaMatrix<T> {
    countries: Vec<String>,
    products: Vec<String>,
    rca: Array2<T>,
    source_total: T,
    dropped_countries: Vec<String>,
    dropped_products: Vec<String>,
}

impl<T: Scalar> RcaMatrix<T> {
    pub fn countries(&self) -> &[String] {
        &self.countries
    }

    pub fn products(&self) -> &[String] {
        &self.products
    }

    pub fn values(&self) -> &Array2<T> {
        &self.rca
    }

    pub fn source_total(&self) -> T {
        self.source_total
    }

    pub fn dropped_countries(&self) -> &[String] {
        &self.dropped_countries
    }

    pub fn dropped_products(&self) -> &[String] {
        &self.dropped_products
    }

    /// `M_cp = 1` iff `RCA_cp >= r_star` (inclusive).
    pub fn threshold(&self, r_star: T) -> Result<BipartiteNetwork> {
        threshold(self, r_star)
    }

    /// Dense CSV with a label header; `log10` writes `log10(RCA)` (`-inf` for zero entries).
    pub fn write_csv<W: Write>(&self, out: W, rows: &[usize], cols: &[usize], log10: bool) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["country".to_string()];
        header.extend(cols.iter().map(|&p| self.products[p].clone()));
        w.write_record(&header)?;
        for &c in rows {
            let mut row = vec![self.countries[c].clone()];
            row.extend(cols.iter().map(|&p| {
                let v = self.rca[[c, p]];
                if log10 {
                    v.log10().to_string()
                } else {
                    v.to_string()
                }
            }));
            w.write_record(&row)?;
        }
        w.flush()
    }
}

pub fn compute_rca<T: Scalar>(table: &ExportTable<T>) -> Result<RcaMatrix<T>> {
    let x = table.values();
    let row_tot: Vec<T> = x.rows().into_iter().map(|r| r.iter().copied().sum()).collect();
    let col_tot: Vec<T> = x.columns().into_iter().map(|c| c.iter().copied().sum()).collect();
    let rows: Vec<usize> = (0..row_tot.len()).filter(|&c| row_tot[c] > T::zero()).collect();
    let cols: Vec<usize> = (0..col_tot.len()).filter(|&p| col_tot[p] > T::zero()).collect();
    if rows.is_empty() {
        return Err(Error::AllZeroTable);
    }
    // Dropping zero rows/columns removes only zeros, so totals over the kept cells are unchanged.
    let total: T = rows.iter().map(|&c| row_tot[c]).sum();

    let mut rca = Array2::from_elem((rows.len(), cols.len()), T::zero());
    for (i, &c) in rows.iter().enumerate() {
        for (j, &p) in cols.iter().enumerate() {
            rca[[i, j]] = (x[[c, p]] / row_tot[c]) / (col_tot[p] / total);
        }
    }
    let labels = |src: &[String], keep: &[usize]| keep.iter().map(|&i| src[i].clone()).collect::<Vec<_>>();
    let dropped = |src: &[String], tot: &[T]| {
        src.iter().zip(tot).filter(|(_, t)| **t <= T::zero()).map(|(l, _)| l.clone()).collect::<Vec<_>>()
    };
    Ok(RcaMatrix {
        countries: labels(table.countries(), &rows),
        products: labels(table.products(), &cols),
        rca,
        source_total: total,
        dropped_countries: dropped(table.countries(), &row_tot),
        dropped_products: dropped(table.products(), &col_tot),
    })
}

pub fn threshold<T: Scalar>(rca: &RcaMatrix<T>, r_star: T) -> Result<BipartiteNetwork> {
    if !(r_star > T::zero()) || !r_star.is_finite() {
        return Err(Error::invalid("threshold", r_star.as_f64(), "must be positive and finite"));
    }
    let (n_c, n_p) = rca.rca.dim();
    let adj = BitMatrix::from_fn(n_c, n_p, |c, p| rca.rca[[c, p]] >= r_star);
    BipartiteNetwork::new(rca.countries.clone(), rca.products.clone(), adj, Some(r_star.as_f64()))
}

/// Row order by decreasing diversification and column order by decreasing ubiquity,
/// ties broken by label.
pub fn triangular_order(net: &BipartiteNetwork) -> (Vec<usize>, Vec<usize>) {
    let order = |degrees: Vec<usize>, labels: &[String]| {
        let mut idx: Vec<usize> = (0..degrees.len()).collect();
        idx.sort_by(|&a, &b| degrees[b].cmp(&degrees[a]).then_with(|| labels[a].cmp(&labels[b])));
        idx
    };
    (order(net.diversification(), net.countries()), order(net.ubiquity(), net.products()))
}
