//! The binary country-product network `M_cp` and its CSV forms.

use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;

use crate::bits::BitMatrix;
use crate::error::{Error, Result};

/// Binary country-product matrix with labels and the RCA threshold that produced it
/// (`None` for model-generated networks).
#[derive(Clone, Debug, PartialEq)]
pub struct BipartiteNetwork {
    countries: Vec<String>,
    products: Vec<String>,
    adjacency: BitMatrix,
    threshold: Option<f64>,
}

pub(crate) fn check_unique(labels: &[String]) -> Result<()> {
    let mut seen = HashSet::with_capacity(labels.len());
    for l in labels {
        if !seen.insert(l.as_str()) {
            return Err(Error::DuplicateLabel(l.clone()));
        }
    }
    Ok(())
}

/// Zero-padded labels `prefix0..prefixN` that sort lexicographically in index order.
pub fn index_labels(prefix: &str, n: usize) -> Vec<String> {
    let width = n.saturating_sub(1).to_string().len();
    (0..n).map(|i| format!("{prefix}{i:0width$}")).collect()
}

impl BipartiteNetwork {
    pub fn new(
        countries: Vec<String>,
        products: Vec<String>,
        adjacency: BitMatrix,
        threshold: Option<f64>,
    ) -> Result<Self> {
        if adjacency.rows() != countries.len() || adjacency.cols() != products.len() {
            return Err(Error::Dimension(format!(
                "adjacency is {}x{} but there are {} countries and {} products",
                adjacency.rows(),
                adjacency.cols(),
                countries.len(),
                products.len()
            )));
        }
        check_unique(&countries)?;
        check_unique(&products)?;
        Ok(BipartiteNetwork { countries, products, adjacency, threshold })
    }

    /// Network with generated labels `c..`/`p..`; mostly for tests and simulations.
    pub fn from_adjacency(adjacency: BitMatrix) -> Self {
        let countries = index_labels("c", adjacency.rows());
        let products = index_labels("p", adjacency.cols());
        BipartiteNetwork { countries, products, adjacency, threshold: None }
    }

    pub fn from_rows<R: AsRef<[u8]>>(rows: &[R]) -> Self {
        let n_c = rows.len();
        let n_p = rows.first().map_or(0, |r| r.as_ref().len());
        assert!(rows.iter().all(|r| r.as_ref().len() == n_p), "ragged rows");
        Self::from_adjacency(BitMatrix::from_fn(n_c, n_p, |c, p| rows[c].as_ref()[p] != 0))
    }

    /// Same labels and threshold, new adjacency of identical shape.
    pub fn with_adjacency(&self, adjacency: BitMatrix) -> Self {
        assert_eq!((adjacency.rows(), adjacency.cols()), (self.n_countries(), self.n_products()));
        BipartiteNetwork { adjacency, ..self.clone_labels() }
    }

    fn clone_labels(&self) -> Self {
        BipartiteNetwork {
            countries: self.countries.clone(),
            products: self.products.clone(),
            adjacency: BitMatrix::zeros(0, 0),
            threshold: self.threshold,
        }
    }

    pub fn countries(&self) -> &[String] {
        &self.countries
    }

    pub fn products(&self) -> &[String] {
        &self.products
    }

    pub fn adjacency(&self) -> &BitMatrix {
        &self.adjacency
    }

    pub fn threshold(&self) -> Option<f64> {
        self.threshold
    }

    pub fn n_countries(&self) -> usize {
        self.countries.len()
    }

    pub fn n_products(&self) -> usize {
        self.products.len()
    }

    #[inline]
    pub fn get(&self, c: usize, p: usize) -> bool {
        self.adjacency.get(c, p)
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.count_ones()
    }

    /// `k_c0` for every country.
    pub fn diversification(&self) -> Vec<usize> {
        self.adjacency.row_sums()
    }

    /// `k_p0` for every product.
    pub fn ubiquity(&self) -> Vec<usize> {
        self.adjacency.col_sums()
    }

    pub fn permuted(&self, rows: &[usize], cols: &[usize]) -> Self {
        BipartiteNetwork {
            countries: rows.iter().map(|&r| self.countries[r].clone()).collect(),
            products: cols.iter().map(|&c| self.products[c].clone()).collect(),
            adjacency: self.adjacency.select(rows, cols),
            threshold: self.threshold,
        }
    }

    /// Removes the named product columns; unknown names are ignored.
    pub fn without_products(&self, names: &[&str]) -> Self {
        let cols: Vec<usize> =
            (0..self.n_products()).filter(|&p| !names.contains(&self.products[p].as_str())).collect();
        let rows: Vec<usize> = (0..self.n_countries()).collect();
        self.permuted(&rows, &cols)
    }

    /// Drops countries and products without any edge, returning the dropped labels.
    pub fn active(&self) -> (Self, Vec<String>, Vec<String>) {
        let k_c = self.diversification();
        let k_p = self.ubiquity();
        let rows: Vec<usize> = (0..k_c.len()).filter(|&c| k_c[c] > 0).collect();
        let cols: Vec<usize> = (0..k_p.len()).filter(|&p| k_p[p] > 0).collect();
        let dropped_c = (0..k_c.len()).filter(|&c| k_c[c] == 0).map(|c| self.countries[c].clone()).collect();
        let dropped_p = (0..k_p.len()).filter(|&p| k_p[p] == 0).map(|p| self.products[p].clone()).collect();
        (self.permuted(&rows, &cols), dropped_c, dropped_p)
    }

    /// Dense CSV: header `country,<products...>`, one 0/1 row per country.
    pub fn write_dense_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["country"];
        header.extend(self.products.iter().map(String::as_str));
        w.write_record(&header)?;
        let mut row = Vec::with_capacity(self.n_products() + 1);
        for (c, name) in self.countries.iter().enumerate() {
            row.clear();
            row.push(name.clone());
            row.extend((0..self.n_products()).map(|p| if self.get(c, p) { "1" } else { "0" }.to_string()));
            w.write_record(&row)?;
        }
        w.flush()
    }

    /// Edge list CSV `country,product`, rows in matrix order.
    pub fn write_edge_list<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["country", "product"])?;
        for (c, name) in self.countries.iter().enumerate() {
            for p in self.adjacency.row_ones(c) {
                w.write_record([name.as_str(), self.products[p].as_str()])?;
            }
        }
        w.flush()
    }

    pub fn read_dense_csv(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|source| Error::Io { path: path.to_owned(), source })?;
        Self::read_dense(file, &path.display().to_string())
    }

    pub fn read_dense<R: Read>(input: R, source: &str) -> Result<Self> {
        let csv_err = |e: csv::Error| Error::Csv { path: source.to_string(), message: e.to_string() };
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
        let header = rdr.headers().map_err(csv_err)?.clone();
        if header.is_empty() {
            return Err(Error::Empty("matrix header"));
        }
        let products: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let mut countries = Vec::new();
        let mut rows: Vec<Vec<bool>> = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(csv_err)?;
            let line = rec.position().map_or(0, |p| p.line());
            let mut it = rec.iter();
            let label = it.next().unwrap_or_default().to_string();
            let mut row = Vec::with_capacity(products.len());
            for cell in it {
                row.push(match cell.trim() {
                    "0" => false,
                    "1" => true,
                    other => {
                        return Err(Error::BadRow {
                            path: source.to_string(),
                            line,
                            message: format!("matrix entries must be 0 or 1, found `{other}`"),
                        })
                    }
                });
            }
            countries.push(label);
            rows.push(row);
        }
        if countries.is_empty() {
            return Err(Error::Empty("matrix rows"));
        }
        let adj = BitMatrix::from_fn(countries.len(), products.len(), |c, p| rows[c][p]);
        BipartiteNetwork::new(countries, products, adj, None)
    }
}
