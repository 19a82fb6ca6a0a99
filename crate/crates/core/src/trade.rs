//! Trade record ingestion and aggregation into a dense export table.
//!
//! Input is UTF-8 CSV with header `country,product,value[,year]` (column order is free).
//! Values use a decimal point and no thousands separators. Malformed rows are errors
//! carrying the file line number; nothing is skipped silently.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::network::check_unique;
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct TradeRecord<T> {
    pub country: String,
    pub product: String,
    pub value: T,
    pub year: Option<i32>,
}

/// Dollar exports `X_cp`, countries by rows and products by columns.
#[derive(Clone, Debug, PartialEq)]
pub struct ExportTable<T> {
    countries: Vec<String>,
    products: Vec<String>,
    values: Array2<T>,
}

impl<T: Scalar> ExportTable<T> {
    pub fn new(countries: Vec<String>, products: Vec<String>, values: Array2<T>) -> Result<Self> {
        if values.dim() != (countries.len(), products.len()) {
            return Err(Error::Dimension(format!(
                "values are {:?} but labels give {}x{}",
                values.dim(),
                countries.len(),
                products.len()
            )));
        }
        check_unique(&countries)?;
        check_unique(&products)?;
        if let Some(bad) = values.iter().find(|v| !v.is_finite() || **v < T::zero()) {
            return Err(Error::invalid("export value", bad.as_f64(), "must be finite and nonnegative"));
        }
        Ok(ExportTable { countries, products, values })
    }

    pub fn countries(&self) -> &[String] {
        &self.countries
    }

    pub fn products(&self) -> &[String] {
        &self.products
    }

    pub fn values(&self) -> &Array2<T> {
        &self.values
    }

    pub fn total(&self) -> T {
        self.values.iter().copied().sum()
    }

    /// Dense CSV: header `country,<products...>`.
    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["country".to_string()];
        header.extend(self.products.iter().cloned());
        w.write_record(&header)?;
        for (c, name) in self.countries.iter().enumerate() {
            let mut row = vec![name.clone()];
            row.extend(self.values.row(c).iter().map(|v| v.to_string()));
            w.write_record(&row)?;
        }
        w.flush()
    }
}

pub fn parse_trade_csv<T: Scalar>(path: &Path, year_filter: Option<i32>) -> Result<Vec<TradeRecord<T>>> {
    let file = std::fs::File::open(path).map_err(|source| Error::Io { path: path.to_owned(), source })?;
    read_trade_csv(file, &path.display().to_string(), year_filter)
}

/// Parses trade records from any reader; `source` names the input in error messages.
pub fn read_trade_csv<T: Scalar, R: Read>(
    input: R,
    source: &str,
    year_filter: Option<i32>,
) -> Result<Vec<TradeRecord<T>>> {
    let csv_err = |e: csv::Error| Error::Csv { path: source.to_string(), message: e.to_string() };
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header = rdr.headers().map_err(csv_err)?.clone();
    let column = |name: &str| header.iter().position(|h| h.eq_ignore_ascii_case(name));
    let missing = |name: &str| Error::MissingColumn { path: source.to_string(), column: name.to_string() };
    let ci = column("country").ok_or_else(|| missing("country"))?;
    let pi = column("product").ok_or_else(|| missing("product"))?;
    let vi = column("value").ok_or_else(|| missing("value"))?;
    let yi = column("year");
    if year_filter.is_some() && yi.is_none() {
        return Err(missing("year"));
    }

    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map_or(0, |p| p.line());
        let bad = |message: String| Error::BadRow { path: source.to_string(), line, message };
        let field = |i: usize| rec.get(i).unwrap_or("");

        let country = field(ci);
        let product = field(pi);
        if country.is_empty() || product.is_empty() {
            return Err(bad("country and product codes must be non-empty".into()));
        }
        let raw = field(vi);
        let value: f64 = raw.parse().map_err(|_| bad(format!("value `{raw}` is not a number")))?;
        if !value.is_finite() || value < 0.0 {
            return Err(bad(format!("value `{raw}` must be finite and nonnegative")));
        }
        let year = match yi {
            Some(i) if !field(i).is_empty() => {
                let raw = field(i);
                Some(raw.parse::<i32>().map_err(|_| bad(format!("year `{raw}` is not an integer")))?)
            }
            _ => None,
        };
        if let Some(want) = year_filter {
            if year != Some(want) {
                continue;
            }
        }
        out.push(TradeRecord {
            country: country.to_string(),
            product: product.to_string(),
            value: T::lit(value),
            year,
        });
    }
    Ok(out)
}

pub fn write_trade_csv<T: Scalar, W: Write>(records: &[TradeRecord<T>], out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let with_year = records.iter().any(|r| r.year.is_some());
    if with_year {
        w.write_record(["country", "product", "value", "year"])?;
    } else {
        w.write_record(["country", "product", "value"])?;
    }
    for r in records {
        let value = r.value.to_string();
        if with_year {
            let year = r.year.map(|y| y.to_string()).unwrap_or_default();
            w.write_record([r.country.as_str(), r.product.as_str(), value.as_str(), year.as_str()])?;
        } else {
            w.write_record([r.country.as_str(), r.product.as_str(), value.as_str()])?;
        }
    }
    w.flush()
}

/// Sums records into a dense table; labels are sorted lexicographically.
pub fn aggregate<T: Scalar>(records: &[TradeRecord<T>]) -> Result<ExportTable<T>> {
    if records.is_empty() {
        return Err(Error::Empty("trade records"));
    }
    fn index<'a>(labels: impl Iterator<Item = &'a str>) -> BTreeMap<&'a str, usize> {
        let sorted: std::collections::BTreeSet<&str> = labels.collect();
        sorted.into_iter().enumerate().map(|(i, k)| (k, i)).collect()
    }
    let countries = index(records.iter().map(|r| r.country.as_str()));
    let products = index(records.iter().map(|r| r.product.as_str()));

    let mut values = Array2::from_elem((countries.len(), products.len()), T::zero());
    for r in records {
        let cell = &mut values[[countries[r.country.as_str()], products[r.product.as_str()]]];
        *cell = *cell + r.value;
    }
    ExportTable::new(
        countries.keys().map(|s| s.to_string()).collect(),
        products.keys().map(|s| s.to_string()).collect(),
        values,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rec(c: &str, p: &str, v: f64) -> TradeRecord<f64> {
        TradeRecord { country: c.into(), product: p.into(), value: v, year: None }
    }

    #[test]
    fn parses_two_rows() {
        let recs: Vec<TradeRecord<f64>> =
            read_trade_csv("country,product,value\nCHL,0711,100\nCHL,2601,50\n".as_bytes(), "t", None).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[0], rec("CHL", "0711", 100.0));
        assert_eq!(recs[1].value, 50.0);
    }

    #[test]
    fn negative_value_names_line_two() {
        let err = read_trade_csv::<f64, _>("country,product,value\nCHL,0711,-3\n".as_bytes(), "t.csv", None)
            .unwrap_err();
        assert!(matches!(err, Error::BadRow { line: 2, .. }), "{err}");
        assert!(err.to_string().contains("line 2"));
    }

    #[test]
    fn non_numeric_and_missing_column() {
        let err =
            read_trade_csv::<f64, _>("country,product,value\nA,p,1\nA,q,1,000\n".as_bytes(), "t", None).unwrap_err();
        assert!(matches!(err, Error::Csv { .. } | Error::BadRow { .. }));
        let err = read_trade_csv::<f64, _>("country,value\nA,1\n".as_bytes(), "t", None).unwrap_err();
        assert!(matches!(err, Error::MissingColumn { ref column, .. } if column == "product"));
        let err = read_trade_csv::<f64, _>("country,product,value\nA,p,abc\n".as_bytes(), "t", None).unwrap_err();
        assert!(matches!(err, Error::BadRow { line: 2, .. }));
        let err = read_trade_csv::<f64, _>("country,product,value\nA,p,NaN\n".as_bytes(), "t", None).unwrap_err();
        assert!(matches!(err, Error::BadRow { .. }));
    }

    #[test]
    fn year_filter_keeps_matching_rows() {
        let text = "country,product,value,year\nA,p,1,2000\nA,p,2,2005\nB,q,3,2005\n";
        let recs: Vec<TradeRecord<f64>> = read_trade_csv(text.as_bytes(), "t", Some(2005)).unwrap();
        assert_eq!(recs.len(), 2);
        assert!(recs.iter().all(|r| r.year == Some(2005)));
        let err = read_trade_csv::<f64, _>("country,product,value\nA,p,1\n".as_bytes(), "t", Some(2005)).unwrap_err();
        assert!(matches!(err, Error::MissingColumn { .. }));
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = parse_trade_csv::<f64>(Path::new("/nonexistent/trade.csv"), None).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    #[test]
    fn aggregate_sums_duplicates_and_fills_zeros() {
        let t = aggregate(&[rec("A", "p1", 10.0), rec("A", "p1", 5.0)]).unwrap();
        assert_eq!(t.values()[[0, 0]], 15.0);
        let t = aggregate(&[rec("A", "p1", 10.0), rec("B", "p2", 2.0)]).unwrap();
        assert_eq!(t.values().dim(), (2, 2));
        assert_eq!(t.values()[[0, 1]], 0.0);
        assert_eq!(t.values()[[1, 0]], 0.0);
        assert_eq!(t.values()[[1, 1]], 2.0);
    }

    #[test]
    fn aggregate_orders_labels_lexicographically() {
        let t = aggregate(&[rec("B", "p", 1.0), rec("A", "p", 1.0)]).unwrap();
        assert_eq!(t.countries(), ["A", "B"]);
        assert!(matches!(aggregate::<f64>(&[]), Err(Error::Empty(_))));
    }

    #[test]
    fn zero_value_rows_are_kept_but_contribute_nothing() {
        let recs: Vec<TradeRecord<f32>> =
            read_trade_csv("country,product,value\nA,p,0\nA,q,2\n".as_bytes(), "t", None).unwrap();
        let t = aggregate(&recs).unwrap();
        assert_eq!(t.products(), ["p", "q"]);
        assert_eq!(t.total(), 2.0);
    }

    proptest! {
        #[test]
        fn aggregate_conserves_total_and_ignores_order(
            raw in prop::collection::vec((0u8..4, 0u8..5, 0u32..1000), 1..40),
            rot in 0usize..40,
        ) {
            let recs: Vec<TradeRecord<f64>> = raw.iter()
                .map(|&(c, p, v)| rec(&format!("C{c}"), &format!("P{p}"), v as f64))
                .collect();
            let t = aggregate(&recs).unwrap();
            let input: f64 = recs.iter().map(|r| r.value).sum();
            prop_assert_eq!(t.total(), input);
            let mut shuffled = recs.clone();
            shuffled.rotate_left(rot % recs.len());
            shuffled.reverse();
            prop_assert_eq!(aggregate(&shuffled).unwrap(), t);
        }
    }
}
