//! Trade tables generated from a planted binomial-model world.
//!
//! Every edge of the planted network carries value 1 and each country gets one extra
//! record on [`BALLAST_PRODUCT`] worth `N_p - k_c0`, so all country totals equal `N_p`.
//! An edge then has RCA `N_c / k_p0 >= 1` and a non-edge has RCA 0, so thresholding at 1
//! and dropping the ballast column returns the planted network.

use crate::model::{leontief, sample_world, BinomialParams, CapabilityWorld};
use crate::network::{index_labels, BipartiteNetwork};
use crate::trade::TradeRecord;

pub const BALLAST_PRODUCT: &str = "REST";

#[derive(Clone, Debug, PartialEq)]
pub struct PlantedTrade {
    pub params: BinomialParams<f64>,
    pub seed: u64,
    pub world: CapabilityWorld,
    pub network: BipartiteNetwork,
    pub records: Vec<TradeRecord<f64>>,
}

pub fn planted_trade(params: &BinomialParams<f64>, seed: u64) -> PlantedTrade {
    let world = sample_world(params, seed);
    let model = leontief(&world);
    let countries = index_labels("c", params.n_c);
    let products = index_labels("p", params.n_p);
    let network = BipartiteNetwork::new(countries.clone(), products.clone(), model.adjacency().clone(), None)
        .expect("generated labels are unique");
    let mut records = Vec::new();
    for (c, country) in countries.iter().enumerate() {
        let made: Vec<usize> = network.adjacency().row_ones(c).collect();
        for &p in &made {
            records.push(TradeRecord { country: country.clone(), product: products[p].clone(), value: 1.0, year: None });
        }
        let rest = params.n_p - made.len();
        if rest > 0 {
            records.push(TradeRecord {
                country: country.clone(),
                product: BALLAST_PRODUCT.to_string(),
                value: rest as f64,
                year: None,
            });
        }
    }
    PlantedTrade { params: *params, seed, world, network, records }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rca::compute_rca;
    use crate::trade::aggregate;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn rca_pipeline_returns_the_planted_network(
            n_c in 2usize..40, n_p in 2usize..80, n_a in 1usize..30,
            r in 0.3f64..0.99, q in 0.01f64..0.5, seed in any::<u64>(),
        ) {
            let params = BinomialParams::new(r, q, n_a, n_c, n_p).unwrap();
            let planted = planted_trade(&params, seed);
            prop_assume!(planted.network.edge_count() > 0);
            let table = aggregate(&planted.records).unwrap();
            let net = compute_rca(&table).unwrap().threshold(1.0).unwrap().without_products(&[BALLAST_PRODUCT]);
            let (expected, _, _) = planted.network.active();
            let (got, _, _) = net.active();
            prop_assert_eq!(got.countries(), expected.countries());
            prop_assert_eq!(got.products(), expected.products());
            prop_assert_eq!(got.adjacency(), expected.adjacency());
        }
    }

    #[test]
    fn deterministic_and_totals_equal() {
        let params = BinomialParams::new(0.8, 0.1, 20, 10, 50).unwrap();
        let a = planted_trade(&params, 4);
        assert_eq!(a, planted_trade(&params, 4));
        for c in a.network.countries() {
            let total: f64 = a.records.iter().filter(|r| &r.country == c).map(|r| r.value).sum();
            assert_eq!(total, 50.0);
        }
    }
}
