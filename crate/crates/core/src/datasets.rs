//! Fixed benchmark networks shipped with the crate.

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::Result;
use crate::gfevd::Ohlc;
use crate::graph::Network;
use crate::var::simulate_var;

const TEN_NODE: &str = include_str!("../data/network10.edges");
const FIVE_NODE: &str = include_str!("../data/network5.edges");

/// Ten-node network with diameter 6.
pub fn ten_node_network() -> Network {
    Network::parse_edge_list(TEN_NODE).expect("shipped network parses")
}

/// Five-node network with diameter 3.
pub fn five_node_network() -> Network {
    Network::parse_edge_list(FIVE_NODE).expect("shipped network parses")
}

/// Looks up a shipped network by name (`ten`/`10`, `five`/`5`).
pub fn network_by_name(name: &str) -> Option<Network> {
    match name {
        "ten" | "10" | "ten-node" => Some(ten_node_network()),
        "five" | "5" | "five-node" => Some(five_node_network()),
        _ => None,
    }
}

/// Bars whose Garman–Klass value equals `exp(2 x)` exactly: open and
/// close at `level`, high and low at `level ± a` with `2.006 a² = σ²`.
pub fn bars_from_log_volatility(log_vol: &DMatrix<f64>, level: f64) -> Vec<Vec<Ohlc>> {
    (0..log_vol.ncols())
        .map(|j| {
            log_vol
                .column(j)
                .iter()
                .map(|&x| {
                    let a = ((2.0 * x).exp() / 2.006).sqrt();
                    Ohlc {
                        open: level,
                        high: level + a,
                        low: level - a,
                        close: level,
                    }
                })
                .collect()
        })
        .collect()
}

/// Generator for the synthetic volatility fixture: a VAR(1) on six nodes
/// with 0.3 on the diagonal and 0.2 on each edge of a path plus one
/// chord. Returns the coefficient matrix and its edge set.
pub fn volatility_generator() -> (DMatrix<f64>, Vec<(usize, usize)>) {
    let edges = vec![(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (0, 3)];
    let mut pi = DMatrix::identity(6, 6) * 0.3;
    for &(i, j) in &edges {
        pi[(i, j)] = 0.2;
        pi[(j, i)] = 0.2;
    }
    (pi, edges)
}

/// `T` days of bars from [`volatility_generator`], log volatility centred
/// at `ln 0.01` with innovation standard deviation 0.3.
pub fn synthetic_ohlc<R: Rng + ?Sized>(t: usize, rng: &mut R) -> Result<(Vec<Vec<Ohlc>>, Vec<(usize, usize)>)> {
    let (pi, edges) = volatility_generator();
    let v = DMatrix::identity(6, 6) * 0.09;
    let x = simulate_var(&[pi], &v, t, 200, rng)?;
    let log_vol = x.add_scalar(0.01f64.ln());
    Ok((bars_from_log_volatility(&log_vol, 4.6), edges))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gfevd::{garman_klass, log_volatility};
    use crate::graph::compute_stages;
    use rand::SeedableRng;

    #[test]
    fn fixture_bars_invert_exactly() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let (bars, edges) = synthetic_ohlc(50, &mut rng).unwrap();
        assert_eq!(bars.len(), 6);
        assert_eq!(edges.len(), 6);
        let x = DMatrix::from_fn(3, 2, |i, j| -4.0 - 0.3 * (i + j) as f64);
        let b = bars_from_log_volatility(&x, 1.0);
        for j in 0..2 {
            for i in 0..3 {
                let back = log_volatility(garman_klass(&b[j][i]).unwrap());
                assert!((back - x[(i, j)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn shipped_networks_are_connected() {
        let ten = ten_node_network();
        assert!(ten.is_connected());
        let s = compute_stages(&ten);
        assert_eq!(s.r_max(), 6);
        assert_eq!(s.distance(0, 7), Some(1));
        assert_eq!(s.distance(0, 8), Some(3));

        let five = five_node_network();
        assert!(five.is_connected());
        assert_eq!(compute_stages(&five).r_max(), 3);
    }
}
