//! Bundled matrices for the two worked networks.
//!
//! The raw files also ship under `crates/core/fixtures/`.

use crate::matrix::SignedMatrix;
use crate::signed_graph::{load_csv, load_edge_list};
use crate::spectral::{self, SystemMatrix};

pub const KARATE_EDGES: &str = include_str!("../fixtures/karate.edges");
pub const EXAMPLE2_B_CSV: &str = include_str!("../fixtures/example2_B.csv");

/// Antagonistic member pairs (1-based) negated in the signed karate network.
pub const KARATE_ANTAGONISTIC_PAIRS: [(usize, usize); 3] = [(1, 2), (1, 32), (33, 34)];

/// Diagonal shift making `B + D` eventually positive for the 3-agent network.
pub const EXAMPLE2_D: [f64; 3] = [0.2688, 1.002, 1.3272];

/// Reference diagonal certificate for the 3-agent network (5 significant digits).
pub const EXAMPLE2_GAMMA: [f64; 3] = [4.2681, 8.1972, 11.5733];

/// Reference spectral radius of `C = B + D` (4 decimals).
pub const EXAMPLE2_RHO_C: f64 = 1.5817;

/// Reference Perron vector of `C` (unit Euclidean norm, 4 decimals).
pub const EXAMPLE2_V_C_UNIT: [f64; 3] = [0.3350, 0.5378, 0.7737];

/// Unit-weight karate club adjacency (78 undirected ties).
pub fn karate_unsigned() -> SignedMatrix {
    load_edge_list(KARATE_EDGES).expect("bundled fixture parses")
}

/// Karate club with the three antagonistic pairs negated in both directions.
pub fn karate_signed() -> SignedMatrix {
    let mut m = karate_unsigned().into_entries();
    for (i, j) in KARATE_ANTAGONISTIC_PAIRS {
        m[(i - 1, j - 1)] = -m[(i - 1, j - 1)].abs();
        m[(j - 1, i - 1)] = -m[(j - 1, i - 1)].abs();
    }
    SignedMatrix::adjacency(m).expect("zero diagonal")
}

pub fn example2_b() -> SignedMatrix {
    let m = load_csv(EXAMPLE2_B_CSV).expect("bundled fixture parses");
    SignedMatrix::adjacency(m.into_entries()).expect("zero diagonal")
}

/// Example-2 system in the critical shifted regime, d = ρ(B + D).
pub fn example2_system() -> SystemMatrix {
    let b = example2_b();
    spectral::build_system_a2_critical(&b, &EXAMPLE2_D).expect("reference shift is valid")
}

/// Karate system in the critical regime σ = ρ(B).
pub fn karate_system() -> SystemMatrix {
    spectral::build_system_a1_critical(&karate_signed())
        .expect("signed karate matrix is eventually positive")
}
