//! Weighted signed digraphs: ingestion, Laplacians, structural predicates.
//!
//! Edge-list format, one directive or edge per line:
//!
//! ```text
//! # comment
//! n 3            (node count, required before any edge)
//! undirected     (optional: every edge is also added reversed)
//! 1 2 1.5        (1-based source, target, nonzero weight)
//! ```

use std::collections::{HashSet, VecDeque};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::SignedMatrix;

/// Row and column absolute-degree diagonals `C_r`, `C_c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeMatrices {
    pub row_degrees: Vec<f64>,
    pub col_degrees: Vec<f64>,
}

pub fn load_edge_list(text: &str) -> Result<SignedMatrix> {
    let parse_err = |line: usize, msg: String| Error::Parse { line, msg };
    let mut n: Option<usize> = None;
    let mut undirected = false;
    let mut edges: Vec<(usize, usize, f64, usize)> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens.as_slice() {
            ["n", count] => {
                if n.is_some() {
                    return Err(parse_err(line_no, "duplicate `n` header".into()));
                }
                let count: usize = count
                    .parse()
                    .map_err(|_| parse_err(line_no, format!("invalid node count `{count}`")))?;
                n = Some(count);
            }
            ["undirected"] => undirected = true,
            [i, j, w] => {
                let Some(count) = n else {
                    return Err(parse_err(line_no, "edge before `n N` header".into()));
                };
                let node = |tok: &str| -> Result<usize> {
                    let v: usize = tok
                        .parse()
                        .map_err(|_| parse_err(line_no, format!("non-numeric node id `{tok}`")))?;
                    if v == 0 || v > count {
                        return Err(parse_err(
                            line_no,
                            format!("node id {v} outside 1..={count}"),
                        ));
                    }
                    Ok(v - 1)
                };
                let (i, j) = (node(i)?, node(j)?);
                let w: f64 = w
                    .parse()
                    .map_err(|_| parse_err(line_no, format!("non-numeric weight `{w}`")))?;
                if !w.is_finite() || w == 0.0 {
                    return Err(parse_err(
                        line_no,
                        format!("weight must be finite and nonzero, got {w}"),
                    ));
                }
                if i == j {
                    return Err(parse_err(line_no, format!("self-loop at node {}", i + 1)));
                }
                edges.push((i, j, w, line_no));
            }
            _ => return Err(parse_err(line_no, format!("unrecognised line `{line}`"))),
        }
    }

    let n = n.ok_or_else(|| parse_err(0, "missing `n N` header".into()))?;
    let mut m = DMatrix::zeros(n, n);
    let mut seen = HashSet::new();
    for (i, j, w, line_no) in edges {
        let mut put = |a: usize, b: usize| -> Result<()> {
            if !seen.insert((a, b)) {
                return Err(parse_err(
                    line_no,
                    format!("duplicate edge ({}, {})", a + 1, b + 1),
                ));
            }
            m[(a, b)] = w;
            Ok(())
        };
        put(i, j)?;
        if undirected {
            put(j, i)?;
        }
    }
    SignedMatrix::adjacency(m)
}

/// Plain comma-separated square matrix, one row per line.
pub fn load_csv(text: &str) -> Result<SignedMatrix> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split(',')
            .map(|t| {
                t.trim().parse::<f64>().map_err(|_| Error::Parse {
                    line: idx + 1,
                    msg: format!("non-numeric entry `{}`", t.trim()),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    let n = rows.len();
    for (i, r) in rows.iter().enumerate() {
        if r.len() != n {
            return Err(Error::Parse {
                line: i + 1,
                msg: format!(
                    "row has {} entries, expected {n} (matrix must be square)",
                    r.len()
                ),
            });
        }
    }
    let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
    SignedMatrix::from_rows(&refs)
}

pub fn degree_matrices(b: &SignedMatrix) -> DegreeMatrices {
    let n = b.n();
    let row_degrees = (0..n)
        .map(|i| (0..n).map(|j| b[(i, j)].abs()).sum())
        .collect();
    let col_degrees = (0..n)
        .map(|j| (0..n).map(|i| b[(i, j)].abs()).sum())
        .collect();
    DegreeMatrices {
        row_degrees,
        col_degrees,
    }
}

/// `L = C_r − B`.
pub fn laplacian(b: &SignedMatrix) -> SignedMatrix {
    let deg = degree_matrices(b);
    let mut l = -b.entries().clone();
    for (i, d) in deg.row_degrees.iter().enumerate() {
        l[(i, i)] += d;
    }
    SignedMatrix::new(l).expect("finite input gives finite Laplacian")
}

pub fn is_weight_balanced(b: &SignedMatrix, tol: f64) -> bool {
    let deg = degree_matrices(b);
    deg.row_degrees
        .iter()
        .zip(&deg.col_degrees)
        .all(|(r, c)| (r - c).abs() <= tol)
}

/// Strong connectivity of the support digraph (edge i→j iff b_ij ≠ 0).
pub fn is_irreducible(b: &SignedMatrix) -> bool {
    let n = b.n();
    if n == 0 {
        return false;
    }
    if n == 1 {
        return true;
    }
    let reach_all = |forward: bool| {
        let mut seen = vec![false; n];
        seen[0] = true;
        let mut queue = VecDeque::from([0usize]);
        let mut count = 1;
        while let Some(u) = queue.pop_front() {
            for v in 0..n {
                let w = if forward { b[(u, v)] } else { b[(v, u)] };
                if w != 0.0 && !seen[v] {
                    seen[v] = true;
                    count += 1;
                    queue.push_back(v);
                }
            }
        }
        count == n
    };
    reach_all(true) && reach_all(false)
}

/// `B_u = (B + Bᵀ)/2`.
pub fn symmetrize(b: &SignedMatrix) -> SignedMatrix {
    let sym = (b.entries() + b.entries().transpose()) * 0.5;
    if b.zero_diag() {
        SignedMatrix::adjacency(sym).expect("zero diagonal is preserved")
    } else {
        SignedMatrix::new(sym).expect("finite")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn m(rows: &[&[f64]]) -> SignedMatrix {
        SignedMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn two_node_edge_list() {
        let b = load_edge_list("n 2\n1 2 1.0\n2 1 -1.0").unwrap();
        assert_eq!(b.to_rows(), vec![vec![0.0, 1.0], vec![-1.0, 0.0]]);
        assert!(b.zero_diag());
    }

    #[test]
    fn empty_edge_section() {
        let b = load_edge_list("n 3\n").unwrap();
        assert_eq!(b, SignedMatrix::zeros(3));
    }

    #[test]
    fn edge_list_errors_carry_line_numbers() {
        let dup = load_edge_list("n 2\n1 2 1\n# c\n1 2 3\n").unwrap_err();
        assert!(matches!(dup, Error::Parse { line: 4, .. }), "{dup}");
        let selfloop = load_edge_list("n 2\n2 2 1\n").unwrap_err();
        assert!(matches!(selfloop, Error::Parse { line: 2, .. }));
        let nan = load_edge_list("n 2\n1 x 1\n").unwrap_err();
        assert!(matches!(nan, Error::Parse { line: 2, .. }));
        let w = load_edge_list("n 2\n1 2 abc\n").unwrap_err();
        assert!(matches!(w, Error::Parse { line: 2, .. }));
        assert!(load_edge_list("1 2 1\n").is_err());
        assert!(load_edge_list("n 2\n1 3 1\n").is_err());
        assert!(load_edge_list("n 2\n1 2 0\n").is_err());
        // undirected expansion collides with an explicit reverse edge
        assert!(load_edge_list("n 2\nundirected\n1 2 1\n2 1 1\n").is_err());
    }

    #[test]
    fn karate_fixture_signs() {
        let b = fixtures::karate_signed();
        assert_eq!(b.n(), 34);
        let negatives: Vec<(usize, usize)> = (0..34)
            .flat_map(|i| (0..34).map(move |j| (i, j)))
            .filter(|&(i, j)| b[(i, j)] < 0.0)
            .map(|(i, j)| (i + 1, j + 1))
            .collect();
        assert_eq!(
            negatives,
            vec![(1, 2), (1, 32), (2, 1), (32, 1), (33, 34), (34, 33)]
        );
        let nnz = b.entries().iter().filter(|v| **v != 0.0).count();
        assert_eq!(nnz, 156);
        assert!(b.is_symmetric(0.0));
    }

    #[test]
    fn csv_loading() {
        let b = load_csv("0,1\n-1,0\n").unwrap();
        assert_eq!(b.to_rows(), vec![vec![0.0, 1.0], vec![-1.0, 0.0]]);
        assert!(matches!(
            load_csv("0,1,2\n1,0,2\n"),
            Err(Error::Parse { .. })
        ));
        assert!(load_csv("0,a\n1,0\n").is_err());
    }

    #[test]
    fn laplacian_examples() {
        let l = laplacian(&m(&[&[0.0, 1.0], &[-1.0, 0.0]]));
        assert_eq!(l.to_rows(), vec![vec![1.0, -1.0], vec![1.0, 1.0]]);
        assert_eq!(
            laplacian(&SignedMatrix::zeros(3)).to_rows(),
            vec![vec![0.0; 3]; 3]
        );
        // hand check: |1.7877| + |−0.6743|
        let l2 = laplacian(&fixtures::example2_b());
        assert!((l2[(0, 0)] - 2.4620).abs() < 1e-12);
    }

    #[test]
    fn weight_balance_examples() {
        assert!(is_weight_balanced(&fixtures::karate_signed(), 0.0));
        assert!(!is_weight_balanced(&m(&[&[0.0, 1.0], &[0.0, 0.0]]), 1e-12));
        // rows (2.4620, 1.5032, 0.5878) vs columns (1.3556, 1.7877, 1.4097)
        assert!(!is_weight_balanced(&fixtures::example2_b(), 1e-9));
    }

    #[test]
    fn irreducibility_examples() {
        assert!(is_irreducible(&fixtures::example2_b()));
        assert!(!is_irreducible(&m(&[&[0.0, 1.0], &[0.0, 0.0]])));
        assert!(!is_irreducible(&SignedMatrix::zeros(2)));
        assert!(!is_irreducible(&SignedMatrix::zeros(5)));
        assert!(is_irreducible(&fixtures::karate_signed()));
    }

    #[test]
    fn symmetrize_examples() {
        let s = symmetrize(&m(&[&[0.0, 2.0], &[0.0, 0.0]]));
        assert_eq!(s.to_rows(), vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
        let k = fixtures::karate_signed();
        assert_eq!(symmetrize(&k), k);
        let bu = symmetrize(&fixtures::example2_b());
        assert!((bu[(0, 1)] - 0.50995).abs() < 1e-12);
    }
}
