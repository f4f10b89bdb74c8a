//! File formats.
//!
//! * edge list CSV `debtor,creditor,amount` with banks numbered from 1 and
//!   creditor 0 standing for society;
//! * node table CSV `bank,external_assets[,external_liab]`;
//! * aggregate bank data CSV
//!   `bank_id,total_assets,capital,interbank_liabilities[,interbank_assets]`;
//! * flat TOML configs that reject unknown keys.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::calibration::EbaRecord;
use crate::error::{invalid, Result};
use crate::network::VanillaNetwork;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub debtor: usize,
    pub creditor: usize,
    pub amount: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub bank: usize,
    pub external_assets: f64,
    #[serde(default)]
    pub external_liab: Option<f64>,
}

fn read_rows<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut rows = Vec::new();
    for row in reader.deserialize() {
        rows.push(row?);
    }
    Ok(rows)
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}

/// Assemble a vanilla network from an edge list and a node table.
/// External liabilities may be given as edges to creditor 0 or in the node
/// table, but not both for the same bank.
pub fn vanilla_from_tables(edges: &[Edge], nodes: &[Node]) -> Result<VanillaNetwork> {
    let n = nodes.len();
    let mut x = vec![f64::NAN; n];
    let mut l0 = vec![0.0; n];
    let mut l0_in_table = vec![false; n];
    for node in nodes {
        if node.bank == 0 || node.bank > n {
            return Err(invalid(format!(
                "node table: bank {} outside 1..={n}",
                node.bank
            )));
        }
        let i = node.bank - 1;
        if !x[i].is_nan() {
            return Err(invalid(format!(
                "node table: bank {} listed twice",
                node.bank
            )));
        }
        x[i] = node.external_assets;
        if let Some(v) = node.external_liab {
            l0[i] = v;
            l0_in_table[i] = true;
        }
    }
    let mut l = DMatrix::zeros(n, n);
    for e in edges {
        if e.debtor == 0 || e.debtor > n || e.creditor > n {
            return Err(invalid(format!(
                "edge {} -> {} refers to an unknown bank",
                e.debtor, e.creditor
            )));
        }
        if e.creditor == e.debtor {
            return Err(invalid(format!(
                "edge {} -> {} is a self-loan",
                e.debtor, e.creditor
            )));
        }
        if e.creditor == 0 {
            if l0_in_table[e.debtor - 1] {
                return Err(invalid(format!(
                    "bank {} has external liabilities in both files",
                    e.debtor
                )));
            }
            l0[e.debtor - 1] += e.amount;
        } else {
            l[(e.debtor - 1, e.creditor - 1)] += e.amount;
        }
    }
    VanillaNetwork::new(l, l0, x)
}

pub fn read_vanilla(edges: &Path, nodes: &Path) -> Result<VanillaNetwork> {
    vanilla_from_tables(&read_rows(edges)?, &read_rows(nodes)?)
}

/// Edge list (society edges included) and node table for a network.
pub fn vanilla_to_tables(net: &VanillaNetwork) -> (Vec<Edge>, Vec<Node>) {
    let mut edges = Vec::new();
    for i in 0..net.n() {
        if net.external_liab()[i] > 0.0 {
            edges.push(Edge {
                debtor: i + 1,
                creditor: 0,
                amount: net.external_liab()[i],
            });
        }
        for j in 0..net.n() {
            let amount = net.liabilities()[(i, j)];
            if amount > 0.0 {
                edges.push(Edge {
                    debtor: i + 1,
                    creditor: j + 1,
                    amount,
                });
            }
        }
    }
    let nodes = net
        .external_assets()
        .iter()
        .enumerate()
        .map(|(i, &x)| Node {
            bank: i + 1,
            external_assets: x,
            external_liab: None,
        })
        .collect();
    (edges, nodes)
}

pub fn write_vanilla(net: &VanillaNetwork, edges: &Path, nodes: &Path) -> Result<()> {
    let (e, n) = vanilla_to_tables(net);
    write_rows(edges, &e)?;
    write_rows(nodes, &n)
}

pub fn read_eba(path: &Path) -> Result<Vec<EbaRecord>> {
    read_rows(path)
}

pub fn write_eba(path: &Path, records: &[EbaRecord]) -> Result<()> {
    write_rows(path, records)
}

/// Parse a TOML config; unknown keys are rejected by the target type.
pub fn read_toml<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(toml::from_str(&fs::read_to_string(path)?)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_through_files() {
        let dir = tempfile::tempdir().unwrap();
        let l = DMatrix::from_row_slice(3, 3, &[0.0, 1.5, 0.0, 2.0, 0.0, 0.5, 0.0, 3.0, 0.0]);
        let net = VanillaNetwork::new(l, vec![4.0, 0.0, 1.0], vec![9.0, 3.0, 2.5]).unwrap();
        let (e, n) = (dir.path().join("edges.csv"), dir.path().join("nodes.csv"));
        write_vanilla(&net, &e, &n).unwrap();
        assert_eq!(read_vanilla(&e, &n).unwrap(), net);
    }

    #[test]
    fn node_table_may_carry_external_liabilities() {
        let edges = [Edge {
            debtor: 1,
            creditor: 2,
            amount: 1.0,
        }];
        let nodes = [
            Node {
                bank: 1,
                external_assets: 5.0,
                external_liab: Some(2.0),
            },
            Node {
                bank: 2,
                external_assets: 5.0,
                external_liab: None,
            },
        ];
        let net = vanilla_from_tables(&edges, &nodes).unwrap();
        assert_eq!(net.external_liab(), &[2.0, 0.0]);
        let dup = [Edge {
            debtor: 1,
            creditor: 0,
            amount: 1.0,
        }];
        assert!(vanilla_from_tables(&dup, &nodes).is_err());
        let bad = [Edge {
            debtor: 1,
            creditor: 7,
            amount: 1.0,
        }];
        assert!(vanilla_from_tables(&bad, &nodes).is_err());
    }

    #[test]
    fn eba_csv_with_optional_column() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("eba.csv");
        fs::write(
            &p,
            "bank_id,total_assets,capital,interbank_liabilities\nA,100,5,10\nB,50,2,4\n",
        )
        .unwrap();
        let r = read_eba(&p).unwrap();
        assert_eq!(r.len(), 2);
        assert_eq!(r[0].interbank_assets, None);
        fs::write(
            &p,
            "bank_id,total_assets,capital,interbank_liabilities,interbank_assets\nA,100,5,10,12\n",
        )
        .unwrap();
        assert_eq!(read_eba(&p).unwrap()[0].interbank_assets, Some(12.0));
    }
}
