//! Census and Gaussian-oracle reports.

use fifa_core::dataset::{census, LabeledDataset, SubgroupCounts};
use fifa_core::gaussian::{compare_example1, GaussianSpec};
use fifa_core::margins::adjusted_size;
use fifa_core::ConstraintKind;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CensusReport {
    pub n: usize,
    pub n_features: usize,
    pub classes: Vec<String>,
    pub attributes: Vec<String>,
    pub per_class: Vec<usize>,
    /// `per_cell[class][attribute]`.
    pub per_cell: Vec<Vec<usize>>,
    pub alpha: f64,
    pub adjusted_sizes: Vec<f64>,
}

pub fn census_report(data: &LabeledDataset<f64>, alpha: f64, kind: ConstraintKind) -> Result<CensusReport> {
    let counts = census(data)?;
    let adjusted_sizes = (0..counts.n_classes())
        .map(|i| adjusted_size(&counts, alpha, kind, i))
        .collect::<fifa_core::Result<Vec<_>>>()?;
    Ok(CensusReport {
        n: data.len(),
        n_features: data.n_features(),
        classes: data.class_names().to_vec(),
        attributes: data.attribute_names().to_vec(),
        per_class: counts.per_class.clone(),
        per_cell: counts.per_cell.clone(),
        alpha,
        adjusted_sizes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianCheck {
    pub gamma_plain: f64,
    pub gamma_fifa: f64,
    pub m_plain: f64,
    pub m_fifa: f64,
    pub winner: String,
}

/// Compare class-balanced and subgroup-aware thresholds on a two-group
/// Gaussian mixture whose group weights come from `cells[class][group]`.
pub fn gaussian_check(
    mu1: Vec<f64>,
    mu2: Vec<f64>,
    beta: Vec<f64>,
    alpha: f64,
    cells: [[usize; 2]; 2],
) -> Result<GaussianCheck> {
    let mut pi = [[0.0; 2]; 2];
    for (y, row) in cells.iter().enumerate() {
        let n = (row[0] + row[1]) as f64;
        if n == 0.0 {
            return Err(CliError::Config(format!("class {y} has no samples")));
        }
        pi[y] = [row[0] as f64 / n, row[1] as f64 / n];
    }
    let spec = GaussianSpec {
        mu1,
        mu2,
        beta,
        pi,
        alpha,
    };
    let counts = SubgroupCounts::from_cells(cells.iter().map(|r| r.to_vec()).collect())?;
    let r = compare_example1(&spec, &counts)?;
    Ok(GaussianCheck {
        gamma_plain: r.gamma_plain,
        gamma_fifa: r.gamma_fifa,
        m_plain: r.m_plain,
        m_fifa: r.m_fifa,
        winner: if r.fifa_wins { "fifa" } else { "plain" }.into(),
    })
}
