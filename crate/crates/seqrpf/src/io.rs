//! JSON documents for grids and discrete functions.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use seqrpf_core::function::DiscreteFunction;
use seqrpf_core::grid::{Grid, Interpolation, Point};
use seqrpf_core::C64;

use crate::error::RunError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridParameters {
    pub alpha: f64,
    /// `null` encodes `ξ = ∞`.
    pub xi: Option<f64>,
    pub beta: f64,
    pub r_max: usize,
    pub k_depth: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridDocument {
    /// `chebyshev`, `linear`, `cylinder` or `tower`.
    pub kind: String,
    pub nodes: Vec<Point>,
    pub parameters: GridParameters,
}

pub fn grid_document(grid: &Grid) -> GridDocument {
    let kind = match (grid.interval(), grid.tower_layout()) {
        (Some(iv), _) => match iv.interpolation {
            Interpolation::Barycentric(_) => "chebyshev",
            Interpolation::PiecewiseLinear => "linear",
        },
        (None, Some(_)) => "tower",
        (None, None) => "cylinder",
    };
    let p = grid.params();
    GridDocument {
        kind: kind.to_string(),
        nodes: (0..grid.len()).map(|i| grid.node_point(i)).collect(),
        parameters: GridParameters {
            alpha: p.alpha,
            xi: if p.xi.is_finite() { Some(p.xi) } else { None },
            beta: p.beta,
            r_max: p.r_max,
            k_depth: p.k_depth,
        },
    }
}

/// Rebuilds interval and cylinder grids. Tower grids depend on the tower
/// specification and cannot be recovered from their nodes.
pub fn grid_from_document(doc: &GridDocument) -> Result<Grid, RunError> {
    let grid = match doc.kind.as_str() {
        "chebyshev" => Grid::chebyshev(doc.nodes.len()).map_err(RunError::setup)?,
        "linear" => {
            let xs: Option<Vec<f64>> = doc.nodes.iter().map(|p| p.as_real()).collect();
            let xs = xs.ok_or_else(|| RunError::validation("linear grid with non-real nodes"))?;
            Grid::piecewise_linear(xs).map_err(RunError::setup)?
        }
        "cylinder" => {
            let words: Vec<&Vec<usize>> = doc
                .nodes
                .iter()
                .map(|p| match p {
                    Point::Word(w) => Ok(w),
                    _ => Err(RunError::validation("cylinder grid with non-word nodes")),
                })
                .collect::<Result<_, _>>()?;
            let depth = words.first().map(|w| w.len()).unwrap_or(0);
            let alphabet = words.iter().flat_map(|w| w.iter()).max().map(|m| m + 1).unwrap_or(0);
            Grid::cylinder(alphabet, depth, doc.parameters.beta).map_err(RunError::setup)?
        }
        other => return Err(RunError::validation(format!("cannot rebuild a {other} grid from a document"))),
    };
    let grid = grid.with_params(doc.parameters.alpha, doc.parameters.xi.unwrap_or(f64::INFINITY));
    if grid.len() != doc.nodes.len() || (0..grid.len()).any(|i| grid.node_point(i) != doc.nodes[i]) {
        return Err(RunError::validation("grid document nodes do not match the rebuilt grid"));
    }
    Ok(grid)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionDocument {
    pub grid: GridDocument,
    /// `[re, im]` per node.
    pub values: Vec<[f64; 2]>,
}

pub fn function_document(f: &DiscreteFunction) -> FunctionDocument {
    FunctionDocument { grid: grid_document(&f.grid), values: f.values.iter().map(|v| [v.re, v.im]).collect() }
}

pub fn read_function(path: &Path) -> Result<DiscreteFunction, RunError> {
    let text = fs::read_to_string(path)?;
    let doc: FunctionDocument =
        serde_json::from_str(&text).map_err(|e| RunError::validation(format!("{}: {e}", path.display())))?;
    function_from_document(&doc, None)
}

/// Reuses `grid` when it matches the document, so two functions read from
/// files share one grid.
pub fn function_from_document(doc: &FunctionDocument, grid: Option<&Arc<Grid>>) -> Result<DiscreteFunction, RunError> {
    let g = match grid {
        Some(g) if grid_document(g) == doc.grid => g.clone(),
        _ => Arc::new(grid_from_document(&doc.grid)?),
    };
    let values = doc.values.iter().map(|v| C64::new(v[0], v[1])).collect();
    DiscreteFunction::new(g, values).map_err(RunError::setup)
}

pub fn write_function(path: &Path, f: &DiscreteFunction) -> Result<(), RunError> {
    let mut text = serde_json::to_string_pretty(&function_document(f))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn documents_round_trip() {
        for g in [Grid::chebyshev(9).unwrap(), Grid::piecewise_linear(vec![0.0, 0.3, 1.0]).unwrap(), Grid::cylinder(3, 2, 0.25).unwrap()] {
            let doc = grid_document(&g);
            let back = grid_from_document(&doc).unwrap();
            assert_eq!(grid_document(&back), doc);
            let json = serde_json::to_string(&doc).unwrap();
            let again: GridDocument = serde_json::from_str(&json).unwrap();
            assert_eq!(again, doc);
        }
    }
}
