//! Composite Gauss–Legendre rules on dyadic cell grids.

use gauss_quad::GaussLegendre;

use crate::error::{Error, Result};
use crate::tree::{level_cells, Interval, TreeIndex};

pub const DEFAULT_ORDER: usize = 8;

const MAX_EXTRA_REFINEMENT: u32 = 20;

/// Gauss–Legendre points per cell and the dyadic level of the integration cells.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub struct QuadratureSpec {
    pub order: usize,
    pub refinement_level: u32,
}

impl QuadratureSpec {
    pub fn new(order: usize, refinement_level: u32) -> Result<Self> {
        if order < 2 {
            return Err(Error::Config(format!("quadrature order {order} < 2")));
        }
        if refinement_level == 0 {
            return Err(Error::Config("quadrature refinement level must be ≥ 1".into()));
        }
        Ok(Self {
            order,
            refinement_level,
        })
    }

    /// Order 8 on cells of level `ℓ + R - 1`, the finest scale of `𝕀(ℓ;R)`.
    pub fn for_projection(level: u32, rank: u32) -> Self {
        Self {
            order: DEFAULT_ORDER,
            refinement_level: level + rank.max(1) - 1,
        }
    }

    pub fn resolves(&self, level: u32, rank: u32) -> bool {
        self.refinement_level >= level + rank - 1
    }

    pub fn check_resolves(&self, level: u32, rank: u32) -> Result<()> {
        if !self.resolves(level, rank) {
            return Err(Error::Config(format!(
                "quadrature refinement level {} does not resolve rank {rank} at level {level} (need ≥ {})",
                self.refinement_level,
                level + rank - 1
            )));
        }
        Ok(())
    }

    /// Same order on a finer grid when `level` exceeds the current refinement.
    pub fn refined_to(&self, level: Option<u32>) -> Self {
        Self {
            order: self.order,
            refinement_level: level.map_or(self.refinement_level, |l| l.max(self.refinement_level)),
        }
    }
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            order: DEFAULT_ORDER,
            refinement_level: 1,
        }
    }
}

/// Nodes and weights of a composite rule, grouped by integration cell.
#[derive(Clone, Debug)]
pub struct QuadGrid {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// Integration cells in window order; cell `c` owns nodes `c*order .. (c+1)*order`.
    pub cells: Vec<TreeIndex>,
    pub order: usize,
}

impl QuadGrid {
    pub fn new(window: &Interval, spec: &QuadratureSpec) -> Result<Self> {
        let rule = GaussLegendre::new(spec.order).map_err(|e| Error::Config(format!("Gauss-Legendre rule: {e}")))?;
        let reference = rule.as_node_weight_pairs();
        // refine further if the window itself needs finer cells
        let level = (spec.refinement_level..=spec.refinement_level + MAX_EXTRA_REFINEMENT)
            .find(|&l| window.is_aligned(l))
            .unwrap_or(spec.refinement_level);
        let cells = level_cells(level, window)?;
        let mut nodes = Vec::with_capacity(cells.len() * spec.order);
        let mut weights = Vec::with_capacity(cells.len() * spec.order);
        for c in &cells {
            let iv = c.cell();
            let half = 0.5 * iv.len();
            let mid = iv.lo + half;
            for &(x, w) in reference {
                nodes.push(mid + half * x);
                weights.push(half * w);
            }
        }
        Ok(Self {
            nodes,
            weights,
            cells,
            order: spec.order,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }

    /// Node positions belonging to integration cells inside `region`.
    pub fn node_range(&self, region: &Interval) -> Vec<usize> {
        self.cells
            .iter()
            .enumerate()
            .filter(|(_, c)| region.contains_interval(&c.cell()))
            .flat_map(|(k, _)| k * self.order..(k + 1) * self.order)
            .collect()
    }
}
