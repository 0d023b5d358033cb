//! Structured spatial grids and the flow state.

use serde::Serialize;

use crate::error::{GeomError, Result};
use crate::real::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Topology {
    /// `r ∈ [0, R_max]` with a node at the origin and Dirichlet data at `R_max`.
    Radial,
    BoxPeriodic,
    BoxDirichlet,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpatialGrid<T> {
    /// Spatial dimension of the chart.
    pub n: usize,
    pub topology: Topology,
    pub nodes_per_axis: usize,
    /// Lower corner, one entry per grid axis.
    pub lo: Vec<T>,
    /// Spacing per grid axis.
    pub h: Vec<T>,
}

impl<T: Real> SpatialGrid<T> {
    pub fn radial(n: usize, r_max: T, nodes: usize) -> Result<Self> {
        if nodes < 9 {
            return Err(GeomError::Shape(format!("{nodes} nodes per axis, need at least 9")));
        }
        if r_max <= T::zero() || n == 0 {
            return Err(GeomError::Shape("radial grid needs n ≥ 1 and R_max > 0".into()));
        }
        Ok(Self {
            n,
            topology: Topology::Radial,
            nodes_per_axis: nodes,
            lo: vec![T::zero()],
            h: vec![r_max / T::from_usize_lossy(nodes - 1)],
        })
    }

    /// Box over `[lo, hi]` per axis. Periodic boxes do not duplicate `hi`.
    pub fn boxed(lo: &[T], hi: &[T], nodes: usize, periodic: bool) -> Result<Self> {
        if nodes < 9 {
            return Err(GeomError::Shape(format!("{nodes} nodes per axis, need at least 9")));
        }
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(GeomError::Shape("box corners differ in length".into()));
        }
        let cells = if periodic { nodes } else { nodes - 1 };
        let h: Vec<T> = lo
            .iter()
            .zip(hi)
            .map(|(a, b)| (*b - *a) / T::from_usize_lossy(cells))
            .collect();
        if h.iter().any(|v| *v <= T::zero()) {
            return Err(GeomError::Shape("box has non-positive extent".into()));
        }
        Ok(Self {
            n: lo.len(),
            topology: if periodic {
                Topology::BoxPeriodic
            } else {
                Topology::BoxDirichlet
            },
            nodes_per_axis: nodes,
            lo: lo.to_vec(),
            h,
        })
    }

    pub fn is_radial(&self) -> bool {
        self.topology == Topology::Radial
    }

    /// Number of grid axes (1 for radial grids).
    pub fn axes(&self) -> usize {
        if self.is_radial() {
            1
        } else {
            self.n
        }
    }

    pub fn len(&self) -> usize {
        self.nodes_per_axis.pow(self.axes() as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn h_min(&self) -> T {
        self.h.iter().copied().fold(self.h[0], |m, v| m.min(v))
    }

    /// Multi-index of a node, first axis slowest.
    pub fn multi_index(&self, mut node: usize) -> Vec<usize> {
        let k = self.axes();
        let mut idx = vec![0; k];
        for a in (0..k).rev() {
            idx[a] = node % self.nodes_per_axis;
            node /= self.nodes_per_axis;
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, i| acc * self.nodes_per_axis + i)
    }

    pub fn coords(&self, node: usize) -> Vec<T> {
        self.multi_index(node)
            .iter()
            .enumerate()
            .map(|(a, &i)| self.lo[a] + self.h[a] * T::from_usize_lossy(i))
            .collect()
    }

    /// Nodes whose values are prescribed rather than evolved.
    pub fn is_boundary(&self, node: usize) -> bool {
        match self.topology {
            Topology::Radial => node + 1 == self.nodes_per_axis,
            Topology::BoxPeriodic => false,
            Topology::BoxDirichlet => self
                .multi_index(node)
                .iter()
                .any(|&i| i == 0 || i + 1 == self.nodes_per_axis),
        }
    }

    /// Nodes at least `depth` nodes away from every Dirichlet edge.
    pub fn deep_nodes(&self, depth: usize) -> Vec<usize> {
        let m = self.nodes_per_axis;
        (0..self.len())
            .filter(|&k| match self.topology {
                Topology::Radial => k + depth < m,
                Topology::BoxPeriodic => true,
                Topology::BoxDirichlet => self.multi_index(k).iter().all(|&i| i >= depth && i + depth < m),
            })
            .collect()
    }

    /// Neighbor along `axis` at offset `d`, wrapping for periodic boxes.
    /// `None` when the stencil leaves the grid.
    pub fn neighbor(&self, node: usize, axis: usize, d: isize) -> Option<usize> {
        let mut idx = self.multi_index(node);
        let m = self.nodes_per_axis as isize;
        let j = idx[axis] as isize + d;
        let j = match self.topology {
            Topology::BoxPeriodic => j.rem_euclid(m),
            _ if j < 0 || j >= m => return None,
            _ => j,
        };
        idx[axis] = j as usize;
        Some(self.flat_index(&idx))
    }

    /// Grid with every spacing halved over the same extent.
    pub fn refined(&self) -> Self {
        let nodes = match self.topology {
            Topology::BoxPeriodic => 2 * self.nodes_per_axis,
            _ => 2 * self.nodes_per_axis - 1,
        };
        Self {
            nodes_per_axis: nodes,
            h: self.h.iter().map(|h| *h / T::lit(2.0)).collect(),
            ..self.clone()
        }
    }
}

/// Height function `t = w(x)` at flow time `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphState<T> {
    pub grid: SpatialGrid<T>,
    pub w: Vec<T>,
    pub s: T,
}

impl<T: Real> GraphState<T> {
    pub fn from_fn<F: Fn(&[T]) -> T>(grid: SpatialGrid<T>, f: F) -> Self {
        let w = (0..grid.len()).map(|k| f(&grid.coords(k))).collect();
        Self { grid, w, s: T::zero() }
    }

    pub fn check_shape(&self) -> Result<()> {
        if self.w.len() != self.grid.len() {
            return Err(GeomError::Shape(format!(
                "state has {} samples, grid has {} nodes",
                self.w.len(),
                self.grid.len()
            )));
        }
        Ok(())
    }

    /// JSON snapshot: grid description plus the height array.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "s": self.s.f64(),
            "grid": {
                "n": self.grid.n,
                "topology": self.grid.topology,
                "nodes_per_axis": self.grid.nodes_per_axis,
                "lo": self.grid.lo.iter().map(|v| v.f64()).collect::<Vec<_>>(),
                "h": self.grid.h.iter().map(|v| v.f64()).collect::<Vec<_>>(),
            },
            "w": self.w.iter().map(|v| v.f64()).collect::<Vec<_>>(),
        })
    }
}
