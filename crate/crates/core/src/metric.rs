//! Metric components as jets at a chart point.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::expr::ExpressionTree;
use crate::jet::{Jet, JetSpace};
use crate::tensor::{cholesky, PointTensor};

/// Largest supported manifold dimension.
pub const MAX_DIM: usize = 8;

/// Jets of `g_ij` at one point.
///
/// The tensor dimension `dim` may exceed the number of jet variables: chart
/// coordinates with index `>= n_vars` are inert (the metric does not depend on
/// them), so their partial derivatives vanish identically. Torus families that
/// depend on two coordinates of a seven-dimensional chart use this to keep jets
/// small.
#[derive(Debug, Clone)]
pub struct MetricJet {
    dim: usize,
    point: Vec<f64>,
    space: Arc<JetSpace>,
    order: usize,
    /// Row-major `dim × dim` jets, `space.len(order)` coefficients each.
    data: Vec<f64>,
}

impl MetricJet {
    /// Builds a metric from a component closure evaluated on `i <= j` and mirrored,
    /// so symmetry holds coefficient-wise exactly.
    pub fn from_components(
        dim: usize,
        point: &[f64],
        space: &Arc<JetSpace>,
        order: usize,
        mut component: impl FnMut(usize, usize) -> Result<Jet>,
    ) -> Result<MetricJet> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::Dimension { dim, reason: "metric dimension must be in 1..=8" });
        }
        if point.len() != dim {
            return Err(Error::Shape(alloc::format!(
                "point has {} coordinates, metric dimension is {dim}",
                point.len()
            )));
        }
        if space.n_vars() > dim {
            return Err(Error::Shape("more jet variables than chart coordinates".into()));
        }
        if order > space.max_order() {
            return Err(Error::Order { requested: order, available: space.max_order() });
        }
        let stride = space.len(order);
        let mut data = vec![0.0; dim * dim * stride];
        for i in 0..dim {
            for j in i..dim {
                let jet = component(i, j)?;
                if jet.order() != order || jet.n_vars() != space.n_vars() {
                    return Err(Error::Shape("metric component jet has the wrong shape".into()));
                }
                data[(i * dim + j) * stride..(i * dim + j + 1) * stride]
                    .copy_from_slice(jet.coeffs());
                data[(j * dim + i) * stride..(j * dim + i + 1) * stride]
                    .copy_from_slice(jet.coeffs());
            }
        }
        let m = MetricJet { dim, point: point.to_vec(), space: space.clone(), order, data };
        m.check_spd()?;
        Ok(m)
    }

    /// Row-major `dim × dim` jets; rejects any asymmetry.
    pub fn from_jets(dim: usize, point: &[f64], jets: Vec<Jet>) -> Result<MetricJet> {
        if jets.len() != dim * dim {
            return Err(Error::Shape(alloc::format!("expected {} jets", dim * dim)));
        }
        let space = jets[0].space().clone();
        let order = jets[0].order();
        for i in 0..dim {
            for j in 0..i {
                if jets[i * dim + j] != jets[j * dim + i] {
                    return Err(Error::Shape(alloc::format!("g[{i}][{j}] != g[{j}][{i}]")));
                }
            }
        }
        MetricJet::from_components(dim, point, &space, order, |i, j| Ok(jets[i * dim + j].clone()))
    }

    /// Metric whose components are expression trees over all `dim` coordinates.
    pub fn from_expressions(
        dim: usize,
        point: &[f64],
        order: usize,
        component: impl Fn(usize, usize) -> ExpressionTree,
    ) -> Result<MetricJet> {
        let space = JetSpace::new(dim, order)?;
        MetricJet::from_components(dim, point, &space, order, |i, j| {
            component(i, j).jet_in(&space, point, order)
        })
    }

    fn check_spd(&self) -> Result<()> {
        cholesky(self.values().components(), self.dim).map(|_| ())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self) -> &[f64] {
        &self.point
    }

    pub fn space(&self) -> &Arc<JetSpace> {
        &self.space
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn n_vars(&self) -> usize {
        self.space.n_vars()
    }

    pub(crate) fn stride(&self) -> usize {
        self.space.len(self.order)
    }

    pub(crate) fn raw(&self) -> &[f64] {
        &self.data
    }

    pub fn component(&self, i: usize, j: usize) -> Jet {
        let s = self.stride();
        let k = i * self.dim + j;
        Jet::from_coeffs(&self.space, self.order, self.data[k * s..(k + 1) * s].to_vec())
            .expect("stored jets have the space's shape")
    }

    /// Constant terms `g_ij(point)`.
    pub fn values(&self) -> PointTensor {
        let s = self.stride();
        PointTensor::covariant2(self.dim, |i, j| self.data[(i * self.dim + j) * s])
    }

    /// `√det g` at the point.
    pub fn volume_density(&self) -> Result<f64> {
        crate::tensor::sqrt_det_spd(self.values().components(), self.dim)
    }

    /// Multiplies every component by the jet `factor`.
    pub fn scaled_by(&self, factor: &Jet) -> Result<MetricJet> {
        if factor.n_vars() != self.n_vars() || factor.order() < self.order {
            return Err(Error::Shape("conformal factor jet does not match the metric".into()));
        }
        let s = self.stride();
        let mut data = vec![0.0; self.data.len()];
        for k in 0..self.dim * self.dim {
            self.space.mul(
                self.order,
                &self.data[k * s..(k + 1) * s],
                factor.coeffs(),
                &mut data[k * s..(k + 1) * s],
            );
        }
        let m = MetricJet { dim: self.dim, point: self.point.clone(), space: self.space.clone(), order: self.order, data };
        m.check_spd()?;
        Ok(m)
    }

    /// Largest coefficient-wise difference from another metric jet of the same shape.
    pub fn max_coeff_diff(&self, other: &MetricJet) -> Result<f64> {
        if self.dim != other.dim || self.order != other.order || self.n_vars() != other.n_vars() {
            return Err(Error::Shape("metric jets differ in shape".into()));
        }
        Ok(self.data.iter().zip(&other.data).fold(0.0, |m, (a, b)| libm::fmax(m, libm::fabs(a - b))))
    }
}
