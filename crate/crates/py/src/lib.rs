//! Python bindings: the model family, class construction, parabolic
//! composition diagnostics, exponents and dimension computations.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;
use std::sync::Arc;

use horseshoe_core::dimension::{
    gibbs_measure, lambda_curve, solve_dimension, Truncation,
};
use horseshoe_core::family::{make_family, FamilyConfig};
use horseshoe_core::fold::FoldConfig;
use horseshoe_core::parabolic::TangencyCtx;
use horseshoe_core::params::{self, materialize_path};
use horseshoe_core::rclass::{Budgets, RClass};
use horseshoe_core::word::parse_word;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// The two-symbol model family with its tongue geometry.
#[pyclass]
struct ModelFamily {
    inner: horseshoe_core::ModelFamily,
}

#[pymethods]
impl ModelFamily {
    #[new]
    #[pyo3(signature = (lambda_s=0.284, eps0=1e-4, nonlinearity=0.0))]
    fn new(lambda_s: f64, eps0: f64, nonlinearity: f64) -> PyResult<Self> {
        let inner = make_family(FamilyConfig {
            lambda_s,
            eps0,
            nonlinearity,
            fold: FoldConfig::default(),
        })
        .map_err(value_err)?;
        Ok(ModelFamily { inner })
    }

    #[getter]
    fn d_s0(&self) -> f64 {
        self.inner.d_s0
    }

    #[getter]
    fn d_u0(&self) -> f64 {
        self.inner.d_u0
    }

    #[getter]
    fn h4_ok(&self) -> bool {
        self.inner.h4_ok
    }

    #[getter]
    fn warnings(&self) -> Vec<String> {
        self.inner.warnings.clone()
    }

    /// Widths `(|P|, |Q|)` of one transition branch.
    fn branch_widths(&self, a: u8, b: u8) -> PyResult<(f64, f64)> {
        let m = self
            .inner
            .transition_map(horseshoe_core::ChartId(a), horseshoe_core::ChartId(b))
            .map_err(value_err)?;
        Ok(m.widths())
    }

    /// Displacement corner values of the special-rectangle pair at `t`.
    fn displacement(&self, t: f64) -> PyResult<(f64, f64, f64, f64)> {
        let special = self.inner.special_rectangles();
        let ids_q = vec![horseshoe_core::ChartId(self.inner.a_u.0); special.n_u + 1];
        let ids_p = vec![horseshoe_core::ChartId(self.inner.a_s.0); special.n_s + 1];
        let q = self.inner.itinerary_map(&ids_q).map_err(value_err)?;
        let p = self.inner.itinerary_map(&ids_p).map_err(value_err)?;
        let fold = self.inner.fold_at(t).map_err(value_err)?;
        let quad = TangencyCtx::new(&q, &fold, &p).displacement();
        Ok((quad.delta, quad.delta_l, quad.delta_r, quad.delta_lr))
    }
}

/// A built class over one parameter interval.
#[pyclass]
struct Class {
    inner: Arc<RClass>,
}

#[pymethods]
impl Class {
    #[getter]
    fn len(&self) -> usize {
        self.inner.len()
    }

    /// Number of parabolic elements.
    #[getter]
    fn parabolic_count(&self) -> usize {
        self.inner
            .elements()
            .iter()
            .filter(|e| e.word.contains_block())
            .count()
    }

    fn words(&self) -> Vec<String> {
        self.inner
            .sorted_words()
            .iter()
            .map(|w| w.to_string())
            .collect()
    }

    fn widths(&self, word: &str) -> PyResult<(f64, f64)> {
        let w = parse_word(word).ok_or_else(|| value_err("malformed word"))?;
        let e = self
            .inner
            .get(&w)
            .ok_or_else(|| value_err("word not stored"))?;
        Ok((e.p_width, e.q_width))
    }

    /// Transfer-operator dimension at the given truncation.
    #[pyo3(signature = (m_trunc=6, w_min=1e-6))]
    fn dimension(&self, m_trunc: usize, w_min: f64) -> PyResult<f64> {
        let trunc = Truncation {
            m_trunc,
            w_min,
            base_y: 0.5,
        };
        solve_dimension(&self.inner, &trunc).map_err(value_err)
    }

    #[pyo3(signature = (m_trunc=6, w_min=1e-6))]
    fn gibbs_constant(&self, m_trunc: usize, w_min: f64) -> PyResult<f64> {
        let trunc = Truncation {
            m_trunc,
            w_min,
            base_y: 0.5,
        };
        let d = solve_dimension(&self.inner, &trunc).map_err(value_err)?;
        Ok(gibbs_measure(&self.inner, d, &trunc)
            .map_err(value_err)?
            .gibbs_constant)
    }

    #[pyo3(signature = (m_trunc=6, w_min=1e-6, grid=10))]
    fn lambda_curve(&self, m_trunc: usize, w_min: f64, grid: usize) -> PyResult<Vec<(f64, f64)>> {
        let trunc = Truncation {
            m_trunc,
            w_min,
            base_y: 0.5,
        };
        let ds: Vec<f64> = (0..grid)
            .map(|i| 0.1 + 1.3 * i as f64 / (grid - 1).max(1) as f64)
            .collect();
        lambda_curve(&self.inner, &trunc, &ds).map_err(value_err)
    }
}

/// Build the class chain along an interval-tree path; returns the deepest
/// class.
#[pyfunction]
#[pyo3(signature = (family, path=vec![], n_max=14, width_floor=1e-6, eta=0.05, tau=0.25))]
fn build_class(
    family: &ModelFamily,
    path: Vec<usize>,
    n_max: usize,
    width_floor: f64,
    eta: f64,
    tau: f64,
) -> PyResult<Class> {
    let budgets = Budgets { n_max, width_floor };
    let intervals =
        materialize_path(family.inner.config.eps0, tau, &path).map_err(value_err)?;
    let mut root = RClass::init(family.inner.clone(), intervals[0].clone(), budgets, eta)
        .map_err(value_err)?;
    root.extend();
    let mut chain = vec![Arc::new(root)];
    for iv in &intervals[1..] {
        let mut cls = RClass::descend(chain.last().unwrap(), iv.clone());
        cls.extend();
        chain.push(Arc::new(cls));
    }
    Ok(Class {
        inner: chain.pop().unwrap(),
    })
}

/// `(d_s0 + d_u0)^2 + max^2 < d_s0 + d_u0 + max`.
#[pyfunction]
fn check_h4(d_s0: f64, d_u0: f64) -> bool {
    params::check_h4(d_s0, d_u0)
}

/// Leading-order exponent set as a dict.
#[pyfunction]
fn exponents(py: Python<'_>, d_s0: f64, d_u0: f64) -> PyResult<Py<PyDict>> {
    let e = params::exponents(d_s0, d_u0).map_err(value_err)?;
    let dict = PyDict::new(py);
    dict.set_item("d_s0", e.d_s0)?;
    dict.set_item("d_u0", e.d_u0)?;
    dict.set_item("rho0", e.rho0)?;
    dict.set_item("rho1", e.rho1)?;
    dict.set_item("rho0_prime", e.rho0_prime)?;
    dict.set_item("rho1_prime", e.rho1_prime)?;
    dict.set_item("sigma0", e.sigma0)?;
    dict.set_item("sigma1", e.sigma1)?;
    dict.set_item("beta_max", e.beta_max)?;
    dict.set_item("x_cr_exponent", e.x_cr_exponent)?;
    dict.set_item("x_bar_exponent", e.x_bar_exponent)?;
    dict.set_item("exceptional_bound", e.exceptional_bound)?;
    Ok(dict.into())
}

/// Interval scale table `eps_0 .. eps_depth`.
#[pyfunction]
fn scale_table(eps0: f64, tau: f64, depth: usize) -> Vec<f64> {
    params::scale_table(eps0, tau, depth)
}

#[pymodule]
fn horseshoe_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<ModelFamily>()?;
    m.add_class::<Class>()?;
    m.add_function(wrap_pyfunction!(build_class, m)?)?;
    m.add_function(wrap_pyfunction!(check_h4, m)?)?;
    m.add_function(wrap_pyfunction!(exponents, m)?)?;
    m.add_function(wrap_pyfunction!(scale_table, m)?)?;
    Ok(())
}
