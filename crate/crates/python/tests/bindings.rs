use pyo3::prelude::*;
use pyo3::types::PyDict;

fn with_module<T>(f: impl FnOnce(&Bound<'_, PyModule>) -> PyResult<T>) -> T {
    Python::initialize();
    Python::attach(|py| {
        let module = pyo3::wrap_pymodule!(jacobi_mimo_py::jacobi_mimo_py)(py);
        f(module.bind(py).cast::<PyModule>().unwrap())
    })
    .unwrap()
}

#[test]
fn moments_and_mgf_round_trip() {
    with_module(|m| {
        let mom = m.getattr("moments")?.call1((3, 6, 12, vec![8.80, 0.11, 0.09]))?;
        let mom = mom.cast::<PyDict>()?;
        let skew: f64 = mom.get_item("skewness")?.unwrap().extract()?;
        assert!((skew + 0.62117).abs() < 1e-3);
        let m0: num_complex::Complex64 = m.getattr("mgf")?.call1((4, 3, 10, vec![11.0, 5.0, 1.5, 0.5], 0.0))?.extract()?;
        assert!((m0 - 1.0).norm() < 1e-9);
        Ok(())
    });
}

#[test]
fn invalid_channel_raises_value_error() {
    with_module(|m| {
        let err = m.getattr("ergodic_capacity")?.call1((3, 6, 8, vec![1.0, 1.0, 1.0])).unwrap_err();
        Python::attach(|py| assert!(err.is_instance_of::<pyo3::exceptions::PyValueError>(py)));
        assert!(err.to_string().contains("l >= m + n"));
        Ok(())
    });
}
