use pyo3::prelude::*;

#[pymodule]
fn lcflow_py(_m: &Bound<'_, PyModule>) -> PyResult<()> {
    Ok(())
}
