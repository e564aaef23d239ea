use crate::error::{invalid, Result};
use crate::grid::ScalarField;

use super::Integrand;

/// Regularised data and the explicit convex subsolution built from it.
#[derive(Debug, Clone)]
pub struct Subsolution {
    pub g_eps: ScalarField,
    pub u_eps: ScalarField,
}

/// `g_ε = max{g, -1/ε} + ε|x|² + F_n*(εx)/ε` and
/// `u_ε = F_n*(εx)/ε + mε - 1/ε`.
pub fn make_subsolution(fn_smooth: &Integrand, g: &ScalarField, eps: f64) -> Result<Subsolution> {
    if !(eps > 0.0 && eps.is_finite()) {
        return invalid("ε must be positive");
    }
    if !fn_smooth.is_smooth() {
        return invalid("the subsolution needs a smooth integrand");
    }
    let grid = g.grid();
    fn_smooth.check_dimension(grid.dimension())?;
    let m = grid.dimension() as f64;
    let mut gv = Vec::with_capacity(grid.len());
    let mut uv = Vec::with_capacity(grid.len());
    let mut scaled = vec![0.0; grid.dimension()];
    for i in 0..grid.len() {
        let mut r2 = 0.0;
        for (d, s) in scaled.iter_mut().enumerate() {
            let x = grid.coordinate(i, d);
            r2 += x * x;
            *s = eps * x;
        }
        let conj = fn_smooth.conjugate(&scaled) / eps;
        gv.push(g.values()[i].max(-1.0 / eps) + eps * r2 + conj);
        uv.push(conj + m * eps - 1.0 / eps);
    }
    Ok(Subsolution {
        g_eps: ScalarField::new(grid.clone(), gv)?,
        u_eps: ScalarField::new(grid.clone(), uv)?,
    })
}
