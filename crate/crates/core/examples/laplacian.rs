//! Finite-difference Laplacian of a Gaussian: error against the analytic
//! second derivative for every stencil width as the grid is refined.

use qedtp::grid::{laplacian_apply, Field, Grid, Stencil};

fn main() -> qedtp::Result<()> {
    println!("points\th\tmax error");
    for points in [3, 5, 7, 9] {
        let stencil = Stencil::new(points)?;
        for h in [0.2, 0.1, 0.05] {
            let n = (12.0 / h) as usize + 1;
            let grid = Grid::new_1d(n, h)?;
            let f = Field::from_fn(grid, |r| (-r[0] * r[0]).exp());
            let lap = laplacian_apply(&f, stencil)?;
            let err = grid
                .axis_coords(0)
                .iter()
                .zip(lap.values())
                .map(|(x, v)| (v - (4.0 * x * x - 2.0) * (-x * x).exp()).abs())
                .fold(0.0, f64::max);
            println!("{points}\t{h}\t{err:.3e}");
        }
    }
    Ok(())
}
