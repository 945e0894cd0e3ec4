//! Grid snapshots as CSV.
//!
//! ```text
//! # grid n=<N> L=<L> axes=<a>,<b> time=<t>
//! i,j,re,im
//! 0,0,1.2e-3,0e0
//! ```
//!
//! `n` and `L` are those of the position lattice; phase-space snapshots have
//! `2n` rows and columns.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::state::{DensityGrid, PhaseSpaceDistribution};

#[derive(Clone, Debug, PartialEq)]
pub struct GridCsv {
    pub grid: GridSpec,
    pub axes: String,
    pub time: f64,
    pub values: Array2<Complex64>,
}

fn write_grid(
    path: &Path,
    grid: &GridSpec,
    axes: &str,
    time: f64,
    shape: (usize, usize),
    value: impl Fn(usize, usize) -> Complex64,
) -> Result<()> {
    let io = |e| Error::io(path, e);
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    writeln!(w, "# grid n={} L={} axes={axes} time={time:e}", grid.n(), grid.half_width()).map_err(io)?;
    writeln!(w, "i,j,re,im").map_err(io)?;
    for i in 0..shape.0 {
        for j in 0..shape.1 {
            let z = value(i, j);
            writeln!(w, "{i},{j},{:e},{:e}", z.re, z.im).map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

pub fn write_density_csv(path: &Path, f: &DensityGrid) -> Result<()> {
    let v = f.values();
    write_grid(path, f.grid(), "Q,q", f.time(), v.dim(), |i, j| v[[i, j]])
}

pub fn write_phase_space_csv(path: &Path, f: &PhaseSpaceDistribution) -> Result<()> {
    let v = f.values();
    write_grid(path, f.grid(), "x,p", f.time(), v.dim(), |i, j| Complex64::new(v[[i, j]], 0.0))
}

pub fn read_grid_csv(path: &Path) -> Result<GridCsv> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines().enumerate();
    let parse_err = |line: usize, message: String| Error::Parse { line: line + 1, message };
    let (_, header) = lines.next().ok_or_else(|| parse_err(0, "empty file".into()))?;
    let header = header.map_err(|e| Error::io(path, e))?;
    let field = |key: &str| -> Result<String> {
        header
            .split_whitespace()
            .find_map(|tok| tok.strip_prefix(&format!("{key}=")).map(str::to_string))
            .ok_or_else(|| parse_err(0, format!("header lacks `{key}`")))
    };
    let num = |key: &str| -> Result<f64> {
        field(key)?
            .parse::<f64>()
            .map_err(|e| parse_err(0, format!("`{key}`: {e}")))
    };
    let grid = GridSpec::new(num("n")? as usize, num("L")?)?;
    let axes = field("axes")?;
    let time = num("time")?;
    let size = if axes == "x,p" { grid.phase_n() } else { grid.n() };
    let mut values = Array2::zeros((size, size));
    lines.next();
    for (no, line) in lines {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        let bad = || parse_err(no, format!("malformed row `{line}`"));
        if cols.len() != 4 {
            return Err(bad());
        }
        let i: usize = cols[0].parse().map_err(|_| bad())?;
        let j: usize = cols[1].parse().map_err(|_| bad())?;
        let re: f64 = cols[2].parse().map_err(|_| bad())?;
        let im: f64 = cols[3].parse().map_err(|_| bad())?;
        *values.get_mut([i, j]).ok_or_else(bad)? = Complex64::new(re, im);
    }
    Ok(GridCsv {
        grid,
        axes,
        time,
        values,
    })
}
