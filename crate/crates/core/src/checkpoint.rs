//! Binary checkpoints. Little-endian layout:
//!
//! ```text
//! magic      8 bytes  "QEDTPCHK"
//! version    u32      1
//! dim        u32
//! shape      3 × u64
//! h          f64
//! n_max      u64
//! omega      f64
//! lambda     3 × f64
//! mu         f64
//! iteration  u64
//! time       f64
//! orbitals   u64 count, then per orbital: occupation f64 and
//!            (N_F+1)·N_grid complex values as (re f64, im f64), sector-major
//! density    N_grid × f64
//! ```

use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::fock::{mean_dipole_mu, total_density, FockSpace, TpOrbital};
use crate::grid::Grid;

pub const MAGIC: &[u8; 8] = b"QEDTPCHK";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub grid: Grid,
    pub fock: FockSpace,
    pub orbitals: Vec<TpOrbital>,
    pub density: Vec<f64>,
    pub mu: f64,
    /// SCF iteration or propagation step.
    pub iteration: u64,
    pub time: f64,
}

impl Checkpoint {
    pub fn new(fock: FockSpace, orbitals: Vec<TpOrbital>, iteration: u64, time: f64) -> Result<Self> {
        let first = orbitals
            .first()
            .ok_or_else(|| Error::Usage("checkpoint needs at least one orbital".into()))?;
        let grid = *first.grid();
        if orbitals.iter().any(|o| o.sectors() != fock.sectors()) {
            return Err(Error::Usage("orbital sectors do not match the Fock space".into()));
        }
        let rho = total_density(&orbitals)?;
        Ok(Checkpoint {
            grid,
            mu: mean_dipole_mu(&rho, &fock),
            density: rho.values().to_vec(),
            fock,
            orbitals,
            iteration,
            time,
        })
    }

    pub fn write(&self, mut w: impl Write) -> Result<()> {
        let mut b = Vec::new();
        b.extend_from_slice(MAGIC);
        b.extend_from_slice(&VERSION.to_le_bytes());
        b.extend_from_slice(&(self.grid.dim() as u32).to_le_bytes());
        for s in self.grid.shape() {
            b.extend_from_slice(&(s as u64).to_le_bytes());
        }
        b.extend_from_slice(&self.grid.spacing().to_le_bytes());
        b.extend_from_slice(&(self.fock.n_max() as u64).to_le_bytes());
        b.extend_from_slice(&self.fock.omega().to_le_bytes());
        for l in self.fock.lambda() {
            b.extend_from_slice(&l.to_le_bytes());
        }
        b.extend_from_slice(&self.mu.to_le_bytes());
        b.extend_from_slice(&self.iteration.to_le_bytes());
        b.extend_from_slice(&self.time.to_le_bytes());
        b.extend_from_slice(&(self.orbitals.len() as u64).to_le_bytes());
        for o in &self.orbitals {
            b.extend_from_slice(&o.occupation.to_le_bytes());
            for z in o.as_slice() {
                b.extend_from_slice(&z.re.to_le_bytes());
                b.extend_from_slice(&z.im.to_le_bytes());
            }
        }
        for d in &self.density {
            b.extend_from_slice(&d.to_le_bytes());
        }
        w.write_all(&b)?;
        Ok(())
    }

    pub fn read(mut r: impl Read) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        let mut c = Cursor { bytes: &bytes, pos: 0 };
        if c.take(8)? != MAGIC {
            return Err(Error::Format("not a checkpoint file (bad magic)".into()));
        }
        let version = c.u32()?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported checkpoint version {version}")));
        }
        let dim = c.u32()? as usize;
        let shape = [c.u64()? as usize, c.u64()? as usize, c.u64()? as usize];
        let h = c.f64()?;
        let grid = Grid::new(dim, shape, h).map_err(|e| Error::Format(format!("checkpoint grid: {e}")))?;
        let n_max = c.u64()? as usize;
        let omega = c.f64()?;
        let lambda = [c.f64()?, c.f64()?, c.f64()?];
        let fock = FockSpace::new(n_max, omega, lambda).map_err(|e| Error::Format(format!("checkpoint cavity: {e}")))?;
        let mu = c.f64()?;
        let iteration = c.u64()?;
        let time = c.f64()?;
        let count = c.u64()? as usize;
        let len = grid.len() * fock.sectors();
        let mut orbitals = Vec::with_capacity(count.min(1 << 16));
        for _ in 0..count {
            let occupation = c.f64()?;
            let mut data = Vec::with_capacity(len);
            for _ in 0..len {
                data.push(C64::new(c.f64()?, c.f64()?));
            }
            orbitals.push(TpOrbital::from_flat(grid, fock.sectors(), data, occupation)?);
        }
        let density = (0..grid.len()).map(|_| c.f64()).collect::<Result<Vec<_>>>()?;
        if c.pos != bytes.len() {
            return Err(Error::Format(format!("{} trailing bytes in checkpoint", bytes.len() - c.pos)));
        }
        Ok(Checkpoint {
            grid,
            fock,
            orbitals,
            density,
            mu,
            iteration,
            time,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write(&mut buf)?;
        std::fs::write(path, buf)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read(std::io::BufReader::new(file))
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Format("truncated checkpoint".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}
