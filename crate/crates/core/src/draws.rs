//! Stored posterior draws, their derived surfaces, and the `draws.bin` format.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::eval::induced_exposure_effects;
use crate::state::ParameterState;

const MAGIC: &[u8; 8] = b"TVFDRAWS";
pub const FORMAT_VERSION: u32 = 1;

/// Thinned post-burn-in states of one chain.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorDraws {
    pub grid: Vec<f64>,
    pub states: Vec<ParameterState>,
    /// Iteration index (0-based) each state was taken at.
    pub iterations: Vec<usize>,
    pub log_posterior: Vec<f64>,
}

impl PosteriorDraws {
    pub fn new(grid: Vec<f64>) -> Self {
        Self { grid, states: Vec::new(), iterations: Vec::new(), log_posterior: Vec::new() }
    }

    pub fn push(&mut self, state: ParameterState, iteration: usize, log_posterior: f64) {
        self.states.push(state);
        self.iterations.push(iteration);
        self.log_posterior.push(log_posterior);
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// `B(t) = Λ U(t)` of draw `d` at every grid time (q x K each).
    pub fn coefficient_surface(&self, d: usize) -> Vec<DMatrix<f64>> {
        self.states[d].b_all()
    }

    /// Induced exposure effects `B(t) A` of draw `d` (q x p each).
    pub fn induced_effects(&self, d: usize) -> Vec<DMatrix<f64>> {
        let s = &self.states[d];
        induced_exposure_effects(&s.theta, &s.sigma_x2, &s.b_all())
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&(self.grid.len() as u64).to_le_bytes())?;
        for g in &self.grid {
            w.write_all(&g.to_le_bytes())?;
        }
        w.write_all(&(self.states.len() as u64).to_le_bytes())?;
        for ((s, it), lp) in self.states.iter().zip(&self.iterations).zip(&self.log_posterior) {
            let bytes = s.to_bytes()?;
            w.write_all(&(*it as u64).to_le_bytes())?;
            w.write_all(&lp.to_le_bytes())?;
            w.write_all(&(bytes.len() as u64).to_le_bytes())?;
            w.write_all(&bytes)?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(|_| Error::Format("truncated header".into()))?;
        if &magic != MAGIC {
            return Err(Error::Format("not a draws file".into()));
        }
        let version = u32::from_le_bytes(read_array(&mut r)?);
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let t = u64::from_le_bytes(read_array(&mut r)?) as usize;
        let grid = (0..t).map(|_| read_array(&mut r).map(f64::from_le_bytes)).collect::<Result<Vec<_>>>()?;
        let count = u64::from_le_bytes(read_array(&mut r)?) as usize;
        let mut draws = Self::new(grid);
        for _ in 0..count {
            let it = u64::from_le_bytes(read_array(&mut r)?) as usize;
            let lp = f64::from_le_bytes(read_array(&mut r)?);
            let len = u64::from_le_bytes(read_array(&mut r)?) as usize;
            let mut buf = vec![0u8; len];
            r.read_exact(&mut buf).map_err(|_| Error::Format("truncated state".into()))?;
            draws.push(ParameterState::from_bytes(&buf)?, it, lp);
        }
        Ok(draws)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        std::fs::write(path, buf)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        Self::read_from(bytes.as_slice())
    }
}

fn read_array<R: Read, const N: usize>(r: &mut R) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b).map_err(|_| Error::Format("unexpected end of file".into()))?;
    Ok(b)
}
