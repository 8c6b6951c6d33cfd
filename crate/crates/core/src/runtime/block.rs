//! Packed shared-block layout: a 32-byte header, little-endian `u32`
//! projector indices, then the row-major `m x m` coefficient matrix as `f64`.

use crate::error::{Result, SimError};
use crate::workload::cost::{block_length, BLOCK_HEADER_BYTES};

pub type BlockId = u32;

const MAGIC: u32 = 0x4e44_4654;

/// One atom's pseudopotential before packing.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoInfo {
    pub atom_id: u64,
    pub index_table: Vec<u32>,
    /// Row-major `m x m`.
    pub matrix: Vec<f64>,
}

impl PseudoInfo {
    /// Matrix order, or an error if the matrix is not square.
    pub fn order(&self) -> Result<u32> {
        let m = (self.matrix.len() as f64).sqrt() as usize;
        if m * m != self.matrix.len() {
            return Err(SimError::Data(format!(
                "atom {}: matrix of {} entries is not square",
                self.atom_id,
                self.matrix.len()
            )));
        }
        Ok(m as u32)
    }

    pub fn packed_len(&self) -> Result<u64> {
        Ok(block_length(self.index_table.len() as u64, self.order()? as u64))
    }

    pub fn pack(&self) -> Result<Vec<u8>> {
        let m = self.order()?;
        let mut out = Vec::with_capacity(self.packed_len()? as usize);
        out.extend_from_slice(&MAGIC.to_le_bytes());
        out.extend_from_slice(&m.to_le_bytes());
        out.extend_from_slice(&(self.index_table.len() as u32).to_le_bytes());
        out.extend_from_slice(&0u32.to_le_bytes());
        out.extend_from_slice(&self.atom_id.to_le_bytes());
        out.extend_from_slice(&0u64.to_le_bytes());
        debug_assert_eq!(out.len() as u64, BLOCK_HEADER_BYTES);
        for i in &self.index_table {
            out.extend_from_slice(&i.to_le_bytes());
        }
        for v in &self.matrix {
            out.extend_from_slice(&v.to_le_bytes());
        }
        Ok(out)
    }

    pub fn unpack(bytes: &[u8]) -> Result<PseudoInfo> {
        let bad = |what: &str| SimError::Data(format!("malformed shared block: {what}"));
        if bytes.len() < BLOCK_HEADER_BYTES as usize {
            return Err(bad("short header"));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        if u32_at(0) != MAGIC {
            return Err(bad("bad magic"));
        }
        let m = u32_at(4) as usize;
        let n_idx = u32_at(8) as usize;
        let atom_id = u64::from_le_bytes(bytes[16..24].try_into().unwrap());
        if bytes.len() as u64 != block_length(n_idx as u64, m as u64) {
            return Err(bad("length does not match header"));
        }
        let idx_start = BLOCK_HEADER_BYTES as usize;
        let mat_start = idx_start + 4 * n_idx;
        let index_table = (0..n_idx).map(|i| u32_at(idx_start + 4 * i)).collect();
        let matrix = bytes[mat_start..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(PseudoInfo {
            atom_id,
            index_table,
            matrix,
        })
    }
}

/// Handle to a block resident in its owner stack's shared memory.
#[derive(Debug, Clone, PartialEq)]
pub struct SharedBlock {
    pub block_id: BlockId,
    pub atom_id: u64,
    pub owner_stack: u32,
    pub address: u64,
    pub length: u64,
    /// Did not fit the owner's SPM and lives in the stack-local spill region.
    pub spilled: bool,
}
