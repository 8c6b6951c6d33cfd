//! NDP runtime: shared pseudopotential blocks in per-stack scratchpad memory,
//! a replicated block directory, and the inter-stack message layer in which
//! one arbiter per stack fetches each remote block at most once.

pub mod block;
pub mod footprint;
pub mod pseudo;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::machine::{MachineConfig, UnitRef};
use crate::workload::cost::{block_length, DIRECTORY_ENTRY_BYTES};

pub use block::{BlockId, PseudoInfo, SharedBlock};
pub use footprint::{footprint_model, footprint_pct, FootprintParams, GIB};
pub use pseudo::{blocked_layout, run_pseudopotential, FetchMessage, MemStats, PseudoOutcome, PseudoSetup};

/// How processes hold the pseudopotential data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PseudoMode {
    /// Every process keeps a private copy of every atom's block.
    PerProcessCopy,
    /// One packed copy per atom, owned by one stack and shared through the directory.
    SharedBlock,
}

impl PseudoMode {
    pub const ALL: [PseudoMode; 2] = [PseudoMode::PerProcessCopy, PseudoMode::SharedBlock];

    pub fn as_str(self) -> &'static str {
        match self {
            PseudoMode::PerProcessCopy => "PerProcessCopy",
            PseudoMode::SharedBlock => "SharedBlock",
        }
    }
}

impl std::fmt::Display for PseudoMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CommStats {
    pub intra_stack_bytes: u64,
    pub inter_stack_bytes: u64,
    pub inter_stack_messages: u64,
    pub requests_served_from_cache: u64,
}

impl CommStats {
    pub fn merge(&mut self, other: &CommStats) {
        self.intra_stack_bytes += other.intra_stack_bytes;
        self.inter_stack_bytes += other.inter_stack_bytes;
        self.inter_stack_messages += other.inter_stack_messages;
        self.requests_served_from_cache += other.requests_served_from_cache;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DirEntry {
    pub block_id: BlockId,
    pub owner_stack: u32,
    pub address: u64,
    pub length: u64,
}

/// Global atom -> block index; every stack holds the same read-only replica.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BlockDirectory {
    entries: BTreeMap<u64, DirEntry>,
}

impl BlockDirectory {
    pub fn lookup(&self, atom_id: u64) -> Option<DirEntry> {
        self.entries.get(&atom_id).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, DirEntry)> + '_ {
        self.entries.iter().map(|(a, e)| (*a, *e))
    }

    /// Bytes of one replica.
    pub fn replica_bytes(&self) -> u64 {
        self.entries.len() as u64 * DIRECTORY_ENTRY_BYTES as u64
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StackMemoryState {
    pub spm_used: u64,
    /// Bytes bump-allocated in the stack-local spill region.
    pub shared_region_used: u64,
    /// Remote blocks fetched by this stack's arbiter -> local address.
    pub remote_cache: BTreeMap<BlockId, u64>,
    /// Bytes occupied by cached remote copies.
    pub cache_bytes: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MessageKind {
    Read,
    Write,
    Broadcast,
}

/// One arbiter-to-arbiter transfer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Message {
    pub kind: MessageKind,
    pub block: BlockId,
    pub from_stack: u32,
    pub to_stack: u32,
    pub bytes: u64,
}

const API_ALLOC: &str = "NDFT_Alloc_Shared";
const API_READ: &str = "NDFT_Read";
const API_WRITE: &str = "NDFT_Write";
const API_READ_REMOTE: &str = "NDFT_Read_Remote";
const API_WRITE_REMOTE: &str = "NDFT_Write_Remote";
const API_BROADCAST: &str = "NDFT_Broadcast";

/// Runtime state of one simulation instance.
#[derive(Debug, Clone)]
pub struct NdpRuntime {
    total_stacks: u32,
    spm_capacity: u64,
    spill_capacity: u64,
    blocks: Vec<SharedBlock>,
    /// `None` for cost-only blocks, which read back as zeros.
    payloads: Vec<Option<Vec<u8>>>,
    stacks: Vec<StackMemoryState>,
    directory: BlockDirectory,
    stats: CommStats,
    messages: Vec<Message>,
    api_calls: BTreeMap<&'static str, u64>,
}

impl NdpRuntime {
    pub fn new(cfg: &MachineConfig) -> Self {
        let total_stacks = cfg.total_stacks();
        Self {
            total_stacks,
            spm_capacity: cfg.ndp.spm_per_stack_bytes,
            spill_capacity: cfg.stack_capacity(),
            blocks: Vec::new(),
            payloads: Vec::new(),
            stacks: vec![StackMemoryState::default(); total_stacks as usize],
            directory: BlockDirectory::default(),
            stats: CommStats::default(),
            messages: Vec::new(),
            api_calls: BTreeMap::new(),
        }
    }

    fn call(&mut self, api: &'static str) {
        *self.api_calls.entry(api).or_default() += 1;
    }

    /// Bump-allocates `len` bytes on `stack`: SPM first, spill region otherwise.
    fn allocate(&mut self, stack: u32, len: u64) -> Result<(u64, bool)> {
        let spm_capacity = self.spm_capacity;
        let spill_capacity = self.spill_capacity;
        let st = &mut self.stacks[stack as usize];
        if st.spm_used + len <= spm_capacity {
            let addr = st.spm_used;
            st.spm_used += len;
            return Ok((addr, false));
        }
        if st.shared_region_used + len > spill_capacity {
            return Err(SimError::Capacity(format!(
                "stack {stack} shared region exhausted: {} + {len} > {spill_capacity} bytes",
                st.shared_region_used
            )));
        }
        let addr = spm_capacity + st.shared_region_used;
        st.shared_region_used += len;
        Ok((addr, true))
    }

    fn register(&mut self, atom_id: u64, owner: UnitRef, length: u64, payload: Option<Vec<u8>>) -> Result<SharedBlock> {
        let owner_stack = match owner {
            UnitRef::Ndp { stack, .. } if stack < self.total_stacks => stack,
            UnitRef::Ndp { stack, .. } => {
                return Err(SimError::domain(format!("stack {stack} does not exist")))
            }
            UnitRef::Cpu => return Err(SimError::domain("shared blocks must be owned by an NDP unit")),
        };
        if self.directory.entries.contains_key(&atom_id) {
            return Err(SimError::domain(format!("atom {atom_id} already has a shared block")));
        }
        let (address, spilled) = self.allocate(owner_stack, length)?;
        let block = SharedBlock {
            block_id: self.blocks.len() as BlockId,
            atom_id,
            owner_stack,
            address,
            length,
            spilled,
        };
        self.directory.entries.insert(
            atom_id,
            DirEntry {
                block_id: block.block_id,
                owner_stack,
                address,
                length,
            },
        );
        self.blocks.push(block.clone());
        self.payloads.push(payload);
        self.call(API_ALLOC);
        log::trace!("{API_ALLOC} atom={atom_id} stack={owner_stack} addr={address} len={length} spilled={spilled}");
        Ok(block)
    }

    /// Packs `info` into the owner stack's shared memory and registers it.
    pub fn alloc_shared(&mut self, info: &PseudoInfo, owner: UnitRef) -> Result<SharedBlock> {
        if info.index_table.is_empty() || info.matrix.is_empty() {
            return Err(SimError::domain(format!(
                "atom {}: empty pseudopotential data",
                info.atom_id
            )));
        }
        let bytes = info.pack()?;
        self.register(info.atom_id, owner, bytes.len() as u64, Some(bytes))
    }

    /// Registers a block of the given shape without materializing its bytes.
    pub fn reserve_shared(&mut self, atom_id: u64, indices: u64, m: u64, owner: UnitRef) -> Result<SharedBlock> {
        if indices == 0 || m == 0 {
            return Err(SimError::domain(format!("atom {atom_id}: empty pseudopotential data")));
        }
        self.register(atom_id, owner, block_length(indices, m), None)
    }

    pub fn block(&self, id: BlockId) -> Result<&SharedBlock> {
        self.blocks.get(id as usize).ok_or(SimError::UnknownBlock(id))
    }

    fn check_range(b: &SharedBlock, offset: u64, len: u64) -> Result<()> {
        match offset.checked_add(len) {
            Some(end) if end <= b.length => Ok(()),
            _ => Err(SimError::Range {
                offset,
                len,
                length: b.length,
            }),
        }
    }

    fn caller_stack(&self, caller: UnitRef) -> Result<u32> {
        match caller.stack() {
            Some(s) if s < self.total_stacks => Ok(s),
            _ => Err(SimError::domain(format!("{caller} is not an NDP unit of this machine"))),
        }
    }

    /// Reads from a block resident on the caller's stack (owned or cached).
    pub fn read_local(&mut self, caller: UnitRef, id: BlockId, offset: u64, len: u64) -> Result<Vec<u8>> {
        let stack = self.caller_stack(caller)?;
        let b = self.block(id)?;
        Self::check_range(b, offset, len)?;
        if b.owner_stack != stack && !self.stacks[stack as usize].remote_cache.contains_key(&id) {
            return Err(SimError::Locality { block: id, stack });
        }
        let out = match &self.payloads[id as usize] {
            Some(p) => p[offset as usize..(offset + len) as usize].to_vec(),
            None => vec![0; len as usize],
        };
        self.stats.intra_stack_bytes += len;
        self.call(API_READ);
        log::trace!("{API_READ} block={id} stack={stack} offset={offset} len={len}");
        Ok(out)
    }

    /// Accounts a full-block local read without copying bytes out.
    pub fn touch_local(&mut self, caller: UnitRef, id: BlockId) -> Result<u64> {
        let stack = self.caller_stack(caller)?;
        let b = self.block(id)?;
        if b.owner_stack != stack && !self.stacks[stack as usize].remote_cache.contains_key(&id) {
            return Err(SimError::Locality { block: id, stack });
        }
        let len = b.length;
        self.stats.intra_stack_bytes += len;
        self.call(API_READ);
        Ok(len)
    }

    /// Writes into a block owned by the caller's stack; remote copies are invalidated.
    pub fn write_local(&mut self, caller: UnitRef, id: BlockId, offset: u64, payload: &[u8]) -> Result<()> {
        let stack = self.caller_stack(caller)?;
        let b = self.block(id)?;
        Self::check_range(b, offset, payload.len() as u64)?;
        if b.owner_stack != stack {
            return Err(SimError::Locality { block: id, stack });
        }
        self.store(id, offset, payload);
        self.stats.intra_stack_bytes += payload.len() as u64;
        self.call(API_WRITE);
        log::trace!("{API_WRITE} block={id} stack={stack} offset={offset} len={}", payload.len());
        Ok(())
    }

    fn store(&mut self, id: BlockId, offset: u64, payload: &[u8]) {
        if let Some(p) = &mut self.payloads[id as usize] {
            p[offset as usize..offset as usize + payload.len()].copy_from_slice(payload);
        }
        let owner = self.blocks[id as usize].owner_stack;
        for (s, st) in self.stacks.iter_mut().enumerate() {
            if s as u32 != owner {
                st.remote_cache.remove(&id);
            }
        }
    }

    fn send(&mut self, kind: MessageKind, block: BlockId, from_stack: u32, to_stack: u32, bytes: u64) {
        self.stats.inter_stack_bytes += bytes;
        self.stats.inter_stack_messages += 1;
        self.messages.push(Message {
            kind,
            block,
            from_stack,
            to_stack,
            bytes,
        });
    }

    fn cache_insert(&mut self, stack: u32, id: BlockId) -> Result<u64> {
        let len = self.blocks[id as usize].length;
        let (addr, _) = self.allocate(stack, len)?;
        let st = &mut self.stacks[stack as usize];
        st.remote_cache.insert(id, addr);
        st.cache_bytes += len;
        Ok(addr)
    }

    /// Resolves block `id`, owned by stack `dest`, for a requester on stack
    /// `source`. The first request per stack costs one arbiter message of the
    /// block's length; later requests are served from the local copy.
    /// Returns the block's address on the requester's stack.
    pub fn read_remote(&mut self, id: BlockId, source: u32, dest: u32) -> Result<u64> {
        let b = self.block(id)?.clone();
        if source >= self.total_stacks {
            return Err(SimError::domain(format!("stack {source} does not exist")));
        }
        if b.owner_stack != dest {
            return Err(SimError::Locality { block: id, stack: dest });
        }
        if source == dest {
            self.stats.intra_stack_bytes += b.length;
            self.call(API_READ);
            return Ok(b.address);
        }
        self.call(API_READ_REMOTE);
        if let Some(&addr) = self.stacks[source as usize].remote_cache.get(&id) {
            self.stats.requests_served_from_cache += 1;
            log::trace!("{API_READ_REMOTE} block={id} source={source} dest={dest} cached");
            return Ok(addr);
        }
        let addr = self.cache_insert(source, id)?;
        self.send(MessageKind::Read, id, dest, source, b.length);
        log::trace!("{API_READ_REMOTE} block={id} source={source} dest={dest} bytes={}", b.length);
        Ok(addr)
    }

    /// Writes `payload` at `offset` of block `id` on its owner stack `dest`
    /// from stack `source`, invalidating every cached copy.
    pub fn write_remote(&mut self, id: BlockId, source: u32, dest: u32, offset: u64, payload: &[u8]) -> Result<()> {
        let b = self.block(id)?.clone();
        Self::check_range(&b, offset, payload.len() as u64)?;
        if source >= self.total_stacks {
            return Err(SimError::domain(format!("stack {source} does not exist")));
        }
        if b.owner_stack != dest {
            return Err(SimError::Locality { block: id, stack: dest });
        }
        if source == dest {
            self.store(id, offset, payload);
            self.stats.intra_stack_bytes += payload.len() as u64;
            self.call(API_WRITE);
            return Ok(());
        }
        self.store(id, offset, payload);
        self.send(MessageKind::Write, id, source, dest, payload.len() as u64);
        self.call(API_WRITE_REMOTE);
        log::trace!("{API_WRITE_REMOTE} block={id} source={source} dest={dest} len={}", payload.len());
        Ok(())
    }

    /// Pushes block `id` to every stack that does not yet hold it.
    pub fn broadcast(&mut self, id: BlockId) -> Result<()> {
        let b = self.block(id)?.clone();
        self.call(API_BROADCAST);
        for s in 0..self.total_stacks {
            if s == b.owner_stack || self.stacks[s as usize].remote_cache.contains_key(&id) {
                continue;
            }
            self.cache_insert(s, id)?;
            self.send(MessageKind::Broadcast, id, b.owner_stack, s, b.length);
        }
        log::trace!("{API_BROADCAST} block={id} owner={}", b.owner_stack);
        Ok(())
    }

    pub fn directory(&self) -> &BlockDirectory {
        &self.directory
    }

    pub fn stats(&self) -> CommStats {
        self.stats
    }

    pub fn stack_state(&self, stack: u32) -> &StackMemoryState {
        &self.stacks[stack as usize]
    }

    pub fn blocks(&self) -> &[SharedBlock] {
        &self.blocks
    }

    pub fn messages(&self) -> &[Message] {
        &self.messages
    }

    /// Calls per message-API primitive, keyed by primitive name.
    pub fn api_calls(&self) -> &BTreeMap<&'static str, u64> {
        &self.api_calls
    }

    pub fn total_stacks(&self) -> u32 {
        self.total_stacks
    }
}
