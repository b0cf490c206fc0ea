//! AES-128 key-schedule forward expansion and inversion, plus a validation
//! scanner that locates secret bytes inside a register trace.
//!
//! The forward expansion is the oracle: inversion is checked against it, and
//! every expected value in the tests is generated through it rather than
//! entered by hand. Round indexing is 1-based (`Rcon[1] = 0x01`).

use crate::analysis::{merge_by_address, segment_boundaries, Confidence, Phase2Config, ReconstructionReport};
use crate::isa::{Mnemonic, Operand, Width};
use crate::trace::TraceDb;
use std::sync::LazyLock;
use thiserror::Error;

/// One 32-bit schedule word as four bytes in order.
pub type Word = [u8; 4];

/// Round constants, 1-based by round.
pub const RCON: [u8; 11] = [
    0x00, 0x01, 0x02, 0x04, 0x08, 0x10, 0x20, 0x40, 0x80, 0x1B, 0x36,
];

/// Byte-substitution table, generated from the GF(2^8) inverse plus the
/// affine transform rather than transcribed.
pub static SBOX: LazyLock<[u8; 256]> = LazyLock::new(|| {
    let mut sbox = [0u8; 256];
    let affine = |q: u8| -> u8 {
        q ^ q.rotate_left(1) ^ q.rotate_left(2) ^ q.rotate_left(3) ^ q.rotate_left(4) ^ 0x63
    };
    // Walk the multiplicative group with generator 3; q tracks 1/p.
    let mut p: u8 = 1;
    let mut q: u8 = 1;
    loop {
        p = p ^ (p << 1) ^ if p & 0x80 != 0 { 0x1B } else { 0 };
        q ^= q << 1;
        q ^= q << 2;
        q ^= q << 4;
        if q & 0x80 != 0 {
            q ^= 0x09;
        }
        sbox[p as usize] = affine(q);
        if p == 1 {
            break;
        }
    }
    sbox[0] = 0x63;
    sbox
});

fn xor(a: Word, b: Word) -> Word {
    [a[0] ^ b[0], a[1] ^ b[1], a[2] ^ b[2], a[3] ^ b[3]]
}

/// RotWord + SubWord + Rcon, the `g` step applied to the last word of each
/// round when deriving the next.
fn g(w: Word, rc: u8) -> Word {
    let s = &*SBOX;
    [
        s[w[1] as usize] ^ rc,
        s[w[2] as usize],
        s[w[3] as usize],
        s[w[0] as usize],
    ]
}

/// Forward key expansion: the 44 schedule words of AES-128.
pub fn expand_key(key: &[u8; 16]) -> [Word; 44] {
    let mut w = [[0u8; 4]; 44];
    for i in 0..4 {
        w[i] = [key[4 * i], key[4 * i + 1], key[4 * i + 2], key[4 * i + 3]];
    }
    for i in 4..44 {
        let t = if i % 4 == 0 {
            g(w[i - 1], RCON[i / 4])
        } else {
            w[i - 1]
        };
        w[i] = xor(w[i - 4], t);
    }
    w
}

/// Flat 176-byte schedule, convenient for fixtures and leak scanning.
pub fn expand_key_bytes(key: &[u8; 16]) -> [u8; 176] {
    let w = expand_key(key);
    let mut out = [0u8; 176];
    for (i, word) in w.iter().enumerate() {
        out[4 * i..4 * i + 4].copy_from_slice(word);
    }
    out
}

/// Invert one expansion round: given the four words of round `j`, return the
/// four words of round `j - 1`.
///
/// For word indexes not divisible by four the inverse is a plain XOR with the
/// preceding word; the first word of the block additionally undoes the
/// RotWord/SubWord/Rcon step.
pub fn invert_round(words: &[Word; 4], j: u8) -> [Word; 4] {
    let p1 = xor(words[1], words[0]);
    let p2 = xor(words[2], words[1]);
    let p3 = xor(words[3], words[2]);
    let p0 = xor(words[0], g(p3, RCON[j as usize]));
    [p0, p1, p2, p3]
}

/// A leaked round key plus the leaked master-key tail used as an integrity
/// witness.
#[derive(Debug, Clone, Copy)]
pub struct RoundKeyObservation {
    /// 1-based round index of `words`.
    pub round_index: u8,
    pub words: [Word; 4],
    /// Last four bytes of the master key (schedule word 3), when leaked.
    pub tail: Option<Word>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum KeyRecError {
    #[error("round index {0} outside 1..=10")]
    BadRound(u8),
    #[error("leaked master-key tail disagrees with the inverted schedule")]
    TailMismatch,
    #[error("forward expansion does not reproduce the observation")]
    ForwardCheck,
}

/// Invert the schedule from an observed round key down to the master key.
/// The result is only reported after forward expansion reproduces the
/// observation and the leaked tail (when present) matches.
pub fn recover_master_key(obs: &RoundKeyObservation) -> Result<[u8; 16], KeyRecError> {
    if obs.round_index == 0 || obs.round_index > 10 {
        return Err(KeyRecError::BadRound(obs.round_index));
    }
    let mut block = obs.words;
    for j in (1..=obs.round_index).rev() {
        block = invert_round(&block, j);
    }
    let mut key = [0u8; 16];
    for (i, w) in block.iter().enumerate() {
        key[4 * i..4 * i + 4].copy_from_slice(w);
    }
    let schedule = expand_key(&key);
    if let Some(tail) = obs.tail {
        if schedule[3] != tail {
            return Err(KeyRecError::TailMismatch);
        }
    }
    let base = 4 * obs.round_index as usize;
    if schedule[base..base + 4] != obs.words {
        return Err(KeyRecError::ForwardCheck);
    }
    Ok(key)
}

/// A register observed carrying consecutive secret bytes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LeakSite {
    pub dump_index: usize,
    pub reg: u8,
    /// Byte offset of the match inside the secret.
    pub secret_offset: usize,
    pub width: u8,
    /// True when the register shows the bytes in reverse of secret order,
    /// i.e. a little-endian word load.
    pub reversed: bool,
}

/// Report every dump register whose 16-bit value contains two consecutive
/// secret bytes, in either byte order. Validation aid: the secret is known
/// to the harness, never to the attack.
pub fn scan_leaks(trace: &TraceDb, secret: &[u8]) -> Vec<LeakSite> {
    let mut sites = Vec::new();
    if secret.len() < 2 {
        return sites;
    }
    for (di, dump) in trace.dumps.iter().enumerate() {
        for (reg, &value) in dump.r.iter().enumerate() {
            let lo = (value & 0xFF) as u8;
            let hi = (value >> 8 & 0xFF) as u8;
            for k in 0..secret.len() - 1 {
                // Little-endian load: earlier secret byte in the low half.
                if secret[k] == lo && secret[k + 1] == hi {
                    sites.push(LeakSite {
                        dump_index: di,
                        reg: reg as u8,
                        secret_offset: k,
                        width: 2,
                        reversed: true,
                    });
                }
                if secret[k] == hi && secret[k + 1] == lo {
                    sites.push(LeakSite {
                        dump_index: di,
                        reg: reg as u8,
                        secret_offset: k,
                        width: 2,
                        reversed: false,
                    });
                }
            }
        }
    }
    sites
}

pub fn key_to_hex(key: &[u8; 16]) -> String {
    key.iter().map(|b| format!("{:02x}", b)).collect()
}

/// Key-schedule evidence pulled from a trace by the attack itself: the
/// expansion loop, its leaking load sites, and the observed schedule words.
/// No ground truth is involved; everything comes from the reconstruction and
/// the dumps.
#[derive(Debug, Clone)]
pub struct ScheduleExtraction {
    /// Loop body bounds (first instruction, backward jump).
    pub loop_body: (u32, u32),
    /// The two decoded word stores writing each new schedule word.
    pub store_addrs: (u32, u32),
    /// The decoded byte-load sites that leak schedule bytes.
    pub byte_load_addrs: Vec<u32>,
    /// Schedule words observed per loop iteration, starting at word 4.
    pub words: Vec<Word>,
    /// Master-key tail (schedule word 3), read from the first iteration's
    /// byte loads.
    pub tail: Word,
}

/// Locate a key-expansion loop in the reconstruction: a backward jump whose
/// body contains byte loads through pointer registers and a pair of adjacent
/// word stores. Returns the observed schedule words and tail.
pub fn extract_schedule(
    trace: &TraceDb,
    report: &ReconstructionReport,
    cfg: &Phase2Config,
) -> Option<ScheduleExtraction> {
    let records = segment_boundaries(trace, cfg.start_addr).ok()?;
    let merged = merge_by_address(trace, &records, cfg);
    for ev in &merged {
        // Backward jump closes a loop.
        let Some(&target) = ev.next_pcs.iter().find(|pc| **pc < ev.addr) else {
            continue;
        };
        let body = target..=ev.addr;
        let decoded: Vec<_> = report
            .instructions
            .iter()
            .filter(|r| body.contains(&r.addr) && r.confidence == Confidence::Decoded)
            .collect();
        // The new-word stores: word MOV from a register into x(Rn), two of
        // them with adjacent displacements off one base register.
        let mut stores: Vec<(u32, crate::isa::Reg, crate::isa::Reg, i32)> = Vec::new();
        for r in &decoded {
            if let Some(f) = r.form {
                if f.mnemonic == Mnemonic::Mov && f.width == Width::Word {
                    if let (Some(Operand::Reg(s)), Some(Operand::Indexed { reg, offset })) =
                        (f.src, f.dst)
                    {
                        stores.push((r.addr, s, reg, offset));
                    }
                }
            }
        }
        stores.sort_by_key(|(_, _, _, off)| *off);
        let pair = stores.windows(2).find(|w| {
            let (_, _, base_a, off_a) = w[0];
            let (_, _, base_b, off_b) = w[1];
            base_a == base_b && off_b - off_a == 2
        });
        let Some(pair) = pair else { continue };
        let (st_lo, st_hi) = (pair[0], pair[1]);
        // The leaking byte loads.
        let mut byte_loads: Vec<(u32, crate::isa::Reg)> = Vec::new();
        for r in &decoded {
            if let Some(f) = r.form {
                if f.mnemonic == Mnemonic::Mov && f.width == Width::Byte {
                    if let (
                        Some(Operand::Indirect(_) | Operand::IndirectInc(_)),
                        Some(Operand::Reg(d)),
                    ) = (f.src, f.dst)
                    {
                        byte_loads.push((r.addr, d));
                    }
                }
            }
        }
        byte_loads.sort_by_key(|(a, _)| *a);
        if byte_loads.len() < 4 {
            continue;
        }
        // Walk the execution-ordered records collecting per-iteration values.
        let occ_values = |addr: u32, reg: crate::isa::Reg| -> Vec<u32> {
            records
                .iter()
                .filter(|rec| rec.complete && rec.addr == addr)
                .map(|rec| trace.dumps[rec.dump_after].r[reg.index()])
                .collect()
        };
        let lo_vals = occ_values(st_lo.0, st_lo.1);
        let hi_vals = occ_values(st_hi.0, st_hi.1);
        let n = lo_vals.len().min(hi_vals.len());
        if n == 0 {
            continue;
        }
        let mut words = Vec::with_capacity(n);
        for k in 0..n {
            let lo = lo_vals[k] & 0xFFFF;
            let hi = hi_vals[k] & 0xFFFF;
            words.push([
                (lo & 0xFF) as u8,
                (lo >> 8) as u8,
                (hi & 0xFF) as u8,
                (hi >> 8) as u8,
            ]);
        }
        // Tail: the first iteration's byte loads carry the last four bytes
        // of the master key, in address order.
        let mut tail = [0u8; 4];
        for (i, (addr, reg)) in byte_loads.iter().take(4).enumerate() {
            let vals = occ_values(*addr, *reg);
            tail[i] = (*vals.first()? & 0xFF) as u8;
        }
        return Some(ScheduleExtraction {
            loop_body: (target, ev.addr),
            store_addrs: (st_lo.0, st_hi.0),
            byte_load_addrs: byte_loads.iter().map(|(a, _)| *a).collect(),
            words,
            tail,
        });
    }
    None
}

/// Recover the master key from an extracted schedule: take the second round
/// key plus the leaked tail and invert.
pub fn recover_key_from_schedule(ex: &ScheduleExtraction) -> Result<[u8; 16], KeyRecError> {
    if ex.words.len() < 8 {
        return Err(KeyRecError::ForwardCheck);
    }
    let obs = RoundKeyObservation {
        round_index: 2,
        words: [ex.words[4], ex.words[5], ex.words[6], ex.words[7]],
        tail: Some(ex.tail),
    };
    recover_master_key(&obs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::RegisterDump;

    struct XorShift(u64);

    impl XorShift {
        fn next(&mut self) -> u64 {
            let mut x = self.0;
            x ^= x << 13;
            x ^= x >> 7;
            x ^= x << 17;
            self.0 = x;
            x
        }

        fn key(&mut self) -> [u8; 16] {
            let mut k = [0u8; 16];
            for c in k.chunks_mut(8) {
                c.copy_from_slice(&self.next().to_le_bytes());
            }
            k
        }
    }

    #[test]
    fn sbox_spot_values() {
        // Generator self-check against the defining property:
        // sbox(x) = affine(inverse(x)).
        assert_eq!(SBOX[0x00], 0x63);
        assert_eq!(SBOX[0x01], 0x7C);
        assert_eq!(SBOX[0x53], 0xED);
        assert_eq!(SBOX[0xFF], 0x16);
    }

    #[test]
    fn zero_key_inverts_to_zero_key() {
        let schedule = expand_key(&[0u8; 16]);
        let obs = RoundKeyObservation {
            round_index: 1,
            words: [schedule[4], schedule[5], schedule[6], schedule[7]],
            tail: Some(schedule[3]),
        };
        assert_eq!(recover_master_key(&obs).unwrap(), [0u8; 16]);
    }

    #[test]
    fn invert_of_forward_is_identity_per_round() {
        let mut rng = XorShift(0x1234_5678_9abc_def0);
        for _ in 0..1000 {
            let key = rng.key();
            let w = expand_key(&key);
            for j in 1..=10u8 {
                let block = [
                    w[4 * j as usize],
                    w[4 * j as usize + 1],
                    w[4 * j as usize + 2],
                    w[4 * j as usize + 3],
                ];
                let prev = invert_round(&block, j);
                assert_eq!(
                    prev,
                    [
                        w[4 * (j as usize - 1)],
                        w[4 * (j as usize - 1) + 1],
                        w[4 * (j as usize - 1) + 2],
                        w[4 * (j as usize - 1) + 3],
                    ]
                );
            }
        }
    }

    #[test]
    fn recovery_from_round_two() {
        let mut rng = XorShift(42);
        for _ in 0..100 {
            let key = rng.key();
            let w = expand_key(&key);
            let obs = RoundKeyObservation {
                round_index: 2,
                words: [w[8], w[9], w[10], w[11]],
                tail: None,
            };
            assert_eq!(recover_master_key(&obs).unwrap(), key);
        }
    }

    #[test]
    fn corrupted_observation_fails_integrity() {
        let key = *b"0123456789abcdef";
        let w = expand_key(&key);
        let mut words = [w[4], w[5], w[6], w[7]];
        words[2][1] ^= 0x40;
        let obs = RoundKeyObservation {
            round_index: 1,
            words,
            tail: Some(w[3]),
        };
        assert_eq!(recover_master_key(&obs), Err(KeyRecError::TailMismatch));
    }

    #[test]
    fn scan_finds_word_loads_and_ignores_absent_secrets() {
        let secret = [0x11u8, 0x22, 0x33, 0x44];
        let mut r = [0u32; 16];
        r[9] = 0x2211; // little-endian word load of secret[0..2]
        r[10] = 0x3344; // bytes in memory order across the register halves
        let db = TraceDb {
            image_id: String::new(),
            dumps: vec![RegisterDump {
                timer_count: 1,
                r,
                flags: 0,
            }],
            terminated: false,
        };
        let sites = scan_leaks(&db, &secret);
        assert!(sites
            .iter()
            .any(|s| s.reg == 9 && s.secret_offset == 0 && s.reversed));
        assert!(sites
            .iter()
            .any(|s| s.reg == 10 && s.secret_offset == 2 && !s.reversed));
        assert!(scan_leaks(&db, &[0xAA, 0xBB]).is_empty());
    }
}
