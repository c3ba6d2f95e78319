//! Where the bits of each codeword live: constellation slots (symbol,
//! level) for source and relay parity bits, quantizer bits for relay
//! information bits.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::ldpc::LdpcCode;
use crate::{Error, Result};

/// Bit position inside a block of symbols.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Slot {
    pub symbol: usize,
    pub level: usize,
}

/// Source codeword bits mapped onto constellation slots.
#[derive(Clone, Debug, PartialEq)]
pub struct SourceLayout {
    pub symbols: usize,
    pub levels: usize,
    /// `codes[c][pos]`
    pub codes: Vec<Vec<Slot>>,
    /// Inverse map, `owner[symbol * levels + level] = (code, pos)`.
    owner: Vec<(usize, usize)>,
}

impl SourceLayout {
    fn from_codes(symbols: usize, levels: usize, codes: Vec<Vec<Slot>>) -> Result<Self> {
        let mut owner = vec![(usize::MAX, 0); symbols * levels];
        for (c, slots) in codes.iter().enumerate() {
            for (p, s) in slots.iter().enumerate() {
                let idx = s.symbol * levels + s.level;
                if s.symbol >= symbols || s.level >= levels || owner[idx].0 != usize::MAX {
                    return Err(Error::InvalidParameter(format!("slot {s:?} out of range or used twice")));
                }
                owner[idx] = (c, p);
            }
        }
        if owner.iter().any(|o| o.0 == usize::MAX) {
            return Err(Error::InvalidParameter("source layout leaves slots unused".into()));
        }
        Ok(Self { symbols, levels, codes, owner })
    }

    /// Code `i` occupies level `i` of every symbol.
    pub fn per_level(symbols: usize, levels: usize) -> Self {
        let codes = (0..levels)
            .map(|level| (0..symbols).map(|symbol| Slot { symbol, level }).collect())
            .collect();
        Self::from_codes(symbols, levels, codes).expect("per-level layout is a bijection")
    }

    /// Equal-length codes whose bits are spread over all slots by a seeded
    /// random interleaver.
    pub fn interleaved(symbols: usize, levels: usize, num_codes: usize, seed: u64) -> Result<Self> {
        let total = symbols * levels;
        if num_codes == 0 || total % num_codes != 0 {
            return Err(Error::InvalidParameter(format!("{total} slots cannot be split into {num_codes} codes")));
        }
        let mut perm: Vec<usize> = (0..total).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let len = total / num_codes;
        let codes = perm
            .chunks(len)
            .map(|c| c.iter().map(|&b| Slot { symbol: b / levels, level: b % levels }).collect())
            .collect();
        Self::from_codes(symbols, levels, codes)
    }

    #[inline]
    pub fn owner(&self, symbol: usize, level: usize) -> (usize, usize) {
        self.owner[symbol * self.levels + level]
    }

    /// True when code `i` covers exactly level `i`.
    pub fn is_per_level(&self) -> bool {
        self.codes.len() == self.levels
            && self
                .codes
                .iter()
                .enumerate()
                .all(|(c, slots)| slots.iter().all(|s| s.level == c))
    }

    pub fn check_codes(&self, codes: &[LdpcCode]) -> Result<()> {
        if codes.len() != self.codes.len() {
            return Err(Error::LengthMismatch { what: "source codes", expected: self.codes.len(), got: codes.len() });
        }
        for (code, slots) in codes.iter().zip(&self.codes) {
            if code.n() != slots.len() {
                return Err(Error::LengthMismatch { what: "source code length", expected: slots.len(), got: code.n() });
            }
        }
        Ok(())
    }

    /// Labels of the block from the codewords.
    pub fn labels(&self, codewords: &[Vec<u8>]) -> Vec<usize> {
        let mut labels = vec![0usize; self.symbols];
        for (slots, cw) in self.codes.iter().zip(codewords) {
            for (s, &b) in slots.iter().zip(cw) {
                labels[s.symbol] |= ((b & 1) as usize) << s.level;
            }
        }
        labels
    }
}

/// Position of a relay codeword bit.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RelayBit {
    /// Information bit: quantizer bit `index` (`step * bits_per_step + j`).
    Tilde(usize),
    /// Parity bit transmitted in a relay symbol slot.
    Slot(Slot),
}

#[derive(Clone, Debug, PartialEq)]
pub struct RelayLayout {
    pub steps: usize,
    pub bits_per_step: usize,
    pub symbols: usize,
    pub levels: usize,
    pub codes: Vec<Vec<RelayBit>>,
    tilde_owner: Vec<(usize, usize)>,
    slot_owner: Vec<(usize, usize)>,
}

impl RelayLayout {
    fn from_codes(steps: usize, bits_per_step: usize, symbols: usize, levels: usize, codes: Vec<Vec<RelayBit>>) -> Result<Self> {
        let mut tilde_owner = vec![(usize::MAX, 0); steps * bits_per_step];
        let mut slot_owner = vec![(usize::MAX, 0); symbols * levels];
        for (c, bits) in codes.iter().enumerate() {
            for (p, b) in bits.iter().enumerate() {
                let target = match *b {
                    RelayBit::Tilde(i) => tilde_owner.get_mut(i),
                    RelayBit::Slot(s) if s.level < levels => slot_owner.get_mut(s.symbol * levels + s.level),
                    RelayBit::Slot(_) => None,
                };
                match target {
                    Some(o) if o.0 == usize::MAX => *o = (c, p),
                    _ => return Err(Error::InvalidParameter(format!("relay bit {b:?} out of range or used twice"))),
                }
            }
        }
        if tilde_owner.iter().chain(&slot_owner).any(|o| o.0 == usize::MAX) {
            return Err(Error::InvalidParameter("relay layout leaves bits unassigned".into()));
        }
        Ok(Self { steps, bits_per_step, symbols, levels, codes, tilde_owner, slot_owner })
    }

    /// One systematic code per quantizer bit position: code `r` takes bit
    /// `r` of every step as information and sends its parity on level `r`.
    pub fn per_level(codes: &[LdpcCode], steps: usize, bits_per_step: usize, levels: usize) -> Result<Self> {
        if codes.len() != bits_per_step || bits_per_step != levels {
            return Err(Error::InvalidParameter(format!(
                "{} relay codes for {bits_per_step} bits per step and {levels} levels",
                codes.len()
            )));
        }
        let mut out = Vec::with_capacity(codes.len());
        for (r, code) in codes.iter().enumerate() {
            if code.k() != steps || code.n() - code.k() != steps {
                return Err(Error::LengthMismatch { what: "relay code length", expected: 2 * steps, got: code.n() });
            }
            let mut bits = vec![RelayBit::Tilde(0); code.n()];
            for (t, &pos) in code.info_positions().iter().enumerate() {
                bits[pos] = RelayBit::Tilde(t * bits_per_step + r);
            }
            for (q, &pos) in code.parity_positions().iter().enumerate() {
                bits[pos] = RelayBit::Slot(Slot { symbol: q, level: r });
            }
            out.push(bits);
        }
        Self::from_codes(steps, bits_per_step, steps, levels, out)
    }

    /// The quantizer bits of a block, in step order, are cut into
    /// consecutive pieces, one per code; the parities are concatenated and
    /// mapped `levels` bits per symbol.
    pub fn concatenated(codes: &[LdpcCode], steps: usize, bits_per_step: usize, levels: usize) -> Result<Self> {
        let total_info: usize = codes.iter().map(LdpcCode::k).sum();
        let total_parity: usize = codes.iter().map(|c| c.n() - c.k()).sum();
        if total_info != steps * bits_per_step || total_parity % levels != 0 {
            return Err(Error::InvalidParameter(format!(
                "relay codes carry {total_info} information bits for {} quantizer bits",
                steps * bits_per_step
            )));
        }
        let symbols = total_parity / levels;
        let (mut next_info, mut next_parity) = (0, 0);
        let mut out = Vec::with_capacity(codes.len());
        for code in codes {
            let mut bits = vec![RelayBit::Tilde(0); code.n()];
            for &pos in code.info_positions() {
                bits[pos] = RelayBit::Tilde(next_info);
                next_info += 1;
            }
            for &pos in code.parity_positions() {
                bits[pos] = RelayBit::Slot(Slot { symbol: next_parity / levels, level: next_parity % levels });
                next_parity += 1;
            }
            out.push(bits);
        }
        Self::from_codes(steps, bits_per_step, symbols, levels, out)
    }

    #[inline]
    pub fn tilde_owner(&self, index: usize) -> (usize, usize) {
        self.tilde_owner[index]
    }

    #[inline]
    pub fn slot_owner(&self, symbol: usize, level: usize) -> (usize, usize) {
        self.slot_owner[symbol * self.levels + level]
    }

    /// Relay transmitter: encodes the quantizer bits and returns the labels
    /// of the relay symbols.
    pub fn encode(&self, codes: &[LdpcCode], tilde: &[u8]) -> Result<Vec<usize>> {
        if tilde.len() != self.steps * self.bits_per_step {
            return Err(Error::BitLength { expected: self.steps * self.bits_per_step, got: tilde.len() });
        }
        let mut labels = vec![0usize; self.symbols];
        for (code, bits) in codes.iter().zip(&self.codes) {
            let info: Vec<u8> = code
                .info_positions()
                .iter()
                .map(|&pos| match bits[pos] {
                    RelayBit::Tilde(i) => tilde[i],
                    RelayBit::Slot(_) => 0,
                })
                .collect();
            let cw = code.encode(&info)?;
            for (b, &v) in bits.iter().zip(&cw) {
                if let RelayBit::Slot(s) = *b {
                    labels[s.symbol] |= ((v & 1) as usize) << s.level;
                }
            }
        }
        Ok(labels)
    }
}
