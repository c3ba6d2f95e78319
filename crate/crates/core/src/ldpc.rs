//! Binary LDPC codes: construction, alist text format, systematic encoding
//! and a flooding sum-product decoder that can be stepped one iteration at a
//! time.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::math::{self, clamp_llr, LLR_CLAMP};
use crate::{Error, Result};

#[derive(Clone, Debug)]
pub struct LdpcCode {
    n: usize,
    k: usize,
    /// Bits of each check, in the order they were listed.
    check_bits: Vec<Vec<usize>>,
    /// Checks of each bit, in the order they were listed.
    bit_checks: Vec<Vec<usize>>,
    // Edge layout: edges are numbered check by check.
    check_start: Vec<usize>,
    edge_bit: Vec<usize>,
    bit_edge_start: Vec<usize>,
    bit_edge_list: Vec<usize>,
    info_positions: Vec<usize>,
    parity_positions: Vec<usize>,
    /// For each parity position, its dependence on the information bits,
    /// packed over `info_positions`.
    parity_masks: Vec<Vec<u64>>,
}

impl PartialEq for LdpcCode {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.check_bits == other.check_bits
    }
}

impl LdpcCode {
    /// Builds a code from the bit lists of each check. Fails if the checks
    /// are linearly dependent, since `k = n - checks` is assumed.
    pub fn from_checks(n: usize, checks: Vec<Vec<usize>>) -> Result<Self> {
        let m = checks.len();
        if m == 0 || m >= n {
            return Err(Error::InfeasibleCode(format!("{m} checks for length {n}")));
        }
        let mut bit_checks = vec![Vec::new(); n];
        for (c, bits) in checks.iter().enumerate() {
            for &b in bits {
                if b >= n {
                    return Err(Error::InfeasibleCode(format!("check {c} references bit {b} >= {n}")));
                }
                if bit_checks[b].contains(&c) {
                    return Err(Error::InfeasibleCode(format!("check {c} lists bit {b} twice")));
                }
                bit_checks[b].push(c);
            }
        }
        Self::assemble(n, checks, bit_checks)
    }

    fn assemble(n: usize, check_bits: Vec<Vec<usize>>, bit_checks: Vec<Vec<usize>>) -> Result<Self> {
        let m = check_bits.len();
        let (info_positions, parity_positions, parity_masks) = systematic_form(n, &check_bits)?;

        let mut check_start = Vec::with_capacity(m + 1);
        let mut edge_bit = Vec::new();
        check_start.push(0);
        for bits in &check_bits {
            edge_bit.extend_from_slice(bits);
            check_start.push(edge_bit.len());
        }
        let mut per_bit: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (e, &b) in edge_bit.iter().enumerate() {
            per_bit[b].push(e);
        }
        let mut bit_edge_start = Vec::with_capacity(n + 1);
        let mut bit_edge_list = Vec::with_capacity(edge_bit.len());
        bit_edge_start.push(0);
        for edges in per_bit {
            bit_edge_list.extend(edges);
            bit_edge_start.push(bit_edge_list.len());
        }
        Ok(Self {
            n,
            k: n - m,
            check_bits,
            bit_checks,
            check_start,
            edge_bit,
            bit_edge_start,
            bit_edge_list,
            info_positions,
            parity_positions,
            parity_masks,
        })
    }

    /// Pseudo-random regular code with the given column and row weights.
    pub fn gen_regular(n: usize, col_weight: usize, row_weight: usize, seed: u64) -> Result<Self> {
        if row_weight < 2 || col_weight == 0 || (n * col_weight) % row_weight != 0 {
            return Err(Error::InfeasibleCode(format!(
                "n={n}, column weight {col_weight}, row weight {row_weight}"
            )));
        }
        let m = n * col_weight / row_weight;
        if m >= n || col_weight > m || row_weight > n {
            return Err(Error::InfeasibleCode(format!("{m} checks for length {n}")));
        }
        Self::generate(n, vec![row_weight; m], col_weight, seed)
    }

    /// Pseudo-random code of length `n` and dimension `k` with constant
    /// column weight and row weights as equal as the counts allow.
    pub fn gen_column_regular(n: usize, k: usize, col_weight: usize, seed: u64) -> Result<Self> {
        if k == 0 || k >= n {
            return Err(Error::InfeasibleCode(format!("k={k} for length {n}")));
        }
        let m = n - k;
        if col_weight == 0 || col_weight > m || n * col_weight < 2 * m {
            return Err(Error::InfeasibleCode(format!(
                "column weight {col_weight} with {m} checks"
            )));
        }
        let sockets = n * col_weight;
        let caps = (0..m).map(|c| sockets / m + usize::from(c < sockets % m)).collect();
        Self::generate(n, caps, col_weight, seed)
    }

    fn generate(n: usize, caps: Vec<usize>, col_weight: usize, seed: u64) -> Result<Self> {
        const ATTEMPTS: u64 = 64;
        let mut last_err = Error::InfeasibleCode("no attempt made".into());
        for attempt in 0..ATTEMPTS {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ attempt.wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let Some(bit_checks) = place_edges(n, &caps, col_weight, &mut rng) else {
                last_err = Error::InfeasibleCode("edge placement failed".into());
                continue;
            };
            let mut check_bits = vec![Vec::new(); caps.len()];
            for (b, cs) in bit_checks.iter().enumerate() {
                for &c in cs {
                    check_bits[c].push(b);
                }
            }
            match Self::assemble(n, check_bits, bit_checks) {
                Ok(code) => return Ok(code),
                Err(e @ Error::RankDeficient { .. }) => last_err = e,
                Err(e) => return Err(e),
            }
        }
        Err(last_err)
    }

    /// Parses the alist text format.
    pub fn from_alist(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        let mut next = |what: &str| -> Result<(usize, Vec<usize>)> {
            let (no, line) = lines.next().ok_or_else(|| Error::AlistParse {
                line: text.lines().count() + 1,
                msg: format!("unexpected end of file, expected {what}"),
            })?;
            let nums = line
                .split_whitespace()
                .map(|t| {
                    t.parse::<usize>().map_err(|_| Error::AlistParse {
                        line: no,
                        msg: format!("invalid integer '{t}' in {what}"),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((no, nums))
        };
        let expect_len = |no: usize, v: &[usize], len: usize, what: &str| -> Result<()> {
            if v.len() != len {
                return Err(Error::AlistParse {
                    line: no,
                    msg: format!("{what}: expected {len} entries, found {}", v.len()),
                });
            }
            Ok(())
        };

        let (no, dims) = next("dimensions")?;
        expect_len(no, &dims, 2, "dimensions")?;
        let (n, m) = (dims[0], dims[1]);
        if n == 0 || m == 0 {
            return Err(Error::AlistParse { line: no, msg: "zero dimension".into() });
        }
        let (no, maxes) = next("maximum degrees")?;
        expect_len(no, &maxes, 2, "maximum degrees")?;
        let (no_cd, col_deg) = next("column degrees")?;
        expect_len(no_cd, &col_deg, n, "column degrees")?;
        let (no_rd, row_deg) = next("row degrees")?;
        expect_len(no_rd, &row_deg, m, "row degrees")?;
        if col_deg.iter().any(|&d| d > maxes[0]) {
            return Err(Error::AlistParse { line: no_cd, msg: "column degree exceeds declared maximum".into() });
        }
        if row_deg.iter().any(|&d| d > maxes[1]) {
            return Err(Error::AlistParse { line: no_rd, msg: "row degree exceeds declared maximum".into() });
        }

        let mut read_lists = |count: usize, degrees: &[usize], bound: usize, what: &str| -> Result<Vec<Vec<usize>>> {
            let mut out = Vec::with_capacity(count);
            for &deg in degrees.iter().take(count) {
                let (no, nums) = next(what)?;
                let entries: Vec<usize> = nums.iter().copied().filter(|&v| v != 0).collect();
                if entries.len() != deg {
                    return Err(Error::AlistParse {
                        line: no,
                        msg: format!("{what}: degree {deg} declared, {} entries listed", entries.len()),
                    });
                }
                if let Some(&bad) = entries.iter().find(|&&v| v > bound) {
                    return Err(Error::AlistParse { line: no, msg: format!("{what}: index {bad} out of range 1..={bound}") });
                }
                out.push(entries.into_iter().map(|v| v - 1).collect());
            }
            Ok(out)
        };
        let bit_checks = read_lists(n, &col_deg, m, "column list")?;
        let check_bits = read_lists(m, &row_deg, n, "row list")?;

        // the two incidence lists must describe the same matrix
        let mut a: Vec<(usize, usize)> = bit_checks
            .iter()
            .enumerate()
            .flat_map(|(b, cs)| cs.iter().map(move |&c| (c, b)))
            .collect();
        let mut b: Vec<(usize, usize)> = check_bits
            .iter()
            .enumerate()
            .flat_map(|(c, bs)| bs.iter().map(move |&b| (c, b)))
            .collect();
        a.sort_unstable();
        b.sort_unstable();
        if a != b {
            return Err(Error::AlistParse { line: no_rd, msg: "column and row lists disagree".into() });
        }
        if a.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::AlistParse { line: no_rd, msg: "duplicate incidence".into() });
        }
        if m >= n {
            return Err(Error::InfeasibleCode(format!("{m} checks for length {n}")));
        }
        Self::assemble(n, check_bits, bit_checks)
    }

    /// Writes the alist text format, zero-padding short lists.
    pub fn to_alist(&self) -> String {
        let m = self.check_bits.len();
        let max_col = self.bit_checks.iter().map(Vec::len).max().unwrap_or(0);
        let max_row = self.check_bits.iter().map(Vec::len).max().unwrap_or(0);
        let mut s = String::new();
        let join = |v: &mut dyn Iterator<Item = usize>| -> String {
            let parts: Vec<String> = v.map(|x| format!("{x}")).collect();
            parts.join(" ")
        };
        let _ = writeln!(s, "{} {}", self.n, m);
        let _ = writeln!(s, "{max_col} {max_row}");
        let _ = writeln!(s, "{}", join(&mut self.bit_checks.iter().map(Vec::len)));
        let _ = writeln!(s, "{}", join(&mut self.check_bits.iter().map(Vec::len)));
        for cs in &self.bit_checks {
            let mut it = cs.iter().map(|c| c + 1).chain(core::iter::repeat(0)).take(max_col);
            let _ = writeln!(s, "{}", join(&mut it));
        }
        for bs in &self.check_bits {
            let mut it = bs.iter().map(|b| b + 1).chain(core::iter::repeat(0)).take(max_row);
            let _ = writeln!(s, "{}", join(&mut it));
        }
        s
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn num_checks(&self) -> usize {
        self.check_bits.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edge_bit.len()
    }

    pub fn rate(&self) -> f64 {
        self.k as f64 / self.n as f64
    }

    pub fn check_bits(&self) -> &[Vec<usize>] {
        &self.check_bits
    }

    pub fn bit_checks(&self) -> &[Vec<usize>] {
        &self.bit_checks
    }

    /// Codeword positions carrying the information bits, ascending.
    pub fn info_positions(&self) -> &[usize] {
        &self.info_positions
    }

    /// Codeword positions carrying parity bits, ascending.
    pub fn parity_positions(&self) -> &[usize] {
        &self.parity_positions
    }

    /// Systematic encoding; `info[j]` lands at `info_positions()[j]`.
    pub fn encode(&self, info: &[u8]) -> Result<Vec<u8>> {
        if info.len() != self.k {
            return Err(Error::BitLength { expected: self.k, got: info.len() });
        }
        let mut packed = vec![0u64; self.k.div_ceil(64)];
        for (j, &b) in info.iter().enumerate() {
            if b & 1 == 1 {
                packed[j / 64] |= 1 << (j % 64);
            }
        }
        let mut cw = vec![0u8; self.n];
        for (&pos, &b) in self.info_positions.iter().zip(info) {
            cw[pos] = b & 1;
        }
        for (&pos, mask) in self.parity_positions.iter().zip(&self.parity_masks) {
            let ones: u32 = mask.iter().zip(&packed).map(|(a, b)| (a & b).count_ones()).sum();
            cw[pos] = (ones & 1) as u8;
        }
        Ok(cw)
    }

    /// Extracts the information bits from a codeword.
    pub fn extract_info(&self, codeword: &[u8]) -> Vec<u8> {
        self.info_positions.iter().map(|&p| codeword[p]).collect()
    }

    /// Number of unsatisfied checks.
    pub fn syndrome_weight(&self, bits: &[u8]) -> usize {
        self.check_bits
            .iter()
            .filter(|bs| bs.iter().fold(0u8, |acc, &b| acc ^ (bits[b] & 1)) == 1)
            .count()
    }

    pub fn is_codeword(&self, bits: &[u8]) -> bool {
        bits.len() == self.n && self.syndrome_weight(bits) == 0
    }

    /// One flooding iteration: every bit-to-check message is refreshed from
    /// `channel + prior + incoming`, then every check-to-bit message by the
    /// tanh rule. Writes the code extrinsic (sum of check-to-bit messages,
    /// excluding both the channel and the prior) into `out`.
    pub fn spa_step_into(
        &self,
        state: &mut DecoderState,
        channel: &[f64],
        prior: &[f64],
        out: &mut [f64],
    ) -> Result<()> {
        for (what, len) in [("channel LLRs", channel.len()), ("prior LLRs", prior.len()), ("output", out.len())] {
            if len != self.n {
                return Err(Error::LengthMismatch { what, expected: self.n, got: len });
            }
        }
        if state.c2v.len() != self.num_edges() {
            return Err(Error::LengthMismatch {
                what: "decoder state",
                expected: self.num_edges(),
                got: state.c2v.len(),
            });
        }
        for b in 0..self.n {
            let edges = &self.bit_edge_list[self.bit_edge_start[b]..self.bit_edge_start[b + 1]];
            let total = channel[b] + prior[b] + edges.iter().map(|&e| state.c2v[e]).sum::<f64>();
            for &e in edges {
                state.v2c[e] = clamp_llr(total - state.c2v[e]);
            }
        }
        let mut t = Vec::new();
        let mut suffix = Vec::new();
        for c in 0..self.num_checks() {
            let (lo, hi) = (self.check_start[c], self.check_start[c + 1]);
            t.clear();
            t.extend(state.v2c[lo..hi].iter().map(|&l| math::tanh(0.5 * l)));
            suffix.clear();
            suffix.resize(t.len() + 1, 1.0);
            for i in (0..t.len()).rev() {
                suffix[i] = suffix[i + 1] * t[i];
            }
            let mut prefix = 1.0;
            for (i, e) in (lo..hi).enumerate() {
                let p = prefix * suffix[i + 1];
                state.c2v[e] = clamp_llr(math::ln_1p(p) - math::ln_1p(-p));
                prefix *= t[i];
            }
        }
        for (b, o) in out.iter_mut().enumerate() {
            let edges = &self.bit_edge_list[self.bit_edge_start[b]..self.bit_edge_start[b + 1]];
            *o = edges.iter().map(|&e| state.c2v[e]).sum();
        }
        state.iterations += 1;
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("sum-product extrinsic"));
        }
        Ok(())
    }

    pub fn spa_step(&self, state: &mut DecoderState, channel: &[f64], prior: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.n];
        self.spa_step_into(state, channel, prior, &mut out)?;
        Ok(out)
    }

    /// Standalone decoding from channel LLRs. Stops as soon as the hard
    /// decisions satisfy every check and no posterior is exactly zero.
    pub fn decode(&self, channel: &[f64], max_iters: usize) -> Result<DecodeOutput> {
        let zeros = vec![0.0; self.n];
        self.decode_with_prior(channel, &zeros, max_iters)
    }

    /// As `decode`, with a fixed prior added to the channel LLRs.
    pub fn decode_with_prior(&self, channel: &[f64], prior: &[f64], max_iters: usize) -> Result<DecodeOutput> {
        let mut state = DecoderState::new(self);
        let mut ext = vec![0.0; self.n];
        let mut bits = vec![0u8; self.n];
        let max_iters = max_iters.max(1);
        for it in 1..=max_iters {
            self.spa_step_into(&mut state, channel, prior, &mut ext)?;
            let mut ambiguous = false;
            for b in 0..self.n {
                let post = channel[b] + prior[b] + ext[b];
                ambiguous |= post == 0.0;
                bits[b] = u8::from(post < 0.0);
            }
            if !ambiguous && self.syndrome_weight(&bits) == 0 {
                return Ok(DecodeOutput { bits, converged: true, iters: it });
            }
        }
        Ok(DecodeOutput { bits, converged: false, iters: max_iters })
    }
}

/// Hard decisions from a standalone decode.
#[derive(Clone, Debug, PartialEq)]
pub struct DecodeOutput {
    pub bits: Vec<u8>,
    pub converged: bool,
    pub iters: usize,
}

/// Edge messages of one sum-product decoder instance.
#[derive(Clone, Debug, PartialEq)]
pub struct DecoderState {
    v2c: Vec<f64>,
    c2v: Vec<f64>,
    pub iterations: usize,
}

impl DecoderState {
    pub fn new(code: &LdpcCode) -> Self {
        Self {
            v2c: vec![0.0; code.num_edges()],
            c2v: vec![0.0; code.num_edges()],
            iterations: 0,
        }
    }

    pub fn reset(&mut self) {
        self.v2c.iter_mut().for_each(|v| *v = 0.0);
        self.c2v.iter_mut().for_each(|v| *v = 0.0);
        self.iterations = 0;
    }

    pub fn max_abs_message(&self) -> f64 {
        self.c2v.iter().chain(&self.v2c).fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Gauss-Jordan elimination over GF(2), scanning columns from the last one
/// so that parity positions collect at the end of the codeword.
fn systematic_form(n: usize, checks: &[Vec<usize>]) -> Result<(Vec<usize>, Vec<usize>, Vec<Vec<u64>>)> {
    let m = checks.len();
    let words = n.div_ceil(64);
    let mut rows: Vec<Vec<u64>> = checks
        .iter()
        .map(|bits| {
            let mut r = vec![0u64; words];
            for &b in bits {
                r[b / 64] ^= 1 << (b % 64);
            }
            r
        })
        .collect();
    let mut pivot_col = Vec::with_capacity(m);
    let mut rank = 0;
    for col in (0..n).rev() {
        if rank == m {
            break;
        }
        let (w, bit) = (col / 64, 1u64 << (col % 64));
        let Some(p) = (rank..m).find(|&r| rows[r][w] & bit != 0) else {
            continue;
        };
        rows.swap(rank, p);
        let pivot = core::mem::take(&mut rows[rank]);
        for (r, row) in rows.iter_mut().enumerate() {
            if r != rank && row[w] & bit != 0 {
                for (a, b) in row.iter_mut().zip(&pivot) {
                    *a ^= b;
                }
            }
        }
        rows[rank] = pivot;
        pivot_col.push(col);
        rank += 1;
    }
    if rank < m {
        return Err(Error::RankDeficient { rank, checks: m });
    }
    let mut is_parity = vec![false; n];
    for &c in &pivot_col {
        is_parity[c] = true;
    }
    let info: Vec<usize> = (0..n).filter(|&c| !is_parity[c]).collect();
    let k = info.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_unstable_by_key(|&r| pivot_col[r]);
    let parity: Vec<usize> = order.iter().map(|&r| pivot_col[r]).collect();
    let masks = order
        .iter()
        .map(|&r| {
            let mut mask = vec![0u64; k.div_ceil(64)];
            for (j, &c) in info.iter().enumerate() {
                if rows[r][c / 64] >> (c % 64) & 1 == 1 {
                    mask[j / 64] |= 1 << (j % 64);
                }
            }
            mask
        })
        .collect();
    Ok((info, parity, masks))
}

/// Assigns `col_weight` distinct checks to every bit, drawing checks with
/// probability proportional to their remaining capacity and avoiding
/// length-4 cycles while alternatives exist.
fn place_edges(n: usize, caps: &[usize], col_weight: usize, rng: &mut ChaCha8Rng) -> Option<Vec<Vec<usize>>> {
    const TRIES: usize = 40;
    let m = caps.len();
    let mut remaining = caps.to_vec();
    let mut left: usize = remaining.iter().sum();
    let mut pairs: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut bit_checks = Vec::with_capacity(n);
    let draw = |remaining: &[usize], left: usize, rng: &mut ChaCha8Rng| -> usize {
        let mut t = rng.random_range(0..left);
        for (c, &r) in remaining.iter().enumerate() {
            if t < r {
                return c;
            }
            t -= r;
        }
        m - 1
    };
    for _ in 0..n {
        let mut chosen: Vec<usize> = Vec::with_capacity(col_weight);
        for _ in 0..col_weight {
            let distinct = remaining
                .iter()
                .enumerate()
                .filter(|&(c, &r)| r > 0 && !chosen.contains(&c))
                .count();
            if distinct == 0 {
                return None;
            }
            let mut pick = None;
            let mut fallback = None;
            for _ in 0..TRIES {
                let c = draw(&remaining, left, rng);
                if chosen.contains(&c) {
                    continue;
                }
                fallback.get_or_insert(c);
                let cycle = chosen.iter().any(|&o| pairs.contains(&(o.min(c), o.max(c))));
                if !cycle {
                    pick = Some(c);
                    break;
                }
            }
            let c = match pick.or(fallback) {
                Some(c) => c,
                None => remaining
                    .iter()
                    .enumerate()
                    .filter(|&(c, &r)| r > 0 && !chosen.contains(&c))
                    .max_by_key(|&(_, &r)| r)
                    .map(|(c, _)| c)?,
            };
            remaining[c] -= 1;
            left -= 1;
            chosen.push(c);
        }
        for i in 0..chosen.len() {
            for j in i + 1..chosen.len() {
                let (a, b) = (chosen[i].min(chosen[j]), chosen[i].max(chosen[j]));
                pairs.insert((a, b));
            }
        }
        chosen.sort_unstable();
        bit_checks.push(chosen);
    }
    Some(bit_checks)
}

/// LLR magnitude used for perfectly known bits.
pub const KNOWN_BIT_LLR: f64 = LLR_CLAMP;

/// Channel LLR for a known bit value.
#[inline]
pub fn known_bit_llr(bit: u8) -> f64 {
    if bit & 1 == 0 {
        KNOWN_BIT_LLR
    } else {
        -KNOWN_BIT_LLR
    }
}
